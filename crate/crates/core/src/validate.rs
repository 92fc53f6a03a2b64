//! Built-in invariant suites behind the `validate` subcommand.
//!
//! Every check produces a [`Check`] with the measured value and its tolerance.
//! Checks that document a known limitation rather than a guarantee carry
//! [`Status::Recorded`] and never fail the report.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amplitude::{
    commutator_kernel, summed_mode_overlap, AmplitudeMode, Geometry, Model, NumericKernel, SourceParams, OVERLAP_TOLERANCE,
};
use crate::correlation::{fill_grid, Axis};
use crate::error::Result;
use crate::output::summarize;
use crate::quadrature::{integrate_adaptive, integrate_oscillatory_with, integrate_pole_semiinfinite, OscillatoryMethod, QuadratureConfig};
use crate::scattering::{scattering_coefficients, square_barrier_transmission, BarrierProfile, Segment};

const I: C64 = C64::new(0.0, 1.0);

pub const DEFAULT_SEED: u64 = 0x7c0_ffee;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub passed: bool,
    pub runtime_seconds: f64,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    /// One line per check followed by a totals line.
    pub fn human_summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Recorded => "NOTE",
            };
            out.push_str(&format!(
                "{tag} {}/{}: {:.3e} (tol {:.1e}) {}\n",
                c.suite, c.name, c.value, c.tolerance, c.detail
            ));
        }
        let failed = self.failures().count();
        out.push_str(&format!(
            "{} checks, {} failed, seed {}, {:.1} s\n",
            self.checks.len(),
            failed,
            self.seed,
            self.runtime_seconds
        ));
        out
    }
}

/// Deliberate defects for exercising the report's failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flips the sign of the second term of the mode-sum cancellation identity.
    B1Sign,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    pub seed: Option<u64>,
    pub fault: Option<Fault>,
    /// Source and geometry for the model-level suites; defaults to
    /// `Omega = 20, Gamma = 0.05, z = 40`.
    pub source: Option<(SourceParams, Geometry)>,
}

struct Recorder {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    fn assert_below(&mut self, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        self.push(name, status, value, tolerance, detail.into());
    }

    fn record(&mut self, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        self.push(name, Status::Recorded, value, tolerance, detail.into());
    }

    fn error(&mut self, name: &str, err: crate::error::Error) {
        self.push(name, Status::Fail, f64::NAN, 0.0, format!("error: {err}"));
    }

    fn push(&mut self, name: &str, status: Status, value: f64, tolerance: f64, detail: String) {
        self.checks.push(Check {
            suite: self.suite.into(),
            name: name.into(),
            status,
            value,
            tolerance,
            detail,
        });
    }
}

/// A piecewise profile with 1 to 5 segments, lengths in `[0.05, 1.5]` and
/// cutoffs in `[0, 5]`.
pub fn random_profile<R: Rng>(rng: &mut R) -> BarrierProfile {
    let n = rng.gen_range(1..=5);
    let segments = (0..n)
        .map(|_| Segment {
            length: rng.gen_range(0.05..1.5),
            cutoff: rng.gen_range(0.0..5.0),
        })
        .collect();
    BarrierProfile::new(rng.gen_range(0.1..2.0), segments).expect("valid random profile")
}

/// The same profile seen from the other side.
pub fn mirrored(profile: &BarrierProfile) -> BarrierProfile {
    let segments = profile.segments().iter().rev().copied().collect();
    BarrierProfile::new(profile.a(), segments).expect("mirror of a valid profile")
}

/// `|T|^2 + |R|^2 - 1`, `|T - T'|` and the cancellation-identity residual at
/// one frequency; `T'` is the transmission of the mirrored profile.
pub fn scattering_residuals(profile: &BarrierProfile, kz: f64, fault: Option<Fault>) -> Result<[f64; 3]> {
    let k = C64::new(kz, 0.0);
    let c = scattering_coefficients(profile, k)?;
    let m = scattering_coefficients(&mirrored(profile), k)?;
    let b1 = match fault {
        None => c.b1_residual(profile),
        Some(Fault::B1Sign) => {
            c.t * c.r.conj() * (-2.0 * I * k * profile.a()).exp() - c.t.conj() * c.r_prime * (-2.0 * I * k * profile.b()).exp()
        }
    };
    Ok([c.unitarity_residual().abs(), (c.t - m.t).norm(), b1.norm()])
}

fn scattering_suite(rng: &mut ChaCha8Rng, fault: Option<Fault>) -> Vec<Check> {
    let mut rec = Recorder {
        suite: "scattering",
        checks: Vec::new(),
    };
    let mut worst = [0.0_f64; 3];
    for _ in 0..200 {
        let p = random_profile(rng);
        let kz = rng.gen_range(1e-3..=3.0 * p.max_cutoff().max(1.0));
        match scattering_residuals(&p, kz, fault) {
            Ok(r) => (0..3).for_each(|i| worst[i] = worst[i].max(r[i])),
            Err(e) => {
                rec.error("unitarity", e);
                return rec.checks;
            }
        }
    }
    rec.assert_below("unitarity", worst[0], 1e-10, "max | |T|^2 + |R|^2 - 1 | over 200 draws");
    rec.assert_below("reciprocity", worst[1], 1e-12, "max |T - T'| against the mirrored profile");
    rec.assert_below("B1 residual", worst[2], 1e-10, "max |T R* e^{-2ika} + T* R' e^{-2ikb}|");

    let (mut far, mut near) = (0.0_f64, 0.0_f64);
    for _ in 0..200 {
        let mu = rng.gen_range(0.5..5.0);
        let d = rng.gen_range(0.1..2.0);
        let sq = BarrierProfile::square(rng.gen_range(0.1..2.0), d, mu).expect("valid square barrier");
        let kz = if rng.gen_bool(0.2) {
            mu + rng.gen_range(-1e-3..1e-3)
        } else {
            rng.gen_range(1e-3..3.0 * mu)
        };
        let k = C64::new(kz, 0.0);
        let (Ok(c), Ok(t)) = (scattering_coefficients(&sq, k), square_barrier_transmission(mu, d, k)) else {
            rec.error("closed-form equivalence", crate::error::Error::Config(format!("square barrier failed at kz = {kz}")));
            return rec.checks;
        };
        let r = (c.t - t).norm() / t.norm();
        if (kz - mu).abs() < 1e-3 {
            near = near.max(r);
        } else {
            far = far.max(r);
        }
    }
    rec.assert_below("closed-form equivalence", far, 1e-10, "square barrier, |kz - mu| >= 1e-3");
    rec.assert_below("closed-form equivalence (series band)", near, 1e-6, "square barrier, |kz - mu| < 1e-3");

    let mut jump = 0.0_f64;
    for _ in 0..20 {
        let p = random_profile(rng);
        for mu in p.thresholds() {
            if mu <= 0.0 {
                continue;
            }
            let at = |x: f64| scattering_coefficients(&p, C64::new(x, 0.0)).map(|c| c.t);
            if let (Ok(lo), Ok(hi)) = (at(mu * (1.0 - 1e-9)), at(mu * (1.0 + 1e-9))) {
                jump = jump.max((lo - hi).norm());
            }
        }
    }
    rec.assert_below("branch continuity", jump, 1e-6, "|T(mu - 0) - T(mu + 0)| at every cutoff");
    rec.checks
}

type RealIntegrand = Box<dyn Fn(f64) -> C64 + Sync>;

/// An integral over `[a, b]` with a known value.
pub struct CorpusEntry {
    pub name: &'static str,
    pub f: RealIntegrand,
    pub a: f64,
    pub b: f64,
    pub exact: C64,
}

fn entry(name: &'static str, f: impl Fn(f64) -> C64 + Sync + 'static, a: f64, b: f64, exact: C64) -> CorpusEntry {
    CorpusEntry {
        name,
        f: Box::new(f),
        a,
        b,
        exact,
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Nineteen finite integrals with closed forms: smooth, kinked, endpoint
/// singular, sharply peaked, oscillatory and near-pole integrands.
pub fn quadrature_corpus() -> Vec<CorpusEntry> {
    let osc = |q: f64, a: f64, b: f64| ((I * q * b).exp() - (I * q * a).exp()) / (I * q);
    let x_osc = |q: f64, x: f64| (I * q * x).exp() * (x / (I * q) + 1.0 / (q * q));
    let damped = C64::new(-1.0, 10.0);
    let p1 = C64::new(1.0, -0.01);
    let p2 = C64::new(5.0, -0.5);
    let eps: f64 = 0.01;
    let gamma5 = {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=5 {
            term *= 20.0 / k as f64;
            sum += term;
        }
        120.0 * (1.0 - (-20.0_f64).exp() * sum)
    };
    vec![
        entry("x^2", |x| re(x * x), 0.0, 1.0, re(1.0 / 3.0)),
        entry("exp", |x| re(x.exp()), 0.0, 1.0, re(1f64.exp() - 1.0)),
        entry("cos", |x| re(x.cos()), 0.0, PI / 2.0, re(1.0)),
        entry("lorentzian", |x| re(1.0 / (1.0 + x * x)), 0.0, 1.0, re(PI / 4.0)),
        entry("sqrt", |x| re(x.sqrt()), 0.0, 1.0, re(2.0 / 3.0)),
        entry("log", |x| re(x.ln()), 0.0, 1.0, re(-1.0)),
        entry("power -0.3", |x| re(x.powf(-0.3)), 0.0, 1.0, re(1.0 / 0.7)),
        entry("e^{7ix}", |x| (I * 7.0 * x).exp(), 0.0, 3.0, osc(7.0, 0.0, 3.0)),
        entry("x e^{5ix}", |x| x * (I * 5.0 * x).exp(), 0.0, 2.0, x_osc(5.0, 2.0) - x_osc(5.0, 0.0)),
        entry("damped e^{10ix}", move |x| (damped * x).exp(), 0.0, 5.0, ((damped * 5.0).exp() - 1.0) / damped),
        entry("near pole", move |x| 1.0 / (x - p1), 0.0, 2.0, ((2.0 - p1) / -p1).ln()),
        entry("wide pole", move |x| 1.0 / (x - p2), 0.0, 10.0, ((10.0 - p2) / -p2).ln()),
        entry("kink", |x| re((x - 0.3).abs()), 0.0, 1.0, re(0.29)),
        entry("sin^2", |x| re(x.sin().powi(2)), 0.0, PI, re(PI / 2.0)),
        entry("(1+x)^-2", |x| re((1.0 + x).powi(-2)), 0.0, 10.0, re(1.0 - 1.0 / 11.0)),
        entry("cosh", |x| re(x.cosh()), -1.0, 1.0, re(2.0 * 1f64.sinh())),
        entry("x^5 e^-x", |x| re(x.powi(5) * (-x).exp()), 0.0, 20.0, re(gamma5)),
        entry("peak", move |x| re(1.0 / (x * x + eps * eps)), -1.0, 1.0, re(2.0 / eps * (1.0 / eps).atan())),
        entry("cos 50x", |x| re((50.0 * x).cos()), 0.0, 1.0, re(50f64.sin() / 50.0)),
    ]
}

/// `g(x) exp(iqx)` over `[a, b]` with `g` analytic: both oscillatory methods apply.
struct OscEntry {
    g: fn(C64) -> C64,
    q: f64,
    a: f64,
    b: f64,
    exact: C64,
}

fn oscillatory_corpus() -> Vec<OscEntry> {
    let osc = |q: f64, a: f64, b: f64| ((I * q * b).exp() - (I * q * a).exp()) / (I * q);
    let x_osc = |q: f64, x: f64| (I * q * x).exp() * (x / (I * q) + 1.0 / (q * q));
    let damped = C64::new(-1.0, 40.0);
    vec![
        OscEntry { g: |_| re(1.0), q: 7.0, a: 0.0, b: 3.0, exact: osc(7.0, 0.0, 3.0) },
        OscEntry { g: |x| x, q: 5.0, a: 0.0, b: 2.0, exact: x_osc(5.0, 2.0) - x_osc(5.0, 0.0) },
        OscEntry { g: |x| x, q: 60.0, a: 0.0, b: 2.0, exact: x_osc(60.0, 2.0) - x_osc(60.0, 0.0) },
        OscEntry { g: |x| (-x).exp(), q: 40.0, a: 0.0, b: 5.0, exact: ((damped * 5.0).exp() - 1.0) / damped },
        OscEntry { g: |_| re(1.0), q: 200.0, a: 1.0, b: 4.0, exact: osc(200.0, 1.0, 4.0) },
    ]
}

fn quadrature_suite() -> Vec<Check> {
    let mut rec = Recorder {
        suite: "quadrature",
        checks: Vec::new(),
    };
    let cfg = QuadratureConfig::default();
    let corpus = quadrature_corpus();
    let floor = |v: C64| 4.0 * f64::EPSILON * v.norm();

    let mut honest = 0usize;
    let mut dishonest = Vec::new();
    for e in &corpus {
        let r = integrate_adaptive(&*e.f, e.a, e.b, &[], &cfg);
        if (r.value - e.exact).norm() <= 10.0 * r.error_estimate + floor(e.exact) {
            honest += 1;
        } else {
            dishonest.push(e.name);
        }
    }
    // The closed-form pole integral of the semi-infinite integrator, truncated at its cut.
    let pole = C64::new(1.0, -0.05);
    let cut = cfg.omega_cut(pole.re, -2.0 * pole.im);
    match integrate_pole_semiinfinite(&|_| re(1.0), pole, 0.0, &cfg) {
        Ok(r) => {
            let exact = ((cut - pole) / -pole).ln();
            if (r.value - exact).norm() <= 10.0 * r.error_estimate + floor(exact) {
                honest += 1;
            } else {
                dishonest.push("pole on [0, cut]");
            }
        }
        Err(e) => {
            rec.error("error-estimate honesty", e);
            return rec.checks;
        }
    }
    let total = corpus.len() + 1;
    let frac = honest as f64 / total as f64;
    rec.assert_below(
        "error-estimate honesty",
        1.0 - frac,
        0.05,
        format!("{honest}/{total} with true error <= 10 x estimate; misses: {dishonest:?}"),
    );

    let mut worst = 0.0_f64;
    for e in oscillatory_corpus() {
        let f = move |x: C64| (e.g)(x);
        let run = |m| integrate_oscillatory_with(&f, e.a, e.b, e.q, &[], &cfg, m);
        match (run(OscillatoryMethod::Direct), run(OscillatoryMethod::Rotated)) {
            (Ok(d), Ok(r)) => {
                let slack = d.error_estimate + r.error_estimate + floor(e.exact);
                worst = worst.max((d.value - r.value).norm() / slack);
                worst = worst.max((r.value - e.exact).norm() / (10.0 * r.error_estimate + floor(e.exact)));
            }
            (Err(err), _) | (_, Err(err)) => {
                rec.error("method equivalence", err);
                return rec.checks;
            }
        }
    }
    rec.assert_below("method equivalence", worst, 1.0, "|direct - rotated| / combined error estimate");

    let mut increases = Vec::new();
    for e in &corpus {
        // Rounding in the sum scales with the integral of |f|, not with |value|.
        let abs_f = |x: f64| re((e.f)(x).norm());
        let roundoff = 64.0 * f64::EPSILON * integrate_adaptive(&abs_f, e.a, e.b, &[], &cfg).value.re;
        let mut prev = f64::INFINITY;
        for rel_tol in [1e-4, 1e-6, 1e-8, 1e-10] {
            let c = QuadratureConfig { rel_tol, ..cfg };
            let err = (integrate_adaptive(&*e.f, e.a, e.b, &[], &c).value - e.exact).norm();
            if err > prev.max(roundoff) {
                increases.push(e.name);
            }
            prev = err;
        }
    }
    rec.assert_below(
        "tolerance monotonicity",
        increases.len() as f64,
        0.0,
        format!("integrals whose true error grew on tightening: {increases:?}"),
    );
    rec.checks
}

fn default_source() -> (SourceParams, Geometry) {
    (SourceParams::new(20.0, 0.05, 1.0).expect("valid source"), Geometry { z: 40.0 })
}

/// An opaque square barrier for the given source: `mu = 5 Omega`, unit width, starting at `a = 1`.
fn opaque_profile(src: &SourceParams) -> Result<BarrierProfile> {
    BarrierProfile::square(1.0, 1.0, 5.0 * src.omega)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

fn amplitude_suite(rng: &mut ChaCha8Rng, src: &SourceParams, geo: Geometry) -> Vec<Check> {
    let mut rec = Recorder {
        suite: "ww-amplitude",
        checks: Vec::new(),
    };
    if let Err(e) = amplitude_checks(&mut rec, rng, src, geo) {
        rec.error("setup", e);
    }
    rec.checks
}

fn amplitude_checks(rec: &mut Recorder, rng: &mut ChaCha8Rng, src: &SourceParams, geo: Geometry) -> Result<()> {
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let p = random_profile(rng);
        let z = p.b() + rng.gen_range(0.5..20.0);
        let kz = rng.gen_range(1e-2..3.0 * p.max_cutoff().max(1.0));
        worst = worst.max(summed_mode_overlap(kz, z, &p)?.residual());
    }
    rec.assert_below("mode overlap", worst, OVERLAP_TOLERANCE, "direct vs reduced summed mode product, 50 draws");

    let z = geo.z;
    let free = Model::new(*src, geo, BarrierProfile::free(1.0)?)?;
    let om = src.omega;
    // Well inside the cone: t - t1 - z = 20 for t1 = 1.
    let t_in = z + 21.0;

    let kernel = NumericKernel::new(&free)?;
    let num = kernel.commutator(t_in, 1.0)?;
    let closed = commutator_kernel(&free, t_in, 1.0, AmplitudeMode::NoBarrierClosed)?;
    rec.assert_below(
        "numeric kernel vs closed form",
        rel(num.value, closed),
        1e-3,
        format!("free kernel at t - t1 - z = {:.1}", t_in - 1.0 - z),
    );

    let mut identity = 0.0_f64;
    for _ in 0..3 {
        let t = z + rng.gen_range(30.0..60.0) / om;
        let prod = kernel.product(t)?;
        let comm = kernel.commutator(t, 0.0)?;
        let slack = prod.error_estimate + comm.error_estimate + 1e-15 * prod.value.norm();
        identity = identity.max((prod.value + comm.value).norm() / slack);
    }
    rec.assert_below("commutator-product identity", identity, 1.0, "|K + C| / combined error estimate");

    let peak = closed.norm();
    let mut outside = 0.0_f64;
    let mut outside_numeric = 0.0_f64;
    for k in 0..8 {
        let u = 10.0 / om + k as f64 * 0.5;
        let (t, t1) = (t_in, t_in - z + u);
        outside = outside.max(commutator_kernel(&free, t, t1, AmplitudeMode::NoBarrierClosed)?.norm() / peak);
        outside_numeric = outside_numeric.max(kernel.commutator(t, t1)?.value.norm() / peak);
    }
    rec.assert_below("support (closed)", outside, 1e-3, "|C| / peak for t - t1 < z - 10/Omega");
    rec.record(
        "support (numeric)",
        outside_numeric,
        1e-3,
        "algebraic 1/(Omega u) endpoint tail of the positive-frequency field; not asserted",
    );

    let field = crate::spectral::SpectralField::build(&free, t_in + 10.0)?;
    let t2 = t_in;
    let base = field.m_amplitude(om, t2 + 1.0, t2);
    let mut drift = 0.0_f64;
    for dt in [2.0, 5.0, 9.0] {
        drift = drift.max((field.m_amplitude(om, t2 + dt, t2) - base).norm() / base.norm());
    }
    rec.assert_below("t1-independence", drift, 1e-12, "M(t1, t2) for t1 > t2");

    let barrier = Model::new(*src, geo, opaque_profile(src)?)?;
    let tp = barrier.opaque_factor()?;
    let narrow = QuadratureConfig {
        cut_widths: 100.0,
        ..barrier.quadrature
    };
    let reduced = Model::new(*src, Geometry { z: barrier.reduced_distance() }, BarrierProfile::free(1.0)?)?;
    let kb = NumericKernel::new(&barrier.clone().with_quadrature(narrow)?)?;
    let kf = NumericKernel::new(&reduced.clone().with_quadrature(narrow)?)?;
    let mut fact = 0.0_f64;
    for (t, t1) in [(t_in, 1.0), (t_in + 10.0, 10.0)] {
        let (b, f) = (kb.terms(t, t1)?, kf.terms(t, t1)?);
        fact = fact.max(rel(b.i[1], tp * f.i[1])).max(rel(b.kernel(), tp * f.kernel()));
    }
    rec.assert_below(
        "opaque factorization (band below barrier top)",
        fact,
        5e-2,
        "pole term and total kernel vs T(p) times the free kernel at z - D, band Omega + 100 Gamma",
    );
    let kb = NumericKernel::new(&barrier)?;
    let kf = NumericKernel::new(&reduced)?;
    let (b, f) = (kb.terms(t_in, 1.0)?, kf.terms(t_in, 1.0)?);
    let all = (0..4).map(|j| rel(b.i[j], tp * f.i[j])).fold(0.0, f64::max);
    rec.record(
        "opaque factorization (default band)",
        all,
        5e-2,
        "above-barrier frequencies inside Omega + 2000 Gamma dominate; not asserted",
    );
    Ok(())
}

/// Axes of `2 half + 1` points with step `10/Omega`, the `t2` axis centred on the line `t2 = t1 + l`.
fn grid_axes(model: &Model, l: f64, half: usize) -> Result<(Axis, Axis, f64)> {
    let h = 10.0 / model.source.omega;
    let n = 2 * half;
    let t1_min = model.geometry.z + model.light_cone_margin / model.source.omega;
    let shift = ((l / h).round() - half as f64) * h;
    let t1 = Axis::new(t1_min, t1_min + n as f64 * h, h)?;
    let t2 = Axis::new(t1_min + shift, t1_min + shift + n as f64 * h, h)?;
    Ok((t1, t2, h))
}

/// `(Gamma * clock_tunneling_time, |T|^2, delay / z)` of a closed-mode run.
fn dimensionless_summary(model: &Model, mode: AmplitudeMode, l: f64) -> Result<[f64; 3]> {
    let (t1, t2, h) = grid_axes(model, l, 20)?;
    let grid = fill_grid(model, &t1, &t2, mode)?;
    let s = summarize(model, &grid, h);
    let missing = || crate::error::Error::Config(format!("incomplete summary: {:?}", s.errors));
    Ok([
        model.source.gamma * s.clock_tunneling_time.ok_or_else(missing)?,
        s.transmission_mod2.ok_or_else(missing)?,
        s.delay.ok_or_else(missing)? / model.geometry.z,
    ])
}

fn rescaled(model: &Model, s: f64) -> Result<Model> {
    let src = SourceParams::new(model.source.omega * s, model.source.gamma * s, model.source.norm)?;
    Model::new(src, Geometry { z: model.geometry.z / s }, model.profile.rescaled(s)?)?.with_margin(model.light_cone_margin)
}

fn correlation_suite(src: &SourceParams, geo: Geometry) -> Vec<Check> {
    let mut rec = Recorder {
        suite: "correlation",
        checks: Vec::new(),
    };
    if let Err(e) = correlation_checks(&mut rec, src, geo) {
        rec.error("setup", e);
    }
    rec.checks
}

fn closed_grid_checks(rec: &mut Recorder, model: &Model, mode: AmplitudeMode, l: f64, label: &str) -> Result<()> {
    let (t1, t2, h) = grid_axes(model, l, 40)?;
    let grid = fill_grid(model, &t1, &t2, mode)?;
    let (n1, n2) = (grid.t1_axis.len(), grid.t2_axis.len());

    let w_max = grid.w_values.iter().copied().fold(0.0, f64::max);
    let w_min = grid.w_values.iter().copied().fold(0.0, f64::min);
    rec.assert_below(&format!("nonnegativity ({label})"), -w_min / w_max, 1e-9, "-min w / max w");

    let p_max = grid.p_values.iter().copied().fold(0.0, f64::max);
    let mut drop = 0.0_f64;
    for i in 0..n1 {
        for j in 0..n2 {
            if i + 1 < n1 {
                drop = drop.max(grid.p(i, j) - grid.p(i + 1, j));
            }
            if j + 1 < n2 {
                drop = drop.max(grid.p(i, j) - grid.p(i, j + 1));
            }
        }
    }
    rec.assert_below(&format!("monotonicity ({label})"), drop / p_max, 1e-12, "largest decrease of p along an axis / max p");

    let total = grid.total_weight();
    let corner = grid.corner_weight();
    rec.assert_below(
        &format!("total weight ({label})"),
        ((total - corner) / corner).abs(),
        2e-2,
        "trapezoid integral of w vs p increment over the grid",
    );

    let line = crate::correlation::extract_delta_line(&grid, h)?;
    rec.assert_below(&format!("delay ({label})"), (line.delay - l).abs(), h, format!("delay {:.6} vs {l}", line.delay));
    let gamma = model.source.gamma;
    let scaled: Vec<f64> = line.weight_profile.iter().map(|&(t, w)| w * (gamma * t).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let spread = scaled.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max);
    rec.assert_below(&format!("factorization ({label})"), spread, 1e-2, "line weight times exp(Gamma t1), relative spread");
    Ok(())
}

fn correlation_checks(rec: &mut Recorder, src: &SourceParams, geo: Geometry) -> Result<()> {
    let free = Model::new(*src, geo, BarrierProfile::free(1.0)?)?;
    let barrier = Model::new(*src, geo, opaque_profile(src)?)?;
    let cases = [
        (&free, AmplitudeMode::NoBarrierClosed, geo.z, "no barrier"),
        (&barrier, AmplitudeMode::OpaqueAsymptotic, barrier.reduced_distance(), "opaque"),
    ];
    for &(m, mode, l, label) in &cases {
        closed_grid_checks(rec, m, mode, l, label)?;
    }

    let s = 3.0;
    let mut worst = 0.0_f64;
    for &(m, mode, l, _) in &cases {
        let a = dimensionless_summary(m, mode, l)?;
        let b = dimensionless_summary(&rescaled(m, s)?, mode, l / s)?;
        for k in 0..3 {
            worst = worst.max((a[k] - b[k]).abs() / (a[k].abs().max(b[k].abs()) + 1e-300));
        }
    }
    rec.assert_below("scale invariance (closed)", worst, 1e-6, "Gamma clock time, |T|^2, delay/z under s = 3");

    let (t1, t2, _) = grid_axes(&free, geo.z, 5)?;
    let grid = fill_grid(&free, &t1, &t2, AmplitudeMode::Numeric)?;
    let reference = grid.p_reference.as_ref().expect("free profile has a closed form");
    let dev = grid
        .p_values
        .iter()
        .zip(reference)
        .map(|(p, r)| ((p - r) / r).abs())
        .fold(0.0, f64::max);
    rec.assert_below("numeric p vs closed form", dev, 1e-2, "11 x 11 grid around the line, no barrier");
    let p_max = grid.p_values.iter().copied().fold(0.0, f64::max);
    let n2 = grid.t2_axis.len();
    let drop = grid
        .p_values
        .windows(2)
        .enumerate()
        .filter(|(k, _)| (k + 1) % n2 != 0)
        .map(|(_, w)| w[0] - w[1])
        .fold(0.0, f64::max);
    rec.record("monotonicity (numeric)", drop / p_max, 1e-12, "largest decrease of p along t2 / max p; not asserted");
    Ok(())
}

/// Runs every suite. Fails only on an invalid source; check failures are report content.
pub fn run(opts: &ValidateOptions) -> Result<Report> {
    let start = Instant::now();
    let (src, geo) = opts.source.unwrap_or_else(default_source);
    src.validate()?;
    Model::new(src, geo, opaque_profile(&src)?)?;
    let seed = opts.seed.unwrap_or(DEFAULT_SEED);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = scattering_suite(&mut rng, opts.fault);
    checks.extend(quadrature_suite());
    checks.extend(amplitude_suite(&mut rng, &src, geo));
    checks.extend(correlation_suite(&src, geo));
    let passed = checks.iter().all(|c| c.status != Status::Fail);
    Ok(Report {
        seed,
        passed,
        runtime_seconds: start.elapsed().as_secs_f64(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_run_passes() {
        let report = run(&ValidateOptions::default()).unwrap();
        print!("{}", report.human_summary());
        assert!(report.passed);
    }

    #[test]
    fn b1_fault_is_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let checks = scattering_suite(&mut rng, Some(Fault::B1Sign));
        let failed: Vec<&str> = checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, ["B1 residual"]);
    }

    #[test]
    fn quadrature_corpus_values() {
        for e in quadrature_corpus() {
            let r = integrate_adaptive(&*e.f, e.a, e.b, &[], &QuadratureConfig::default());
            assert!((r.value - e.exact).norm() <= 1e-7 * e.exact.norm().max(1.0), "{}", e.name);
        }
    }

    #[test]
    fn invalid_source_is_rejected_up_front() {
        let bad = SourceParams { omega: 1.0, gamma: 2.0, norm: 1.0 };
        let opts = ValidateOptions {
            source: Some((bad, Geometry { z: 40.0 })),
            ..Default::default()
        };
        assert!(run(&opts).unwrap_err().is_config_error());
    }
}
