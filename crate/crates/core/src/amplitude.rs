//! Wigner-Weisskopf amplitudes for a two-level source radiating through a barrier.
//!
//! The source sits at the origin, the barrier occupies `[a, b]` and the detector
//! sits at `z > b`. With the exponential ansatz `c(t) = exp(-Gamma t / 2)` the
//! photon field seen by the detector is
//!
//! `K(t) = (1/8pi^2) int_0^inf dw G(w) (exp(-iwt) - exp(-ipt)) / (w - p)`,
//!
//! with `p = Omega - i Gamma/2` and the spectral weight `G(w) = 2 Re F(w)`, where
//! `F(w) = int_0^w RT(x) exp(ix(z - D)) dx` and `RT` is the reduced transmission.
//! Everything downstream (the commutator kernel, the detector amplitude `M`) is a
//! linear functional of `K`.
//!
//! Three evaluation modes are offered. `NoBarrierClosed` and `OpaqueAsymptotic`
//! use the leading-order closed forms, `Numeric` evaluates the integrals.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, IntegralResult, QuadratureConfig};
use crate::scattering::{self, BarrierProfile, DEFAULT_OPACITY_THRESHOLD};

const I: C64 = C64::new(0.0, 1.0);

/// Default light-cone margin: evaluations need `(t - z) * Omega >= 20`.
pub const DEFAULT_LIGHT_CONE_MARGIN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    pub omega: f64,
    pub gamma: f64,
    #[serde(default = "default_norm")]
    pub norm: f64,
}

fn default_norm() -> f64 {
    1.0
}

impl SourceParams {
    pub fn new(omega: f64, gamma: f64, norm: f64) -> Result<Self> {
        let s = Self { omega, gamma, norm };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega", self.omega), ("gamma", self.gamma), ("norm", self.norm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    match name {
                        "omega" => "source.omega",
                        "gamma" => "source.gamma",
                        _ => "source.norm",
                    },
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if self.gamma >= self.omega {
            return Err(Error::invalid(
                "source.gamma",
                format!("need gamma < omega, got gamma = {} >= omega = {}", self.gamma, self.omega),
            ));
        }
        Ok(())
    }

    /// `Omega - i Gamma / 2`.
    pub fn pole(&self) -> C64 {
        C64::new(self.omega, -0.5 * self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmplitudeMode {
    #[serde(rename = "closed")]
    NoBarrierClosed,
    #[serde(rename = "opaque")]
    OpaqueAsymptotic,
    #[serde(rename = "numeric")]
    Numeric,
}

impl std::str::FromStr for AmplitudeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(Self::NoBarrierClosed),
            "opaque" => Ok(Self::OpaqueAsymptotic),
            "numeric" => Ok(Self::Numeric),
            other => Err(Error::invalid("mode", format!("unknown mode `{other}` (closed|opaque|numeric)"))),
        }
    }
}

impl std::fmt::Display for AmplitudeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NoBarrierClosed => "closed",
            Self::OpaqueAsymptotic => "opaque",
            Self::Numeric => "numeric",
        })
    }
}

/// Incidence direction `s` of a longitudinal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Incident from the left (`v_+`).
    Plus,
    /// Incident from the right (`v_-`).
    Minus,
}

/// How closed modes render the step functions of the leading-order formulas.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    #[default]
    Sharp,
    /// Logistic step `1 / (1 + exp(-x / width))`.
    Logistic { width: f64 },
}

impl Smoothing {
    /// Logistic step of width `5 / Omega`.
    pub fn for_source(src: &SourceParams) -> Self {
        Smoothing::Logistic { width: 5.0 / src.omega }
    }

    pub fn step(&self, x: f64) -> f64 {
        match *self {
            Smoothing::Sharp => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    0.0
                } else {
                    0.5
                }
            }
            Smoothing::Logistic { width } => 1.0 / (1.0 + (-x / width).exp()),
        }
    }
}

/// Everything an amplitude evaluation depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub source: SourceParams,
    pub geometry: Geometry,
    pub profile: BarrierProfile,
    pub quadrature: QuadratureConfig,
    pub light_cone_margin: f64,
    pub smoothing: Smoothing,
}

impl Model {
    pub fn new(source: SourceParams, geometry: Geometry, profile: BarrierProfile) -> Result<Self> {
        let m = Self {
            source,
            geometry,
            profile,
            quadrature: QuadratureConfig::default(),
            light_cone_margin: DEFAULT_LIGHT_CONE_MARGIN,
            smoothing: Smoothing::Sharp,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_quadrature(mut self, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        self.quadrature = cfg;
        Ok(self)
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Error::invalid("light_cone_margin", "must be finite and >= 0"));
        }
        self.light_cone_margin = margin;
        Ok(self)
    }

    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.quadrature.validate()?;
        let z = self.geometry.z;
        if !z.is_finite() {
            return Err(Error::invalid("geometry.z", "must be finite"));
        }
        if self.profile.b() >= z {
            return Err(Error::invalid(
                "geometry.z",
                format!("detector must lie beyond the barrier: need b = {} < z = {z}", self.profile.b()),
            ));
        }
        Ok(())
    }

    pub fn pole(&self) -> C64 {
        self.source.pole()
    }

    /// `z - D`, the vacuum path length left once the barrier is traversed in zero time.
    pub fn reduced_distance(&self) -> f64 {
        self.geometry.z - self.profile.width()
    }

    /// Upper end of the spectral integrals, `Omega + K Gamma`.
    pub fn omega_cut(&self) -> f64 {
        self.quadrature.omega_cut(self.source.omega, self.source.gamma)
    }

    /// Fails unless `(t - z) * Omega >= margin`.
    pub fn check_light_cone(&self, t: f64) -> Result<()> {
        let value = (t - self.geometry.z) * self.source.omega;
        if !(value >= self.light_cone_margin) {
            return Err(Error::LightCone {
                value,
                margin: self.light_cone_margin,
            });
        }
        Ok(())
    }

    /// Checks that `mode` is applicable to this profile.
    pub fn check_mode(&self, mode: AmplitudeMode) -> Result<()> {
        match mode {
            AmplitudeMode::NoBarrierClosed if !self.profile.is_free() => Err(Error::invalid(
                "mode",
                "closed mode describes free propagation; the profile has a barrier",
            )),
            AmplitudeMode::OpaqueAsymptotic => self.opaque_factor().map(|_| ()),
            _ => Ok(()),
        }
    }

    /// `RT(p)` at the complex pole, from the opaque asymptotic form.
    pub fn opaque_factor(&self) -> Result<C64> {
        let (mu, d) = self.single_square()?;
        // Opacity is judged on the real axis at the source frequency.
        scattering::opaque_transmission_asymptotic_with(mu, d, C64::new(self.source.omega, 0.0), DEFAULT_OPACITY_THRESHOLD)?;
        scattering::opaque_transmission_asymptotic_with(mu, d, self.pole(), DEFAULT_OPACITY_THRESHOLD)
    }

    fn single_square(&self) -> Result<(f64, f64)> {
        match self.profile.segments() {
            [seg] if seg.cutoff > 0.0 => Ok((seg.cutoff, seg.length)),
            _ => Err(Error::invalid(
                "mode",
                "opaque mode needs a single square segment with positive cutoff",
            )),
        }
    }

    /// Distance and prefactor of the closed leading-order field for `mode`.
    fn closed_params(&self, mode: AmplitudeMode) -> Result<(f64, C64)> {
        match mode {
            AmplitudeMode::NoBarrierClosed => {
                self.check_mode(mode)?;
                Ok((self.geometry.z, C64::new(1.0, 0.0)))
            }
            AmplitudeMode::OpaqueAsymptotic => Ok((self.reduced_distance(), self.opaque_factor()?)),
            AmplitudeMode::Numeric => Err(Error::invalid("mode", "numeric mode has no closed form")),
        }
    }
}

/// `v_s(kz | x)` for a point left of the barrier (`x < a`) or right of it (`x > b`).
pub fn mode_function(profile: &BarrierProfile, kz: f64, s: Direction, x: f64) -> Result<C64> {
    let a = profile.a();
    let b = profile.b();
    if x >= a && x <= b && !profile.is_free() {
        return Err(Error::invalid("x", "mode functions are only available outside the barrier"));
    }
    let c = scattering::scattering_coefficients(profile, C64::new(kz, 0.0))?;
    let e = |u: f64| (I * kz * u).exp();
    Ok(match (s, x < a || (profile.is_free() && x <= a)) {
        (Direction::Plus, true) => e(x - a) + c.r * e(a - x),
        (Direction::Plus, false) => c.t * e(x - a),
        (Direction::Minus, true) => c.t * e(b - x),
        (Direction::Minus, false) => e(b - x) + c.r_prime * e(x - b),
    })
}

/// Mode amplitude `A^s(t)` of a photon with radial frequency `kr` and longitudinal
/// frequency `kz`, with the coupling constant set to one.
pub fn ww_coefficient(kr: f64, kz: f64, s: Direction, t: f64, src: &SourceParams, profile: &BarrierProfile) -> Result<C64> {
    src.validate()?;
    if !(kr.is_finite() && kr >= 0.0) {
        return Err(Error::invalid("kr", "must be finite and >= 0"));
    }
    if !(kz.is_finite() && kz > 0.0) {
        return Err(Error::invalid("kz", "must be finite and > 0"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", "must be finite and >= 0"));
    }
    let w = kr.hypot(kz);
    let v0 = mode_function(profile, kz, s, 0.0)?;
    let x = C64::new(w, 0.0) - src.pole();
    let bracket = -I * exp_integral(x, t);
    Ok((kr / (2.0 * w)).sqrt() / (2.0 * PI) * v0.conj() * bracket)
}

/// `int_0^tau exp(i x u) du` for complex `x`, stable as `x tau -> 0`.
pub fn exp_integral(x: C64, tau: f64) -> C64 {
    let y = I * x * tau;
    if y.norm() < 1e-3 {
        tau * (1.0 + y / 2.0 + y * y / 6.0 + y * y * y / 24.0)
    } else {
        (y.exp() - 1.0) / (I * x)
    }
}

/// Sum over incidence directions of `v_s*(kz|0) v_s(kz|z)`, evaluated both directly
/// and in the reduced form `T exp(ikz z) + T* exp(-ikz z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOverlap {
    pub direct: C64,
    pub reduced: C64,
}

impl ModeOverlap {
    pub fn residual(&self) -> f64 {
        (self.direct - self.reduced).norm()
    }
}

/// Tolerance on `|direct - reduced|` before the overlap is rejected.
pub const OVERLAP_TOLERANCE: f64 = 1e-9;

pub fn summed_mode_overlap(kz: f64, z: f64, profile: &BarrierProfile) -> Result<ModeOverlap> {
    if !(z > profile.b()) {
        return Err(Error::invalid("z", format!("need z > b = {}", profile.b())));
    }
    let mut direct = C64::new(0.0, 0.0);
    for s in [Direction::Plus, Direction::Minus] {
        direct += mode_function(profile, kz, s, 0.0)?.conj() * mode_function(profile, kz, s, z)?;
    }
    let t = scattering::scattering_coefficients(profile, C64::new(kz, 0.0))?.t;
    let phase = (I * kz * z).exp();
    let reduced = t * phase + (t * phase).conj();
    let o = ModeOverlap { direct, reduced };
    let scale = direct.norm().max(1.0);
    if o.residual() > OVERLAP_TOLERANCE * scale {
        return Err(Error::OverlapMismatch { residual: o.residual() });
    }
    Ok(o)
}

/// Reduced transmission `RT(x) = T(x) exp(ixD)` with its `x -> 0` limit filled in.
pub fn reduced_t(profile: &BarrierProfile, x: C64) -> C64 {
    if x == C64::new(0.0, 0.0) {
        return if profile.is_free() { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    scattering::reduced_transmission(profile, x).unwrap_or(C64::new(f64::NAN, f64::NAN))
}

fn finite_or_fail(r: IntegralResult) -> Result<IntegralResult> {
    if r.value.re.is_finite() && r.value.im.is_finite() {
        Ok(r)
    } else {
        Err(Error::NoConvergence {
            error_estimate: f64::INFINITY,
            evaluations: r.evaluations,
        })
    }
}

/// Inner integral `F(w) = int_0^w RT(x) exp(ix(z - D)) dx`.
///
/// `OpaqueAsymptotic` returns the endpoint term `exp(iw(z-D)) RT(w) / (i(z-D))`,
/// which is the whole story to first order in `1/(z-D)` since `RT(0) = 0`.
pub fn inner_f(omega: f64, profile: &BarrierProfile, z: f64, cfg: &QuadratureConfig, mode: AmplitudeMode) -> Result<C64> {
    inner_f_result(omega, profile, z, cfg, mode).map(|r| r.value)
}

pub fn inner_f_result(
    omega: f64,
    profile: &BarrierProfile,
    z: f64,
    cfg: &QuadratureConfig,
    mode: AmplitudeMode,
) -> Result<IntegralResult> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid("omega", "must be finite and >= 0"));
    }
    if !(z > profile.b()) {
        return Err(Error::invalid("z", format!("need z > b = {}", profile.b())));
    }
    let q = z - profile.width();
    let exact = |value: C64| IntegralResult {
        value,
        error_estimate: 0.0,
        evaluations: 0,
        method: quadrature::Method::DirectAdaptive,
        converged: true,
        tail_estimate: 0.0,
        panels: Vec::new(),
    };
    if omega == 0.0 {
        return Ok(exact(C64::new(0.0, 0.0)));
    }
    match mode {
        AmplitudeMode::NoBarrierClosed => {
            if !profile.is_free() {
                return Err(Error::invalid("mode", "closed mode describes free propagation"));
            }
            Ok(exact(exp_integral(C64::new(z, 0.0), omega)))
        }
        AmplitudeMode::OpaqueAsymptotic => {
            let (mu, d) = match profile.segments() {
                [seg] => (seg.cutoff, seg.length),
                _ => return Err(Error::invalid("mode", "opaque mode needs a single square segment")),
            };
            let rt = scattering::opaque_transmission_asymptotic(mu, d, C64::new(omega, 0.0))?;
            Ok(exact((I * omega * q).exp() * rt / (I * q)))
        }
        AmplitudeMode::Numeric => {
            let f = |x: C64| reduced_t(profile, x);
            let bps: Vec<f64> = profile.thresholds().into_iter().filter(|&m| m < omega).collect();
            finite_or_fail(quadrature::integrate_oscillatory_finite(&f, 0.0, omega, q, &bps, cfg)?)
        }
    }
}

/// `F` tabulated at knots, for the many evaluations a spectral integral needs.
///
/// The table stores cumulative integrals; an evaluation adds one short adaptive
/// integral from the nearest knot below. It also carries the constant
/// `F_inf = i int_0^inf RT(i y) exp(-y (z - D)) dy`, the limit `F` oscillates
/// about at large `w`. `RT` is real on the imaginary axis, so `F_inf` is purely
/// imaginary and drops out of `G = 2 Re F`.
#[derive(Debug, Clone)]
pub struct InnerTable {
    profile: BarrierProfile,
    q: f64,
    knots: Vec<f64>,
    cumulative: Vec<C64>,
    f_inf: C64,
    cfg: QuadratureConfig,
}

impl InnerTable {
    pub fn build(profile: &BarrierProfile, z: f64, upper: f64, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if !(z > profile.b()) {
            return Err(Error::invalid("z", format!("need z > b = {}", profile.b())));
        }
        if !(upper.is_finite() && upper > 0.0) {
            return Err(Error::invalid("upper", "must be finite and > 0"));
        }
        let q = z - profile.width();
        // Tolerances are relative: an opaque barrier makes every value tiny.
        let mut cfg = *cfg;
        cfg.abs_tol = 1e-300;
        let h = (1.5 / q).min(upper / 64.0);
        let mut knots: Vec<f64> = (0..=(upper / h).ceil() as usize).map(|i| (i as f64 * h).min(upper)).collect();
        knots.extend(profile.thresholds().into_iter().filter(|&m| m < upper));
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|x, y| (*x - *y).abs() < 1e-12 * upper);

        let integrand = |x: f64| reduced_t(profile, C64::new(x, 0.0)) * (I * x * q).exp();
        let mut cumulative = Vec::with_capacity(knots.len());
        let mut acc = C64::new(0.0, 0.0);
        cumulative.push(acc);
        for w in knots.windows(2) {
            let r = finite_or_fail(quadrature::integrate_adaptive(&integrand, w[0], w[1], &[], &cfg))?;
            acc += r.value;
            cumulative.push(acc);
        }

        let along_imag = |y: f64| reduced_t(profile, C64::new(0.0, y)) * (-y * q).exp();
        let r = finite_or_fail(quadrature::integrate_adaptive(&along_imag, 0.0, 50.0 / q, &[0.05 / q, 0.5 / q, 5.0 / q], &cfg))?;
        let f_inf = I * r.value.re;

        Ok(Self {
            profile: profile.clone(),
            q,
            knots,
            cumulative,
            f_inf,
            cfg,
        })
    }

    pub fn upper(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// `z - D`.
    pub fn phase_rate(&self) -> f64 {
        self.q
    }

    pub fn f_inf(&self) -> C64 {
        self.f_inf
    }

    /// `F(w)`. Outside `[0, upper]` the result is NaN.
    pub fn eval(&self, omega: f64) -> C64 {
        if !(omega >= 0.0 && omega <= self.upper()) {
            return C64::new(f64::NAN, f64::NAN);
        }
        let k = self.knots.partition_point(|&x| x <= omega) - 1;
        let x0 = self.knots[k];
        if omega == x0 {
            return self.cumulative[k];
        }
        let q = self.q;
        let profile = &self.profile;
        let integrand = |x: f64| reduced_t(profile, C64::new(x, 0.0)) * (I * x * q).exp();
        self.cumulative[k] + quadrature::integrate_adaptive(&integrand, x0, omega, &[], &self.cfg).value
    }

    /// `F(w) - F_inf`, the oscillating part.
    pub fn eval_oscillating(&self, omega: f64) -> C64 {
        self.eval(omega) - self.f_inf
    }

    /// Spectral weight `G(w) = 2 Re F(w)`.
    pub fn spectral_weight(&self, omega: f64) -> f64 {
        2.0 * self.eval(omega).re
    }
}

/// The four pieces of `8 pi^2` times the commutator kernel: `i[0]` and `i[2]` carry
/// `exp(-ipt)`, `i[1]` and `i[3]` carry `exp(-ip t1)`; `i[0]`, `i[1]` come from the
/// oscillating part of `F`, `i[2]`, `i[3]` from its conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTerms {
    pub i: [C64; 4],
    /// Quadrature error, excluding truncation at the spectral cut.
    pub error_estimate: f64,
    /// Bound on what lies beyond the cut.
    pub tail_estimate: f64,
    pub converged: bool,
}

impl KernelTerms {
    pub fn kernel(&self) -> C64 {
        (self.i[0] + self.i[1] + self.i[2] + self.i[3]) / (8.0 * PI * PI)
    }

    pub fn kernel_error(&self) -> f64 {
        self.error_estimate / (8.0 * PI * PI)
    }
}

/// A field value with its quadrature error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: C64,
    pub error_estimate: f64,
    pub tail_estimate: f64,
    pub converged: bool,
}

/// Numeric kernels of one model, sharing a tabulated `F`.
#[derive(Debug, Clone)]
pub struct NumericKernel {
    model: Model,
    table: InnerTable,
}

impl NumericKernel {
    pub fn new(model: &Model) -> Result<Self> {
        model.validate()?;
        // The pole integrator samples its integrand up to twice the cut for the tail bound.
        let table = InnerTable::build(&model.profile, model.geometry.z, 2.05 * model.omega_cut(), &model.quadrature)?;
        Ok(Self {
            model: model.clone(),
            table,
        })
    }

    pub fn table(&self) -> &InnerTable {
        &self.table
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    fn tail_rate(&self) -> f64 {
        if self.model.omega_cut() > self.model.profile.max_cutoff() {
            self.model.geometry.z
        } else {
            self.table.q
        }
    }

    fn cfg(&self) -> QuadratureConfig {
        let mut cfg = self.model.quadrature;
        let scale = self.table.eval(self.model.source.omega).norm().max(1e-280);
        cfg.abs_tol *= scale;
        cfg
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.model.profile.thresholds().into_iter().filter(|&m| m < self.model.omega_cut()).collect()
    }

    /// `I_1 .. I_4` at `(t, t1)`.
    pub fn terms(&self, t: f64, t1: f64) -> Result<KernelTerms> {
        if !(t.is_finite() && t1.is_finite() && t >= t1) {
            return Err(Error::invalid("t", format!("need t >= t1, got t = {t}, t1 = {t1}")));
        }
        self.model.check_light_cone(t)?;
        let p = self.model.pole();
        let s = t - t1;
        let zt = self.tail_rate();
        let cfg = self.cfg();
        let bps = self.breakpoints();
        let tab = &self.table;
        let a = |w: f64| tab.eval_oscillating(w);
        let ac = |w: f64| tab.eval_oscillating(w).conj();
        let b = |w: f64| (-I * w * s).exp() * tab.eval_oscillating(w);
        let bc = |w: f64| (-I * w * s).exp() * tab.eval_oscillating(w).conj();
        let r = [
            quadrature::integrate_pole_with_breakpoints(&a, p, zt, &bps, &cfg)?,
            quadrature::integrate_pole_with_breakpoints(&b, p, (s - zt).abs(), &bps, &cfg)?,
            quadrature::integrate_pole_with_breakpoints(&ac, p, zt, &bps, &cfg)?,
            quadrature::integrate_pole_with_breakpoints(&bc, p, s + zt, &bps, &cfg)?,
        ];
        let mut terms = KernelTerms {
            i: [C64::new(0.0, 0.0); 4],
            error_estimate: 0.0,
            tail_estimate: 0.0,
            converged: true,
        };
        let et = (-I * p * t).exp();
        let et1 = (-I * p * t1).exp();
        for (j, rj) in r.iter().enumerate() {
            let rj = finite_or_fail(rj.clone())?;
            let phase = if j % 2 == 0 { et } else { -et1 };
            terms.i[j] = phase * rj.value;
            terms.error_estimate += phase.norm() * (rj.error_estimate - rj.tail_estimate);
            terms.tail_estimate += phase.norm() * rj.tail_estimate;
            terms.converged &= rj.converged;
        }
        Ok(terms)
    }

    /// Commutator kernel `<[phi(t), P_g(t1)]>`.
    pub fn commutator(&self, t: f64, t1: f64) -> Result<FieldValue> {
        let terms = self.terms(t, t1)?;
        Ok(FieldValue {
            value: terms.kernel(),
            error_estimate: terms.kernel_error(),
            tail_estimate: terms.tail_estimate / (8.0 * PI * PI),
            converged: terms.converged,
        })
    }

    /// Field `K(t) = <g|phi(t)|t>` from the product form, integrated directly.
    /// The integrand has no pole: the numerator vanishes at `w = p`.
    pub fn product(&self, t: f64) -> Result<FieldValue> {
        self.model.check_light_cone(t)?;
        let p = self.model.pole();
        let ept = (-I * p * t).exp();
        let tab = &self.table;
        let g = |w: f64| {
            let x = C64::new(w, 0.0);
            ((-I * x * t).exp() - ept) * tab.spectral_weight(w) / (x - p)
        };
        let (omega, gamma) = (self.model.source.omega, self.model.source.gamma);
        let mut bps = self.breakpoints();
        for k in [-30.0, -3.0, 0.0, 3.0, 30.0] {
            bps.push(omega + k * gamma);
        }
        let r = finite_or_fail(quadrature::integrate_adaptive(&g, 0.0, self.model.omega_cut(), &bps, &self.cfg()))?;
        let norm = 1.0 / (8.0 * PI * PI);
        Ok(FieldValue {
            value: norm * r.value,
            error_estimate: norm * r.error_estimate,
            tail_estimate: 0.0,
            converged: r.converged,
        })
    }
}

/// Commutator kernel `<g,vac|[phi(t), P_g(t1)]|e,vac>` with unit coupling.
///
/// Closed modes return `RT(p) / (4 pi L) step(t - t1 - L) exp(-ip(t - L))`, with
/// `L = z` and `RT(p) = 1` without a barrier, `L = z - D` for an opaque one.
pub fn commutator_kernel(model: &Model, t: f64, t1: f64, mode: AmplitudeMode) -> Result<C64> {
    if mode == AmplitudeMode::Numeric {
        return Ok(NumericKernel::new(model)?.commutator(t, t1)?.value);
    }
    if !(t.is_finite() && t1.is_finite() && t >= t1) {
        return Err(Error::invalid("t", format!("need t >= t1, got t = {t}, t1 = {t1}")));
    }
    model.check_light_cone(t)?;
    let (l, pref) = model.closed_params(mode)?;
    let p = model.pole();
    Ok(pref / (4.0 * PI * l) * model.smoothing.step(t - t1 - l) * (-I * p * (t - l)).exp())
}

/// `M_w(t2) = int_0^t2 exp(iwt) K(t) dt`, the detector amplitude when the
/// source click comes after the detector click.
pub fn script_m(model: &Model, omega: f64, t2: f64, mode: AmplitudeMode) -> Result<C64> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid("omega", "must be finite and >= 0"));
    }
    model.check_light_cone(t2)?;
    if mode == AmplitudeMode::Numeric {
        let field = crate::spectral::SpectralField::build(model, t2)?;
        return Ok(field.script_m(omega, t2));
    }
    let (l, pref) = model.closed_params(mode)?;
    Ok(closed_script_m(model, l, pref, omega, t2))
}

fn closed_script_m(model: &Model, l: f64, pref: C64, omega: f64, t2: f64) -> C64 {
    let x = C64::new(omega, 0.0) - model.pole();
    -pref / (4.0 * PI * l) * (I * omega * l).exp() * exp_integral(x, t2 - l)
}

/// Joint amplitude `M_w(t1, t2)` for a source click at `t1` and a detector click at `t2`.
pub fn m_amplitude(model: &Model, omega: f64, t1: f64, t2: f64, mode: AmplitudeMode) -> Result<C64> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(Error::invalid("omega", "must be finite and >= 0"));
    }
    model.check_light_cone(t1)?;
    model.check_light_cone(t2)?;
    if mode == AmplitudeMode::Numeric {
        let field = crate::spectral::SpectralField::build(model, t2)?;
        return Ok(field.m_amplitude(omega, t1, t2));
    }
    let (l, pref) = model.closed_params(mode)?;
    let s = model.smoothing.step(t2 - t1 - l);
    let early = closed_script_m(model, l, pref, omega, t2);
    if s == 0.0 {
        return Ok(early);
    }
    let late = closed_script_m(model, l, pref, omega, t1 + l);
    Ok((1.0 - s) * early + s * late)
}
