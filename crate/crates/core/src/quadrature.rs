//! Quadrature for the two integral shapes the correlation pipeline needs:
//! finite oscillatory integrals `int f(x) exp(iqx) dx`, and semi-infinite
//! integrals `int_0^inf f(w)/(w - p) dw` with a pole `p` just below the real axis.
//!
//! Everything is built on a globally adaptive 21-point Gauss-Kronrod rule. Results
//! are summed pairwise in interval order, so they are reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Angle of the rays used by the contour-rotated method, in `(0, pi/2]`.
    pub rotation_angle: f64,
    /// Semi-infinite integrals are truncated at `Re(pole) + cut_widths * Gamma`.
    pub cut_widths: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            rotation_angle: std::f64::consts::FRAC_PI_2,
            cut_widths: 2000.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::invalid("quadrature.rel_tol", "must be > 0"));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::invalid("quadrature.abs_tol", "must be > 0"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::invalid("quadrature.max_subdivisions", "must be >= 1"));
        }
        if !(self.rotation_angle > 0.0 && self.rotation_angle <= std::f64::consts::FRAC_PI_2 + 1e-15) {
            return Err(Error::invalid("quadrature.rotation_angle", "must lie in (0, pi/2]"));
        }
        if !(self.cut_widths > 0.0 && self.cut_widths.is_finite()) {
            return Err(Error::invalid("quadrature.cut_widths", "must be > 0"));
        }
        Ok(())
    }

    /// Upper truncation point for a pole at `omega - i gamma/2`.
    pub fn omega_cut(&self, omega: f64, gamma: f64) -> f64 {
        omega + self.cut_widths * gamma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DirectAdaptive,
    ContourRotated,
    PoleSubtracted,
}

/// One accepted subinterval of an adaptive run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub lower: f64,
    pub upper: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub value: C64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub method: Method,
    /// False when the subdivision budget ran out before the tolerance was met.
    pub converged: bool,
    /// Analytic bound on the part of a semi-infinite integral beyond the cut.
    pub tail_estimate: f64,
    pub panels: Vec<Panel>,
}

impl IntegralResult {
    /// True when the tolerance was met and any truncated tail is below `abs_tol`.
    pub fn ok(&self, cfg: &QuadratureConfig) -> bool {
        self.converged && self.tail_estimate <= cfg.abs_tol
    }

    /// Turns a non-converged result into an error carrying the best estimate's error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                error_estimate: self.error_estimate,
                evaluations: self.evaluations,
            })
        }
    }
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208034148200,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Weights of the embedded 10-point Gauss rule, attached to XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// 21-point Kronrod estimate and `|K - G|` on `[a, b]`.
fn gk21<F: Fn(f64) -> C64 + ?Sized>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = C64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    ((kron * h), ((kron - gauss) * h).norm())
}

/// Sums in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[C64]) -> C64 {
    match xs.len() {
        0 => C64::new(0.0, 0.0),
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// Globally adaptive Gauss-Kronrod integration of a complex function of a real
/// variable over `[a, b]`, with forced subdivision at `breakpoints`.
pub fn integrate_adaptive<F>(f: &F, a: f64, b: f64, breakpoints: &[f64], cfg: &QuadratureConfig) -> IntegralResult
where
    F: Fn(f64) -> C64 + ?Sized,
{
    let mut cuts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let (mut total, mut total_err) = (C64::new(0.0, 0.0), 0.0);
    for w in cuts.windows(2) {
        let (v, e) = gk21(f, w[0], w[1]);
        evals += 21;
        total += v;
        total_err += e;
        heap.push(Interval { a: w[0], b: w[1], value: v, error: e });
    }
    let mut n_intervals = heap.len();
    let mut converged = false;
    loop {
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.norm()) {
            converged = true;
            break;
        }
        if n_intervals >= cfg.max_subdivisions {
            break;
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval at machine resolution; cannot refine further.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evals += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Interval { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Interval { a: mid, b: worst.b, value: v2, error: e2 });
        n_intervals += 1;
    }
    let mut parts = heap.into_vec();
    parts.sort_by(|x, y| x.a.total_cmp(&y.a));
    let values: Vec<C64> = parts.iter().map(|p| p.value).collect();
    let value = pairwise_sum(&values);
    let error_estimate = parts.iter().map(|p| p.error).sum();
    IntegralResult {
        value,
        error_estimate,
        evaluations: evals,
        method: Method::DirectAdaptive,
        converged,
        tail_estimate: 0.0,
        panels: parts
            .iter()
            .map(|p| Panel { lower: p.a, upper: p.b, error: p.error })
            .collect(),
    }
}

/// Oscillation parameter `|q| (upper - lower)` above which the contour-rotated
/// method is used.
pub const ROTATION_SWITCH: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscillatoryMethod {
    Auto,
    Direct,
    Rotated,
}

/// `int_lower^upper f(x) exp(i q x) dx`.
///
/// `f` must accept complex arguments: the contour-rotated method evaluates it on
/// rays leaving the endpoints into the half plane where `exp(iqx)` decays, and
/// requires `f` to be analytic and of sub-exponential growth there. Points in
/// `breakpoints` (e.g. branch points) become panel boundaries of the direct method.
pub fn integrate_oscillatory_finite<F>(
    f: &F,
    lower: f64,
    upper: f64,
    phase_rate: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: Fn(C64) -> C64 + ?Sized,
{
    integrate_oscillatory_with(f, lower, upper, phase_rate, breakpoints, cfg, OscillatoryMethod::Auto)
}

pub fn integrate_oscillatory_with<F>(
    f: &F,
    lower: f64,
    upper: f64,
    phase_rate: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
    method: OscillatoryMethod,
) -> Result<IntegralResult>
where
    F: Fn(C64) -> C64 + ?Sized,
{
    cfg.validate()?;
    if !(lower.is_finite() && upper.is_finite() && phase_rate.is_finite()) {
        return Err(Error::invalid("bounds", "must be finite"));
    }
    if !(lower < upper) {
        return Err(Error::invalid("bounds", format!("need lower < upper, got [{lower}, {upper}]")));
    }
    let rotate = match method {
        OscillatoryMethod::Auto => phase_rate.abs() * (upper - lower) > ROTATION_SWITCH,
        OscillatoryMethod::Direct => false,
        OscillatoryMethod::Rotated => true,
    };
    if !rotate || phase_rate == 0.0 {
        let g = |x: f64| f(C64::new(x, 0.0)) * (I * phase_rate * x).exp();
        return Ok(integrate_adaptive(&g, lower, upper, breakpoints, cfg));
    }
    let angle = cfg.rotation_angle * phase_rate.signum();
    let dir = C64::from_polar(1.0, angle);
    let decay = phase_rate.abs() * angle.sin().abs();
    // exp(-decay * r) < 1e-18 beyond this.
    let r_max = 41.5 / decay;
    let ray = |x0: f64| {
        let g = move |r: f64| {
            let x = x0 + r * dir;
            f(x) * (I * phase_rate * x).exp() * dir
        };
        // Split near the origin where the integrand changes fastest.
        let bps = [r_max / 1000.0, r_max / 100.0, r_max / 10.0];
        integrate_adaptive(&g, 0.0, r_max, &bps, cfg)
    };
    let lo = ray(lower);
    let hi = ray(upper);
    Ok(IntegralResult {
        value: lo.value - hi.value,
        error_estimate: lo.error_estimate + hi.error_estimate,
        evaluations: lo.evaluations + hi.evaluations,
        method: Method::ContourRotated,
        converged: lo.converged && hi.converged,
        tail_estimate: 0.0,
        panels: Vec::new(),
    })
}

/// `int_0^inf f(w) / (w - pole) dw` for a pole with `Im pole < 0`.
///
/// The value `f(Re pole)` is subtracted and its integral taken in closed form; the
/// smooth remainder is integrated adaptively up to the configured cut. `oscillation`
/// is the rate `s` of any `exp(+-i w s)` factor in `f` (0 if none) and is only used
/// for the tail bound.
pub fn integrate_pole_semiinfinite<F>(f: &F, pole: C64, oscillation: f64, cfg: &QuadratureConfig) -> Result<IntegralResult>
where
    F: Fn(f64) -> C64 + ?Sized,
{
    integrate_pole_with_breakpoints(f, pole, oscillation, &[], cfg)
}

pub fn integrate_pole_with_breakpoints<F>(
    f: &F,
    pole: C64,
    oscillation: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> Result<IntegralResult>
where
    F: Fn(f64) -> C64 + ?Sized,
{
    cfg.validate()?;
    if !(pole.im < 0.0 && pole.re > 0.0 && pole.re.is_finite() && pole.im.is_finite()) {
        return Err(Error::invalid("pole", "need Re pole > 0 and Im pole < 0"));
    }
    let omega = pole.re;
    let gamma = -2.0 * pole.im;
    let cut = cfg.omega_cut(omega, gamma);
    let cut_result = integrate_pole_truncated(f, pole, cut, breakpoints, cfg);
    let (value, err, evals, converged, panels) = cut_result;

    // Tail beyond the cut: |f| sampled on [cut, 2 cut], then either an
    // integration-by-parts bound (oscillating f) or a direct bound.
    let n_samples = 16;
    let mut fmax: f64 = 0.0;
    for i in 0..=n_samples {
        let w = cut * (1.0 + i as f64 / n_samples as f64);
        fmax = fmax.max(f(w).norm());
    }
    let dist = (C64::new(cut, 0.0) - pole).norm();
    let tail = if oscillation.abs() > 0.0 {
        2.0 * fmax / (oscillation.abs() * dist)
    } else {
        fmax * ((2.0 * cut - omega) / (cut - omega)).ln()
    };
    Ok(IntegralResult {
        value,
        error_estimate: err + tail,
        evaluations: evals + n_samples + 1,
        method: Method::PoleSubtracted,
        converged,
        tail_estimate: tail,
        panels,
    })
}

/// `int_0^cut f(w)/(w - pole) dw` by pole subtraction.
fn integrate_pole_truncated<F>(
    f: &F,
    pole: C64,
    cut: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> (C64, f64, usize, bool, Vec<Panel>)
where
    F: Fn(f64) -> C64 + ?Sized,
{
    let omega = pole.re;
    let gamma = -2.0 * pole.im;
    let f0 = f(omega);
    let g = |w: f64| (f(w) - f0) / (C64::new(w, 0.0) - pole);
    let mut bps: Vec<f64> = breakpoints.to_vec();
    for k in [-30.0, -3.0, 0.0, 3.0, 30.0] {
        bps.push(omega + k * gamma);
    }
    let r = integrate_adaptive(&g, 0.0, cut, &bps, cfg);
    // Im(w - pole) > 0 along the real axis, so the principal logs are continuous.
    let closed = f0 * ((C64::new(cut, 0.0) - pole).ln() - (-pole).ln());
    (r.value + closed, r.error_estimate, r.evaluations + 1, r.converged, r.panels)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}
