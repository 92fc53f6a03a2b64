//! Numeric evaluation of the field `K(t)` and of joint detection probabilities.
//!
//! `K(t)` is a spectral integral over `[0, cut]`. It is discretised once on
//! Gauss-Legendre panels that shrink geometrically toward the source line at
//! `Omega`, where the Lorentzian needs panels of width `Gamma / 2`, and are capped
//! elsewhere so that no panel spans more than a few radians of phase at the
//! longest time requested. With the nodes fixed, `M_w(t2)` is exact in time
//! (the time integrals are done in closed form node by node).
//!
//! Joint probabilities need `int |M_w|^2 dw` at many grid points. For those the
//! field is sampled on a uniform time grid, and each grid point costs one FFT of
//! the time-domain source of `M`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::amplitude::{exp_integral, InnerTable, Model};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

const I: C64 = C64::new(0.0, 1.0);

/// Phase, in radians, a single panel may span at the longest time.
const PANEL_PHASE: f64 = 8.0;
const GL_ORDER: usize = 16;

/// The field of one model as a weighted sum of plane waves.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pole: C64,
    omega: f64,
    cut: f64,
    max_time: f64,
    nodes: Vec<f64>,
    /// `w_j G(w_j) / (8 pi^2 (w_j - p))`.
    coeffs: Vec<C64>,
    total: C64,
}

impl SpectralField {
    /// Discretises the field for times up to `max_time`.
    pub fn build(model: &Model, max_time: f64) -> Result<Self> {
        model.validate()?;
        if !(max_time.is_finite() && max_time > 0.0) {
            return Err(Error::invalid("max_time", "must be finite and > 0"));
        }
        let cut = model.omega_cut();
        let table = InnerTable::build(&model.profile, model.geometry.z, cut, &model.quadrature)?;
        let (omega, gamma) = (model.source.omega, model.source.gamma);
        let h_max = PANEL_PHASE / (max_time + model.geometry.z);
        let edges = graded_edges(omega, gamma, cut, h_max, &model.profile.thresholds());

        let (x, w) = gauss_legendre(GL_ORDER);
        let p = model.pole();
        let mut nodes = Vec::with_capacity(edges.len() * GL_ORDER);
        let mut coeffs = Vec::with_capacity(edges.len() * GL_ORDER);
        for e in edges.windows(2) {
            let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            for (xi, wi) in x.iter().zip(&w) {
                let node = mid + half * xi;
                let g = table.spectral_weight(node);
                nodes.push(node);
                coeffs.push(half * wi * g / (8.0 * PI * PI * (C64::new(node, 0.0) - p)));
            }
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NoConvergence {
                error_estimate: f64::INFINITY,
                evaluations: nodes.len(),
            });
        }
        let total = coeffs.iter().sum();
        Ok(Self {
            pole: p,
            omega,
            cut,
            max_time,
            nodes,
            coeffs,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cut(&self) -> f64 {
        self.cut
    }

    pub fn max_time(&self) -> f64 {
        self.max_time
    }

    /// `K(t)`.
    pub fn field(&self, t: f64) -> C64 {
        let s: C64 = self.nodes.iter().zip(&self.coeffs).map(|(&w, &c)| c * (-I * w * t).exp()).sum();
        s - self.total * (-I * self.pole * t).exp()
    }

    /// `int_0^tau exp(iwt) K(t) dt`.
    pub fn script_m(&self, omega: f64, tau: f64) -> C64 {
        let s: C64 = self
            .nodes
            .iter()
            .zip(&self.coeffs)
            .map(|(&w, &c)| c * exp_integral(C64::new(omega - w, 0.0), tau))
            .sum();
        s - self.total * exp_integral(C64::new(omega, 0.0) - self.pole, tau)
    }

    /// `M_w(t1, t2)`. For `t2 > t1` the source click at `t1` restarts the field.
    pub fn m_amplitude(&self, omega: f64, t1: f64, t2: f64) -> C64 {
        let early = self.script_m(omega, t2);
        if t2 <= t1 {
            return early;
        }
        early - (I * (C64::new(omega, 0.0) - self.pole) * t1).exp() * self.script_m(omega, t2 - t1)
    }

    /// `K(k dt)` for `k = 0..=n`.
    pub fn time_table(&self, dt: f64, n: usize) -> Vec<C64> {
        const BLOCK: usize = 256;
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        let steps: Vec<C64> = self.nodes.iter().map(|&w| (-I * w * dt).exp()).collect();
        let mut start = 0;
        while start <= n {
            let end = (start + BLOCK).min(n + 1);
            // Fresh phases every block keep the recurrence error from accumulating.
            for ((&w, &c), &step) in self.nodes.iter().zip(&self.coeffs).zip(&steps) {
                let mut ph = c * (-I * w * (start as f64 * dt)).exp();
                for slot in &mut out[start..end] {
                    *slot += ph;
                    ph *= step;
                }
            }
            for (k, slot) in out[start..end].iter_mut().enumerate() {
                let t = (start + k) as f64 * dt;
                *slot -= self.total * (-I * self.pole * t).exp();
            }
            start = end;
        }
        out
    }

    /// Default upper bound on the time step: a quarter of the shortest period kept.
    pub fn default_step(&self) -> f64 {
        (PI / (4.0 * self.cut)).min(0.1 / self.omega)
    }
}

fn graded_edges(omega: f64, gamma: f64, cut: f64, h_max: f64, thresholds: &[f64]) -> Vec<f64> {
    let width = |x: f64| ((x - omega).abs() / 2.0).max(gamma / 2.0).min(h_max);
    let mut edges = vec![omega.min(cut)];
    let mut x = omega;
    while x < cut {
        x = (x + width(x)).min(cut);
        edges.push(x);
    }
    x = omega.min(cut);
    while x > 0.0 {
        x = (x - width(x)).max(0.0);
        edges.push(x);
    }
    edges.extend(thresholds.iter().copied().filter(|&m| m > 0.0 && m < cut));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * cut);
    edges
}

/// Approximate common divisor of positive reals, to relative accuracy `1e-9`.
fn common_unit(times: &[f64]) -> Option<f64> {
    let scale = times.iter().fold(0.0_f64, |m, &t| m.max(t.abs()));
    let tol = 1e-9 * scale;
    let mut g = 0.0_f64;
    for &t in times {
        let (mut a, mut b) = (t.abs().max(g), t.abs().min(g));
        while b > tol {
            let r = a % b;
            let r = if b - r < tol { 0.0 } else { r };
            a = b;
            b = r;
        }
        g = a;
    }
    (g > tol).then_some(g)
}

/// Largest step not above `dt_max` of which every entry of `times` is a multiple.
pub fn aligned_step(times: &[f64], dt_max: f64) -> Result<f64> {
    let nonzero: Vec<f64> = times.iter().copied().filter(|t| *t != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(dt_max);
    }
    let unit = common_unit(&nonzero).ok_or_else(|| Error::invalid("times", "no common time unit"))?;
    let m = (unit / dt_max).ceil().max(1.0);
    let dt = unit / m;
    if dt < dt_max * 1e-3 {
        return Err(Error::invalid(
            "times",
            format!("times share no usable common step (unit {unit:.3e} vs step {dt_max:.3e})"),
        ));
    }
    Ok(dt)
}

/// `p(t1, t2) = norm int_0^cut |M_w(t1, t2)|^2 dw` on a uniform time grid.
pub struct JointSolver {
    field: Vec<C64>,
    dt: f64,
    omega: f64,
    pole: C64,
    cut: f64,
    norm: f64,
    fft: Arc<dyn Fft<f64>>,
    n_fft: usize,
}

impl std::fmt::Debug for JointSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JointSolver")
            .field("dt", &self.dt)
            .field("samples", &self.field.len())
            .field("n_fft", &self.n_fft)
            .finish()
    }
}

impl JointSolver {
    /// Samples the field with step `dt` up to `t_max`.
    pub fn new(field: &SpectralField, dt: f64, t_max: f64, norm: f64) -> Result<Self> {
        if !(dt > 0.0 && dt * field.cut < PI) {
            return Err(Error::invalid("dt", "time step too coarse for the spectral band"));
        }
        if t_max > field.max_time * (1.0 + 1e-12) {
            return Err(Error::invalid("t_max", "beyond the range the field was built for"));
        }
        let n = (t_max / dt).round() as usize;
        let samples = field.time_table(dt, n);
        let n_fft = (2 * (n + 1)).next_power_of_two();
        let fft = FftPlanner::new().plan_fft_inverse(n_fft);
        Ok(Self {
            field: samples,
            dt,
            omega: field.omega,
            pole: field.pole,
            cut: field.cut,
            norm,
            fft,
            n_fft,
        })
    }

    pub fn step(&self) -> f64 {
        self.dt
    }

    fn index(&self, t: f64, name: &'static str) -> Result<usize> {
        let x = t / self.dt;
        let k = x.round();
        if (x - k).abs() > 1e-6 * x.max(1.0) || k < 0.0 || k as usize >= self.field.len() {
            return Err(Error::invalid(name, format!("{t} is not a sample of the time grid (step {})", self.dt)));
        }
        Ok(k as usize)
    }

    pub fn p_joint(&self, t1: f64, t2: f64) -> Result<f64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.n_fft];
        self.p_joint_with(t1, t2, &mut buf)
    }

    /// As `p_joint`, reusing `buf` (resized to the FFT length).
    pub fn p_joint_with(&self, t1: f64, t2: f64, buf: &mut Vec<C64>) -> Result<f64> {
        let n2 = self.index(t2, "t2")?;
        let m = self.index(t1, "t1")?;
        buf.clear();
        buf.resize(self.n_fft, C64::new(0.0, 0.0));
        let restart = -(-I * self.pole * t1).exp();
        let demod = (I * self.omega * self.dt).exp();
        let mut ph = C64::new(1.0, 0.0);
        for (n, slot) in buf.iter_mut().enumerate().take(n2 + 1) {
            let mut f = self.field[n];
            if n2 > m && n >= m {
                f += restart * self.field[n - m];
            }
            let w = if n == 0 || n == n2 { 0.5 } else { 1.0 };
            *slot = w * f * ph;
            ph *= demod;
            if n % 256 == 255 {
                ph = (I * self.omega * self.dt * (n + 1) as f64).exp();
            }
        }
        self.fft.process(buf);
        let dw = 2.0 * PI / (self.n_fft as f64 * self.dt);
        let mut acc = 0.0;
        for (k, x) in buf.iter().enumerate() {
            let kk = if k < self.n_fft / 2 { k as f64 } else { k as f64 - self.n_fft as f64 };
            let w = self.omega + kk * dw;
            if (0.0..=self.cut).contains(&w) {
                acc += x.norm_sqr();
            }
        }
        Ok(self.norm * dw * self.dt * self.dt * acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{commutator_kernel, AmplitudeMode, Geometry, SourceParams};
    use crate::scattering::BarrierProfile;

    fn model() -> Model {
        let src = SourceParams::new(20.0, 0.05, 1.0).unwrap();
        Model::new(src, Geometry { z: 40.0 }, BarrierProfile::free(1.0).unwrap()).unwrap()
    }

    #[test]
    fn aligned_step_divides_all_times() {
        let dt = aligned_step(&[41.0, 0.5, 81.0], 0.0065).unwrap();
        for t in [41.0, 0.5, 81.0] {
            let k = t / dt;
            assert!((k - k.round()).abs() < 1e-9);
        }
        assert!(dt <= 0.0065 && dt > 0.006);
        assert!(aligned_step(&[1.0, std::f64::consts::PI], 0.01).is_err());
    }

    #[test]
    fn field_vanishes_at_origin_and_follows_light_cone() {
        let m = model();
        let f = SpectralField::build(&m, 70.0).unwrap();
        assert!(f.field(0.0).norm() < 1e-15);
        let inside = f.field(60.0);
        let closed = -commutator_kernel(&m, 60.0, 0.0, AmplitudeMode::NoBarrierClosed).unwrap();
        assert!((inside - closed).norm() / closed.norm() < 1e-3);
        assert!(f.field(30.0).norm() < 1e-2 * closed.norm());
    }

    #[test]
    fn time_table_agrees_with_direct_sum() {
        let f = SpectralField::build(&model(), 50.0).unwrap();
        let dt = 0.01;
        let table = f.time_table(dt, 5000);
        for k in [0, 1, 255, 256, 257, 4100, 5000] {
            assert!((table[k] - f.field(k as f64 * dt)).norm() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn joint_solver_rejects_unaligned_times() {
        let m = model();
        let f = SpectralField::build(&m, 60.0).unwrap();
        let s = JointSolver::new(&f, 0.005, 60.0, 1.0).unwrap();
        assert!(s.p_joint(50.0, 55.0).is_ok());
        assert!(s.p_joint(50.0, 55.0021).is_err());
        assert!(s.p_joint(50.0, 61.0).is_err());
        assert!(JointSolver::new(&f, 0.1, 60.0, 1.0).is_err());
    }
}
