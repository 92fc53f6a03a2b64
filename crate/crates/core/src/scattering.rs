//! One-dimensional scattering off piecewise-constant barriers.
//!
//! The longitudinal mode equation `-v'' + V(z) v = kz^2 v` is solved segment by
//! segment. On a segment of cutoff `mu` the potential is `V = mu^2`, so `mu` is
//! the frequency below which the wave is evanescent.
//!
//! Coefficients follow the shifted-origin convention: to the left of the barrier
//! the left-incident solution is `exp(ik(z-a)) + R exp(-ik(z-a))`, to the right it
//! is `T exp(ik(z-a))`. The right-incident solution is `T exp(-ik(z-b))` on the
//! left and `exp(-ik(z-b)) + R' exp(ik(z-b))` on the right. With this convention
//! `T` and `R` are the coefficients of the same barrier translated to `a = 0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C64 = C64::new(0.0, 1.0);

/// `|kappa * length|` below which a segment is propagated by its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Default opacity threshold for [`opaque_transmission_asymptotic`].
pub const DEFAULT_OPACITY_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub length: f64,
    /// Cutoff frequency `mu`; the potential on the segment is `mu^2`.
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierProfile {
    a: f64,
    segments: Vec<Segment>,
}

impl BarrierProfile {
    pub fn new(a: f64, segments: Vec<Segment>) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("barrier.a", format!("must be finite and > 0, got {a}")));
        }
        for s in &segments {
            if !s.length.is_finite() || s.length < 0.0 {
                return Err(Error::invalid(
                    "barrier.segments.length",
                    format!("must be finite and > 0, got {}", s.length),
                ));
            }
            if s.length == 0.0 {
                return Err(Error::EmptyBarrier);
            }
            if !(s.cutoff.is_finite() && s.cutoff >= 0.0) {
                return Err(Error::invalid(
                    "barrier.segments.cutoff",
                    format!("must be finite and >= 0, got {}", s.cutoff),
                ));
            }
        }
        Ok(Self { a, segments })
    }

    /// No barrier at all: `T = 1`, `R = R' = 0`.
    pub fn free(a: f64) -> Result<Self> {
        Self::new(a, Vec::new())
    }

    /// Homogeneous barrier of the given width and cutoff starting at `a`.
    pub fn square(a: f64, width: f64, mu: f64) -> Result<Self> {
        Self::new(a, vec![Segment { length: width, cutoff: mu }])
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.a + self.width()
    }

    /// Barrier width `D = b - a`.
    pub fn width(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_free(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn max_cutoff(&self) -> f64 {
        self.segments.iter().map(|s| s.cutoff).fold(0.0, f64::max)
    }

    /// Segment boundaries in cutoff order, i.e. the frequencies where some
    /// segment switches between oscillating and evanescent.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.segments.iter().map(|s| s.cutoff).filter(|&m| m > 0.0).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Same profile with every length divided and every cutoff multiplied by `s`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.a / s,
            self.segments
                .iter()
                .map(|seg| Segment { length: seg.length / s, cutoff: seg.cutoff * s })
                .collect(),
        )
    }
}

/// Plane-wave transfer matrix across the profile in local coordinates `u = z - a`.
///
/// Maps amplitudes `(A, B)` of `A exp(iku) + B exp(-iku)` on the left of the barrier
/// to the amplitudes on the right. Stored as `exp(log_scale) * m` so that very
/// opaque barriers do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: [[C64; 2]; 2],
    pub log_scale: f64,
    /// `ln |det|` accumulated factor by factor, which stays accurate when the
    /// scaled entries are too lopsided for a direct determinant.
    pub log_det: f64,
    pub kz: C64,
}

impl TransferMatrix {
    pub fn identity(kz: C64) -> Self {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        Self { m: [[one, zero], [zero, one]], log_scale: 0.0, log_det: 0.0, kz }
    }

    /// Unscaled entry; overflows to infinity for very opaque barriers.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[i][j] * self.log_scale.exp()
    }

    /// Natural log of `|det|`. Zero for real `kz`.
    pub fn log_abs_det(&self) -> f64 {
        self.log_det
    }
}

fn check_kz(kz: C64) -> Result<()> {
    if !(kz.re.is_finite() && kz.im.is_finite()) {
        return Err(Error::invalid("kz", "must be finite"));
    }
    if kz.norm() == 0.0 {
        return Err(Error::invalid("kz", "kz = 0 gives a degenerate plane-wave basis"));
    }
    Ok(())
}

type Mat2 = [[C64; 2]; 2];

fn matmul(x: &Mat2, y: &Mat2) -> Mat2 {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

fn max_abs(x: &Mat2) -> f64 {
    x.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
}

fn det(x: &Mat2) -> C64 {
    x[0][0] * x[1][1] - x[0][1] * x[1][0]
}

/// Propagator of `(v, v')` across one segment, returned as `(m, scale, ln |det m|)`
/// with the propagator equal to `exp(scale) * m`.
///
/// Only `kappa^2` enters: `cos(kL)` and `sin(kL)/k` are even in `k`, so the result
/// does not depend on the square-root branch.
fn segment_propagator(kappa_sq: C64, length: f64) -> (Mat2, f64, f64) {
    let kappa = kappa_sq.sqrt();
    let x = kappa * length;
    if x.norm() < SERIES_THRESHOLD {
        let x2 = kappa_sq * (length * length);
        let cos = 1.0 - x2 / 2.0 + x2 * x2 / 24.0;
        let sinc_l = length * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
        let m = [[cos, sinc_l], [-kappa_sq * sinc_l, cos]];
        return (m, 0.0, det(&m).norm().ln());
    }
    // exp(+-i x) scaled by exp(-|Im x|) so nothing overflows.
    let scale = x.im.abs();
    let ep = (I * x - scale).exp();
    let em = (-I * x - scale).exp();
    let cos = (ep + em) / 2.0;
    let sin = (ep - em) / (2.0 * I);
    // cos^2 + sin^2 = ep em, taken in log form since it underflows for thick barriers.
    let log_det = (I * x - scale).re + (-I * x - scale).re;
    ([[cos, sin / kappa], [-kappa * sin, cos]], scale, log_det)
}

/// Transfer matrix of `profile` at longitudinal frequency `kz` (real or complex).
pub fn transfer_matrix(profile: &BarrierProfile, kz: C64) -> Result<TransferMatrix> {
    check_kz(kz)?;
    if profile.is_free() {
        return Ok(TransferMatrix::identity(kz));
    }
    let k2 = kz * kz;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut p: Mat2 = [[one, zero], [zero, one]];
    let mut log_scale = 0.0;
    let mut log_det = 0.0;
    for seg in profile.segments() {
        let (m, s, d) = segment_propagator(k2 - seg.cutoff * seg.cutoff, seg.length);
        p = matmul(&m, &p);
        log_scale += s;
        log_det += d + 2.0 * s;
        let n = max_abs(&p);
        if !(1e-100..=1e100).contains(&n) {
            for e in p.iter_mut().flatten() {
                *e /= n;
            }
            log_scale += n.ln();
        }
    }
    let d = profile.width();
    let ikd = I * kz * d;
    let (ep, em) = (ikd.exp(), (-ikd).exp());
    let two_ik = 2.0 * I * kz;
    // S(D)^{-1} P S(0), with S(u) mapping plane-wave amplitudes to (v, v') at u.
    let s0: Mat2 = [[one, one], [I * kz, -I * kz]];
    let sd_inv: Mat2 = [[em / 2.0, em / two_ik], [ep / 2.0, -ep / two_ik]];
    let m = matmul(&sd_inv, &matmul(&p, &s0));
    log_det += det(&sd_inv).norm().ln() + det(&s0).norm().ln();
    Ok(TransferMatrix { m, log_scale, log_det, kz })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficients {
    /// Transmission, left incidence (shifted-origin convention).
    pub t: C64,
    /// Reflection, left incidence.
    pub r: C64,
    /// Reflection, right incidence.
    pub r_prime: C64,
    pub kz: C64,
    /// `ln T`; stays accurate when `t` itself underflows.
    pub log_t: C64,
    /// Set when `|T|` is below the smallest normal double and `t` is unreliable.
    pub underflow: bool,
}

impl ScatteringCoefficients {
    /// `(T, R, R')` with phases referenced to the absolute origin instead of the
    /// barrier edges: left side `exp(ikz) + R exp(-ikz)`, right side `T exp(ikz)`.
    pub fn raw(&self, profile: &BarrierProfile) -> (C64, C64, C64) {
        let k = self.kz;
        (
            self.t,
            self.r * (2.0 * I * k * profile.a()).exp(),
            self.r_prime * (-2.0 * I * k * profile.b()).exp(),
        )
    }

    /// Right-incidence transmission from the transfer matrix; equals `t`.
    pub fn t_right(&self) -> C64 {
        self.t
    }

    /// `|T|^2 + |R|^2 - 1`.
    pub fn unitarity_residual(&self) -> f64 {
        self.t.norm_sqr() + self.r.norm_sqr() - 1.0
    }

    /// Left side of the cancellation identity used to reduce the mode sum:
    /// `T R* exp(-2ik a) + T* R' exp(-2ik b)`, with `a`, `b` the barrier edges.
    pub fn b1_residual(&self, profile: &BarrierProfile) -> C64 {
        let k = self.kz;
        self.t * self.r.conj() * (-2.0 * I * k * profile.a()).exp()
            + self.t.conj() * self.r_prime * (-2.0 * I * k * profile.b()).exp()
    }
}

pub fn scattering_coefficients(profile: &BarrierProfile, kz: C64) -> Result<ScatteringCoefficients> {
    let tm = transfer_matrix(profile, kz)?;
    Ok(coefficients_from_matrix(&tm, profile.width()))
}

/// Extracts coefficients from a transfer matrix of a barrier of width `d`.
pub fn coefficients_from_matrix(tm: &TransferMatrix, d: f64) -> ScatteringCoefficients {
    let [[_, n12], [n21, n22]] = tm.m;
    let kz = tm.kz;
    let log_t = -(n22.ln()) - tm.log_scale;
    let underflow = log_t.re < f64::MIN_POSITIVE.ln();
    let t = if underflow { C64::new(0.0, 0.0) } else { log_t.exp() };
    ScatteringCoefficients {
        t,
        r: -n21 / n22,
        r_prime: n12 / n22 * (2.0 * I * kz * d).exp(),
        kz,
        log_t,
        underflow,
    }
}

/// Reduced transmission `T exp(ik D)`: the transmission with the free-flight phase
/// over the barrier width removed.
pub fn reduced_transmission(profile: &BarrierProfile, kz: C64) -> Result<C64> {
    let c = scattering_coefficients(profile, kz)?;
    Ok((c.log_t + I * kz * profile.width()).exp())
}

/// `q = sqrt(mu^2 - kz^2)` on the sheet that is positive for real `kz < mu` and
/// equals `-i sqrt(kz^2 - mu^2)` on the upper edge of the cut `kz > mu`.
pub fn evanescent_rate(mu: f64, kz: C64) -> C64 {
    let mut kappa = (kz * kz - mu * mu).sqrt();
    if kappa.im < 0.0 || (kappa.im == 0.0 && kappa.re < 0.0) {
        kappa = -kappa;
    }
    -I * kappa
}

fn check_square(mu: f64, d: f64) -> Result<()> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::invalid("mu", format!("must be > 0, got {mu}")));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("D", format!("must be > 0, got {d}")));
    }
    Ok(())
}

/// Closed-form transmission of a homogeneous barrier of width `d` and cutoff `mu`,
/// `T = e^{-ikD} e^{-Dq} (1 - e^{4ia}) / (1 - e^{4ia} e^{-2Dq})` with
/// `e^{2ia} = (k - iq)/(k + iq)`.
pub fn square_barrier_transmission(mu: f64, d: f64, kz: C64) -> Result<C64> {
    check_square(mu, d)?;
    check_kz(kz)?;
    let q = evanescent_rate(mu, kz);
    let phase = (-I * kz * d).exp();
    if (d * q).norm() < 1e-3 {
        // Removable singularity at kz = mu: T e^{ikD} = 2ik / ((k^2 - q^2) sinh(Dq)/q + 2ik cosh(Dq)).
        let x2 = d * d * q * q;
        let sinhc = d * (1.0 + x2 / 6.0 + x2 * x2 / 120.0);
        let cosh = 1.0 + x2 / 2.0 + x2 * x2 / 24.0;
        let num = 2.0 * I * kz;
        return Ok(phase * num / ((kz * kz - q * q) * sinhc + num * cosh));
    }
    let u = (kz - I * q) / (kz + I * q);
    let u2 = u * u;
    let decay = (-d * q).exp();
    Ok(phase * decay * (1.0 - u2) / (1.0 - u2 * decay * decay))
}

/// Opaque-barrier limit of the reduced transmission,
/// `e^{-Dq} [1 - ((k - iq)/mu)^4]`, valid when `exp(-2 D Re q) < threshold`.
pub fn opaque_transmission_asymptotic(mu: f64, d: f64, kz: C64) -> Result<C64> {
    opaque_transmission_asymptotic_with(mu, d, kz, DEFAULT_OPACITY_THRESHOLD)
}

pub fn opaque_transmission_asymptotic_with(mu: f64, d: f64, kz: C64, threshold: f64) -> Result<C64> {
    check_square(mu, d)?;
    if !(kz.re.is_finite() && kz.im.is_finite()) {
        return Err(Error::invalid("kz", "must be finite"));
    }
    let q = evanescent_rate(mu, kz);
    let opacity = (-2.0 * d * q.re).exp();
    if opacity >= threshold {
        return Err(Error::NotOpaqueEnough { opacity, threshold });
    }
    let w = (kz - I * q) / mu;
    let w2 = w * w;
    Ok((-d * q).exp() * (1.0 - w2 * w2))
}

/// Phase of `T` unwrapped relative to `reference`.
fn phase_near(profile: &BarrierProfile, omega: f64, reference: f64) -> Result<f64> {
    let c = scattering_coefficients(profile, C64::new(omega, 0.0))?;
    let mut ph = c.log_t.im;
    let two_pi = 2.0 * std::f64::consts::PI;
    while ph - reference > std::f64::consts::PI {
        ph -= two_pi;
    }
    while ph - reference < -std::f64::consts::PI {
        ph += two_pi;
    }
    Ok(ph)
}

/// Phase delay `d(arg T)/d omega` at a real frequency, by Richardson-extrapolated
/// central differences with successively halved steps.
pub fn wigner_phase_time(profile: &BarrierProfile, omega: f64) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::invalid("omega", format!("must be finite and > 0, got {omega}")));
    }
    let c0 = scattering_coefficients(profile, C64::new(omega, 0.0))?;
    if c0.log_t.re < f64::MIN_POSITIVE.ln() {
        return Err(Error::TransmissionUnderflow { log_abs: c0.log_t.re });
    }
    if profile.is_free() {
        return Ok(0.0);
    }
    let phi0 = c0.log_t.im;
    let central = |h: f64| -> Result<f64> {
        let p = phase_near(profile, omega + h, phi0)?;
        let m = phase_near(profile, omega - h, phi0)?;
        Ok((p - m) / (2.0 * h))
    };
    // Step small against the distance to the nearest threshold and the width scale.
    let mut h = 1e-2 * omega.min(1.0 / profile.width().max(1e-12));
    for mu in profile.thresholds() {
        let gap = (omega - mu).abs();
        if gap > 0.0 {
            h = h.min(gap / 4.0);
        }
    }
    let mut prev = central(h)?;
    let mut best = prev;
    for _ in 0..20 {
        h /= 2.0;
        let cur = central(h)?;
        let extrap = (4.0 * cur - prev) / 3.0;
        if (extrap - best).abs() <= 1e-11 * extrap.abs().max(1.0) {
            return Ok(extrap);
        }
        best = extrap;
        prev = cur;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn empty_profile_is_identity() {
        let p = BarrierProfile::free(1.0).unwrap();
        let tm = transfer_matrix(&p, c(3.0)).unwrap();
        assert_eq!(tm, TransferMatrix::identity(c(3.0)));
        let sc = scattering_coefficients(&p, c(3.0)).unwrap();
        assert_eq!(sc.t, c(1.0));
        assert_eq!(sc.r, c(0.0));
        assert_eq!(sc.r_prime, c(0.0));
    }

    #[test]
    fn rejects_zero_and_nonfinite_kz() {
        let p = BarrierProfile::square(1.0, 1.0, 2.0).unwrap();
        assert!(transfer_matrix(&p, c(0.0)).is_err());
        assert!(transfer_matrix(&p, c(f64::NAN)).is_err());
        assert!(transfer_matrix(&p, C64::new(1.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(BarrierProfile::new(0.0, vec![]).is_err());
        assert!(BarrierProfile::new(-1.0, vec![]).is_err());
        assert_eq!(
            BarrierProfile::new(1.0, vec![Segment { length: 0.0, cutoff: 1.0 }]),
            Err(Error::EmptyBarrier)
        );
        assert!(BarrierProfile::new(1.0, vec![Segment { length: 1.0, cutoff: -1.0 }]).is_err());
        let p = BarrierProfile::new(
            2.0,
            vec![Segment { length: 0.5, cutoff: 1.0 }, Segment { length: 1.5, cutoff: 3.0 }],
        )
        .unwrap();
        assert_eq!(p.b(), 4.0);
        assert_eq!(p.width(), 2.0);
        assert_eq!(p.thresholds(), vec![1.0, 3.0]);
    }

    #[test]
    fn transparent_at_high_frequency() {
        let p = BarrierProfile::square(1.0, 1.0, 2.0).unwrap();
        let mut last = 0.0;
        for k in [10.0, 100.0, 1000.0] {
            let t = scattering_coefficients(&p, c(k)).unwrap().t;
            last = (t.norm() - 1.0).abs();
        }
        assert!(last < 1e-5, "{last}");
        // Shifted convention: T itself tends to 1, with a residual phase D mu^2 / 2k.
        let far = |k: f64| (square_barrier_transmission(2.0, 1.0, c(k)).unwrap() - 1.0).norm();
        assert!(far(1e4) < 1e-3);
        assert!(far(1e5) < far(1e4) / 5.0);
    }

    #[test]
    fn square_barrier_matches_closed_form() {
        let p = BarrierProfile::square(1.0, 1.0, 2.0).unwrap();
        let sc = scattering_coefficients(&p, c(1.0)).unwrap();
        let closed = square_barrier_transmission(2.0, 1.0, c(1.0)).unwrap();
        assert!((sc.t - closed).norm() / closed.norm() < 1e-12);
        assert!(sc.unitarity_residual().abs() < 1e-12);
        assert!(sc.b1_residual(&p).norm() < 1e-12);
    }

    #[test]
    fn threshold_series_is_continuous() {
        let mu = 2.0;
        let p = BarrierProfile::square(1.0, 1.0, mu).unwrap();
        let at = square_barrier_transmission(mu, 1.0, c(mu)).unwrap();
        let tm = scattering_coefficients(&p, c(mu)).unwrap().t;
        assert!((at - tm).norm() < 1e-12);
        for eps in [1e-3, 1e-5, 1e-7] {
            for k in [mu - eps, mu + eps] {
                let v = square_barrier_transmission(mu, 1.0, c(k)).unwrap();
                assert!((v - at).norm() < 10.0 * eps, "k={k}");
            }
        }
    }

    #[test]
    fn branch_on_upper_edge() {
        let q = evanescent_rate(2.0, c(3.0));
        assert!((q - C64::new(0.0, -(5.0f64).sqrt())).norm() < 1e-14);
        let q = evanescent_rate(2.0, c(1.0));
        assert!((q - c(3.0f64.sqrt())).norm() < 1e-14);
        let q = evanescent_rate(100.0, C64::new(20.0, -0.025));
        assert!(q.re > 97.0);
    }

    #[test]
    fn opaque_asymptotic_basics() {
        assert_eq!(opaque_transmission_asymptotic(100.0, 1.0, c(0.0)).unwrap(), c(0.0));
        assert!(matches!(
            opaque_transmission_asymptotic(10.0, 0.1, c(9.99)),
            Err(Error::NotOpaqueEnough { .. })
        ));
        let exact = square_barrier_transmission(100.0, 1.0, c(20.0)).unwrap() * (I * 20.0).exp();
        let asym = opaque_transmission_asymptotic(100.0, 1.0, c(20.0)).unwrap();
        assert!((exact - asym).norm() / exact.norm() < 1e-6);
    }

    #[test]
    fn complex_frequency_matches_asymptotic() {
        let kz = C64::new(20.0, -0.025);
        let exact = square_barrier_transmission(100.0, 1.0, kz).unwrap();
        let asym = opaque_transmission_asymptotic(100.0, 1.0, kz).unwrap() * (-I * kz).exp();
        assert!((exact - asym).norm() / exact.norm() < 1e-6);
        let p = BarrierProfile::square(1.0, 1.0, 100.0).unwrap();
        let tm = reduced_transmission(&p, kz).unwrap();
        assert!((tm - asym * (I * kz).exp()).norm() / tm.norm() < 1e-6);
    }

    #[test]
    fn log_form_survives_underflow() {
        let p = BarrierProfile::square(1.0, 20.0, 100.0).unwrap();
        let sc = scattering_coefficients(&p, c(5.0)).unwrap();
        assert!(sc.underflow);
        let q = (100.0f64.powi(2) - 25.0).sqrt();
        // ln|T| ~ -D q + ln|1 - u^2|
        let u = (c(5.0) - I * q) / (c(5.0) + I * q);
        let expect = -20.0 * q + (1.0 - u * u).norm().ln();
        assert!((sc.log_t.re - expect).abs() < 1e-9 * expect.abs());
        assert!(matches!(wigner_phase_time(&p, 5.0), Err(Error::TransmissionUnderflow { .. })));
    }

    #[test]
    fn raw_accessor_phases() {
        let p = BarrierProfile::square(1.5, 1.0, 2.0).unwrap();
        let k = c(1.3);
        let sc = scattering_coefficients(&p, k).unwrap();
        let (t, r, rp) = sc.raw(&p);
        assert_eq!(t, sc.t);
        assert!((r - sc.r * (2.0 * I * k * 1.5).exp()).norm() < 1e-15);
        assert!((rp - sc.r_prime * (-2.0 * I * k * 2.5).exp()).norm() < 1e-15);
        // Raw reflection of a barrier at `a` is the shifted one times exp(2ika).
        let shifted = BarrierProfile::square(1e-9, 1.0, 2.0).unwrap();
        let sc0 = scattering_coefficients(&shifted, k).unwrap();
        assert!((sc0.r - sc.r).norm() < 1e-12);
    }

    #[test]
    fn phase_time_free_is_zero() {
        let p = BarrierProfile::free(1.0).unwrap();
        assert_eq!(wigner_phase_time(&p, 1.0).unwrap(), 0.0);
        assert!(wigner_phase_time(&p, 0.0).is_err());
    }

    #[test]
    fn phase_time_matches_dense_sampled_closed_form() {
        let p = BarrierProfile::square(1.0, 1.0, 2.0).unwrap();
        let tau = wigner_phase_time(&p, 1.0).unwrap();
        // Least-squares slope of arg T over a dense symmetric stencil of the closed form;
        // the quadratic term drops out by symmetry, the cubic enters at O(h^2).
        let n = 200;
        let h = 1e-4;
        let phi0 = square_barrier_transmission(2.0, 1.0, c(1.0)).unwrap().arg();
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for i in 0..=n {
            let x = (i as f64 - n as f64 / 2.0) * h / n as f64 * 2.0;
            let mut ph = square_barrier_transmission(2.0, 1.0, c(1.0 + x)).unwrap().arg() - phi0;
            if ph > std::f64::consts::PI {
                ph -= 2.0 * std::f64::consts::PI;
            }
            if ph < -std::f64::consts::PI {
                ph += 2.0 * std::f64::consts::PI;
            }
            sxy += x * ph;
            sxx += x * x;
        }
        let slope = sxy / sxx;
        assert!((tau - slope).abs() < 1e-6, "{tau} vs {slope}");
    }

    #[test]
    fn determinant_has_unit_modulus_for_real_kz() {
        let layered = BarrierProfile::new(
            0.5,
            vec![Segment { length: 0.3, cutoff: 4.0 }, Segment { length: 0.8, cutoff: 1.5 }],
        )
        .unwrap();
        let opaque = BarrierProfile::square(0.5, 40.0, 50.0).unwrap();
        for p in [&layered, &opaque] {
            for kz in [0.3, 1.5, 4.0, 7.0] {
                let d = transfer_matrix(p, c(kz)).unwrap().log_abs_det();
                assert!(d.abs() < 1e-12, "{d}");
            }
        }
        let near_top = transfer_matrix(&layered, c(1.5 + 1e-7)).unwrap().log_abs_det();
        assert!(near_top.abs() < 1e-12);
    }
}
