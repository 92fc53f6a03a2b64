//! Joint click probabilities `p(t1, t2)`, their density `w = d2p / dt1 dt2`, and
//! the delta line along which `w` concentrates.
//!
//! `t1` is the time of the source click (the source found in its ground state)
//! and `t2` the time of the detector click. In the leading-order theory `w`
//! vanishes except on a line `t2 - t1 = tau`, so the useful summary of a grid is
//! the delay `tau` and the weight carried by the line as a function of `t1`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{AmplitudeMode, Model};
use crate::error::{Error, Result};
use crate::spectral::{aligned_step, JointSolver, SpectralField};

/// Uniform axis `min, min + step, ..` up to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Axis {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let a = Self { min, max, step };
        a.validate("axis")?;
        Ok(a)
    }

    pub fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return Err(Error::invalid(name, "bounds and step must be finite"));
        }
        if !(self.step > 0.0 && self.max >= self.min) {
            return Err(Error::invalid(name, "need step > 0 and max >= min"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.min + i as f64 * self.step).collect()
    }
}

/// Closed-form joint probability: `C (1 - exp(-Gamma (t2 - L)))` before the line
/// `t2 = t1 + L`, `C (1 - exp(-Gamma t1))` after it, with `C = norm |RT(p)|^2 / (8 pi L^2 Gamma)`.
pub fn closed_p(norm: f64, gamma: f64, l: f64, transmission_mod2: f64, t1: f64, t2: f64) -> f64 {
    let c = norm * transmission_mod2 / (8.0 * PI * l * l * gamma);
    if t2 - t1 <= l {
        c * -(-gamma * (t2 - l)).exp_m1()
    } else {
        c * -(-gamma * t1).exp_m1()
    }
}

fn closed_reference(model: &Model, mode: AmplitudeMode) -> Result<(f64, f64)> {
    match mode {
        AmplitudeMode::NoBarrierClosed => {
            model.check_mode(mode)?;
            Ok((model.geometry.z, 1.0))
        }
        AmplitudeMode::OpaqueAsymptotic => Ok((model.reduced_distance(), model.opaque_factor()?.norm_sqr())),
        AmplitudeMode::Numeric => Err(Error::invalid("mode", "numeric mode has no closed form")),
    }
}

/// The closed mode matching the model's profile, if any.
pub fn reference_mode(model: &Model) -> Option<AmplitudeMode> {
    if model.profile.is_free() {
        Some(AmplitudeMode::NoBarrierClosed)
    } else if model.opaque_factor().is_ok() {
        Some(AmplitudeMode::OpaqueAsymptotic)
    } else {
        None
    }
}

/// `p(t1, t2) = norm int_0^inf |M_w(t1, t2)|^2 dw`.
pub fn p_joint(model: &Model, t1: f64, t2: f64, mode: AmplitudeMode) -> Result<f64> {
    model.check_light_cone(t1)?;
    model.check_light_cone(t2)?;
    if mode == AmplitudeMode::Numeric {
        let field = SpectralField::build(model, t2.max(t1))?;
        let dt = aligned_step(&[t1, t2], field.default_step())?;
        let solver = JointSolver::new(&field, dt, t2.max(t1), model.source.norm)?;
        return solver.p_joint(t1, t2);
    }
    let (l, tm2) = closed_reference(model, mode)?;
    Ok(closed_p(model.source.norm, model.source.gamma, l, tm2, t1, t2))
}

/// Probability of a detector click before `t2`, whatever the source does.
pub fn single_click_rate(model: &Model, t2: f64, mode: AmplitudeMode) -> Result<f64> {
    p_joint(model, t2, t2, mode)
}

/// Sampled `p` and `w` on a rectangular `(t1, t2)` grid, stored row-major in `t1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub t1_axis: Vec<f64>,
    pub t2_axis: Vec<f64>,
    pub p_values: Vec<f64>,
    pub w_values: Vec<f64>,
    /// Closed-form `p` on the same points when one applies to the profile.
    pub p_reference: Option<Vec<f64>>,
    pub mode: AmplitudeMode,
}

impl CorrelationGrid {
    /// Builds a grid from explicit values and fills `w` by finite differences.
    pub fn from_values(t1_axis: Vec<f64>, t2_axis: Vec<f64>, p_values: Vec<f64>, mode: AmplitudeMode) -> Result<Self> {
        if p_values.len() != t1_axis.len() * t2_axis.len() {
            return Err(Error::invalid("p_values", "length must be len(t1) * len(t2)"));
        }
        if t1_axis.len() < 3 || t2_axis.len() < 3 {
            return Err(Error::invalid("axis", "need at least 3 points per axis"));
        }
        let w_values = mixed_derivative(&t1_axis, &t2_axis, &p_values);
        Ok(Self {
            t1_axis,
            t2_axis,
            p_values,
            w_values,
            p_reference: None,
            mode,
        })
    }

    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p_values[i * self.t2_axis.len() + j]
    }

    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w_values[i * self.t2_axis.len() + j]
    }

    pub fn step(&self) -> f64 {
        self.t2_axis[1] - self.t2_axis[0]
    }

    /// Trapezoid integral of `w` over the whole grid.
    pub fn total_weight(&self) -> f64 {
        let (n1, n2) = (self.t1_axis.len(), self.t2_axis.len());
        let h1 = self.t1_axis[1] - self.t1_axis[0];
        let h2 = self.step();
        let mut acc = 0.0;
        for i in 0..n1 {
            let wi = if i == 0 || i == n1 - 1 { 0.5 } else { 1.0 };
            for j in 0..n2 {
                let wj = if j == 0 || j == n2 - 1 { 0.5 } else { 1.0 };
                acc += wi * wj * self.w(i, j);
            }
        }
        acc * h1 * h2
    }

    /// `p` increments over the grid corners, what `total_weight` approximates.
    pub fn corner_weight(&self) -> f64 {
        let (n1, n2) = (self.t1_axis.len() - 1, self.t2_axis.len() - 1);
        self.p(n1, n2) - self.p(0, n2) - self.p(n1, 0) + self.p(0, 0)
    }
}

fn gradient(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                (values[1] - values[0]) / h
            } else if k == n - 1 {
                (values[n - 1] - values[n - 2]) / h
            } else {
                (values[k + 1] - values[k - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// `d2p / dt1 dt2` by central differences, one-sided at the edges.
fn mixed_derivative(t1: &[f64], t2: &[f64], p: &[f64]) -> Vec<f64> {
    let (n1, n2) = (t1.len(), t2.len());
    let h1 = t1[1] - t1[0];
    let h2 = t2[1] - t2[0];
    let mut d2 = Vec::with_capacity(n1 * n2);
    for row in p.chunks(n2) {
        d2.extend(gradient(row, h2));
    }
    let mut w = vec![0.0; n1 * n2];
    let mut col = vec![0.0; n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col[i] = d2[i * n2 + j];
        }
        for (i, v) in gradient(&col, h1).into_iter().enumerate() {
            w[i * n2 + j] = v;
        }
    }
    w
}

/// Fills `p` and `w` on the grid spanned by the two axes.
///
/// Numeric mode samples the field once on a time grid fine enough for the
/// spectral band and aligned with both axes, then does one FFT per point.
pub fn fill_grid(model: &Model, t1: &Axis, t2: &Axis, mode: AmplitudeMode) -> Result<CorrelationGrid> {
    t1.validate("grids.t1")?;
    t2.validate("grids.t2")?;
    model.check_light_cone(t1.min)?;
    model.check_light_cone(t2.min)?;
    let t1_axis = t1.values();
    let t2_axis = t2.values();
    let n2 = t2_axis.len();
    let points: Vec<(f64, f64)> = t1_axis.iter().flat_map(|&a| t2_axis.iter().map(move |&b| (a, b))).collect();

    let p_values: Vec<f64> = if mode == AmplitudeMode::Numeric {
        let t_max = t1_axis.last().unwrap().max(*t2_axis.last().unwrap());
        let field = SpectralField::build(model, t_max)?;
        let dt = aligned_step(&[t1.min, t1.step, t2.min, t2.step], field.default_step())?;
        let solver = JointSolver::new(&field, dt, t_max, model.source.norm)?;
        points
            .par_chunks(n2)
            .map_init(Vec::new, |buf, row| {
                row.iter().map(|&(a, b)| solver.p_joint_with(a, b, buf)).collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<Vec<f64>>>>()?
            .into_iter()
            .flatten()
            .collect()
    } else {
        let (l, tm2) = closed_reference(model, mode)?;
        points
            .iter()
            .map(|&(a, b)| closed_p(model.source.norm, model.source.gamma, l, tm2, a, b))
            .collect()
    };
    let mut grid = CorrelationGrid::from_values(t1_axis, t2_axis, p_values, mode)?;
    if let Some(rm) = reference_mode(model) {
        let (l, tm2) = closed_reference(model, rm)?;
        grid.p_reference = Some(
            points
                .iter()
                .map(|&(a, b)| closed_p(model.source.norm, model.source.gamma, l, tm2, a, b))
                .collect(),
        );
    }
    Ok(grid)
}

/// The concentration of `w` on a line `t2 = t1 + delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaLine {
    pub delay: f64,
    /// `(t1, W(t1))`: the weight of the line, i.e. the jump of `dp/dt2` across it.
    pub weight_profile: Vec<(f64, f64)>,
    pub band_width: f64,
    /// Mean line weight at the chosen delay and the median over all delays.
    pub peak: f64,
    pub background: f64,
}

/// `W(t1) = amplitude * exp(-gamma t1)` fitted to a weight profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFit {
    pub amplitude: f64,
    pub gamma: f64,
}

/// Locates the delta line of a grid.
///
/// For each candidate delay `tau` on the grid lattice the line weight is taken
/// as the jump of `dp/dt2` between one step below and one step above the line,
/// `W = dp/dt2 (t1 + h, t1 + tau) - dp/dt2 (t1 - h, t1 + tau)`. The delay with
/// the largest mean weight wins and is refined by a parabola through its
/// neighbours.
pub fn extract_delta_line(grid: &CorrelationGrid, band_width: f64) -> Result<DeltaLine> {
    let (n1, n2) = (grid.t1_axis.len(), grid.t2_axis.len());
    if n1 < 3 || n2 < 3 {
        return Err(Error::invalid("grid", "need at least 3 points per axis"));
    }
    let h = grid.step();
    let h1 = grid.t1_axis[1] - grid.t1_axis[0];
    if (h1 - h).abs() > 1e-9 * h {
        return Err(Error::invalid("grid", "t1 and t2 axes must share their step"));
    }
    let off = (grid.t2_axis[0] - grid.t1_axis[0]) / h;
    if (off - off.round()).abs() > 1e-6 {
        return Err(Error::invalid("grid", "axis origins must differ by a multiple of the step"));
    }
    let d2 = |i: usize, j: usize| (grid.p(i, j + 1) - grid.p(i, j - 1)) / (2.0 * h);
    let line = |d: i64| -> Vec<(f64, f64)> {
        (1..n1 - 1)
            .filter_map(|i| {
                let j = i as i64 + d;
                (j >= 1 && j < n2 as i64 - 1).then(|| {
                    let j = j as usize;
                    (grid.t1_axis[i], d2(i + 1, j) - d2(i - 1, j))
                })
            })
            .collect()
    };
    let scores: Vec<(i64, f64)> = (-(n1 as i64) + 2..n2 as i64 - 1)
        .filter_map(|d| {
            let l = line(d);
            (!l.is_empty()).then(|| (d, l.iter().map(|x| x.1).sum::<f64>() / l.len() as f64))
        })
        .collect();
    if scores.is_empty() {
        return Err(Error::invalid("grid", "axes do not overlap on any candidate line"));
    }
    let mut mags: Vec<f64> = scores.iter().map(|s| s.1.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let background = mags[mags.len() / 2];
    let (best, &(d_best, peak)) = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap();
    if !(peak > 0.0 && peak > 10.0 * background) {
        return Err(Error::NoConcentration { peak, background });
    }
    let mut shift = 0.0;
    if best > 0 && best + 1 < scores.len() {
        let (sm, sp) = (scores[best - 1].1, scores[best + 1].1);
        let denom = sm - 2.0 * peak + sp;
        if denom < 0.0 {
            shift = (0.5 * (sm - sp) / denom).clamp(-0.5, 0.5);
        }
    }
    let delay = grid.t2_axis[0] - grid.t1_axis[0] + (d_best as f64 + shift) * h;
    Ok(DeltaLine {
        delay,
        weight_profile: line(d_best),
        band_width,
        peak,
        background,
    })
}

/// Log-linear least squares on the positive part of the weight profile.
pub fn fit_weight(line: &DeltaLine) -> Result<WeightFit> {
    let pts: Vec<(f64, f64)> = line.weight_profile.iter().filter(|p| p.1 > 0.0).map(|&(t, w)| (t, w.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::invalid("weight_profile", "need two positive weights to fit"));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("weight_profile", "weights sampled at a single time"));
    }
    let slope = sxy / sxx;
    Ok(WeightFit {
        amplitude: (my - slope * mx).exp(),
        gamma: -slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunnelingObservables {
    pub arrival_delay: f64,
    /// Free flight time over the full source-detector distance.
    pub vacuum_time: f64,
    /// Arrival delay minus the free flight time outside the barrier.
    pub barrier_traversal_time: f64,
    /// Arrival delay minus the free flight time over the same distance.
    pub clock_tunneling_time: f64,
}

pub fn tunneling_observables(delta: &DeltaLine, z: f64, barrier_width: f64) -> TunnelingObservables {
    TunnelingObservables {
        arrival_delay: delta.delay,
        vacuum_time: z,
        barrier_traversal_time: delta.delay - (z - barrier_width),
        clock_tunneling_time: delta.delay - z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::{script_m, Geometry, SourceParams};
    use crate::quadrature::{integrate_adaptive, QuadratureConfig};
    use crate::scattering::BarrierProfile;

    fn model(omega: f64, gamma: f64) -> Model {
        let src = SourceParams::new(omega, gamma, 1.0).unwrap();
        Model::new(src, Geometry { z: 40.0 }, BarrierProfile::free(1.0).unwrap()).unwrap()
    }

    const CLOSED: AmplitudeMode = AmplitudeMode::NoBarrierClosed;

    #[test]
    fn closed_p_saturates() {
        let m = model(20.0, 0.05);
        let sat = 1.0 / (8.0 * PI * 1600.0 * 0.05);
        let p = p_joint(&m, 2000.0, 2000.0 + 40.0 - 1e-9, CLOSED).unwrap();
        assert!((p / sat - 1.0).abs() < 1e-12);
        let edge = p_joint(&m, 500.0, 41.0, CLOSED).unwrap();
        assert!((edge - sat * (1.0 - (-0.05_f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn single_click_half_saturation() {
        let m = model(20.0, 0.05);
        let sat = 1.0 / (8.0 * PI * 1600.0 * 0.05);
        let t = 40.0 + 2f64.ln() / 0.05;
        assert!((single_click_rate(&m, t, CLOSED).unwrap() / sat - 0.5).abs() < 1e-12);
        let m0 = model(20.0, 0.05).with_margin(0.0).unwrap();
        assert_eq!(single_click_rate(&m0, 40.0, CLOSED).unwrap(), 0.0);
    }

    #[test]
    fn single_click_matches_frequency_quadrature() {
        // Narrow line, so the part of the Lorentzian at negative frequency is negligible.
        let m = model(20.0, 1e-3);
        let t2 = 1040.0;
        let cfg = QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-16,
            max_subdivisions: 20_000,
            ..Default::default()
        };
        let f = |w: f64| num_complex::Complex64::new(script_m(&m, w, t2, CLOSED).unwrap().norm_sqr(), 0.0);
        let bps: Vec<f64> = [-30.0, -3.0, 0.0, 3.0, 30.0].iter().map(|k| 20.0 + k * 1e-3).collect();
        let r = integrate_adaptive(&f, 0.0, 200.0, &bps, &cfg);
        let closed = single_click_rate(&m, t2, CLOSED).unwrap();
        assert!((r.value.re / closed - 1.0).abs() < 1e-4, "{}", r.value.re / closed - 1.0);
    }

    #[test]
    fn numeric_p_matches_closed_form() {
        let m = model(20.0, 0.05);
        let num = p_joint(&m, 50.0, 95.0, AmplitudeMode::Numeric).unwrap();
        let closed = p_joint(&m, 50.0, 95.0, CLOSED).unwrap();
        assert!((num / closed - 1.0).abs() < 1e-2);
    }

    #[test]
    fn closed_grid_delta_line() {
        let m = model(20.0, 0.05);
        let g = fill_grid(&m, &Axis::new(41.0, 81.0, 0.5).unwrap(), &Axis::new(75.0, 121.0, 0.5).unwrap(), CLOSED).unwrap();
        let line = extract_delta_line(&g, 0.5).unwrap();
        assert!((line.delay - 40.0).abs() < 0.05, "{}", line.delay);
        let fit = fit_weight(&line).unwrap();
        assert!((fit.gamma / 0.05 - 1.0).abs() < 1e-6);
        let expected = 1.0 / (8.0 * PI * 1600.0);
        assert!((fit.amplitude / expected - 1.0).abs() < 2e-2);
        for (t1, w) in &line.weight_profile {
            assert!((w / (expected * (-0.05 * t1).exp()) - 1.0).abs() < 2e-2);
        }
        let obs = tunneling_observables(&line, 40.0, 0.0);
        assert!(obs.clock_tunneling_time.abs() < 0.05 && obs.barrier_traversal_time == obs.clock_tunneling_time);
    }

    #[test]
    fn opaque_grid_delta_line() {
        let src = SourceParams::new(20.0, 0.05, 1.0).unwrap();
        let m = Model::new(src, Geometry { z: 40.0 }, BarrierProfile::square(1.0, 1.0, 100.0).unwrap()).unwrap();
        let g = fill_grid(&m, &Axis::new(41.0, 81.0, 0.5).unwrap(), &Axis::new(75.0, 121.0, 0.5).unwrap(), AmplitudeMode::OpaqueAsymptotic)
            .unwrap();
        let line = extract_delta_line(&g, 0.5).unwrap();
        assert!((line.delay - 39.0).abs() < 0.05);
        let tm2 = m.opaque_factor().unwrap().norm_sqr();
        let fit = fit_weight(&line).unwrap();
        assert!((fit.amplitude / (tm2 / (8.0 * PI * 39.0 * 39.0)) - 1.0).abs() < 2e-2);
        let obs = tunneling_observables(&line, 40.0, 1.0);
        assert!(obs.barrier_traversal_time.abs() < 0.05);
        assert!((obs.clock_tunneling_time - obs.barrier_traversal_time + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_grid_has_no_concentration() {
        let axis: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let g = CorrelationGrid::from_values(axis.clone(), axis, vec![0.0; 100], CLOSED).unwrap();
        assert!(matches!(extract_delta_line(&g, 1.0), Err(Error::NoConcentration { .. })));
    }

    #[test]
    fn total_weight_equals_corner_increments() {
        let m = model(20.0, 0.05);
        let g = fill_grid(&m, &Axis::new(41.0, 61.0, 0.5).unwrap(), &Axis::new(75.0, 101.0, 0.5).unwrap(), CLOSED).unwrap();
        assert!((g.total_weight() / g.corner_weight() - 1.0).abs() < 2e-2);
        for w in &g.w_values {
            assert!(*w >= -1e-12);
        }
    }

    #[test]
    fn grid_requires_light_cone() {
        let m = model(20.0, 0.05);
        let r = fill_grid(&m, &Axis::new(40.5, 60.0, 0.5).unwrap(), &Axis::new(75.0, 101.0, 0.5).unwrap(), CLOSED);
        assert!(matches!(r, Err(Error::LightCone { .. })));
    }
}
