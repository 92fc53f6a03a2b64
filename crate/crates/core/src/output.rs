//! File formats. Every CSV starts with a `# tunnelcorr <kind> v<N>` line so
//! downstream readers can pin the column layout. Numbers are written in Rust's
//! shortest round-trip form, so equal inputs give byte-identical files.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::amplitude::{AmplitudeMode, Model};
use crate::correlation::{
    extract_delta_line, fit_weight, reference_mode, tunneling_observables, CorrelationGrid, DeltaLine, TunnelingObservables,
    WeightFit,
};
use crate::error::Result;
use crate::scattering::{self, BarrierProfile, ScatteringCoefficients};
use num_complex::Complex64 as C64;

pub const SCATTER_CSV_VERSION: u32 = 1;
pub const GRID_CSV_VERSION: u32 = 1;
pub const SCATTER_HEADER: &str = "kz_re,kz_im,T_re,T_im,R_re,R_im,Rp_re,Rp_im,absT2";

/// Coefficients over a list of real frequencies.
pub fn scatter_sweep(profile: &BarrierProfile, kz: &[f64]) -> Result<Vec<ScatteringCoefficients>> {
    kz.iter()
        .map(|&k| scattering::scattering_coefficients(profile, C64::new(k, 0.0)))
        .collect()
}

/// Shortest round-trip form, scientific outside `[1e-4, 1e15)`; `-0` prints as `0`.
struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let x = self.0 + 0.0;
        let a = x.abs();
        if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
            write!(f, "{x}")
        } else {
            write!(f, "{x:e}")
        }
    }
}

fn z(x: f64) -> Num {
    Num(x)
}

pub fn write_scatter_csv<W: Write>(mut w: W, rows: &[ScatteringCoefficients]) -> Result<()> {
    writeln!(w, "# tunnelcorr scatter v{SCATTER_CSV_VERSION}")?;
    writeln!(w, "{SCATTER_HEADER}")?;
    for c in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            z(c.kz.re),
            z(c.kz.im),
            z(c.t.re),
            z(c.t.im),
            z(c.r.re),
            z(c.r.im),
            z(c.r_prime.re),
            z(c.r_prime.im),
            z(c.t.norm_sqr())
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max: f64,
    pub mean: f64,
}

impl ResidualStats {
    fn from_values(v: impl Iterator<Item = f64>) -> Self {
        let (mut max, mut sum, mut n) = (0.0_f64, 0.0, 0usize);
        for x in v {
            max = max.max(x);
            sum += x;
            n += 1;
        }
        Self {
            max,
            mean: if n == 0 { 0.0 } else { sum / n as f64 },
        }
    }
}

/// JSON header written next to a scatter CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterHeader {
    pub format: String,
    pub profile: BarrierProfile,
    pub b: f64,
    pub width: f64,
    pub samples: usize,
    pub unitarity_residual: ResidualStats,
    pub b1_residual: ResidualStats,
    pub underflow_rows: usize,
}

impl ScatterHeader {
    pub fn new(profile: &BarrierProfile, rows: &[ScatteringCoefficients]) -> Self {
        Self {
            format: format!("tunnelcorr scatter v{SCATTER_CSV_VERSION}"),
            profile: profile.clone(),
            b: profile.b(),
            width: profile.width(),
            samples: rows.len(),
            unitarity_residual: ResidualStats::from_values(rows.iter().map(|c| c.unitarity_residual())),
            b1_residual: ResidualStats::from_values(rows.iter().map(|c| c.b1_residual(profile).norm())),
            underflow_rows: rows.iter().filter(|c| c.underflow).count(),
        }
    }
}

pub fn write_grid_csv<W: Write>(mut w: W, grid: &CorrelationGrid) -> Result<()> {
    writeln!(w, "# tunnelcorr grid v{GRID_CSV_VERSION} mode={}", grid.mode)?;
    let with_ref = grid.p_reference.is_some();
    writeln!(w, "t1,t2,p,w{}", if with_ref { ",p_ref" } else { "" })?;
    let n2 = grid.t2_axis.len();
    for (i, t1) in grid.t1_axis.iter().enumerate() {
        for (j, t2) in grid.t2_axis.iter().enumerate() {
            let k = i * n2 + j;
            write!(w, "{},{},{},{}", z(*t1), z(*t2), z(grid.p_values[k]), z(grid.w_values[k]))?;
            if let Some(r) = &grid.p_reference {
                write!(w, ",{}", z(r[k]))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Result summary of a correlation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub complete: bool,
    pub delay: Option<f64>,
    pub weight_fit: Option<WeightFit>,
    pub barrier_traversal_time: Option<f64>,
    pub clock_tunneling_time: Option<f64>,
    /// `|RT(Omega - i Gamma/2)|^2` when the profile admits the opaque form, 1 without barrier.
    pub transmission_mod2: Option<f64>,
    pub wigner_phase_time: Option<f64>,
    pub band_width: Option<f64>,
    pub errors: Vec<String>,
}

impl Summary {
    pub fn failed(mode: &str, error: String) -> Self {
        Self {
            mode: mode.into(),
            complete: false,
            delay: None,
            weight_fit: None,
            barrier_traversal_time: None,
            clock_tunneling_time: None,
            transmission_mod2: None,
            wigner_phase_time: None,
            band_width: None,
            errors: vec![error],
        }
    }

    pub fn from_line(mode: &str, line: &DeltaLine, fit: Option<WeightFit>, obs: &TunnelingObservables) -> Self {
        Self {
            mode: mode.into(),
            complete: true,
            delay: Some(line.delay),
            weight_fit: fit,
            barrier_traversal_time: Some(obs.barrier_traversal_time),
            clock_tunneling_time: Some(obs.clock_tunneling_time),
            transmission_mod2: None,
            wigner_phase_time: None,
            band_width: Some(line.band_width),
            errors: Vec::new(),
        }
    }
}

/// Extracts the delta line of a filled grid and collects the run's observables.
///
/// Failures to find a line or fit its weight are recorded in `errors` and leave
/// `complete` false, so the grid can still be written alongside.
pub fn summarize(model: &Model, grid: &CorrelationGrid, band_width: f64) -> Summary {
    let mode = grid.mode.to_string();
    let mut summary = match extract_delta_line(grid, band_width) {
        Ok(line) => {
            let obs = tunneling_observables(&line, model.geometry.z, model.profile.width());
            let mut s = Summary::from_line(&mode, &line, None, &obs);
            match fit_weight(&line) {
                Ok(fit) => s.weight_fit = Some(fit),
                Err(e) => {
                    s.complete = false;
                    s.errors.push(format!("weight fit: {e}"));
                }
            }
            s
        }
        Err(e) => Summary::failed(&mode, format!("delta line: {e}")),
    };
    summary.transmission_mod2 = match reference_mode(model) {
        Some(AmplitudeMode::NoBarrierClosed) => Some(1.0),
        Some(_) => model.opaque_factor().ok().map(|t| t.norm_sqr()),
        None => None,
    };
    summary.wigner_phase_time = scattering::wigner_phase_time(&model.profile, model.source.omega).ok();
    summary
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| crate::error::Error::Io(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_sweep_is_trivial() {
        let p = BarrierProfile::free(1.0).unwrap();
        let rows = scatter_sweep(&p, &[0.5, 1.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_scatter_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# tunnelcorr scatter v1");
        assert_eq!(lines[1], SCATTER_HEADER);
        assert_eq!(lines[2], "0.5,0,1,0,0,0,0,0,1");
        let h = ScatterHeader::new(&p, &rows);
        assert_eq!(h.unitarity_residual.max, 0.0);
    }

    #[test]
    fn grid_csv_layout() {
        let axis = vec![0.0, 1.0, 2.0];
        let mut g = CorrelationGrid::from_values(axis.clone(), axis, vec![0.0; 9], crate::amplitude::AmplitudeMode::Numeric).unwrap();
        g.p_reference = Some(vec![1.0; 9]);
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# tunnelcorr grid v1 mode=numeric\nt1,t2,p,w,p_ref\n0,0,0,0,1\n"));
        assert_eq!(text.lines().count(), 11);
    }

    #[test]
    fn number_format() {
        assert_eq!(Num(-0.0).to_string(), "0");
        assert_eq!(Num(41.5).to_string(), "41.5");
        assert_eq!(Num(1.25e-90).to_string(), "1.25e-90");
        assert_eq!(Num(-3e20).to_string(), "-3e20");
    }

    #[test]
    fn closed_summary_and_failure_marker() {
        use crate::amplitude::{Geometry, SourceParams};
        use crate::correlation::{fill_grid, Axis};
        let m = Model::new(SourceParams::new(20.0, 0.05, 1.0).unwrap(), Geometry { z: 40.0 }, BarrierProfile::free(1.0).unwrap()).unwrap();
        let g = fill_grid(&m, &Axis::new(41.0, 81.0, 0.5).unwrap(), &Axis::new(81.0, 121.0, 0.5).unwrap(), AmplitudeMode::NoBarrierClosed).unwrap();
        let s = summarize(&m, &g, 0.5);
        assert!(s.complete);
        assert!((s.delay.unwrap() - 40.0).abs() < 0.5);
        assert!((s.weight_fit.unwrap().gamma / 0.05 - 1.0).abs() < 1e-2);
        assert_eq!(s.transmission_mod2, Some(1.0));
        assert_eq!(s.clock_tunneling_time.map(|c| c.abs() < 0.5), Some(true));

        let flat = CorrelationGrid::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0], vec![0.0; 9], AmplitudeMode::Numeric).unwrap();
        let s = summarize(&m, &flat, 0.5);
        assert!(!s.complete);
        assert!(s.errors[0].starts_with("delta line"));
        let mut buf = Vec::new();
        write_json(&mut buf, &s).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("\"complete\": false"));
    }
}
