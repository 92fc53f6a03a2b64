//! Numeric correlation grid without a barrier: delta line at t2 - t1 = z with
//! weight decaying at the source rate.

use std::time::Instant;

use tunnelcorr::correlation::{fit_weight, tunneling_observables};
use tunnelcorr::{fill_grid, AmplitudeMode, Axis, BarrierProfile, Geometry, Model, SourceParams};

fn main() -> tunnelcorr::Result<()> {
    let model = Model::new(SourceParams::new(20.0, 0.05, 1.0)?, Geometry { z: 40.0 }, BarrierProfile::free(1.0)?)?;
    let h = 0.5;
    let start = Instant::now();
    let grid = fill_grid(&model, &Axis::new(41.0, 61.0, h)?, &Axis::new(71.0, 111.0, h)?, AmplitudeMode::Numeric)?;
    println!("{} points in {:.1} s", grid.p_values.len(), start.elapsed().as_secs_f64());

    let reference = grid.p_reference.as_ref().unwrap();
    let dev = grid.p_values.iter().zip(reference).map(|(p, r)| ((p - r) / r).abs()).fold(0.0, f64::max);
    println!("max relative deviation from the closed form: {dev:.2e}");

    let line = tunnelcorr::correlation::extract_delta_line(&grid, h)?;
    let fit = fit_weight(&line)?;
    let obs = tunneling_observables(&line, model.geometry.z, 0.0);
    println!("delay {:.4}, fitted Gamma {:.6}, clock time {:.4}", line.delay, fit.gamma, obs.clock_tunneling_time);
    let (t1, w) = line.weight_profile[0];
    let expected = (-0.05 * t1).exp() / (8.0 * std::f64::consts::PI * 1600.0);
    println!("line weight at t1 = {t1}: {w:.4e} (closed form {expected:.4e})");
    Ok(())
}
