//! The two integral shapes of the pipeline: a Lorentzian pole just below the
//! real axis over the half line, and a fast oscillation on a finite interval.

use num_complex::Complex64 as C64;
use tunnelcorr::quadrature::{integrate_oscillatory_with, integrate_pole_semiinfinite, OscillatoryMethod};
use tunnelcorr::QuadratureConfig;

fn main() -> tunnelcorr::Result<()> {
    let cfg = QuadratureConfig::default();
    let (omega, gamma, s) = (20.0, 0.05, 30.0);
    let pole = C64::new(omega, -gamma / 2.0);

    let f = |w: f64| (C64::new(0.0, -w * s)).exp();
    let r = integrate_pole_semiinfinite(&f, pole, s, &cfg)?;
    let residue = -2.0 * std::f64::consts::PI * C64::i() * (-C64::i() * pole * s).exp();
    println!("pole integral  {:.10}  err {:.1e}  tail {:.1e}  evals {}", r.value, r.error_estimate, r.tail_estimate, r.evaluations);
    println!("residue term   {residue:.10}");

    let g = |x: C64| 1.0 / (1.0 + x);
    for method in [OscillatoryMethod::Direct, OscillatoryMethod::Rotated] {
        let r = integrate_oscillatory_with(&g, 0.0, 3.0, 400.0, &[], &cfg, method)?;
        println!("{method:?}: {:.14}  err {:.1e}  evals {}", r.value, r.error_estimate, r.evaluations);
    }
    Ok(())
}
