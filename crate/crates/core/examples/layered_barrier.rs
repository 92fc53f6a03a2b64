//! A three-layer barrier: flux conservation, reciprocity and log-form
//! transmission deep in the tunneling regime.

use num_complex::Complex64 as C64;
use tunnelcorr::scattering::{scattering_coefficients, transfer_matrix};
use tunnelcorr::validate::{mirrored, scattering_residuals};
use tunnelcorr::{BarrierProfile, Segment};

fn main() -> tunnelcorr::Result<()> {
    let profile = BarrierProfile::new(
        0.5,
        vec![
            Segment { length: 0.3, cutoff: 4.0 },
            Segment { length: 0.8, cutoff: 1.5 },
            Segment { length: 0.2, cutoff: 6.0 },
        ],
    )?;
    println!("{:>6} {:>12} {:>12} {:>10} {:>10}", "kz", "|T|^2", "|R|^2", "unitarity", "T-T'");
    for kz in [0.5, 1.0, 1.5, 3.0, 5.0, 8.0] {
        let c = scattering_coefficients(&profile, C64::new(kz, 0.0))?;
        let [u, rec, _] = scattering_residuals(&profile, kz, None)?;
        println!("{kz:>6} {:>12.6e} {:>12.6e} {u:>10.1e} {rec:>10.1e}", c.t.norm_sqr(), c.r.norm_sqr());
    }

    let deep = BarrierProfile::new(0.5, vec![Segment { length: 40.0, cutoff: 50.0 }])?;
    let c = scattering_coefficients(&deep, C64::new(1.0, 0.0))?;
    println!("opaque: log|T| = {:.3}, underflow = {}", c.log_t.re, c.underflow);
    println!("det of the transfer matrix, log|det| = {:.2e}", transfer_matrix(&deep, C64::new(1.0, 0.0))?.log_abs_det());
    println!("mirror has {} segments", mirrored(&profile).segments().len());
    Ok(())
}
