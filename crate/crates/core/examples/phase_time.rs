//! Phase delay d(arg T)/d omega of square barriers of growing width, next to
//! the free-flight time over the same width.

use tunnelcorr::scattering::wigner_phase_time;
use tunnelcorr::BarrierProfile;

fn main() -> tunnelcorr::Result<()> {
    let (mu, omega) = (2.0, 1.0);
    println!("{:>6} {:>14} {:>14}", "D", "phase time", "phase + D");
    for d in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let p = BarrierProfile::square(1.0, d, mu)?;
        let tau = wigner_phase_time(&p, omega)?;
        // With edge-referenced phases the free flight -D is part of arg T.
        println!("{d:>6} {tau:>14.8} {:>14.8}", tau + d);
    }
    Ok(())
}
