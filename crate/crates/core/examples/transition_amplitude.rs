//! Amplitudes for absorbing a photon of frequency omega: the running integral
//! of the field and its two-time version, from the sampled spectral field.

use tunnelcorr::amplitude::script_m;
use tunnelcorr::spectral::SpectralField;
use tunnelcorr::{AmplitudeMode, BarrierProfile, Geometry, Model, SourceParams};

fn main() -> tunnelcorr::Result<()> {
    let model = Model::new(SourceParams::new(20.0, 0.05, 1.0)?, Geometry { z: 40.0 }, BarrierProfile::free(1.0)?)?;
    let field = SpectralField::build(&model, 120.0)?;
    println!("{} spectral nodes up to {:.1}", field.len(), field.cut());
    for omega in [19.9, 20.0, 20.02, 20.1] {
        let num = field.script_m(omega, 100.0);
        let closed = script_m(&model, omega, 100.0, AmplitudeMode::NoBarrierClosed)?;
        println!("omega {omega:>6}: |M| numeric {:.5e}  closed {:.5e}", num.norm(), closed.norm());
    }
    println!("M(t1 = 50, t2 = 95) = {:.4e}", field.m_amplitude(20.0, 50.0, 95.0));
    Ok(())
}
