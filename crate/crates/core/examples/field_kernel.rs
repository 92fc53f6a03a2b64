//! The no-barrier field kernel: numeric commutator against the light-cone
//! closed form, and the product-form identity.

use tunnelcorr::amplitude::{commutator_kernel, NumericKernel};
use tunnelcorr::{AmplitudeMode, BarrierProfile, Geometry, Model, SourceParams};

fn main() -> tunnelcorr::Result<()> {
    let model = Model::new(SourceParams::new(20.0, 0.05, 1.0)?, Geometry { z: 40.0 }, BarrierProfile::free(1.0)?)?;
    let kernel = NumericKernel::new(&model)?;
    let t = 60.0;
    println!("{:>6} {:>12} {:>12} {:>10}", "t1", "|numeric|", "|closed|", "err est");
    for t1 in [1.0, 5.0, 10.0, 15.0, 19.5, 20.5, 22.0] {
        let num = kernel.commutator(t, t1)?;
        let closed = commutator_kernel(&model, t, t1, AmplitudeMode::NoBarrierClosed)?;
        println!("{t1:>6} {:>12.4e} {:>12.4e} {:>10.1e}", num.value.norm(), closed.norm(), num.error_estimate);
    }
    let prod = kernel.product(47.0)?;
    let comm = kernel.commutator(47.0, 0.0)?;
    println!("product + commutator at t = 47: {:.2e}", (prod.value + comm.value).norm());
    Ok(())
}
