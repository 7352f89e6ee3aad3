//! First two chaos norms when the noise is also fractional in time.

use fracspde::chaos::chaos_norm_fractional;
use fracspde::kernels::ModelParams;

fn main() -> fracspde::Result<()> {
    for h0 in [0.6, 0.7, 0.9] {
        let p = ModelParams::builder().h0(h0).h(0.3).build()?;
        let n1 = chaos_norm_fractional(&p, 1, 0.5)?;
        let n2 = chaos_norm_fractional(&p, 2, 0.5)?;
        println!("H0 = {h0}: n = 1 {:.8}, n = 2 {:.8} +- {:.1e}", n1.value, n2.value, n2.abs_err);
    }
    Ok(())
}
