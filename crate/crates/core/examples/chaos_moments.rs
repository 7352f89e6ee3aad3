//! Chaos norms of the heat equation and the truncated second moment.

use fracspde::chaos::{chaos_bound_white, chaos_norm_white, second_moment_truncated};
use fracspde::kernels::ModelParams;

fn main() -> fracspde::Result<()> {
    let p = ModelParams::builder().h(0.35).build()?;
    let t = 0.5;
    for n in 1..=3 {
        let r = chaos_norm_white(&p, n, t)?;
        let bound = chaos_bound_white(&p, n, t)?;
        println!("n = {n}: {:.10} +- {:.1e}  (explicit bound {bound:.4})", r.value, r.abs_err);
    }
    let m = second_moment_truncated(&p, t, 3)?;
    println!("E|u(0.5, x)|^2 ~ {:.6} +- {:.1e} with three chaoses", m.value, m.abs_err);
    Ok(())
}
