//! A small Monte Carlo ensemble of the stochastic heat equation.

use fracspde::kernels::ModelParams;
use fracspde::sim::{estimate_moments, simulate_paths, SimConfig};

fn main() -> fracspde::Result<()> {
    let mut cfg = SimConfig::new(ModelParams::builder().h(0.35).build()?);
    cfg.n_paths = 100;
    cfg.n_modes = 256;
    cfg.n_time = 300;
    cfg.seed = 7;
    cfg.n_chaos_ref = 2;
    let ens = simulate_paths(&cfg)?;
    for w in &ens.warnings {
        eprintln!("warning: {w}");
    }
    let est = estimate_moments(&ens, &[2, 4])?;
    for (p, (m, se)) in &est.moments {
        println!("E|u|^{p} = {m:.4} +- {se:.4}");
    }
    if let Some((v, _)) = est.reference_second_moment {
        println!("chaos series, two terms: {v:.4}");
    }
    if let (Some(s), Some(t)) = (est.space_holder_slope, est.time_holder_slope) {
        println!("Hölder: space {:.3} +- {:.3}, time {:.3} +- {:.3}", s.0, s.1, t.0, t.1);
    }
    Ok(())
}
