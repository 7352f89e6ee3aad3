//! Existence verdicts, moment-growth and Hölder exponents for a few classical models.

use fracspde::kernels::ModelParams;
use fracspde::regimes::regime_report;

fn main() -> fracspde::Result<()> {
    let cases = [
        ("heat, H = 0.3", ModelParams::builder().h(0.3).build()?),
        ("heat, H = 0.2", ModelParams::builder().h(0.2).build()?),
        ("heat, H0 = 0.7, H = 0.2", ModelParams::builder().h0(0.7).h(0.2).build()?),
        ("wave, alpha = 2, H = 0.3", ModelParams::builder().beta(2.0).h(0.3).build()?),
        ("slow, beta = 0.5", ModelParams::builder().beta(0.5).alpha(1.2).h(0.4).build()?),
    ];
    for (name, p) in &cases {
        let r = regime_report(p);
        print!("{name:<26} exists {:<5} margin {:+.3}", r.exists, r.margin);
        if let (Some(rho), Some(kappa)) = (r.rho_capped, r.kappa_capped) {
            print!("  theta {:.3}  rho {rho:.3}  kappa {kappa:.3}", r.theta);
        }
        println!();
    }
    Ok(())
}
