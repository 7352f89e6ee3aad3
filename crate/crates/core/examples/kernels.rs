//! Fourier-space fundamental solutions and their weighted energies.

use fracspde::kernels::{fourier_y, j0, weighted_energy, ModelParams};

fn main() -> fracspde::Result<()> {
    let cases = [
        ("heat", ModelParams::builder().build()?),
        ("subdiffusive", ModelParams::builder().beta(0.6).alpha(1.5).build()?),
        ("wave", ModelParams::builder().beta(2.0).alpha(1.8).h(0.4).build()?),
    ];
    for (name, p) in &cases {
        println!("{name}: F Y(1, xi)");
        for xi in [0.0, 1.0, 3.0, 10.0] {
            println!("  xi = {xi:>4}: {:+.6e}", fourier_y(p, 1.0, xi)?);
        }
        let a = p.spectral_exponent();
        let e1 = weighted_energy(p, 0.5, a)?;
        let e2 = weighted_energy(p, 1.0, a)?;
        let slope = (e2.value / e1.value).log2();
        let want = 2.0 * p.b() - 2.0 - p.beta() * (a + 1.0) / p.alpha();
        println!("  energy slope in t: {slope:.8} (scaling law {want:.8}), J0(1) = {}", j0(p, 1.0));
    }
    Ok(())
}
