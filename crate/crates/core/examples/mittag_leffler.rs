//! Mittag-Leffler values on both sides of the series/asymptotic crossover.

use fracspde::mlf::{ml_eval, ml_weighted_derivative, MLQuery, MittagLeffler};

fn main() -> fracspde::Result<()> {
    let e = MittagLeffler::new(0.8, 1.0)?;
    println!("E_0.8,1 crossover at |z|^(1/a) = {:.3}", e.config().crossover);
    for z in [-0.5, -2.0, -10.0, -50.0, -400.0] {
        let r = e.eval(z, 1e-14)?;
        println!("z = {z:>7}: {:.15e}  ({:?})", r.value, r.method);
    }

    // E_{2,1}(-x^2) is cos x
    let x = 3.0f64;
    let v = ml_eval(MLQuery::new(2.0, 1.0, -x * x))?.value;
    println!("E_2,1(-9) = {v:.15}, cos 3 = {:.15}", x.cos());

    // d/dz [z^(b-1) E_{a,b}(lam z^a)] = z^(b-2) E_{a,b-1}(lam z^a)
    let (a, b, lam, z) = (0.6, 1.4, -1.5, 0.8);
    let d = ml_weighted_derivative(a, b, lam, z, 1)?;
    println!("weighted derivative at z = {z}: {d:.12}");
    Ok(())
}
