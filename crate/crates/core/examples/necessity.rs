//! The second chaos diverges with the frequency cutoff once H0 + H <= 3/4.

use fracspde::chaos::cutoff_doubling;
use fracspde::kernels::ModelParams;

fn main() -> fracspde::Result<()> {
    for h in [0.2, 0.3] {
        let p = ModelParams::builder().h(h).build()?;
        let s = cutoff_doubling(&p, 2, 0.5, 1e6, 3)?;
        println!("H = {h}: divergent {}", s.divergent);
        for (c, v) in s.cutoffs.iter().zip(&s.values) {
            println!("  cutoff {c:>9.0}: {v:.6}");
        }
    }
    Ok(())
}
