//! Existence over the (H0, H) plane for the heat equation, written as an SVG.

use std::collections::BTreeMap;

use fracspde::cli::{parse_grid, sweep, sweep_svg};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let axes = parse_grid("H0=0.5:0.98:0.02,H=0.02:0.48:0.02")?;
    let rows = sweep(&BTreeMap::new(), &axes)?;
    let inside = rows.iter().filter(|r| r.1.exists).count();
    println!("{inside} of {} grid points satisfy the existence condition", rows.len());
    let path = std::env::temp_dir().join("fracspde_phase.svg");
    std::fs::write(&path, sweep_svg(&axes, &rows)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
