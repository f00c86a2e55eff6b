//! Method-of-lines evolution of Hölder data and its trajectory snapshot.

use roughflow::container::{load_trajectory, save_trajectory};
use roughflow::flow::{mol_evolve, FlowConfig};
use roughflow::rough::{generate, RoughSpec};
use roughflow::{MetricField, TorusGrid};

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 64)?;
    let g0 = generate(&grid, &RoughSpec::default())?;
    let flat = MetricField::flat(&grid);
    let traj = mol_evolve(&g0, &flat, &FlowConfig::default())?;
    for (t, g) in traj.times.iter().zip(&traj.states).step_by(4) {
        println!("t = {t:.5}  sup|g - δ| = {:.5e}", g.difference(&flat)?.max_abs_entry());
    }
    let path = std::env::temp_dir().join("roughflow_mol_example.bin");
    save_trajectory(&path, &traj)?;
    let back = load_trajectory(&path)?;
    println!("snapshot at {} holds {} stored times", path.display(), back.len());
    Ok(())
}
