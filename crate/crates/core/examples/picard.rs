//! Picard iteration of the mild formulation against the method of lines.

use roughflow::flow::{mol_evolve, picard_solve, FlowConfig, SolverKind};
use roughflow::rough::{generate, RoughSpec};
use roughflow::{MetricField, TorusGrid};

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 32)?;
    let g0 = generate(&grid, &RoughSpec { amplitude: 0.02, ..RoughSpec::default() })?;
    let flat = MetricField::flat(&grid);
    let cfg = FlowConfig { solver: SolverKind::Picard, output_steps: 16, ..FlowConfig::default() };
    let out = picard_solve(&g0, &flat, &cfg)?;
    println!("converged = {} after {} iterations", out.converged, out.iterations);
    println!("contraction ratios {:?}", out.trajectory.contraction_ratios);
    let mol = mol_evolve(&g0, &flat, &FlowConfig { solver: SolverKind::Mol, ..cfg })?;
    let gap = out
        .trajectory
        .states
        .iter()
        .zip(&mol.states)
        .map(|(a, b)| a.difference(b).map(|d| d.max_abs_entry()))
        .collect::<roughflow::Result<Vec<_>>>()?;
    println!("max |g_picard - g_mol| = {:.3e}", gap.iter().cloned().fold(0.0, f64::max));
    Ok(())
}
