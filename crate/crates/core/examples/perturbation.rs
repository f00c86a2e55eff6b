//! Curvature difference of two metrics agreeing to second order at a point,
//! measured on balls shrinking like `C t^β`.

use roughflow::analysis::{perturbation_stability, StabilityQuery};
use roughflow::flow::FlowConfig;
use roughflow::rough::{generate, second_order_pair, RoughSpec};
use roughflow::TorusGrid;

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 64)?;
    let base = generate(&grid, &RoughSpec { alpha: 0.3, amplitude: 0.02, ..RoughSpec::default() })?;
    let pair = second_order_pair(&base, &[3.0, 3.0], 1.0, 0.02, 1, Some(3.0))?;
    let q = StabilityQuery { beta: 0.4, c_list: vec![4.0, 8.0], fixed_radius: 1.0, max_residual: 0.2, fit_fraction: 0.25 };
    let rep = perturbation_stability(&pair, &q, &FlowConfig::default())?;
    print!("{}", rep.summary());
    Ok(())
}
