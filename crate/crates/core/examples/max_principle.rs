//! Lower bounds on scalar curvature along the flow.

use roughflow::analysis::{max_principle_check, solve, InitialBound};
use roughflow::flow::FlowConfig;
use roughflow::rough::conformal_bump_with_min_curvature;
use roughflow::{MetricField, TorusGrid};

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 64)?;
    let g0 = conformal_bump_with_min_curvature(&grid, 2, -1.0)?;
    let cfg = FlowConfig { epsilon_guard: 0.3, ..FlowConfig::default() };
    let traj = solve(&g0, &MetricField::flat(&grid), &cfg)?;
    let rep = max_principle_check(&traj, InitialBound::Smooth(-1.0), None);
    print!("{}", rep.summary());
    for row in rep.table("bounds").expect("bounds").rows.iter().step_by(8) {
        println!("t = {:.4}  min R = {:+.5}  bound = {:+.5}", row[0], row[1], row[4]);
    }
    Ok(())
}
