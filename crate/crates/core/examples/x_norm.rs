//! The X norm of a flow: ball census, per-ball terms and the aggregate.

use roughflow::analysis::{norm_report, solve};
use roughflow::flow::FlowConfig;
use roughflow::rough::{generate, RoughSpec};
use roughflow::{MetricField, TorusGrid};

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 32)?;
    let g0 = generate(&grid, &RoughSpec::default())?;
    let traj = solve(&g0, &MetricField::flat(&grid), &FlowConfig::default())?;
    let rep = norm_report(&traj, 6)?;
    print!("{}", rep.summary());
    let balls = rep.table("balls").expect("ball table");
    let worst = balls.rows.iter().max_by(|a, b| a[6].total_cmp(&b[6])).expect("non-empty census");
    println!("largest term: center {} radius {:.4} value {:.4e}", worst[0], worst[1], worst[6]);
    Ok(())
}
