//! The β-weak lower curvature diagnostic `inf_C liminf_t min_{B(x, Ct^β)} R`.

use roughflow::analysis::{beta_weak_inf, solve, BetaWeakQuery};
use roughflow::flow::FlowConfig;
use roughflow::geometry::scalar_curvature;
use roughflow::rough::smooth_metric;
use roughflow::{MetricField, TorusGrid};

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 64)?;
    let g0 = smooth_metric(&grid, 0.02, 2, 1)?;
    let r0 = scalar_curvature(&g0);
    let p = (0..grid.len()).min_by(|a, b| r0[*a].total_cmp(&r0[*b])).unwrap();
    let x = grid.coord(p);
    let traj = solve(&g0, &MetricField::flat(&grid), &FlowConfig::default())?;
    let q = BetaWeakQuery { point: vec![x[0], x[1]], beta: 0.3, c_list: vec![0.5, 1.0, 2.0], times: None };
    let rep = beta_weak_inf(&traj, &q)?;
    print!("{}", rep.summary());
    println!("classical R(g0)(x) = {:.6e}", r0[p]);
    Ok(())
}
