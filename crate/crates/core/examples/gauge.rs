//! Recovering Ricci flow from the DeTurck flow: diffeomorphisms, the residual
//! of the pulled-back flow and the drift of the gauge as `t ↓ 0`.

use roughflow::analysis::{residual_report, rigidity_probe, solve};
use roughflow::flow::FlowConfig;
use roughflow::gauge::{drift_fit, integrate_diffeo, GaugeOptions};
use roughflow::rough::{generate, RoughKind, RoughSpec};
use roughflow::{MetricField, TorusGrid};

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 64)?;
    let flat = MetricField::flat(&grid);
    let smooth = generate(&grid, &RoughSpec { kind: RoughKind::SmoothFourier, amplitude: 0.02, ..RoughSpec::default() })?;
    let gt = integrate_diffeo(&solve(&smooth, &flat, &FlowConfig::default())?, &GaugeOptions::default())?;
    print!("{}", residual_report(&gt, 1e-3, 0.5)?.summary());

    let rough = generate(&grid, &RoughSpec { alpha: 0.1, amplitude: 0.03, ..RoughSpec::default() })?;
    let gt = integrate_diffeo(&solve(&rough, &flat, &FlowConfig::default())?, &GaugeOptions::default())?;
    let d = drift_fit(&gt, 0.0)?;
    println!("drift ~ {:.3e} (sqrt t2 - sqrt t1)^(2·{:.3})", d.constant, d.exponent);
    println!("limit map known to within {:.3e}", gt.limit_error);
    print!("{}", rigidity_probe(&gt)?.summary());
    Ok(())
}
