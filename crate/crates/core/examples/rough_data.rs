//! Generators of rough initial metrics, with the measured Hölder exponent of `g₁₁`.

use roughflow::geometry::scalar_curvature;
use roughflow::rough::{generate, hoelder_exponent, resolved_octaves, RoughKind, RoughSpec};
use roughflow::TorusGrid;

fn main() -> roughflow::Result<()> {
    let grid = TorusGrid::new(2, 128)?;
    for kind in [RoughKind::HoelderFourier, RoughKind::SmoothFourier, RoughKind::FlatPullback, RoughKind::ConformalBump] {
        let spec = RoughSpec { kind, amplitude: 0.03, alpha: 0.3, ..RoughSpec::default() };
        let g = generate(&grid, &spec)?;
        let (alpha, _) = hoelder_exponent(&grid, g.sym().get(0, 0), resolved_octaves(&grid));
        let r = scalar_curvature(&g);
        let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        println!("{kind:?}: sup|g - δ| = {:.4}  fitted α = {alpha:.3}  R in [{lo:.3e}, {hi:.3e}]", g.difference(&roughflow::MetricField::flat(&grid))?.max_abs_entry());
    }
    Ok(())
}
