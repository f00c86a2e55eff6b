//! Heat kernel of the flat torus: the two series, the self-check and the
//! Gaussian upper bound `Φ(x, t) ≤ C t^{−n/2} e^{−|x|²/Dt}`.

use std::f64::consts::TAU;

use roughflow::heat::{fourier_series_1d, gaussian_bound_report, image_sum_1d, kernel_check, kernel_value, KernelQuery};
use roughflow::TorusGrid;

fn main() -> roughflow::Result<()> {
    for (d, t) in [(0.0, 0.25), (1.0, 0.05), (3.0, 1.0)] {
        println!(
            "d = {d}, t = {t}: fourier {:.12}  images {:.12}  2D value {:.12}",
            fourier_series_1d(d, t, TAU),
            image_sum_1d(d, t, TAU),
            kernel_value(&KernelQuery::radial(2, TAU, d, t))?
        );
    }
    for item in kernel_check()? {
        println!("{:<16} {:.3e} (tol {:.0e})", item.name, item.value, item.tolerance);
    }
    let rep = gaussian_bound_report(&TorusGrid::new(2, 32)?, (1e-3, 1.0), 12)?;
    print!("{}", rep.summary());
    Ok(())
}
