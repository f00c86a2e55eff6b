//! Picard iteration for the integral form of the flow,
//! `h(t) = e^{tΔ}h₀ + ∫₀ᵗ e^{(t−s)Δ}(Q⁰_s + div Q¹_s) ds`.

use num_complex::Complex64;

use super::rhs::{background_sup_norm, divergence_with, q_terms_unchecked};
use super::{check_start, graded_times, FlowConfig, FlowTrajectory};
use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensorField};
use crate::heat::heat_symbol;
use crate::norms::{x_norm, NormOptions};
use crate::spectral::{dealias_coeffs, forward, inverse, wavevector};

/// Iteration nodes `t_j = T (j/N)^2`, `j = 0..=N`.
pub fn picard_nodes(config: &FlowConfig) -> Vec<f64> {
    let mut t = vec![0.0];
    t.extend(graded_times(config.final_time, config.output_steps));
    t
}

type Coeffs = Vec<Vec<Complex64>>;

fn to_coeffs(h: &SymTensorField) -> Coeffs {
    h.packed().iter().map(|c| forward(h.grid(), c)).collect()
}

fn from_coeffs(grid: &crate::grid::TorusGrid, c: &Coeffs) -> Result<SymTensorField> {
    SymTensorField::from_packed(grid, c.iter().map(|v| inverse(grid, v.clone())).collect())
}

/// One application of the integral operator `F[h, h₀]` on the node lattice.
///
/// `iterate` holds `h` at every node of [`picard_nodes`] (including `t = 0`);
/// the result is `F[h, h₀]` at the same nodes. The time integral is the
/// composite trapezoid rule, applied in Fourier space.
pub fn picard_map(
    iterate: &[SymTensorField],
    h0: &SymTensorField,
    background: &MetricField,
    config: &FlowConfig,
) -> Result<Vec<SymTensorField>> {
    let nodes = picard_nodes(config);
    if iterate.len() != nodes.len() {
        return Err(Error::ShapeMismatch(format!("expected {} nodes, got {}", nodes.len(), iterate.len())));
    }
    let grid = *h0.grid();
    let d = grid.dim();
    let binv = background.inverse().at(0);
    let kvecs: Vec<[f64; 3]> = (0..grid.len()).map(|i| wavevector(&grid, i)).collect();
    let multiplier = |dt: f64| -> Vec<f64> { kvecs.iter().map(|k| heat_symbol(&binv, d, k, dt)).collect() };
    let mut q_hat: Vec<Coeffs> = Vec::with_capacity(nodes.len());
    for h in iterate {
        let norm = background_sup_norm(h, background);
        if !(norm < 1.0) {
            return Err(Error::GammaExceeded { norm });
        }
        let q = q_terms_unchecked(h, background, None, None)?;
        let total = q.q0.add(&divergence_with(&q.q1, None)?)?;
        let mut c = to_coeffs(&total);
        if config.dealias {
            for comp in &mut c {
                dealias_coeffs(&grid, comp);
            }
        }
        q_hat.push(c);
    }
    let h0_hat = to_coeffs(h0);
    let mut out = vec![h0.clone()];
    // I_j = E(Δt_j) I_{j−1} + Δt_j/2 (E(Δt_j) Q_{j−1} + Q_j)
    let mut integral: Coeffs = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; h0_hat.len()];
    for j in 1..nodes.len() {
        let dt = nodes[j] - nodes[j - 1];
        let e = multiplier(dt);
        let full = multiplier(nodes[j]);
        let mut state = h0_hat.clone();
        for c in 0..integral.len() {
            for m in 0..grid.len() {
                integral[c][m] = e[m] * (integral[c][m] + q_hat[j - 1][c][m] * (0.5 * dt)) + q_hat[j][c][m] * (0.5 * dt);
                state[c][m] = h0_hat[c][m] * full[m] + integral[c][m];
            }
        }
        out.push(from_coeffs(&grid, &state)?);
    }
    Ok(out)
}

/// Result of a Picard solve.
#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: FlowTrajectory,
    pub iterations: usize,
    /// `‖h_i − h_{i−1}‖_X` for every iteration.
    pub differences: Vec<f64>,
    pub converged: bool,
}

/// Iterates `h_i = F[h_{i−1}, h₀]` from `h = 0` until the X-norm of successive
/// differences drops below `config.tol` or `config.max_iterations` is reached.
pub fn picard_solve(g0: &MetricField, background: &MetricField, config: &FlowConfig) -> Result<PicardOutcome> {
    let h0 = check_start(g0, background, config)?;
    let grid = *g0.grid();
    let nodes = picard_nodes(config);
    let mut current = vec![SymTensorField::zeros(&grid); nodes.len()];
    let opts = NormOptions::new(config.final_time);
    let mut differences: Vec<f64> = Vec::new();
    let mut rises = 0;
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let next = picard_map(&current, &h0, background, config)?;
        let diff: Vec<SymTensorField> =
            next[1..].iter().zip(&current[1..]).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        let dx = x_norm(&nodes[1..], &diff, &opts)?.aggregate;
        if let Some(&prev) = differences.last() {
            if dx >= prev {
                rises += 1;
            } else {
                rises = 0;
            }
        }
        differences.push(dx);
        current = next;
        if dx < config.tol {
            converged = true;
            break;
        }
        if rises >= 3 {
            return Err(Error::NoContraction { history: differences });
        }
    }
    let states = current[1..]
        .iter()
        .map(|h| background.perturbed(h))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = differences.windows(2).map(|w| w[1] / w[0]).collect();
    let trajectory = FlowTrajectory {
        times: nodes[1..].to_vec(),
        states,
        initial: g0.clone(),
        background: background.clone(),
        config: config.clone(),
        seed: None,
        contraction_ratios: ratios,
    };
    Ok(PicardOutcome { trajectory, iterations: differences.len(), differences, converged })
}
