//! The Ricci–DeTurck flow engine.

mod mol;
mod picard;
mod rhs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{MetricField, SymTensorField};
use crate::grid::TorusGrid;

pub use mol::mol_evolve;
pub use picard::{picard_map, picard_solve, PicardOutcome};
pub use rhs::{
    background_laplacian, background_sup_norm, curvature_action, divergence, q_terms, split_rhs, strong_rhs,
    QTerms,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Picard,
    Mol,
}

/// Solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub final_time: f64,
    pub solver: SolverKind,
    /// Number of stored times `t_j = T (j/M)^2`, `j = 1..=M`; also the Picard node count.
    pub output_steps: usize,
    /// Largest method-of-lines substep.
    pub max_dt: f64,
    /// Picard stopping tolerance in the X norm.
    pub tol: f64,
    /// Upper bound on `‖g₀ − ḡ‖_∞` accepted by the solvers.
    pub epsilon_guard: f64,
    pub max_iterations: usize,
    /// Apply 2/3-rule truncation to the nonlinear terms.
    pub dealias: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            final_time: 0.1,
            solver: SolverKind::Mol,
            output_steps: 32,
            max_dt: 2.5e-4,
            tol: 1e-9,
            epsilon_guard: 0.05,
            max_iterations: 50,
            dealias: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.final_time > 0.0 && self.final_time <= 1.0) {
            return bad("final_time must lie in (0, 1]");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.epsilon_guard > 0.0 && self.epsilon_guard < 1.0) {
            return bad("epsilon_guard must lie in (0, 1)");
        }
        if self.output_steps < 4 {
            return bad("output_steps must be at least 4");
        }
        if !(self.max_dt > 0.0) {
            return bad("max_dt must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        Ok(())
    }

    /// The stored-time lattice `t_j = T (j/M)^2`, `j = 1..=M`.
    pub fn times(&self) -> Vec<f64> {
        graded_times(self.final_time, self.output_steps)
    }
}

/// `T (j/m)^2` for `j = 1..=m`.
pub fn graded_times(final_time: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|j| final_time * (j as f64 / m as f64).powi(2)).collect()
}

/// A computed flow: states `g(t_j)` on the stored lattice plus the data it came from.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MetricField>,
    pub initial: MetricField,
    pub background: MetricField,
    pub config: FlowConfig,
    pub seed: Option<u64>,
    /// Ratios of successive Picard differences in the X norm (empty for method of lines).
    pub contraction_ratios: Vec<f64>,
}

impl FlowTrajectory {
    pub fn grid(&self) -> &TorusGrid {
        self.initial.grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `h(t_j) = g(t_j) − ḡ`.
    pub fn perturbations(&self) -> Vec<SymTensorField> {
        self.states.iter().map(|g| g.difference(&self.background).expect("shared grid")).collect()
    }

    pub fn initial_perturbation(&self) -> SymTensorField {
        self.initial.difference(&self.background).expect("shared grid")
    }

    /// Keeps only stored times `≤ t_max`.
    pub fn truncated(&self, t_max: f64) -> FlowTrajectory {
        let keep = self.times.iter().take_while(|t| **t <= t_max).count();
        let mut out = self.clone();
        out.times.truncate(keep);
        out.states.truncate(keep);
        out
    }

    /// Checks strictly increasing times and the bilipschitz guard.
    pub fn check_invariants(&self) -> Result<()> {
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument("trajectory times must increase strictly".into()));
            }
        }
        for (t, g) in self.times.iter().zip(&self.states) {
            let norm = background_sup_norm(&g.difference(&self.background)?, &self.background);
            if !(norm < 1.0) {
                return Err(Error::StepUnstable { time: *t, norm });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_start(g0: &MetricField, background: &MetricField, config: &FlowConfig) -> Result<SymTensorField> {
    config.validate()?;
    if g0.grid() != background.grid() {
        return Err(Error::ShapeMismatch("initial metric and background live on different grids".into()));
    }
    if !background.is_constant() {
        return Err(Error::InvalidArgument("the solvers require a constant background metric".into()));
    }
    let h0 = g0.difference(background)?;
    let norm = background_sup_norm(&h0, background);
    if !(norm < config.epsilon_guard) {
        return Err(Error::InvalidArgument(format!(
            "‖g₀ − ḡ‖ = {norm:.4e} is not below epsilon_guard = {}",
            config.epsilon_guard
        )));
    }
    Ok(h0)
}
