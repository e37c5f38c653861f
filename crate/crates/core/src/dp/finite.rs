use alloc::vec::Vec;

use crate::dp::{TIE_TOL, argmin_with_ties, robust_stage, worst_case_kernel};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{McmModel, Policy};

/// Output of the backward minimax recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteHorizonResult {
    /// `value_functions[j]` is `V_j`; the last entry is the terminal vector.
    pub value_functions: Vec<Vec<f64>>,
    /// `greedy_policies[j]` attains the minimum defining `V_j`.
    pub greedy_policies: Vec<Policy>,
    pub terminal: Vec<f64>,
    /// Per stage, the largest gap between `V_j` and the same stage computed
    /// through an explicit worst-case kernel.
    pub kernel_check: Vec<f64>,
}

impl FiniteHorizonResult {
    pub fn horizon(&self) -> usize {
        self.greedy_policies.len()
    }
}

/// Runs `V_j(x) = min_u { f(x,u) + max_{Q in ball} Σ Q·V_{j+1} }` backwards
/// from `V_horizon = terminal`.
pub fn finite_horizon_solve(model: &McmModel, horizon: usize, terminal: &[f64]) -> Result<FiniteHorizonResult> {
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    let mut values = Vec::with_capacity(horizon + 1);
    let mut policies = Vec::with_capacity(horizon);
    let mut check = Vec::with_capacity(horizon);
    values.push(terminal.to_vec());
    for _ in 0..horizon {
        let next = values.last().unwrap();
        let (v, g) = robust_stage(model, next)?;

        let wc = worst_case_kernel(model, next)?;
        let gap = (0..model.n_states())
            .map(|x| {
                let q = |u: usize| model.cost(x, u) + dot(wc.row(x, u), next);
                let u = argmin_with_ties(model.feasible(x), None, TIE_TOL, q);
                (q(u) - v[x]).abs()
            })
            .fold(0.0, f64::max);

        values.push(v);
        policies.push(g);
        check.push(gap);
    }
    values.reverse();
    policies.reverse();
    check.reverse();
    Ok(FiniteHorizonResult {
        value_functions: values,
        greedy_policies: policies,
        terminal: terminal.to_vec(),
        kernel_check: check,
    })
}
