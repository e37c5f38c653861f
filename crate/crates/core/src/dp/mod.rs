//! Dynamic programming under kernel ambiguity: worst-case kernels, the
//! finite-horizon minimax recursion, policy evaluation and the two policy
//! iteration schemes.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{Kernel, McmModel, Policy};
use crate::tv_ball::{self, SupportPartition};

mod evaluate;
mod finite;
mod iteration;
mod simulate;

pub use evaluate::{
    Evaluation, EvaluationFailure, FailureKind, Gain, average_cost_of_policy, evaluate_multichain, evaluate_unichain,
    multichain_residuals, unichain_residual,
};
pub use finite::{FiniteHorizonResult, finite_horizon_solve};
pub use iteration::{
    CERTIFY_TOL, Improvement, IterationRecord, IterationReport, PiOptions, Residuals, StopReason, general_residuals,
    lexicographic_partition, policy_iteration_general, policy_iteration_unichain, unichain_dp_residual,
};
pub use simulate::simulate_average_cost;

/// Default tolerance for argmin ties.
pub const TIE_TOL: f64 = 1e-9;

/// Largest default iteration cap.
pub const MAX_ITER_CAP: usize = 10_000;

fn check_values(model: &McmModel, values: &[f64]) -> Result<()> {
    if values.len() != model.n_states() {
        return Err(Error::DimensionMismatch { expected: model.n_states(), found: values.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Water-fills every feasible row of the nominal kernel against one shared
/// partition. Infeasible rows are copied unchanged.
pub fn worst_case_kernel_with(model: &McmModel, partition: &SupportPartition) -> Result<Kernel> {
    tv_ball::check_radius(model.radius)?;
    let mut kernel = model.kernel.clone();
    for x in 0..model.n_states() {
        for &u in model.feasible(x) {
            let nominal = model.kernel.row(x, u);
            tv_ball::check_distribution(nominal)?;
            let (row, _) = tv_ball::waterfill_with_partition(nominal, partition, model.radius);
            kernel.row_mut(x, u).copy_from_slice(&row);
        }
    }
    Ok(kernel)
}

/// The kernel that maximises expected `values` row by row within the
/// model's radius.
pub fn worst_case_kernel(model: &McmModel, values: &[f64]) -> Result<Kernel> {
    check_values(model, values)?;
    worst_case_kernel_with(model, &tv_ball::partition_support(values))
}

/// Picks the minimiser of `value` over `candidates`, keeping `incumbent`
/// when it is within `tol` of the minimum and otherwise taking the first
/// candidate within `tol`.
pub(crate) fn argmin_with_ties(
    candidates: &[usize],
    incumbent: Option<usize>,
    tol: f64,
    value: impl Fn(usize) -> f64,
) -> usize {
    let best = candidates.iter().map(|&u| value(u)).fold(f64::INFINITY, f64::min);
    if let Some(u) = incumbent
        && candidates.contains(&u)
        && value(u) <= best + tol
    {
        return u;
    }
    *candidates.iter().find(|&&u| value(u) <= best + tol).expect("no candidate controls")
}

/// One stage of the minimax recursion:
/// `min_u { f(x,u) + max_{ν in ball} Σ ν·values }` with its greedy policy.
pub fn robust_stage(model: &McmModel, values: &[f64]) -> Result<(Vec<f64>, Policy)> {
    check_values(model, values)?;
    let mut out = Vec::with_capacity(model.n_states());
    let mut policy = Vec::with_capacity(model.n_states());
    for x in 0..model.n_states() {
        let mut q = Vec::new();
        for &u in model.feasible(x) {
            q.push((u, model.cost(x, u) + tv_ball::max_linear_payoff(model.kernel.row(x, u), values, model.radius)?));
        }
        let lookup = |u: usize| q.iter().find(|(v, _)| *v == u).unwrap().1;
        let u = argmin_with_ties(model.feasible(x), None, TIE_TOL, lookup);
        out.push(lookup(u));
        policy.push(u);
    }
    Ok((out, Policy::new(policy)))
}

/// One stage in oscillator form:
/// `min_u { f(x,u) + Σ Q°·values + (R/2)·osc(values) }`.
///
/// This is an upper bound on [`robust_stage`]; the two coincide while the
/// drained mass fits inside the nominal mass of the argmin set.
pub fn oscillator_stage(model: &McmModel, values: &[f64]) -> Result<Vec<f64>> {
    check_values(model, values)?;
    tv_ball::check_radius(model.radius)?;
    Ok((0..model.n_states())
        .map(|x| {
            model
                .feasible(x)
                .iter()
                .map(|&u| model.cost(x, u) + tv_ball::oscillator_payoff(model.kernel.row(x, u), values, model.radius))
                .fold(f64::INFINITY, f64::min)
        })
        .collect())
}

/// `f(x,u) + Σ kernel(x,u)·values` for every feasible pair; `None` elsewhere.
pub(crate) fn q_table(model: &McmModel, kernel: &Kernel, values: &[f64], with_cost: bool) -> Vec<Vec<Option<f64>>> {
    (0..model.n_states())
        .map(|x| {
            (0..model.n_controls())
                .map(|u| {
                    model.is_feasible(x, u).then(|| {
                        let c = if with_cost { model.cost(x, u) } else { 0.0 };
                        c + dot(kernel.row(x, u), values)
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::fixtures::*;
    use alloc::vec;

    fn ninths(rows: [[f64; 3]; 3]) -> Matrix {
        Matrix::from_rows(&rows.map(|r| r.map(|v| v / 9.0)))
    }

    #[test]
    fn worst_case_kernel_of_irreducible_example() {
        let k = worst_case_kernel(&irreducible_example(), &[1.8, 3.375, 0.0]).unwrap();
        let q1 = ninths([[3., 4., 2.], [4., 5., 0.], [0., 9., 0.]]);
        let q2 = ninths([[1., 5., 3.], [4., 5., 0.], [4., 4., 1.]]);
        assert!(k.control_matrix(0).max_abs_diff(&q1) <= 1e-12);
        assert!(k.control_matrix(1).max_abs_diff(&q2) <= 1e-12);
        assert_eq!(k.row(1, 0)[2], 0.0);
        assert_eq!(k.row(2, 0)[0], 0.0);
    }

    #[test]
    fn worst_case_kernel_of_reducible_example() {
        let k = worst_case_kernel(&reducible_example(), &[0.666, 1.0, 0.0]).unwrap();
        let q1 = ninths([[0., 9., 0.], [0., 9., 0.], [0., 7., 2.]]);
        let q2 = ninths([[0., 9., 0.], [0., 9., 0.], [2., 7., 0.]]);
        assert!(k.control_matrix(0).max_abs_diff(&q1) <= 1e-12);
        assert!(k.control_matrix(1).max_abs_diff(&q2) <= 1e-12);
    }

    #[test]
    fn zero_radius_keeps_nominal() {
        let m = irreducible_example().with_radius(0.0);
        assert_eq!(worst_case_kernel(&m, &[5.0, -1.0, 2.0]).unwrap(), m.kernel);
    }

    #[test]
    fn wrong_length_values_rejected() {
        assert!(matches!(
            worst_case_kernel(&irreducible_example(), &[1.0]),
            Err(Error::DimensionMismatch { expected: 3, found: 1 })
        ));
    }

    #[test]
    fn incumbent_wins_ties() {
        let v = [1.0, 1.0, 2.0];
        assert_eq!(argmin_with_ties(&[0, 1, 2], Some(1), 1e-9, |u| v[u]), 1);
        assert_eq!(argmin_with_ties(&[0, 1, 2], Some(2), 1e-9, |u| v[u]), 0);
        assert_eq!(argmin_with_ties(&[0, 1, 2], None, 1e-9, |u| v[u]), 0);
    }

    #[test]
    fn oscillator_stage_bounds_robust_stage() {
        let m = irreducible_example();
        let v = [1.8, 3.375, 0.0];
        let (exact, g) = robust_stage(&m, &v).unwrap();
        let osc = oscillator_stage(&m, &v).unwrap();
        assert_eq!(g, Policy::new(vec![1, 0, 1]));
        for (e, o) in exact.iter().zip(&osc) {
            assert!(e <= &(o + 1e-12));
        }
    }
}
