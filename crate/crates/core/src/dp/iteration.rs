use alloc::vec;
use alloc::vec::Vec;

use crate::dp::evaluate::{Evaluation, EvaluationFailure, evaluate_multichain, evaluate_unichain};
use crate::dp::{MAX_ITER_CAP, TIE_TOL, argmin_with_ties, q_table, worst_case_kernel_with};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{Kernel, McmModel, Policy};
use crate::tv_ball::{SupportPartition, max_linear_payoff, partition_support};

/// Largest optimality-equation residual accepted as a certified optimum.
pub const CERTIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PiOptions {
    /// Cap on evaluation rounds. `None` uses twice the number of stationary
    /// policies, capped at [`MAX_ITER_CAP`].
    pub max_iter: Option<usize>,
    /// Bias anchor for single-gain evaluation; `None` means the last state.
    pub anchor: Option<usize>,
    /// Values within this of the minimum count as ties.
    pub tie_tol: f64,
    /// Continue past an uncertified fixed point or a cycle with refined
    /// rounds.
    pub certify: bool,
}

impl Default for PiOptions {
    fn default() -> Self {
        Self { max_iter: None, anchor: None, tie_tol: TIE_TOL, certify: true }
    }
}

impl PiOptions {
    fn cap(&self, model: &McmModel) -> usize {
        self.max_iter.unwrap_or_else(|| model.policy_count().saturating_mul(2).min(MAX_ITER_CAP as u128) as usize)
    }
}

/// Which comparison produced the next policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Improvement {
    /// `argmin f + Q*·V`.
    SingleGain,
    /// `argmin Q*·J`.
    Gain,
    /// `argmin f + Q*·h` among the gain minimisers.
    Bias,
}

/// One evaluate/improve round.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub policy: Policy,
    pub nominal: Evaluation,
    /// Level sets of the nominal bias.
    pub partition: SupportPartition,
    pub worst_case: Kernel,
    pub robust: Evaluation,
    /// `Q*(x,u)·J` per state and control; present for the general scheme.
    pub gain_q_values: Option<Vec<Vec<Option<f64>>>>,
    /// `f(x,u) + Q*(x,u)·bias` per state and control; `None` where the
    /// control is infeasible.
    pub q_values: Vec<Vec<Option<f64>>>,
    pub step: Improvement,
    pub improved: Policy,
    /// Evaluated against the adversary's fixed point rather than the
    /// nominal-bias partition.
    pub refined: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    IterationCap,
    EvaluationFailure,
}

/// Largest violations of the optimality equations at the returned pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    /// The gain equation; `None` for the single-gain scheme.
    pub gain: Option<f64>,
    /// The bias equation.
    pub bias: f64,
}

impl Residuals {
    pub fn within(&self, tol: f64) -> bool {
        self.bias <= tol && self.gain.is_none_or(|g| g <= tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iterations: Vec<IterationRecord>,
    pub final_policy: Policy,
    /// Robust evaluation from the last completed round. On convergence this
    /// belongs to `final_policy`.
    pub final_evaluation: Option<Evaluation>,
    pub stop_reason: StopReason,
    pub failure: Option<EvaluationFailure>,
    /// Present on convergence.
    pub residuals: Option<Residuals>,
}

impl IterationReport {
    /// Robust gain at every state, by round.
    pub fn robust_gains(&self) -> Vec<Vec<f64>> {
        self.iterations.iter().map(|r| r.robust.gain.to_vec(r.robust.bias.len())).collect()
    }

    /// True when no robust gain rose by more than `tol` from one round to the
    /// next at any state.
    pub fn gain_monotone(&self, tol: f64) -> bool {
        self.robust_gains().windows(2).all(|w| w[1].iter().zip(&w[0]).all(|(b, a)| *b <= a + tol))
    }
}

fn failed(iterations: Vec<IterationRecord>, policy: Policy, err: Error) -> Result<IterationReport> {
    match err {
        Error::EvaluationFailure(f) => Ok(IterationReport {
            iterations,
            final_policy: policy,
            final_evaluation: None,
            stop_reason: StopReason::EvaluationFailure,
            failure: Some(f),
            residuals: None,
        }),
        e => Err(e),
    }
}

fn capped(iterations: Vec<IterationRecord>, policy: Policy) -> IterationReport {
    IterationReport {
        final_policy: policy,
        final_evaluation: iterations.last().map(|r| r.robust.clone()),
        iterations,
        stop_reason: StopReason::IterationCap,
        failure: None,
        residuals: None,
    }
}

fn improve(
    model: &McmModel,
    incumbent: &Policy,
    table: &[Vec<Option<f64>>],
    candidates: impl Fn(usize) -> Vec<usize>,
    tol: f64,
) -> Policy {
    Policy::new(
        (0..model.n_states())
            .map(|x| argmin_with_ties(&candidates(x), Some(incumbent.control(x)), tol, |u| table[x][u].unwrap()))
            .collect(),
    )
}

/// Level sets of `primary`, each split by the levels of `secondary`, as a
/// partition whose order is lexicographic in the pair.
pub fn lexicographic_partition(primary: &[f64], secondary: &[f64]) -> SupportPartition {
    fn low_to_high(p: &SupportPartition) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if !p.min_set.is_empty() {
            out.push(p.min_set.clone());
        }
        out.extend(p.middle_sets.iter().cloned());
        out.push(p.max_set.clone());
        out
    }
    let mut rank = vec![0.0; primary.len()];
    let mut next = 0.0;
    for group in low_to_high(&partition_support(primary)) {
        let sub: Vec<f64> = group.iter().map(|&i| secondary[i]).collect();
        for level in low_to_high(&partition_support(&sub)) {
            for k in level {
                rank[group[k]] = next;
            }
            next += 1.0;
        }
    }
    partition_support(&rank)
}

/// Policy iteration for the adversary: for a fixed policy, re-partitions
/// against the latest evaluation until no row of the policy can be pushed
/// higher. Returns the partition and kernel that maximise the final
/// evaluation for every control, with that evaluation.
fn adversary_fixed_point(
    model: &McmModel,
    policy: &Policy,
    evaluate: &dyn Fn(&Kernel) -> Result<Evaluation>,
    start: SupportPartition,
    general: bool,
    tol: f64,
) -> Result<(SupportPartition, Kernel, Evaluation)> {
    const ROUNDS: usize = 100;
    let n = model.n_states();
    let mut partition = start;
    let mut kernel = worst_case_kernel_with(model, &partition)?;
    let mut eval = evaluate(&kernel)?;
    for _ in 0..ROUNDS {
        let gain = eval.gain.to_vec(n);
        let next = if general { lexicographic_partition(&gain, &eval.bias) } else { partition_support(&eval.bias) };
        if next == partition {
            break;
        }
        let candidate = worst_case_kernel_with(model, &next)?;
        let better = (0..n).any(|x| {
            let u = policy.control(x);
            let (a, b) = (candidate.row(x, u), kernel.row(x, u));
            let dh = dot(a, &eval.bias) - dot(b, &eval.bias);
            if general {
                let dj = dot(a, &gain) - dot(b, &gain);
                dj > tol || (dj >= -tol && dh > tol)
            } else {
                dh > tol
            }
        });
        partition = next;
        kernel = candidate;
        if !better {
            break;
        }
        eval = evaluate(&kernel)?;
    }
    Ok((partition, kernel, eval))
}

fn run(model: &McmModel, g0: &Policy, options: &PiOptions, general: bool) -> Result<IterationReport> {
    model.check_policy(g0)?;
    let n = model.n_states();
    let anchor = options.anchor.unwrap_or(n - 1);
    let cap = options.cap(model);
    let tol = options.tie_tol;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut g = g0.clone();
    let mut refined = false;

    loop {
        if iterations.len() >= cap {
            return Ok(capped(iterations, g));
        }
        let f = model.restrict_cost(&g);
        let evaluate = |k: &Kernel| {
            if general { evaluate_multichain(k, &g, &f) } else { evaluate_unichain(k, &g, &f, anchor) }
        };
        let nominal = match evaluate(&model.kernel) {
            Ok(e) => e,
            Err(e) => return failed(iterations, g, e),
        };
        let start = partition_support(&nominal.bias);
        let evaluated = if refined {
            adversary_fixed_point(model, &g, &evaluate, start, general, tol)
        } else {
            worst_case_kernel_with(model, &start).and_then(|k| evaluate(&k).map(|e| (start, k, e)))
        };
        let (partition, worst_case, robust) = match evaluated {
            Ok(t) => t,
            Err(e) => return failed(iterations, g, e),
        };
        let gain = robust.gain.to_vec(n);
        let q_values = q_table(model, &worst_case, &robust.bias, true);
        let all = |x: usize| model.feasible(x).to_vec();

        let (step, improved, gain_q_values) = if general {
            let gain_q = q_table(model, &worst_case, &gain, false);
            let by_gain = improve(model, &g, &gain_q, all, tol);
            if by_gain != g {
                (Improvement::Gain, by_gain, Some(gain_q))
            } else {
                let minimisers = |x: usize| {
                    let best = model.feasible(x).iter().map(|&u| gain_q[x][u].unwrap()).fold(f64::INFINITY, f64::min);
                    model.feasible(x).iter().copied().filter(|&u| gain_q[x][u].unwrap() <= best + tol).collect()
                };
                let by_bias = improve(model, &g, &q_values, minimisers, tol);
                (Improvement::Bias, by_bias, Some(gain_q))
            }
        } else {
            (Improvement::SingleGain, improve(model, &g, &q_values, all, tol), None)
        };
        let fixed = improved == g && step != Improvement::Gain;
        let revisit = iterations.iter().any(|r| r.policy == improved);
        iterations.push(IterationRecord {
            policy: g.clone(),
            nominal,
            partition,
            worst_case,
            robust: robust.clone(),
            gain_q_values,
            q_values,
            step,
            improved: improved.clone(),
            refined,
        });

        if fixed {
            let residuals = if general {
                let (a, b) = general_residuals(model, &gain, &robust.bias, tol)?;
                Residuals { gain: Some(a), bias: b }
            } else {
                Residuals { gain: None, bias: unichain_dp_residual(model, gain[0], &robust.bias)? }
            };
            if refined || !options.certify || residuals.within(CERTIFY_TOL) {
                return Ok(IterationReport {
                    iterations,
                    final_policy: g,
                    final_evaluation: Some(robust),
                    stop_reason: StopReason::Converged,
                    failure: None,
                    residuals: Some(residuals),
                });
            }
            refined = true;
            continue;
        }
        if revisit && options.certify {
            refined = true;
        }
        g = improved;
    }
}

/// Robust policy iteration for models whose policies all induce a single
/// recurrent class.
///
/// Each round evaluates the policy under the nominal kernel, water-fills the
/// kernel against the level sets of that bias, re-evaluates under the result
/// and improves greedily. A policy whose chain splits into several recurrent
/// classes stops the run with [`StopReason::EvaluationFailure`].
///
/// With [`PiOptions::certify`], a fixed point that violates the optimality
/// equation, or a revisited policy, switches the remaining rounds to
/// evaluation against the adversary's own fixed point.
pub fn policy_iteration_unichain(model: &McmModel, g0: &Policy, options: &PiOptions) -> Result<IterationReport> {
    run(model, g0, options, false)
}

/// Robust policy iteration without any assumption on the chain structure.
///
/// Gains are improved first; once the gain step leaves the policy fixed,
/// the bias step chooses among the gain minimisers. Certification works as
/// in [`policy_iteration_unichain`], with the adversary ordering states by
/// gain and then by bias.
pub fn policy_iteration_general(model: &McmModel, g0: &Policy, options: &PiOptions) -> Result<IterationReport> {
    run(model, g0, options, true)
}

/// `max_x |J + V(x) − min_u { f(x,u) + max_{Q in ball} Σ Q·V }|`.
pub fn unichain_dp_residual(model: &McmModel, gain: f64, bias: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in 0..model.n_states() {
        let mut best = f64::INFINITY;
        for &u in model.feasible(x) {
            best = best.min(model.cost(x, u) + max_linear_payoff(model.kernel.row(x, u), bias, model.radius)?);
        }
        worst = worst.max((gain + bias[x] - best).abs());
    }
    Ok(worst)
}

/// Residuals of the generalised pair
/// `ρ(x) = min_u max_Q Σ Q·ρ` and
/// `ρ(x) + h(x) = min_u max_Q { f(x,u) + Σ Q·h }`, the second minimum taken
/// over the controls attaining the first within `tol`.
pub fn general_residuals(model: &McmModel, rho: &[f64], h: &[f64], tol: f64) -> Result<(f64, f64)> {
    let mut gain_res: f64 = 0.0;
    let mut bias_res: f64 = 0.0;
    for x in 0..model.n_states() {
        let mut payoffs = Vec::new();
        for &u in model.feasible(x) {
            payoffs.push((u, max_linear_payoff(model.kernel.row(x, u), rho, model.radius)?));
        }
        let best = payoffs.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        gain_res = gain_res.max((rho[x] - best).abs());
        let mut best_bias = f64::INFINITY;
        for &(u, p) in &payoffs {
            if p <= best + tol {
                best_bias =
                    best_bias.min(model.cost(x, u) + max_linear_payoff(model.kernel.row(x, u), h, model.radius)?);
            }
        }
        bias_res = bias_res.max((rho[x] + h[x] - best_bias).abs());
    }
    Ok((gain_res, bias_res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use alloc::vec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn unichain_reproduces_irreducible_example() {
        let m = irreducible_example();
        let r = policy_iteration_unichain(&m, &Policy::new(vec![0, 1, 1]), &PiOptions::default()).unwrap();
        assert_eq!(r.stop_reason, StopReason::Converged);
        assert_eq!(r.iterations.len(), 2);
        assert_eq!(r.final_policy, Policy::new(vec![1, 0, 1]));
        let e = r.final_evaluation.as_ref().unwrap();
        assert!((e.gain.at(0) - 0.708).abs() < 5e-3);
        assert!(close(&e.bias, &[0.468, 1.125, 0.0], 5e-3));
        assert!(r.residuals.unwrap().bias <= 1e-6);
        assert!(r.gain_monotone(1e-9));
    }

    #[test]
    fn unichain_fails_on_reducible_example() {
        let m = reducible_example();
        let r = policy_iteration_unichain(&m, &Policy::new(vec![0, 0, 0]), &PiOptions::default()).unwrap();
        assert_eq!(r.stop_reason, StopReason::EvaluationFailure);
        assert!(r.iterations.is_empty());
        assert!(r.failure.is_some());
    }

    #[test]
    fn general_reproduces_reducible_example() {
        let m = reducible_example();
        let r = policy_iteration_general(&m, &Policy::new(vec![0, 0, 0]), &PiOptions::default()).unwrap();
        assert_eq!(r.stop_reason, StopReason::Converged);
        assert_eq!(r.final_policy, Policy::new(vec![1, 0, 1]));
        let e = r.final_evaluation.as_ref().unwrap();
        assert!(close(&e.gain.to_vec(3), &[1.0; 3], 1e-9));
        let h3 = e.bias[2];
        assert!(close(&[e.bias[0] - h3, e.bias[1] - h3], &[0.611, 1.111], 5e-3));
        let res = r.residuals.unwrap();
        assert!(res.gain.unwrap() <= 1e-6 && res.bias <= 1e-6);
    }

    #[test]
    fn general_matches_unichain_on_irreducible_example() {
        let m = irreducible_example();
        let g0 = Policy::new(vec![0, 1, 1]);
        let a = policy_iteration_unichain(&m, &g0, &PiOptions::default()).unwrap();
        let b = policy_iteration_general(&m, &g0, &PiOptions::default()).unwrap();
        assert_eq!(a.final_policy, b.final_policy);
        let ja = a.final_evaluation.unwrap().gain.at(0);
        assert!(b.final_evaluation.unwrap().gain.to_vec(3).iter().all(|j| (j - ja).abs() < 1e-9));
    }

    #[test]
    fn cap_is_reported() {
        let m = irreducible_example();
        let opts = PiOptions { max_iter: Some(1), ..PiOptions::default() };
        let r = policy_iteration_unichain(&m, &Policy::new(vec![0, 1, 1]), &opts).unwrap();
        assert_eq!(r.stop_reason, StopReason::IterationCap);
        assert_eq!(r.iterations.len(), 1);
    }
}
