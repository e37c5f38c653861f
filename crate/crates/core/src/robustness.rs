//! How the worst-case chain structure and the robust optimum change with
//! the radius.
//!
//! For a fixed policy the partition comes from its nominal bias, which does
//! not depend on `R`. Each water-filled row is then piecewise linear in `R`
//! and its zero pattern only changes where some entry is exhausted or the
//! added mass saturates, so irreducibility can be decided exactly by testing
//! finitely many radii.

use alloc::vec;
use alloc::vec::Vec;

use crate::chain;
use crate::dp::{
    Gain, IterationReport, PiOptions, StopReason, evaluate_multichain, policy_iteration_general,
    policy_iteration_unichain,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{McmModel, Policy};
use crate::tv_ball::{self, ALLOCATION_RULE, SupportPartition, partition_support};

/// Default limit on the number of policies [`compute_rmax`] enumerates.
pub const ENUMERATION_CAP: u128 = 100_000;

/// Radii closer than this are merged.
pub const BREAKPOINT_TOL: f64 = 1e-12;

/// Nominal entries at or below this cannot be drained.
const MASS_TOL: f64 = 1e-12;

fn check_cap(model: &McmModel, cap: u128) -> Result<()> {
    let policies = model.policy_count();
    if policies > cap {
        return Err(Error::EnumerationCap { policies, cap });
    }
    Ok(())
}

/// Level sets of the nominal bias of every policy, in enumeration order.
fn policy_partitions(model: &McmModel) -> Result<Vec<(Policy, SupportPartition)>> {
    model
        .policies()
        .map(|g| {
            let e = evaluate_multichain(&model.kernel, &g, &model.restrict_cost(&g))?;
            let p = partition_support(&e.bias);
            Ok((g, p))
        })
        .collect()
}

fn row_breakpoints(nominal: &[f64], partition: &SupportPartition, out: &mut Vec<f64>) {
    if partition.is_constant() {
        return;
    }
    let top: f64 = partition.max_set.iter().map(|&i| nominal[i]).sum();
    out.push(2.0 * (1.0 - top));
    let mut drained = 0.0;
    for i in partition.removal_order() {
        if nominal[i] > MASS_TOL {
            drained += nominal[i];
            out.push(2.0 * drained);
        }
    }
}

fn normalise(mut radii: Vec<f64>) -> Vec<f64> {
    for r in &mut radii {
        *r = r.clamp(0.0, 2.0);
    }
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|b, a| (*b - *a).abs() <= BREAKPOINT_TOL);
    radii
}

fn breakpoints_of(model: &McmModel, parts: &[(Policy, SupportPartition)]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut seen: Vec<&SupportPartition> = Vec::new();
    for (_, p) in parts {
        if seen.contains(&p) {
            continue;
        }
        seen.push(p);
        for x in 0..model.n_states() {
            for &u in model.feasible(x) {
                row_breakpoints(model.kernel.row(x, u), p, &mut out);
            }
        }
    }
    normalise(out)
}

/// Every radius at which some water-filled entry reaches zero or the added
/// mass saturates, over all policies' nominal-bias partitions and all
/// feasible rows. Sorted, clipped to `[0, 2]` and deduplicated.
pub fn radius_breakpoints(model: &McmModel) -> Result<Vec<f64>> {
    check_cap(model, ENUMERATION_CAP)?;
    Ok(breakpoints_of(model, &policy_partitions(model)?))
}

/// `Q*(g)` at `radius` for a fixed partition.
pub fn restricted_worst_case(
    model: &McmModel,
    policy: &Policy,
    partition: &SupportPartition,
    radius: f64,
) -> Result<Matrix> {
    tv_ball::check_radius(radius)?;
    let n = model.n_states();
    let mut m = Matrix::zeros(n, n);
    for x in 0..n {
        let (row, _) = tv_ball::waterfill_with_partition(model.kernel.row(x, policy.control(x)), partition, radius);
        m.row_mut(x).copy_from_slice(&row);
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmaxReport {
    /// Infimum of the radii at which some policy's worst-case chain is
    /// reducible; 2 when none is.
    pub r_max: f64,
    pub witness_policy: Option<Policy>,
    pub witness_partition: Option<SupportPartition>,
    pub breakpoints: Vec<f64>,
    /// Whether the witness chain is reducible at exactly `r_max`.
    pub reducible_at_r_max: bool,
    pub allocation_rule: &'static str,
}

/// Radii worth testing: 0, 2, every breakpoint and every midpoint between
/// neighbours. Each entry carries the radius to report if reducibility is
/// first seen there.
fn probe_radii(breakpoints: &[f64]) -> Vec<(f64, f64)> {
    let mut points = vec![0.0];
    points.extend(breakpoints.iter().copied().filter(|&b| b > 0.0 && b < 2.0));
    points.push(2.0);
    let mut probes = Vec::new();
    for w in points.windows(2) {
        probes.push((w[0], w[0]));
        probes.push(((w[0] + w[1]) / 2.0, w[0]));
    }
    probes.push((2.0, 2.0));
    probes
}

/// Finds the smallest radius at which the worst-case chain of some
/// stationary policy becomes reducible.
///
/// Refuses with [`Error::EnumerationCap`] when there are more than `cap`
/// policies.
pub fn compute_rmax_with_cap(model: &McmModel, cap: u128) -> Result<RmaxReport> {
    check_cap(model, cap)?;
    let parts = policy_partitions(model)?;
    let breakpoints = breakpoints_of(model, &parts);

    for (g, p) in &parts {
        if !chain::is_irreducible(&model.kernel.restrict(g)) {
            return Ok(RmaxReport {
                r_max: 0.0,
                witness_policy: Some(g.clone()),
                witness_partition: Some(p.clone()),
                breakpoints,
                reducible_at_r_max: true,
                allocation_rule: ALLOCATION_RULE,
            });
        }
    }

    let probes = probe_radii(&breakpoints);
    let mut best: Option<(f64, usize)> = None;
    for (k, (g, p)) in parts.iter().enumerate() {
        for &(r, report) in &probes {
            if best.is_some_and(|(b, _)| report >= b) {
                break;
            }
            if !chain::is_irreducible(&restricted_worst_case(model, g, p, r)?) {
                best = Some((report, k));
                break;
            }
        }
    }

    Ok(match best {
        None => RmaxReport {
            r_max: 2.0,
            witness_policy: None,
            witness_partition: None,
            breakpoints,
            reducible_at_r_max: false,
            allocation_rule: ALLOCATION_RULE,
        },
        Some((r_max, k)) => {
            let (g, p) = &parts[k];
            let at = !chain::is_irreducible(&restricted_worst_case(model, g, p, r_max)?);
            RmaxReport {
                r_max,
                witness_policy: Some(g.clone()),
                witness_partition: Some(p.clone()),
                breakpoints,
                reducible_at_r_max: at,
                allocation_rule: ALLOCATION_RULE,
            }
        }
    })
}

/// [`compute_rmax_with_cap`] with [`ENUMERATION_CAP`].
pub fn compute_rmax(model: &McmModel) -> Result<RmaxReport> {
    compute_rmax_with_cap(model, ENUMERATION_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Unichain,
    General,
}

/// Runs one policy iteration.
pub fn run_algorithm(
    model: &McmModel,
    algorithm: Algorithm,
    g0: &Policy,
    options: &PiOptions,
) -> Result<IterationReport> {
    match algorithm {
        Algorithm::Unichain => policy_iteration_unichain(model, g0, options),
        Algorithm::General => policy_iteration_general(model, g0, options),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub radius: f64,
    pub stop_reason: Option<StopReason>,
    pub gain: Option<Gain>,
    pub policy: Option<Policy>,
    /// Whether the final worst-case chain is irreducible; `false` after an
    /// evaluation failure.
    pub irreducible: Option<bool>,
    pub error: Option<Error>,
}

/// Solves the model at each radius. Failures are kept in their row.
pub fn sweep_radius(
    model: &McmModel,
    radii: &[f64],
    algorithm: Algorithm,
    g0: &Policy,
    options: &PiOptions,
) -> Vec<SweepRow> {
    radii
        .iter()
        .map(|&radius| {
            let mut row =
                SweepRow { radius, stop_reason: None, gain: None, policy: None, irreducible: None, error: None };
            if let Err(e) = tv_ball::check_radius(radius) {
                row.error = Some(e);
                return row;
            }
            match run_algorithm(&model.with_radius(radius), algorithm, g0, options) {
                Ok(report) => {
                    row.stop_reason = Some(report.stop_reason);
                    row.irreducible = Some(match report.iterations.last() {
                        Some(last) if report.stop_reason != StopReason::EvaluationFailure => {
                            chain::is_irreducible(&last.worst_case.restrict(&last.policy))
                        }
                        _ => false,
                    });
                    if report.stop_reason == StopReason::Converged {
                        row.gain = report.final_evaluation.map(|e| e.gain);
                        row.policy = Some(report.final_policy);
                    }
                }
                Err(e) => row.error = Some(e),
            }
            row
        })
        .collect()
}

/// True when every state's gain is nondecreasing along the rows with a
/// gain, in radius order.
pub fn sweep_is_monotone(rows: &[SweepRow], n_states: usize, tol: f64) -> bool {
    let mut solved: Vec<(f64, Vec<f64>)> =
        rows.iter().filter_map(|r| r.gain.as_ref().map(|g| (r.radius, g.to_vec(n_states)))).collect();
    solved.sort_by(|a, b| a.0.total_cmp(&b.0));
    solved.windows(2).all(|w| w[0].1.iter().zip(&w[1].1).all(|(a, b)| *b >= a - tol))
}
