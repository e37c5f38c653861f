//! Maximising a linear functional over a total-variation ball.
//!
//! For a nominal probability row `μ`, a value vector `ℓ` and a radius `R`,
//! the maximiser of `Σ ℓ·ν` over `{ν : Σ|ν − μ| ≤ R}` moves mass `α/2`
//! onto the argmax of `ℓ` and drains the same amount from the lowest levels
//! upwards, where `α = min(R, 2·(1 − μ(argmax)))`.
//!
//! Values are grouped into level sets with an absolute tolerance of
//! [`LEVEL_TOL`]. Inside a level set the solution is not unique; the rule
//! used here is fixed so results are reproducible:
//!
//! * the added mass goes entirely to the lowest-index element of the argmax
//!   set;
//! * mass is removed element by element, lowest level first and lowest index
//!   first within a level, never driving an entry below zero.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Two values closer than this belong to the same level set.
pub const LEVEL_TOL: f64 = 1e-9;

/// Tolerance used when checking that the nominal row is a distribution.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Human-readable statement of the within-level allocation rule.
pub const ALLOCATION_RULE: &str = "added mass on lowest-index argmax element; \
removal lowest level first, lowest index first within a level";

/// Level sets of a value vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportPartition {
    /// Indices attaining the maximum.
    pub max_set: Vec<usize>,
    /// Indices attaining the minimum; empty when the vector is constant.
    pub min_set: Vec<usize>,
    /// Remaining indices grouped by value, lowest level first.
    pub middle_sets: Vec<Vec<usize>>,
    pub max_level: f64,
    pub min_level: f64,
    pub middle_levels: Vec<f64>,
}

impl SupportPartition {
    /// True when all values share one level.
    pub fn is_constant(&self) -> bool {
        self.min_set.is_empty()
    }

    /// The order in which mass is drained: min set, then middle sets upward.
    pub fn removal_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.min_set.iter().chain(self.middle_sets.iter().flatten()).copied()
    }

    /// Number of indices covered by the partition.
    pub fn len(&self) -> usize {
        self.max_set.len() + self.min_set.len() + self.middle_sets.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits `values` into argmax, argmin and intermediate level sets.
///
/// Panics on an empty or non-finite vector.
pub fn partition_support(values: &[f64]) -> SupportPartition {
    assert!(!values.is_empty(), "cannot partition an empty vector");
    assert!(values.iter().all(|v| v.is_finite()), "values must be finite");
    let max_level = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_level = values.iter().copied().fold(f64::INFINITY, f64::min);

    let max_set: Vec<usize> = (0..values.len()).filter(|&i| max_level - values[i] <= LEVEL_TOL).collect();
    if max_level - min_level <= LEVEL_TOL {
        return SupportPartition {
            max_set,
            min_set: Vec::new(),
            middle_sets: Vec::new(),
            max_level,
            min_level: max_level,
            middle_levels: Vec::new(),
        };
    }
    let min_set: Vec<usize> = (0..values.len()).filter(|&i| values[i] - min_level <= LEVEL_TOL).collect();

    let mut rest: Vec<usize> =
        (0..values.len()).filter(|&i| max_level - values[i] > LEVEL_TOL && values[i] - min_level > LEVEL_TOL).collect();
    // Stable sort keeps declared order within equal values.
    rest.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut middle_sets: Vec<Vec<usize>> = Vec::new();
    let mut middle_levels: Vec<f64> = Vec::new();
    for i in rest {
        match middle_levels.last() {
            Some(&level) if values[i] - level <= LEVEL_TOL => {
                middle_sets.last_mut().unwrap().push(i);
            }
            _ => {
                middle_levels.push(values[i]);
                middle_sets.push(alloc::vec![i]);
            }
        }
    }
    for set in &mut middle_sets {
        set.sort_unstable();
    }
    SupportPartition { max_set, min_set, middle_sets, max_level, min_level, middle_levels }
}

/// Result of [`waterfill_row`].
#[derive(Clone, Debug, PartialEq)]
pub struct WaterfillResult {
    pub distribution: Vec<f64>,
    /// Total-variation distance actually used, `α`.
    pub used_mass: f64,
    pub partition: SupportPartition,
}

pub(crate) fn check_radius(radius: f64) -> Result<()> {
    if (0.0..=2.0).contains(&radius) { Ok(()) } else { Err(Error::RadiusOutOfRange(radius)) }
}

pub(crate) fn check_distribution(row: &[f64]) -> Result<()> {
    if row.is_empty() {
        return Err(Error::Empty);
    }
    for (index, &value) in row.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite(index));
        }
        if !(-STOCHASTIC_TOL..=1.0 + STOCHASTIC_TOL).contains(&value) {
            return Err(Error::EntryOutOfRange { index, value });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::NotStochastic { sum });
    }
    Ok(())
}

/// Water-fills `nominal` against an already computed partition.
///
/// Returns the distribution and `α`. The partition must cover exactly the
/// indices of `nominal`; inputs are assumed checked.
pub fn waterfill_with_partition(nominal: &[f64], partition: &SupportPartition, radius: f64) -> (Vec<f64>, f64) {
    debug_assert_eq!(partition.len(), nominal.len());
    let mut nu = nominal.to_vec();
    if partition.is_constant() {
        return (nu, 0.0);
    }
    let top_mass: f64 = partition.max_set.iter().map(|&i| nominal[i]).sum();
    let alpha = radius.min(2.0 * (1.0 - top_mass)).max(0.0);
    let half = alpha / 2.0;
    if half == 0.0 {
        return (nu, 0.0);
    }

    // Entries within SNAP of the outstanding amount are exhausted exactly so
    // that drained states become structural zeros.
    const SNAP: f64 = 1e-15;
    let mut removed = 0.0;
    for i in partition.removal_order() {
        let need = half - removed;
        if need <= 0.0 {
            break;
        }
        if nu[i] <= need + SNAP {
            removed += nu[i];
            nu[i] = 0.0;
        } else {
            nu[i] -= need;
            removed = half;
        }
    }
    nu[partition.max_set[0]] += removed;
    (nu, alpha)
}

/// The maximiser of `Σ values·ν` over the ball of radius `radius` around
/// `nominal`.
pub fn waterfill_row(nominal: &[f64], values: &[f64], radius: f64) -> Result<WaterfillResult> {
    check_radius(radius)?;
    check_distribution(nominal)?;
    if values.len() != nominal.len() {
        return Err(Error::DimensionMismatch { expected: nominal.len(), found: values.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let partition = partition_support(values);
    let (distribution, used_mass) = waterfill_with_partition(nominal, &partition, radius);
    Ok(WaterfillResult { distribution, used_mass, partition })
}

/// `max { Σ values·ν : ‖ν − nominal‖_TV ≤ radius }`.
pub fn max_linear_payoff(nominal: &[f64], values: &[f64], radius: f64) -> Result<f64> {
    let w = waterfill_row(nominal, values, radius)?;
    Ok(dot(&w.distribution, values))
}

/// `max − min` of a vector (zero for an empty one).
pub fn oscillation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// `Σ values·nominal + (R/2)·osc(values)`.
///
/// This upper-bounds [`max_linear_payoff`] and equals it exactly when the
/// drained mass `α/2` fits inside the nominal mass of the argmin set and
/// `α = R`. Beyond that regime the ball cannot be exploited at the full
/// oscillation rate and the two differ.
pub fn oscillator_payoff(nominal: &[f64], values: &[f64], radius: f64) -> f64 {
    dot(nominal, values) + radius / 2.0 * oscillation(values)
}

/// `Σ |a − b|`.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn partition_of_example_bias() {
        let p = partition_support(&[1.8, 3.375, 0.0]);
        assert_eq!(p.max_set, vec![1]);
        assert_eq!(p.min_set, vec![2]);
        assert_eq!(p.middle_sets, vec![vec![0]]);
        assert_eq!(p.middle_levels, vec![1.8]);
    }

    #[test]
    fn constant_vector_is_all_max() {
        let p = partition_support(&[2.0, 2.0, 2.0]);
        assert_eq!(p.max_set, vec![0, 1, 2]);
        assert!(p.min_set.is_empty() && p.middle_sets.is_empty());
        assert!(p.is_constant());
    }

    #[test]
    fn equal_middle_values_share_a_level() {
        let p = partition_support(&[5.0, 1.0, 3.0, 3.0]);
        assert_eq!(p.max_set, vec![0]);
        assert_eq!(p.min_set, vec![1]);
        assert_eq!(p.middle_sets, vec![vec![2, 3]]);
        assert_eq!(p.middle_levels, vec![3.0]);
    }

    #[test]
    fn near_ties_within_tolerance_are_grouped() {
        let p = partition_support(&[1.0, 1.0 + 1e-11, 0.0, 0.5, 0.5 - 1e-12]);
        assert_eq!(p.max_set, vec![0, 1]);
        assert_eq!(p.middle_sets, vec![vec![3, 4]]);
    }

    #[test]
    fn example_row_under_robust_kernel() {
        let w = waterfill_row(&[3. / 9., 1. / 9., 5. / 9.], &[1.8, 3.375, 0.0], 6. / 9.).unwrap();
        assert!(close(&w.distribution, &[3. / 9., 4. / 9., 2. / 9.], 1e-15));
        assert!((w.used_mass - 6. / 9.).abs() < 1e-15);
    }

    #[test]
    fn saturated_row_uses_capped_mass() {
        let w = waterfill_row(&[2. / 9., 7. / 9., 0.0], &[0.666, 1.0, 0.0], 14. / 9.).unwrap();
        assert!(close(&w.distribution, &[0.0, 1.0, 0.0], 1e-15));
        assert!((w.used_mass - 4. / 9.).abs() < 1e-15);
        assert_eq!(w.distribution[0], 0.0);
    }

    #[test]
    fn zero_radius_keeps_nominal() {
        let mu = [0.2, 0.3, 0.5];
        let w = waterfill_row(&mu, &[3.0, -1.0, 2.0], 0.0).unwrap();
        assert_eq!(w.distribution, mu.to_vec());
        assert_eq!(w.used_mass, 0.0);
    }

    #[test]
    fn drains_lowest_level_first() {
        let w = waterfill_row(&[0.5, 0.5, 0.0], &[0.0, 1.0, 2.0], 1.0).unwrap();
        assert!(close(&w.distribution, &[0.0, 0.5, 0.5], 1e-15));
    }

    #[test]
    fn full_radius_reaches_max_value() {
        let v = [0.3, 4.0, -2.0, 1.0];
        let payoff = max_linear_payoff(&[0.25; 4], &v, 2.0).unwrap();
        assert!((payoff - 4.0).abs() < 1e-15);
    }

    #[test]
    fn payoff_matches_q_value_in_example() {
        let payoff = max_linear_payoff(&[3. / 9., 1. / 9., 5. / 9.], &[1.8, 3.375, 0.0], 6. / 9.).unwrap();
        assert!((payoff - 2.1).abs() < 1e-12);
        assert!((2.0 + payoff - 4.099).abs() < 5e-3);
    }

    #[test]
    fn added_mass_lands_on_first_argmax_element() {
        let w = waterfill_row(&[0.25; 4], &[1.0, 0.0, 1.0, 0.5], 0.5).unwrap();
        assert!(close(&w.distribution, &[0.5, 0.0, 0.25, 0.25], 1e-15));
    }

    #[test]
    fn oscillator_form_overstates_when_min_set_is_exhausted() {
        let mu = [1. / 9., 6. / 9., 2. / 9.];
        let v = [1.8, 3.375, 0.0];
        let exact = max_linear_payoff(&mu, &v, 6. / 9.).unwrap();
        let osc = oscillator_payoff(&mu, &v, 6. / 9.);
        assert!((exact - 3.375).abs() < 1e-12);
        assert!(osc > exact + 0.1);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(waterfill_row(&[1.0], &[0.0], 2.5), Err(Error::RadiusOutOfRange(2.5)));
        assert!(matches!(waterfill_row(&[0.5, 0.4], &[0.0, 1.0], 1.0), Err(Error::NotStochastic { .. })));
        assert!(matches!(waterfill_row(&[1.2, -0.2], &[0.0, 1.0], 1.0), Err(Error::EntryOutOfRange { .. })));
        assert!(matches!(waterfill_row(&[1.0], &[0.0, 1.0], 1.0), Err(Error::DimensionMismatch { .. })));
    }
}
