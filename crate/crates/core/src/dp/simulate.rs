use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::model::{Kernel, McmModel, Policy};

/// Uniform on `[0, 1)` from the top 53 bits.
fn uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Empirical average of `f(x_k, g(x_k))` over `k = 0..horizon` along one
/// path of the chain `kernel` restricted to `policy`, started at `initial`.
///
/// The generator is SplitMix64 seeded with `seed` as its 64-bit state; each
/// step draws one uniform from the top 53 bits of the output and picks the
/// first state whose cumulative probability exceeds it.
pub fn simulate_average_cost(
    model: &McmModel,
    policy: &Policy,
    kernel: &Kernel,
    horizon: u64,
    seed: u64,
    initial: usize,
) -> Result<f64> {
    model.check_policy(policy)?;
    if horizon == 0 {
        return Err(Error::ZeroHorizon);
    }
    let n = model.n_states();
    if initial >= n {
        return Err(Error::DimensionMismatch { expected: n, found: initial + 1 });
    }
    if kernel.n_states() != n || kernel.n_controls() != model.n_controls() {
        return Err(Error::DimensionMismatch { expected: n, found: kernel.n_states() });
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut x = initial;
    let mut total = 0.0;
    for _ in 0..horizon {
        let u = policy.control(x);
        total += model.cost(x, u);
        let row = kernel.row(x, u);
        let r = uniform(&mut rng);
        let mut acc = 0.0;
        let mut next = None;
        for (z, &p) in row.iter().enumerate() {
            acc += p;
            if r < acc {
                next = Some(z);
                break;
            }
        }
        // Rounding can leave the cumulative sum just short of 1.
        x = next.unwrap_or_else(|| row.iter().rposition(|&p| p > 0.0).unwrap_or(x));
    }
    Ok(total / horizon as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::model::fixtures::*;
    use alloc::vec;

    #[test]
    fn deterministic_cycle_averages_exactly() {
        let m = irreducible_example();
        let cycle = Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]);
        let k = Kernel::from_control_matrices(&[cycle.clone(), cycle]).unwrap();
        // costs under u1: 2, 1, 3
        let g = Policy::new(vec![0, 0, 0]);
        assert_eq!(simulate_average_cost(&m, &g, &k, 300, 7, 0).unwrap(), 2.0);
    }

    #[test]
    fn single_step_is_initial_cost() {
        let m = irreducible_example();
        let g = Policy::new(vec![1, 0, 1]);
        assert_eq!(simulate_average_cost(&m, &g, &m.kernel, 1, 3, 1).unwrap(), 1.0);
    }

    #[test]
    fn reproducible_for_a_seed() {
        let m = irreducible_example();
        let g = Policy::new(vec![1, 0, 1]);
        let a = simulate_average_cost(&m, &g, &m.kernel, 1000, 42, 0).unwrap();
        let b = simulate_average_cost(&m, &g, &m.kernel, 1000, 42, 0).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
