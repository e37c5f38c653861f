//! Fixtures, random generators and independent oracles shared by the
//! integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use robust_mdp_core::tv_ball::max_linear_payoff;
use robust_mdp_core::{Kernel, Matrix, McmModel, Policy};

pub fn ninths(rows: [[f64; 3]; 3]) -> Matrix {
    Matrix::from_rows(&rows.map(|r| r.map(|v| v / 9.0)))
}

fn three_state(q1: Matrix, q2: Matrix, radius: f64) -> McmModel {
    McmModel::new(
        vec!["1".into(), "2".into(), "3".into()],
        vec!["u1".into(), "u2".into()],
        vec![vec![0, 1]; 3],
        Kernel::from_control_matrices(&[q1, q2]).unwrap(),
        // f(x,u) stored state-major: (1,u1) (1,u2) (2,u1) (2,u2) (3,u1) (3,u2)
        vec![2.0, 0.5, 1.0, 3.0, 3.0, 0.0],
        radius,
    )
    .unwrap()
}

pub fn irreducible_example() -> McmModel {
    three_state(
        ninths([[3., 1., 5.], [4., 2., 3.], [1., 6., 2.]]),
        ninths([[1., 2., 6.], [4., 2., 3.], [4., 1., 4.]]),
        6.0 / 9.0,
    )
}

pub fn reducible_example() -> McmModel {
    three_state(
        ninths([[0., 5., 4.], [0., 9., 0.], [0., 0., 9.]]),
        ninths([[2., 7., 0.], [3., 6., 0.], [8., 0., 1.]]),
        14.0 / 9.0,
    )
}

pub fn policy(controls: &[usize]) -> Policy {
    Policy::new(controls.to_vec())
}

/// Seeded source of test instances.
pub struct Gen(SplitMix64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// A probability vector; each entry is zero with probability `zeros`
    /// and otherwise drawn from `[lo, 1]` before normalising.
    pub fn distribution(&mut self, n: usize, zeros: f64, lo: f64) -> Vec<f64> {
        let mut row: Vec<f64> = (0..n).map(|_| if self.chance(zeros) { 0.0 } else { self.range(lo, 1.0) }).collect();
        if row.iter().all(|&v| v == 0.0) {
            row[self.below(n)] = 1.0;
        }
        let s: f64 = row.iter().sum();
        row.iter().map(|v| v / s).collect()
    }

    /// Values with frequent exact ties.
    pub fn values(&mut self, n: usize) -> Vec<f64> {
        if self.chance(0.5) {
            (0..n).map(|_| self.below(4) as f64).collect()
        } else {
            (0..n).map(|_| self.range(-5.0, 5.0)).collect()
        }
    }

    /// A radius in `[0, 2]`, hitting both ends now and then.
    pub fn radius(&mut self) -> f64 {
        match self.below(10) {
            0 => 0.0,
            1 => 2.0,
            _ => self.range(0.0, 2.0),
        }
    }

    pub fn stochastic(&mut self, n: usize, zeros: f64, lo: f64) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| self.distribution(n, zeros, lo)).collect();
        Matrix::from_rows(&rows)
    }

    pub fn model(&mut self, n: usize, m: usize, zeros: f64, radius: f64) -> McmModel {
        let mut data = Vec::with_capacity(n * m * n);
        for _ in 0..n * m {
            data.extend(self.distribution(n, zeros, 0.05));
        }
        let cost = (0..n * m).map(|_| (self.uniform() * 10.0).round() / 2.0).collect();
        McmModel::new(
            (1..=n).map(|i| i.to_string()).collect(),
            (1..=m).map(|u| format!("u{u}")).collect(),
            vec![(0..m).collect(); n],
            Kernel::new(n, m, data).unwrap(),
            cost,
            radius,
        )
        .unwrap()
    }
}

/// `max ν·values` over the total-variation ball of `radius` around
/// `nominal`, solved as a linear program in `(ν, t)` with `t ≥ |ν − nominal|`.
pub fn lp_max_payoff(nominal: &[f64], values: &[f64], radius: f64) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let nu: Vec<_> = values.iter().map(|&v| p.add_var(v, (0.0, 1.0))).collect();
    let t: Vec<_> = nominal.iter().map(|_| p.add_var(0.0, (0.0, 2.0))).collect();
    p.add_constraint(nu.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>().as_slice(), ComparisonOp::Eq, 1.0);
    for i in 0..nominal.len() {
        p.add_constraint([(t[i], 1.0), (nu[i], -1.0)], ComparisonOp::Ge, -nominal[i]);
        p.add_constraint([(t[i], 1.0), (nu[i], 1.0)], ComparisonOp::Ge, nominal[i]);
    }
    p.add_constraint(t.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>().as_slice(), ComparisonOp::Le, radius);
    p.solve().expect("ball is non-empty").objective()
}

/// The same maximum by direct transport: some optimum moves all shifted
/// mass onto one entry, taking it from the cheapest donors first, so trying
/// every receiving entry finds it.
pub fn transport_max_payoff(nominal: &[f64], values: &[f64], radius: f64) -> f64 {
    let n = nominal.len();
    let base: f64 = nominal.iter().zip(values).map(|(p, v)| p * v).sum();
    let mut best = base;
    for j in 0..n {
        let mut donors: Vec<usize> = (0..n).filter(|&i| i != j && nominal[i] > 0.0).collect();
        donors.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut budget = (radius / 2.0).min(1.0 - nominal[j]);
        let mut gain = 0.0;
        for i in donors {
            if budget <= 0.0 || values[i] >= values[j] {
                break;
            }
            let moved = nominal[i].min(budget);
            gain += moved * (values[j] - values[i]);
            budget -= moved;
        }
        best = best.max(base + gain);
    }
    best
}

/// The explicit min-max stage `min_u { f + max over the ball }` with the
/// inner maximum from the LP oracle.
pub fn lp_stage(model: &McmModel, values: &[f64]) -> Vec<f64> {
    (0..model.n_states())
        .map(|x| {
            model
                .feasible(x)
                .iter()
                .map(|&u| model.cost(x, u) + lp_max_payoff(model.kernel.row(x, u), values, model.radius))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Worst-case gain of a fixed policy by relative value iteration on the
/// lazy chain `(I + Q)/2`, which has the same gain and is aperiodic.
pub fn robust_gain_by_value_iteration(model: &McmModel, g: &Policy) -> Vec<f64> {
    const ITERATIONS: usize = 20_000;
    const WINDOW: usize = 1_000;
    let n = model.n_states();
    let mut v = vec![0.0; n];
    let mut earlier = v.clone();
    for k in 0..ITERATIONS {
        if k == ITERATIONS - WINDOW {
            earlier = v.clone();
        }
        v = (0..n)
            .map(|x| {
                let u = g.control(x);
                let payoff = max_linear_payoff(model.kernel.row(x, u), &v, model.radius).unwrap();
                model.cost(x, u) + 0.5 * v[x] + 0.5 * payoff
            })
            .collect();
    }
    (0..n).map(|x| (v[x] - earlier[x]) / WINDOW as f64).collect()
}

/// Per-state minimum of the worst-case gain over every stationary policy.
pub fn optimal_gain_by_enumeration(model: &McmModel) -> Vec<f64> {
    let n = model.n_states();
    let gains: Vec<Vec<f64>> = model.policies().map(|g| robust_gain_by_value_iteration(model, &g)).collect();
    (0..n).map(|x| gains.iter().map(|v| v[x]).fold(f64::INFINITY, f64::min)).collect()
}

/// Dense solve by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-13 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Textbook average-cost policy iteration on the nominal kernel for models
/// whose every policy is unichain. Returns the optimal gain and policy.
pub fn classical_policy_iteration(model: &McmModel, g0: &Policy) -> (f64, Policy) {
    let n = model.n_states();
    let mut g = g0.as_slice().to_vec();
    for _ in 0..1_000 {
        // unknowns: J, h(0..n-1) with h(n-1) = 0
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for x in 0..n {
            let row = model.kernel.row(x, g[x]);
            a[x][0] = 1.0;
            for y in 0..n - 1 {
                a[x][y + 1] = if x == y { 1.0 } else { 0.0 } - row[y];
            }
            b[x] = model.cost(x, g[x]);
        }
        let sol = gauss_solve(a, b).expect("unichain policy");
        let j = sol[0];
        let mut h = sol[1..].to_vec();
        h.push(0.0);
        let q = |x: usize, u: usize| {
            model.cost(x, u) + model.kernel.row(x, u).iter().zip(&h).map(|(p, v)| p * v).sum::<f64>()
        };
        let mut changed = false;
        for x in 0..n {
            let current = q(x, g[x]);
            let (best_u, best) = model
                .feasible(x)
                .iter()
                .map(|&u| (u, q(x, u)))
                .fold((g[x], current), |acc, c| if c.1 < acc.1 { c } else { acc });
            if best < current - 1e-12 {
                g[x] = best_u;
                changed = true;
            }
        }
        if !changed {
            return (j, Policy::new(g));
        }
    }
    panic!("classical policy iteration did not converge");
}

/// States reachable from `from` along positive entries.
pub fn reachable(p: &Matrix, from: usize) -> Vec<bool> {
    let n = p.n_rows();
    let mut seen = vec![false; n];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(x) = stack.pop() {
        for y in 0..n {
            if p.row(x)[y] > 0.0 && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

pub fn strongly_connected(p: &Matrix) -> bool {
    (0..p.n_rows()).all(|x| reachable(p, x).iter().all(|&r| r))
}

/// A single closed class: some state is reachable from every state.
pub fn single_recurrent_class(p: &Matrix) -> bool {
    let n = p.n_rows();
    let reach: Vec<Vec<bool>> = (0..n).map(|x| reachable(p, x)).collect();
    (0..n).any(|y| (0..n).all(|x| reach[x][y]))
}

/// `(1/n) Σ_{k<n} Pᵏ`.
pub fn power_average(p: &Matrix, n: usize) -> Matrix {
    let size = p.n_rows();
    let mut power = Matrix::identity(size);
    let mut sum = Matrix::zeros(size, size);
    for _ in 0..n {
        for i in 0..size {
            for j in 0..size {
                sum.row_mut(i)[j] += power.row(i)[j];
            }
        }
        power = power.mul(p);
    }
    let data = sum.as_slice().iter().map(|v| v / n as f64).collect();
    Matrix::from_vec(size, size, data)
}

pub mod strategies;
