//! Proptest strategies.

use proptest::prelude::*;
use robust_mdp_core::{Kernel, Matrix, McmModel};

/// A probability vector of length `n` with some exact zeros.
pub fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.05f64..1.0], n).prop_map(|mut row| {
        if row.iter().all(|&v| v == 0.0) {
            row[0] = 1.0;
        }
        let s: f64 = row.iter().sum();
        row.iter().map(|v| v / s).collect()
    })
}

/// A strictly positive probability vector.
pub fn positive_distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|row| {
        let s: f64 = row.iter().sum();
        row.iter().map(|v| v / s).collect()
    })
}

/// Values with frequent ties.
pub fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![prop::collection::vec((0u8..4).prop_map(f64::from), n), prop::collection::vec(-5.0f64..5.0, n),]
}

pub fn radius() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(2.0), 6 => 0.0f64..=2.0]
}

/// A row with values and radius, `1..=6` entries.
pub fn ball() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..=6).prop_flat_map(|n| (distribution(n), values(n), radius()))
}

pub fn stochastic_matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(distribution(n), n).prop_map(|rows| Matrix::from_rows(&rows))
}

pub fn any_stochastic_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..=6).prop_flat_map(stochastic_matrix)
}

fn build(n: usize, m: usize, rows: Vec<Vec<f64>>, cost: Vec<f64>, radius: f64) -> McmModel {
    McmModel::new(
        (1..=n).map(|i| i.to_string()).collect(),
        (1..=m).map(|u| format!("u{u}")).collect(),
        vec![(0..m).collect(); n],
        Kernel::new(n, m, rows.concat()).unwrap(),
        cost,
        radius,
    )
    .unwrap()
}

fn costs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..=10).prop_map(|c| f64::from(c) / 2.0), len)
}

/// Models with 2 or 3 states and 1 or 2 controls, some zeros in the kernel.
pub fn model() -> impl Strategy<Value = McmModel> {
    (2usize..=3, 1usize..=2).prop_flat_map(|(n, m)| {
        (prop::collection::vec(distribution(n), n * m), costs(n * m), radius())
            .prop_map(move |(rows, cost, r)| build(n, m, rows, cost, r))
    })
}

/// Models whose every kernel entry is positive, so every policy is
/// irreducible at radius zero.
pub fn positive_model() -> impl Strategy<Value = McmModel> {
    (2usize..=4, 2usize..=3).prop_flat_map(|(n, m)| {
        (prop::collection::vec(positive_distribution(n), n * m), costs(n * m))
            .prop_map(move |(rows, cost)| build(n, m, rows, cost, 0.0))
    })
}
