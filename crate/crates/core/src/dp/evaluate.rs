use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::chain::{self, ClassDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix, PIVOT_TOL, dot};
use crate::model::{Kernel, McmModel, Policy};

/// Average cost of a policy: one number, or one per state when the chain
/// has several recurrent classes.
#[derive(Clone, Debug, PartialEq)]
pub enum Gain {
    Scalar(f64),
    PerState(Vec<f64>),
}

impl Gain {
    pub fn at(&self, state: usize) -> f64 {
        match self {
            Gain::Scalar(j) => *j,
            Gain::PerState(v) => v[state],
        }
    }

    pub fn to_vec(&self, n_states: usize) -> Vec<f64> {
        match self {
            Gain::Scalar(j) => vec![*j; n_states],
            Gain::PerState(v) => v.clone(),
        }
    }
}

/// Gain and bias of a fixed policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub gain: Gain,
    pub bias: Vec<f64>,
    /// States where the bias is pinned to zero.
    pub anchors: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    /// Recurrent classes demand different constant gains.
    Inconsistent,
    /// The system is singular for another reason.
    Singular,
}

/// A single-gain evaluation that has no solution.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationFailure {
    pub kind: FailureKind,
    pub classes: ClassDecomposition,
    /// Gain each recurrent class would have on its own, keyed by class index.
    pub class_gains: Vec<(usize, f64)>,
}

impl fmt::Display for EvaluationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FailureKind::Inconsistent => write!(f, "policy evaluation is inconsistent")?,
            FailureKind::Singular => write!(f, "policy evaluation system is singular")?,
        }
        write!(f, "; classes: {}", self.classes)?;
        for (k, g) in &self.class_gains {
            write!(f, "; class {k} has gain {g}")?;
        }
        Ok(())
    }
}

fn check_inputs(kernel: &Kernel, policy: &Policy, cost: &[f64]) -> Result<()> {
    let n = kernel.n_states();
    if n == 0 {
        return Err(Error::Empty);
    }
    for found in [policy.len(), cost.len()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    if let Some(&u) = policy.as_slice().iter().find(|&&u| u >= kernel.n_controls()) {
        return Err(Error::DimensionMismatch { expected: kernel.n_controls(), found: u + 1 });
    }
    if let Some(i) = cost.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Solves `J + V = f + P·V` with `V(anchor) = 0`.
///
/// The anchor column of `I − P` is replaced by ones, so its unknown is `J`.
fn solve_single_gain(p: &Matrix, f: &[f64], anchor: usize) -> Result<(f64, Vec<f64>)> {
    let n = p.n_rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } - p[(i, j)];
        }
        a[(i, anchor)] = 1.0;
    }
    let mut z = Lu::new(a, PIVOT_TOL)?.solve(f);
    let gain = z[anchor];
    z[anchor] = 0.0;
    Ok((gain, z))
}

fn class_gains(p: &Matrix, f: &[f64], d: &ClassDecomposition) -> Vec<(usize, f64)> {
    chain::class_distributions(p, d)
        .map(|dists| {
            dists
                .into_iter()
                .map(|(k, q)| {
                    let fc: Vec<f64> = d.classes[k].states.iter().map(|&s| f[s]).collect();
                    (k, dot(&q, &fc))
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Evaluates a policy whose chain should have a single recurrent class:
/// solves `J·e + V = f(g) + Q(g)·V` with `V(anchor) = 0`.
///
/// `cost` is `f(g)`, one entry per state. A singular system yields
/// [`Error::EvaluationFailure`] carrying the class structure.
pub fn evaluate_unichain(kernel: &Kernel, policy: &Policy, cost: &[f64], anchor: usize) -> Result<Evaluation> {
    check_inputs(kernel, policy, cost)?;
    if anchor >= kernel.n_states() {
        return Err(Error::DimensionMismatch { expected: kernel.n_states(), found: anchor + 1 });
    }
    let p = kernel.restrict(policy);
    match solve_single_gain(&p, cost, anchor) {
        Ok((j, v)) => Ok(Evaluation { gain: Gain::Scalar(j), bias: v, anchors: vec![anchor] }),
        Err(Error::Singular(_)) => {
            let classes = chain::communication_classes(&p);
            let class_gains = class_gains(&p, cost, &classes);
            let spread = class_gains.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max)
                - class_gains.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            let kind =
                if class_gains.len() > 1 && spread > 1e-9 { FailureKind::Inconsistent } else { FailureKind::Singular };
            Err(Error::EvaluationFailure(EvaluationFailure { kind, classes, class_gains }))
        }
        Err(e) => Err(e),
    }
}

/// Evaluates any policy: `J = Q(g)·J` and `J + h = f(g) + Q(g)·h`, with
/// `h = 0` at the lowest-index state of every recurrent class.
pub fn evaluate_multichain(kernel: &Kernel, policy: &Policy, cost: &[f64]) -> Result<Evaluation> {
    check_inputs(kernel, policy, cost)?;
    let n = kernel.n_states();
    let p = kernel.restrict(policy);
    let d = chain::communication_classes(&p);
    let mut gain = vec![0.0; n];
    let mut bias = vec![0.0; n];
    let mut anchors = Vec::new();

    for class in d.recurrent() {
        let s = &class.states;
        let fc: Vec<f64> = s.iter().map(|&i| cost[i]).collect();
        let (j, h) = solve_single_gain(&p.select(s, s), &fc, 0)?;
        for (&i, hi) in s.iter().zip(h) {
            gain[i] = j;
            bias[i] = hi;
        }
        anchors.push(s[0]);
    }

    let t = d.transient_states();
    if !t.is_empty() {
        let r: Vec<usize> = (0..n).filter(|i| !t.contains(i)).collect();
        let mut a = p.select(&t, &t);
        for i in 0..t.len() {
            for j in 0..t.len() {
                a[(i, j)] = if i == j { 1.0 } else { 0.0 } - a[(i, j)];
            }
        }
        let lu = Lu::new(a, PIVOT_TOL)?;
        let ptr = p.select(&t, &r);
        let jr: Vec<f64> = r.iter().map(|&i| gain[i]).collect();
        let hr: Vec<f64> = r.iter().map(|&i| bias[i]).collect();
        let jt = lu.solve(&ptr.mul_vec(&jr));
        let into_r = ptr.mul_vec(&hr);
        let rhs: Vec<f64> = t.iter().enumerate().map(|(k, &i)| cost[i] - jt[k] + into_r[k]).collect();
        let ht = lu.solve(&rhs);
        for (k, &i) in t.iter().enumerate() {
            gain[i] = jt[k];
            bias[i] = ht[k];
        }
    }
    Ok(Evaluation { gain: Gain::PerState(gain), bias, anchors })
}

/// Long-run average cost of `policy` under `kernel`: a scalar when the chain
/// has one recurrent class, otherwise one value per starting state.
pub fn average_cost_of_policy(model: &McmModel, policy: &Policy, kernel: &Kernel) -> Result<Gain> {
    model.check_policy(policy)?;
    let cost = model.restrict_cost(policy);
    let e = evaluate_multichain(kernel, policy, &cost)?;
    if chain::communication_classes(&kernel.restrict(policy)).is_unichain() {
        Ok(Gain::Scalar(e.gain.at(0)))
    } else {
        Ok(e.gain)
    }
}

/// `max_x |J + V(x) − f(x) − (P·V)(x)|` for an evaluation of `policy`.
pub fn unichain_residual(kernel: &Kernel, policy: &Policy, cost: &[f64], e: &Evaluation) -> f64 {
    let n = kernel.n_states();
    let j = e.gain.to_vec(n);
    let pv = kernel.restrict(policy).mul_vec(&e.bias);
    (0..n).map(|x| (j[x] + e.bias[x] - cost[x] - pv[x]).abs()).fold(0.0, f64::max)
}

/// Residuals of `J = P·J` and `J + h = f + P·h`.
pub fn multichain_residuals(kernel: &Kernel, policy: &Policy, cost: &[f64], e: &Evaluation) -> (f64, f64) {
    let n = kernel.n_states();
    let j = e.gain.to_vec(n);
    let p = kernel.restrict(policy);
    let pj = p.mul_vec(&j);
    let gain = (0..n).map(|x| (j[x] - pj[x]).abs()).fold(0.0, f64::max);
    (gain, unichain_residual(kernel, policy, cost, e))
}
