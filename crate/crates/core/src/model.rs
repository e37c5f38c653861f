//! Markov control model data: states, controls, feasible controls, nominal
//! kernel, one-stage cost and ambiguity radius.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default tolerance on row sums and entry bounds.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// A family of probability rows, one per (state, control) pair.
///
/// Rows for controls that are infeasible at a state are stored but never
/// read by the solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    n_states: usize,
    n_controls: usize,
    data: Vec<f64>,
}

impl Kernel {
    /// `data` is laid out as `[state][control][next_state]`.
    pub fn new(n_states: usize, n_controls: usize, data: Vec<f64>) -> Result<Self> {
        let expected = n_states * n_controls * n_states;
        if data.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: data.len() });
        }
        Ok(Self { n_states, n_controls, data })
    }

    /// One square matrix per control, in control order.
    pub fn from_control_matrices(matrices: &[Matrix]) -> Result<Self> {
        let n_controls = matrices.len();
        let n_states = matrices.first().map_or(0, Matrix::n_rows);
        let mut data = Vec::with_capacity(n_states * n_controls * n_states);
        for m in matrices {
            if m.n_rows() != n_states || m.n_cols() != n_states {
                return Err(Error::DimensionMismatch {
                    expected: n_states,
                    found: if m.n_rows() != n_states { m.n_rows() } else { m.n_cols() },
                });
            }
        }
        for x in 0..n_states {
            for m in matrices {
                data.extend_from_slice(m.row(x));
            }
        }
        Ok(Self { n_states, n_controls, data })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_controls(&self) -> usize {
        self.n_controls
    }

    fn offset(&self, state: usize, control: usize) -> usize {
        assert!(state < self.n_states && control < self.n_controls, "kernel index out of range");
        (state * self.n_controls + control) * self.n_states
    }

    pub fn row(&self, state: usize, control: usize) -> &[f64] {
        let o = self.offset(state, control);
        &self.data[o..o + self.n_states]
    }

    pub fn row_mut(&mut self, state: usize, control: usize) -> &mut [f64] {
        let o = self.offset(state, control);
        &mut self.data[o..o + self.n_states]
    }

    /// The square matrix `Q(u)` whose row `x` is the row at `(x, u)`.
    pub fn control_matrix(&self, control: usize) -> Matrix {
        let mut m = Matrix::zeros(self.n_states, self.n_states);
        for x in 0..self.n_states {
            m.row_mut(x).copy_from_slice(self.row(x, control));
        }
        m
    }

    /// The policy-restricted matrix `Q(g)`: row `x` is the row at `(x, g(x))`.
    pub fn restrict(&self, policy: &Policy) -> Matrix {
        assert_eq!(policy.len(), self.n_states, "policy has wrong number of states");
        let mut m = Matrix::zeros(self.n_states, self.n_states);
        for (x, &u) in policy.as_slice().iter().enumerate() {
            m.row_mut(x).copy_from_slice(self.row(x, u));
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Kernel) -> f64 {
        assert_eq!((self.n_states, self.n_controls), (other.n_states, other.n_controls));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// A deterministic stationary policy: one control index per state.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy(Vec<usize>);

impl Policy {
    pub fn new(controls: Vec<usize>) -> Self {
        Self(controls)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn control(&self, state: usize) -> usize {
        self.0[state]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for Policy {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// One violated model invariant, located by state and control names.
#[derive(Clone, Debug, PartialEq)]
pub enum ValidationIssue {
    NoStates,
    NoControls,
    DuplicateState(String),
    DuplicateControl(String),
    EmptyFeasibleSet { state: String },
    RowSum { state: String, control: String, sum: f64 },
    EntryOutOfRange { state: String, control: String, next_state: String, value: f64 },
    BadCost { state: String, control: String, value: f64 },
    RadiusOutOfRange { radius: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoStates => write!(f, "model has no states"),
            Self::NoControls => write!(f, "model has no controls"),
            Self::DuplicateState(s) => write!(f, "state `{s}` is declared twice"),
            Self::DuplicateControl(u) => write!(f, "control `{u}` is declared twice"),
            Self::EmptyFeasibleSet { state } => {
                write!(f, "state `{state}` has no feasible control")
            }
            Self::RowSum { state, control, sum } => {
                write!(f, "row (state `{state}`, control `{control}`) sums to {sum}")
            }
            Self::EntryOutOfRange { state, control, next_state, value } => {
                write!(f, "entry (state `{state}`, control `{control}`) -> `{next_state}` is {value}, outside [0, 1]")
            }
            Self::BadCost { state, control, value } => write!(
                f,
                "cost at (state `{state}`, control `{control}`) is {value}; costs must be finite and non-negative"
            ),
            Self::RadiusOutOfRange { radius } => write!(f, "radius {radius} is outside [0, 2]"),
        }
    }
}

/// A finite Markov control model with a total-variation ambiguity radius.
#[derive(Clone, Debug, PartialEq)]
pub struct McmModel {
    pub states: Vec<String>,
    pub controls: Vec<String>,
    /// Sorted, deduplicated feasible control indices per state.
    pub feasible: Vec<Vec<usize>>,
    pub kernel: Kernel,
    /// Laid out as `[state][control]`.
    pub cost: Vec<f64>,
    pub radius: f64,
}

impl McmModel {
    /// Checks shapes only; content is checked by [`McmModel::validate`].
    pub fn new(
        states: Vec<String>,
        controls: Vec<String>,
        mut feasible: Vec<Vec<usize>>,
        kernel: Kernel,
        cost: Vec<f64>,
        radius: f64,
    ) -> Result<Self> {
        let (nx, nu) = (states.len(), controls.len());
        if feasible.len() != nx {
            return Err(Error::DimensionMismatch { expected: nx, found: feasible.len() });
        }
        for set in &mut feasible {
            set.sort_unstable();
            set.dedup();
            if let Some(&u) = set.iter().find(|&&u| u >= nu) {
                return Err(Error::DimensionMismatch { expected: nu, found: u + 1 });
            }
        }
        if kernel.n_states() != nx || kernel.n_controls() != nu {
            return Err(Error::DimensionMismatch { expected: nx * nu, found: kernel.n_states() * kernel.n_controls() });
        }
        if cost.len() != nx * nu {
            return Err(Error::DimensionMismatch { expected: nx * nu, found: cost.len() });
        }
        Ok(Self { states, controls, feasible, kernel, cost, radius })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn feasible(&self, state: usize) -> &[usize] {
        &self.feasible[state]
    }

    pub fn is_feasible(&self, state: usize, control: usize) -> bool {
        self.feasible[state].binary_search(&control).is_ok()
    }

    pub fn cost(&self, state: usize, control: usize) -> f64 {
        self.cost[state * self.n_controls() + control]
    }

    /// The same model with a different radius.
    pub fn with_radius(&self, radius: f64) -> Self {
        Self { radius, ..self.clone() }
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.states.iter().position(|s| s == name).ok_or_else(|| Error::UnknownState(name.into()))
    }

    pub fn control_index(&self, name: &str) -> Result<usize> {
        self.controls.iter().position(|u| u == name).ok_or_else(|| Error::UnknownControl(name.into()))
    }

    /// Returns every violated invariant, or `Ok` if there are none.
    pub fn validate(&self, tol: f64) -> core::result::Result<(), Vec<ValidationIssue>> {
        let mut issues = Vec::new();
        if self.states.is_empty() {
            issues.push(ValidationIssue::NoStates);
        }
        if self.controls.is_empty() {
            issues.push(ValidationIssue::NoControls);
        }
        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].contains(s) {
                issues.push(ValidationIssue::DuplicateState(s.clone()));
            }
        }
        for (i, u) in self.controls.iter().enumerate() {
            if self.controls[..i].contains(u) {
                issues.push(ValidationIssue::DuplicateControl(u.clone()));
            }
        }
        if !(0.0..=2.0).contains(&self.radius) {
            issues.push(ValidationIssue::RadiusOutOfRange { radius: self.radius });
        }
        for x in 0..self.n_states() {
            if self.feasible[x].is_empty() {
                issues.push(ValidationIssue::EmptyFeasibleSet { state: self.states[x].clone() });
            }
            for &u in &self.feasible[x] {
                let row = self.kernel.row(x, u);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > tol || sum.is_nan() {
                    issues.push(ValidationIssue::RowSum {
                        state: self.states[x].clone(),
                        control: self.controls[u].clone(),
                        sum,
                    });
                }
                for (z, &p) in row.iter().enumerate() {
                    if !(p >= -tol && p <= 1.0 + tol) {
                        issues.push(ValidationIssue::EntryOutOfRange {
                            state: self.states[x].clone(),
                            control: self.controls[u].clone(),
                            next_state: self.states[z].clone(),
                            value: p,
                        });
                    }
                }
                let c = self.cost(x, u);
                if !(c.is_finite() && c >= 0.0) {
                    issues.push(ValidationIssue::BadCost {
                        state: self.states[x].clone(),
                        control: self.controls[u].clone(),
                        value: c,
                    });
                }
            }
        }
        if issues.is_empty() { Ok(()) } else { Err(issues) }
    }

    /// `validate` with the default tolerance, folded into [`Error`].
    pub fn validated(self) -> Result<Self> {
        self.validate(ROW_SUM_TOL).map_err(Error::Invalid)?;
        Ok(self)
    }

    pub fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.len() != self.n_states() {
            return Err(Error::DimensionMismatch { expected: self.n_states(), found: policy.len() });
        }
        for (x, &u) in policy.as_slice().iter().enumerate() {
            if u >= self.n_controls() {
                return Err(Error::DimensionMismatch { expected: self.n_controls(), found: u + 1 });
            }
            if !self.is_feasible(x, u) {
                return Err(Error::InfeasibleControl {
                    state: self.states[x].clone(),
                    control: self.controls[u].clone(),
                });
            }
        }
        Ok(())
    }

    /// Parses one control name per state, in state order.
    pub fn policy_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Policy> {
        if names.len() != self.n_states() {
            return Err(Error::DimensionMismatch { expected: self.n_states(), found: names.len() });
        }
        let p = Policy::new(names.iter().map(|n| self.control_index(n.as_ref())).collect::<Result<Vec<_>>>()?);
        self.check_policy(&p)?;
        Ok(p)
    }

    pub fn policy_names(&self, policy: &Policy) -> Vec<&str> {
        policy.as_slice().iter().map(|&u| self.controls[u].as_str()).collect()
    }

    /// The first feasible control at every state.
    pub fn first_feasible_policy(&self) -> Policy {
        Policy::new(self.feasible.iter().map(|s| s[0]).collect())
    }

    /// Number of deterministic stationary policies, saturating.
    pub fn policy_count(&self) -> u128 {
        self.feasible.iter().fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    /// All deterministic stationary policies, first state varying slowest.
    pub fn policies(&self) -> Policies<'_> {
        let done = self.feasible.iter().any(Vec::is_empty);
        Policies { model: self, digits: alloc::vec![0; self.n_states()], done }
    }

    /// `f(g)`: the cost of the policy's control at each state.
    pub fn restrict_cost(&self, policy: &Policy) -> Vec<f64> {
        policy.as_slice().iter().enumerate().map(|(x, &u)| self.cost(x, u)).collect()
    }
}

/// Iterator returned by [`McmModel::policies`].
pub struct Policies<'a> {
    model: &'a McmModel,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for Policies<'_> {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        if self.done {
            return None;
        }
        let feasible = &self.model.feasible;
        let current = Policy::new(self.digits.iter().enumerate().map(|(x, &d)| feasible[x][d]).collect());
        let mut x = self.digits.len();
        loop {
            if x == 0 {
                self.done = true;
                break;
            }
            x -= 1;
            self.digits[x] += 1;
            if self.digits[x] < feasible[x].len() {
                break;
            }
            self.digits[x] = 0;
        }
        Some(current)
    }
}
