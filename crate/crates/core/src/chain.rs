//! Structure of finite stochastic matrices: communication classes,
//! invariant distributions and Cesàro limits.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix, PIVOT_TOL};

/// Transitions with probability at or below this are not graph edges.
pub const EDGE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CommunicationClass {
    /// Sorted state indices.
    pub states: Vec<usize>,
    /// Closed: no edge leaves the class.
    pub recurrent: bool,
}

/// Partition of the states into communication classes, ordered by their
/// lowest state index.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassDecomposition {
    pub classes: Vec<CommunicationClass>,
    class_of: Vec<usize>,
}

impl ClassDecomposition {
    pub fn n_states(&self) -> usize {
        self.class_of.len()
    }

    /// Index into `classes` of the class containing `state`.
    pub fn class_of(&self, state: usize) -> usize {
        self.class_of[state]
    }

    pub fn recurrent(&self) -> impl Iterator<Item = &CommunicationClass> {
        self.classes.iter().filter(|c| c.recurrent)
    }

    pub fn transient_states(&self) -> Vec<usize> {
        (0..self.n_states()).filter(|&x| !self.classes[self.class_of[x]].recurrent).collect()
    }

    pub fn is_irreducible(&self) -> bool {
        self.classes.len() == 1
    }

    /// True when exactly one class is recurrent.
    pub fn is_unichain(&self) -> bool {
        self.recurrent().count() == 1
    }
}

impl fmt::Display for ClassDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.classes.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{{")?;
            for (i, s) in c.states.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{s}")?;
            }
            write!(f, "}} {}", if c.recurrent { "recurrent" } else { "transient" })?;
        }
        Ok(())
    }
}

/// Tarjan's algorithm, iterative to keep the stack bounded.
fn strongly_connected(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0;
    let mut components = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));

        while let Some(&(v, edge)) = call.last() {
            if edge < adj[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = adj[v][edge];
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut component = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    component.push(w);
                    if w == v {
                        break;
                    }
                }
                components.push(component);
            }
        }
    }
    components
}

/// Communication classes of the graph with an edge `i → j` iff
/// `p[i][j] > EDGE_TOL`.
pub fn communication_classes(p: &Matrix) -> ClassDecomposition {
    assert!(p.is_square(), "transition matrix must be square");
    let n = p.n_rows();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| p[(i, j)] > EDGE_TOL).collect()).collect();

    let mut components = strongly_connected(&adj);
    for c in &mut components {
        c.sort_unstable();
    }
    components.sort_unstable_by_key(|c| c[0]);

    let mut class_of = vec![0; n];
    for (k, c) in components.iter().enumerate() {
        for &s in c {
            class_of[s] = k;
        }
    }
    let classes = components
        .into_iter()
        .enumerate()
        .map(|(k, states)| {
            let recurrent = states.iter().all(|&i| adj[i].iter().all(|&j| class_of[j] == k));
            CommunicationClass { states, recurrent }
        })
        .collect();
    ClassDecomposition { classes, class_of }
}

pub fn is_irreducible(p: &Matrix) -> bool {
    communication_classes(p).is_irreducible()
}

/// Solves `q·P = q`, `Σq = 1` by replacing the last balance equation with
/// the normalisation. Requires a single closed class.
pub(crate) fn stationary_solve(p: &Matrix) -> Result<Vec<f64>> {
    let n = p.n_rows();
    let mut a = p.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    a.row_mut(n - 1).fill(1.0);
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    Ok(Lu::new(a, PIVOT_TOL)?.solve(&b))
}

/// The unique invariant distribution of an irreducible matrix.
pub fn invariant_distribution(p: &Matrix) -> Result<Vec<f64>> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch { expected: p.n_rows(), found: p.n_cols() });
    }
    if p.n_rows() == 0 {
        return Err(Error::Empty);
    }
    let d = communication_classes(p);
    if !d.is_irreducible() {
        return Err(Error::Reducible(d));
    }
    stationary_solve(p)
}

/// Invariant distribution of each recurrent class, in class order, over the
/// states of that class.
pub fn class_distributions(p: &Matrix, d: &ClassDecomposition) -> Result<Vec<(usize, Vec<f64>)>> {
    d.classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.recurrent)
        .map(|(k, c)| Ok((k, stationary_solve(&p.select(&c.states, &c.states))?)))
        .collect()
}

/// Probability that each transient state is eventually absorbed in each
/// recurrent class.
///
/// Rows follow [`ClassDecomposition::transient_states`]; columns follow the
/// recurrent classes in class order.
pub fn absorption_probabilities(p: &Matrix, d: &ClassDecomposition) -> Result<Matrix> {
    let transient = d.transient_states();
    let recurrent: Vec<&CommunicationClass> = d.recurrent().collect();
    let mut out = Matrix::zeros(transient.len(), recurrent.len());
    if transient.is_empty() {
        return Ok(out);
    }
    let mut a = p.select(&transient, &transient);
    for i in 0..transient.len() {
        for j in 0..transient.len() {
            a[(i, j)] = if i == j { 1.0 } else { 0.0 } - a[(i, j)];
        }
    }
    let lu = Lu::new(a, PIVOT_TOL)?;
    for (k, class) in recurrent.iter().enumerate() {
        let rhs: Vec<f64> = transient.iter().map(|&t| class.states.iter().map(|&j| p[(t, j)]).sum()).collect();
        for (i, v) in lu.solve(&rhs).into_iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    Ok(out)
}

/// `lim (1/n) Σ_{k<n} Pᵏ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CesaroLimit {
    pub matrix: Matrix,
}

/// Computes the Cesàro limit structurally: recurrent rows carry their
/// class's invariant distribution and transient rows mix those by
/// absorption probability.
pub fn cesaro_limit(p: &Matrix) -> Result<CesaroLimit> {
    if !p.is_square() {
        return Err(Error::DimensionMismatch { expected: p.n_rows(), found: p.n_cols() });
    }
    let n = p.n_rows();
    let d = communication_classes(p);
    let dists = class_distributions(p, &d)?;
    let mut limit = Matrix::zeros(n, n);
    for (k, q) in &dists {
        for &i in &d.classes[*k].states {
            for (&j, &v) in d.classes[*k].states.iter().zip(q) {
                limit[(i, j)] = v;
            }
        }
    }
    let absorb = absorption_probabilities(p, &d)?;
    for (row, &t) in d.transient_states().iter().enumerate() {
        for (col, (k, q)) in dists.iter().enumerate() {
            let w = absorb[(row, col)];
            for (&j, &v) in d.classes[*k].states.iter().zip(q) {
                limit[(t, j)] += w * v;
            }
        }
    }
    Ok(CesaroLimit { matrix: limit })
}
