//! Average-cost Markov control under total-variation ambiguity.
//!
//! The transition kernel of a finite Markov control model is only known to
//! lie, row by row, in a total-variation ball of radius `R` around a nominal
//! kernel. The adversarial kernel that maximises expected cost-to-go is the
//! water-filling solution in [`tv_ball`]; [`dp`] builds the finite-horizon
//! recursion and the two policy-iteration schemes on top of it, [`chain`]
//! supplies the Markov-chain structure analysis they depend on, and
//! [`robustness`] studies how the answer changes with `R`.
//!
//! Matrices are row-stochastic: row `i` is the distribution of the next
//! state given current state `i`.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chain;
pub mod dp;
mod error;
pub mod linalg;
pub mod model;
pub mod robustness;
pub mod tv_ball;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{Kernel, McmModel, Policy, ValidationIssue};
