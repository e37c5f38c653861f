//! Model files, reports and the command-line front end for
//! [`robust_mdp_core`].

pub mod cli;
pub mod format;
pub mod report;
pub mod text;
