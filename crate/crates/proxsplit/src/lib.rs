//! Proximal subgradient splitting for minimizing f(x) + g(x) with both terms
//! nonsmooth convex: exact prox/subgradient oracles, the splitting iteration
//! with constant, exogenous, and Polyak-type stepsize rules, a posteriori
//! certificate checks of the method's guarantees, and a desk-scale problem
//! gallery with independently derived ground truth.

pub mod error;
pub mod gallery;
pub mod harness;
pub mod lp;
pub mod oracles;
pub mod point;
pub mod solver;
pub mod certificates;
pub mod config;
pub mod trace_io;

pub use error::{Error, Result};
pub use point::Point;
