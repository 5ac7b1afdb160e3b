//! Generalized Jacobians, ordering cones and sampling certifiers for
//! nonsmooth vector optimization problems.

pub mod audit;
pub mod certify;
pub mod cli;
pub mod cone;
pub mod expr;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod problem;
pub mod report;
pub mod sampling;
