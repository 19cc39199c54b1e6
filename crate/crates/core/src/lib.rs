//! Birkhoff regularity, characteristic matrices and Green's functions for
//! two-point boundary value problems `l(y) = λy` on [0, 1].

pub mod banded;
pub mod characteristic;
pub mod complex;
pub mod direct;
pub mod dissipativity;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod fss;
pub mod green;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod problem;
pub mod quadrature;
pub mod regularity;
pub mod resolvent;
pub mod spectral;

pub use complex::{unity_root, Cx};
pub use error::{Error, Result};
pub use model::{
    essential_part, normalize_conditions, normalize_matrix, validate, BoundaryConditionSet, Coefficient,
    ConditionBlock, ConditionRow, DifferentialExpression, RawCondition, Term, ValidationReport,
};
pub use problem::{parse_problem, Problem, ProblemDocument};
