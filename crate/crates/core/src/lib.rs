//! Regularized solvers, convex duality tools and stress-concentration
//! diagnostics for elliptic systems whose strain is a bounded function of
//! the stress.
//!
//! The constitutive relation `ε = D(T)` has a bounded range, so the
//! displacement problem is solved through the family of regularized
//! problems in [`regularized`], whose limit is characterized by the
//! functionals in [`variational`] and inspected by [`diagnostics`].

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod constitutive;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod linalg;
pub mod oracles;
pub mod potentials;
pub mod quadrature;
pub mod regularized;
pub mod tensor;
pub mod variational;

pub use constitutive::{ConstitutiveLaw, CustomLaw, LawConstants, LawKind, SamplingSpec, StructureReport};
pub use diagnostics::{AprioriTrace, BoundaryDefectEstimate, ConcentrationFlag, RenormResidual, SingularSupportMap};
pub use discretization::{CellTensorField, DataFn, Field, GeometrySpec, GradientKind, MeshDomain};
pub use error::{Error, Result};
pub use oracles::Oracle1DSolution;
pub use potentials::PotentialValue;
pub use regularized::{ApproxProblem, ApproxSolution, Problem, SolverOptions, SolverReport};
pub use tensor::{Tensor, TensorMap};
pub use variational::{DualityReport, PrimalSolution};
