pub mod discrete;
pub mod error;
pub mod interp;
pub mod lie;
pub mod models;
pub mod ocp;
pub mod oracle;
pub mod retraction;
pub mod scalar;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
pub use lie::{AlgebraVector, Covector, GroupElement, GroupKind};
pub use retraction::{Retraction, RetractionKind};
pub use scalar::Real;

/// Double-precision aliases.
pub type GroupElement64 = GroupElement<f64>;
pub type AlgebraVector64 = AlgebraVector<f64>;
pub type Covector64 = Covector<f64>;
pub type Problem64 = ocp::SecondOrderProblem<f64>;
pub type DiscreteOcp64 = ocp::DiscreteOcp<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;
