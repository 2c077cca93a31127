//! Numerical calculus for operators `T = M − azI` on entire functions,
//! where `M` is a constant-coefficient differential operator.
//!
//! The crate works with truncated Taylor series about the origin and
//! provides exact monomial-basis matrices, commutators with `d/dz`, kernel
//! bases by power-series recurrence, translate eigenfunctions
//! `T S_λ f = aλ S_λ f`, regularized translate-span fits and an explicit
//! construction of approximate hypercyclic orbits for `L(T)`.

pub mod cli;
pub mod eigen;
pub mod error;
pub mod kernel;
pub mod operator;
pub mod orbit;
pub mod report;
pub mod series;

pub use eigen::{
    completeness_fit, composite_eigencheck, eigen_residual, eigenfunction, EigenFamily, FamilyKind, FitReport,
    LambdaSet,
};
pub use error::{Error, Result};
pub use kernel::{kernel_basis, kernel_residual, KernelBasis};
pub use operator::{
    commutator_check, commutator_matrix, decompose, ladder_check, matrix_on_monomials, CompositeOperator, ConvolutionOperator,
    MultiplicationOperator, Operator, OperatorMatrix, WeylOperator,
};
pub use orbit::{construct_orbit, select_expanding_lambdas, verify_orbit, OrbitConstruction, OrbitProblem};
pub use series::{linear_combine, DiskSpec, TaylorSeries, C64};
