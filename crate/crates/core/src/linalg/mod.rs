//! Sparse storage, direct solvers and the dense inf-sup estimator.

pub mod infsup;
pub mod lu;
pub mod saddle;
pub mod sparse;
pub mod static_lu;
pub mod transport;

pub use infsup::{estimate_infsup, InfSupEstimate};
pub use lu::{relative_residual, solve_sparse, solve_spd, LuPattern, LuPlan, PlannedLu, SparseLu, SOLVE_RESIDUAL_TOL};
pub use saddle::{SaddleSolution, SaddleStructure, SaddleSystem};
pub use sparse::{dot, norm2, CsrMatrix};
pub use static_lu::{StaticLu, StaticLuPattern};
pub use transport::{TransportStructure, TransportSystem};
