//! Discrete spaces: local bases, quadrature, dof maps and L2 projections.

pub mod basis;
pub mod dofmap;
pub mod projection;
pub mod quadrature;

pub use basis::{eval_at_barycentric, eval_basis, BasisValues, SpaceKind, TriangleGeometry};
pub use dofmap::{DofMap, DofMaps};
pub use projection::{
    project_bh, project_bh_load, project_ph, project_ph_load, project_qh, project_qh_coeffs, project_qh_load,
    project_qh_load_with,
};
pub use quadrature::{make_quadrature, QuadratureRule};
