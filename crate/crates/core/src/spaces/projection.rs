//! L2-orthogonal projections onto the discretely divergence-free velocities
//! (`Q_h`), mean-free P1 pressures (`P_h`) and P1 temperatures (`B_h`).

use std::sync::Arc;

use crate::assembly::Discretization;
use crate::error::Result;
use crate::linalg::{solve_sparse, solve_spd, CsrMatrix, SaddleStructure, SaddleSystem};
use crate::mesh::Point;

/// `Q_h` given the load vector `(v, phi_i)` over all velocity dofs.
pub fn project_qh_load(disc: &Discretization, load: &[f64]) -> Result<Vec<f64>> {
    project_qh_load_with(SaddleStructure::new(disc)?, disc, load)
}

/// As [`project_qh_load`], reusing an existing saddle structure.
pub fn project_qh_load_with(structure: Arc<SaddleStructure>, disc: &Discretization, load: &[f64]) -> Result<Vec<f64>> {
    let mut system = SaddleSystem::new(structure);
    system.assemble(disc, 1.0, 0.0, None)?;
    Ok(system.solve(disc, load)?.velocity)
}

/// Projects a continuous vector field onto the discretely divergence-free
/// MINI velocities vanishing on the boundary.
pub fn project_qh(disc: &Discretization, v: impl Fn(Point) -> [f64; 2]) -> Result<Vec<f64>> {
    project_qh_load(disc, &disc.load_velocity(v))
}

/// `Q_h` of a discrete velocity given by its coefficients.
pub fn project_qh_coeffs(disc: &Discretization, coeffs: &[f64]) -> Result<Vec<f64>> {
    project_qh_load(disc, &disc.operators.m_u.mul_vec(coeffs))
}

/// Mean-free projection given the load `(psi, q_i)`.
pub fn project_ph_load(disc: &Discretization, load: &[f64]) -> Result<Vec<f64>> {
    let n = disc.n_pressure();
    let m = &disc.operators.m_theta;
    let mut triplets = Vec::with_capacity(m.nnz() + 2 * n);
    for r in 0..n {
        triplets.extend(m.row(r).map(|(c, v)| (r, c, v)));
        triplets.push((r, n, disc.operators.p1_integrals[r]));
        triplets.push((n, r, disc.operators.p1_integrals[r]));
    }
    let system = CsrMatrix::from_triplets(n + 1, n + 1, &triplets);
    let mut rhs = load.to_vec();
    rhs.push(0.0);
    let mut x = solve_sparse(&system, &rhs)?;
    x.truncate(n);
    Ok(x)
}

pub fn project_ph(disc: &Discretization, psi: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    project_ph_load(disc, &disc.load_scalar(psi))
}

/// Projection onto P1 (no boundary or mean constraint).
pub fn project_bh_load(disc: &Discretization, load: &[f64]) -> Result<Vec<f64>> {
    solve_spd(&disc.operators.m_theta, load)
}

pub fn project_bh(disc: &Discretization, v: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    project_bh_load(disc, &disc.load_scalar(v))
}
