//! Discrete inf-sup constant of the MINI pair.
//!
//! `beta^2` is the smallest eigenvalue of `B A1^{-1} B^T q = beta^2 M_p q` on
//! mean-free pressures, where `A1` is the H1 Gram matrix (mass + stiffness)
//! of the constrained velocity space and `M_p` the P1 mass matrix. The
//! constant pressure is the only kernel mode; it is shifted out of the way
//! with a rank-one update so that the remaining spectrum is exactly the
//! spectrum on the quotient space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::lu::SparseLu;
use crate::assembly::Discretization;
use crate::error::{Error, Result};

/// Largest supported mesh (the eigenproblem is dense in the pressure space).
pub const MAX_INFSUP_NX: usize = 32;

#[derive(Debug, Clone)]
pub struct InfSupEstimate {
    pub nx: usize,
    pub beta: f64,
    /// Generalized eigenvalues on the mean-free subspace, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Dense `B A1^{-1} B^T` restricted to free velocity dofs.
pub fn pressure_schur_complement(disc: &Discretization) -> Result<DMatrix<f64>> {
    let ops = &disc.operators;
    let free = disc.dofs.velocity.free_dofs();
    let all_p: Vec<usize> = (0..disc.n_pressure()).collect();
    let a1 = ops.m_u.linear_combination(1.0, &ops.k_u, 1.0)?.submatrix(&free, &free);
    let b = ops.b.submatrix(&all_p, &free);
    let bt = b.transpose();
    let mut lu = SparseLu::factor(&a1)?;
    let np = all_p.len();
    let mut s = DMatrix::zeros(np, np);
    let mut e = vec![0.0; np];
    let mut col = vec![0.0; free.len()];
    for q in 0..np {
        e[q] = 1.0;
        bt.mul_vec_into(&e, &mut col);
        e[q] = 0.0;
        lu.solve_in_place(&mut col);
        let sq = b.mul_vec(&col);
        for (r, v) in sq.into_iter().enumerate() {
            s[(r, q)] = v;
        }
    }
    Ok(0.5 * (&s + s.transpose()))
}

pub fn estimate_infsup(disc: &Discretization) -> Result<InfSupEstimate> {
    if disc.mesh.nx > MAX_INFSUP_NX {
        return Err(Error::Config(format!(
            "inf-sup estimation uses dense eigensolves; nx <= {MAX_INFSUP_NX} required"
        )));
    }
    let s = pressure_schur_complement(disc)?;
    let mp = disc.operators.m_theta.to_dense();
    let chol = mp
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("pressure mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    let mut c = &linv * s * linv.transpose();
    // constant pressure in the transformed coordinates y = L^T q
    let ones = DVector::from_element(mp.nrows(), 1.0);
    let mut y0 = l.transpose() * ones;
    y0 /= y0.norm();
    let shift = 10.0 * c.amax().max(1.0);
    c += shift * &y0 * y0.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().filter(|&v| v < 0.5 * shift).collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let min = *values
        .first()
        .ok_or_else(|| Error::Factorization("empty mean-free spectrum".into()))?;
    if min <= 0.0 {
        return Err(Error::Factorization(format!(
            "inf-sup eigenproblem has a non-positive eigenvalue {min:e} on mean-free pressures"
        )));
    }
    Ok(InfSupEstimate {
        nx: disc.mesh.nx,
        beta: min.sqrt(),
        eigenvalues: values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Second smallest singular value of `M_p^{-1/2} B A1^{-1/2}`; the smallest
    /// belongs to the constant pressure.
    fn svd_oracle(disc: &Discretization) -> f64 {
        let ops = &disc.operators;
        let free = disc.dofs.velocity.free_dofs();
        let all_p: Vec<usize> = (0..disc.n_pressure()).collect();
        let a1 = ops.m_u.linear_combination(1.0, &ops.k_u, 1.0).unwrap().submatrix(&free, &free).to_dense();
        let b = ops.b.submatrix(&all_p, &free).to_dense();
        let inv_sqrt = |m: DMatrix<f64>| {
            let e = SymmetricEigen::new(m);
            let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()));
            &e.eigenvectors * d * e.eigenvectors.transpose()
        };
        let g = inv_sqrt(ops.m_theta.to_dense()) * b * inv_sqrt(a1);
        let mut sv: Vec<f64> = g.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| a.total_cmp(b));
        assert!(sv[0] < 1e-8, "constant pressure mode {}", sv[0]);
        sv[1]
    }

    #[test]
    fn matches_svd_oracle() {
        for nx in [2, 4, 6] {
            let d = Discretization::new(nx).unwrap();
            let est = estimate_infsup(&d).unwrap();
            let oracle = svd_oracle(&d);
            assert!((est.beta - oracle).abs() < 1e-8, "nx={nx}: {} vs {oracle}", est.beta);
            assert_eq!(est.eigenvalues.len(), d.n_pressure() - 1);
            assert!(est.eigenvalues[0] > 0.0);
        }
    }

    #[test]
    fn bounded_below_uniformly() {
        let b4 = estimate_infsup(&Discretization::new(4).unwrap()).unwrap().beta;
        let b8 = estimate_infsup(&Discretization::new(8).unwrap()).unwrap().beta;
        assert!(b4 > 0.05);
        assert!((0.5..=2.0).contains(&(b8 / b4)));
    }

    #[test]
    fn large_meshes_are_refused() {
        let d = Discretization::new(MAX_INFSUP_NX + 1).unwrap();
        assert!(estimate_infsup(&d).is_err());
    }
}
