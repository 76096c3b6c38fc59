//! Element integrals and global operators of the fully discrete scheme.
//!
//! Every integral is evaluated with the degree-8 rule, which is exact for all
//! integrands that occur (the worst is the convection form with two bubble
//! factors and one bubble gradient). The P1 functions are the first three of
//! the four MINI scalar functions, so temperature and pressure integrals are
//! sub-blocks of the MINI element arrays.

use crate::error::Result;
use crate::linalg::CsrMatrix;
use crate::mesh::{build_structured_mesh, Mesh};
use crate::spaces::{eval_at_barycentric, make_quadrature, DofMaps, QuadratureRule, SpaceKind, TriangleGeometry};

/// Quadrature degree used for all assembly.
pub const ASSEMBLY_DEGREE: usize = 8;

pub type Local4 = [[f64; 4]; 4];

/// Precomputed local arrays of every triangle.
#[derive(Debug, Clone)]
pub struct ElementData {
    pub geometry: Vec<TriangleGeometry>,
    /// `(psi_j, psi_i)` over the MINI scalar functions.
    pub mass: Vec<Local4>,
    /// `(grad psi_j, grad psi_i)`.
    pub stiffness: Vec<Local4>,
    /// `div[c][q][j] = (d_c psi_j, lambda_q)`.
    pub div: Vec<[[[f64; 4]; 3]; 2]>,
    /// `conv[c][a][i][j] = (psi_a d_c psi_j + 1/2 d_c psi_a psi_j, psi_i)`:
    /// the trilinear form with convecting function `psi_a e_c`, trial
    /// `psi_j` and test `psi_i`.
    pub conv: Vec<[[Local4; 4]; 2]>,
}

impl ElementData {
    pub fn new(mesh: &Mesh, quad: &QuadratureRule) -> Self {
        let nt = mesh.n_triangles();
        let mut data = ElementData {
            geometry: Vec::with_capacity(nt),
            mass: Vec::with_capacity(nt),
            stiffness: Vec::with_capacity(nt),
            div: Vec::with_capacity(nt),
            conv: Vec::with_capacity(nt),
        };
        for t in 0..nt {
            let geo = TriangleGeometry::of(mesh, t);
            let mut mass = [[0.0; 4]; 4];
            let mut stiff = [[0.0; 4]; 4];
            let mut div = [[[0.0; 4]; 3]; 2];
            let mut conv = [[[[0.0; 4]; 4]; 4]; 2];
            for (l, w) in quad.points.iter().zip(&quad.weights) {
                let wq = w * 2.0 * geo.area;
                let b = eval_at_barycentric(SpaceKind::VelocityMini, &geo, *l);
                let (v, g) = (&b.values, &b.grads);
                for i in 0..4 {
                    for j in 0..4 {
                        mass[i][j] += wq * v[i] * v[j];
                        stiff[i][j] += wq * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    }
                }
                for c in 0..2 {
                    for q in 0..3 {
                        for j in 0..4 {
                            div[c][q][j] += wq * g[j][c] * v[q];
                        }
                    }
                    for a in 0..4 {
                        for i in 0..4 {
                            for j in 0..4 {
                                conv[c][a][i][j] += wq * (v[a] * g[j][c] + 0.5 * g[a][c] * v[j]) * v[i];
                            }
                        }
                    }
                }
            }
            data.geometry.push(geo);
            data.mass.push(mass);
            data.stiffness.push(stiff);
            data.div.push(div);
            data.conv.push(conv);
        }
        data
    }

    /// Local velocity coefficients `[component][scalar function]` of `w` on
    /// triangle `t`.
    pub fn local_velocity(dofs: &DofMaps, t: usize, w: &[f64]) -> [[f64; 4]; 2] {
        let ld = dofs.velocity.local_dofs(t);
        let mut out = [[0.0; 4]; 2];
        for c in 0..2 {
            for a in 0..4 {
                out[c][a] = w[ld[4 * c + a]];
            }
        }
        out
    }

    /// Local matrix of `b(w, psi_j, psi_i)` on triangle `t` (rows: test).
    pub fn local_convection(&self, t: usize, wl: &[[f64; 4]; 2]) -> Local4 {
        let mut n = [[0.0; 4]; 4];
        let conv = &self.conv[t];
        for c in 0..2 {
            for a in 0..4 {
                let wa = wl[c][a];
                if wa == 0.0 {
                    continue;
                }
                for i in 0..4 {
                    for j in 0..4 {
                        n[i][j] += wa * conv[c][a][i][j];
                    }
                }
            }
        }
        n
    }
}

/// Global operators that do not depend on the evolving velocity.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    /// Scalar MINI mass and stiffness (one velocity component).
    pub mass_scalar: CsrMatrix,
    pub stiffness_scalar: CsrMatrix,
    pub m_u: CsrMatrix,
    pub k_u: CsrMatrix,
    pub m_theta: CsrMatrix,
    pub k_theta: CsrMatrix,
    /// Rows: pressure dofs, columns: velocity dofs; `B[q][i] = (div phi_i, psi_q)`.
    pub b: CsrMatrix,
    /// Rows: velocity test dofs, columns: temperature dofs; `(theta e2, phi)`.
    pub e2: CsrMatrix,
    /// `integral of psi_q` for every P1 function.
    pub p1_integrals: Vec<f64>,
}

fn scalar_mini_index(nv: usize, tri: &[usize; 3], t: usize, a: usize) -> usize {
    if a < 3 {
        tri[a]
    } else {
        nv + t
    }
}

/// Stacks a scalar operator into the two-component block diagonal.
pub fn block_diag2(s: &CsrMatrix) -> CsrMatrix {
    let (n, m) = (s.nrows(), s.ncols());
    let mut t = Vec::with_capacity(2 * s.nnz());
    for c in 0..2 {
        for r in 0..n {
            t.extend(s.row(r).map(|(col, v)| (c * n + r, c * m + col, v)));
        }
    }
    CsrMatrix::from_triplets(2 * n, 2 * m, &t)
}

pub fn assemble_operators(mesh: &Mesh, dofs: &DofMaps, elements: &ElementData) -> OperatorSet {
    let nv = mesh.n_vertices();
    let ns = dofs.velocity.scalar_dofs;
    let mut ms = Vec::new();
    let mut ks = Vec::new();
    let mut mp = Vec::new();
    let mut kp = Vec::new();
    let mut b = Vec::new();
    let mut e2 = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (m, k, d) = (&elements.mass[t], &elements.stiffness[t], &elements.div[t]);
        for i in 0..4 {
            let gi = scalar_mini_index(nv, tri, t, i);
            for j in 0..4 {
                let gj = scalar_mini_index(nv, tri, t, j);
                ms.push((gi, gj, m[i][j]));
                ks.push((gi, gj, k[i][j]));
            }
            for j in 0..3 {
                e2.push((ns + gi, tri[j], m[i][j]));
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                mp.push((tri[i], tri[j], m[i][j]));
                kp.push((tri[i], tri[j], k[i][j]));
            }
        }
        for c in 0..2 {
            for q in 0..3 {
                for j in 0..4 {
                    b.push((tri[q], c * ns + scalar_mini_index(nv, tri, t, j), d[c][q][j]));
                }
            }
        }
    }
    let mass_scalar = CsrMatrix::from_triplets(ns, ns, &ms);
    let stiffness_scalar = CsrMatrix::from_triplets(ns, ns, &ks);
    let m_theta = CsrMatrix::from_triplets(nv, nv, &mp);
    let p1_integrals = m_theta.mul_vec(&vec![1.0; nv]);
    OperatorSet {
        m_u: block_diag2(&mass_scalar),
        k_u: block_diag2(&stiffness_scalar),
        mass_scalar,
        stiffness_scalar,
        k_theta: CsrMatrix::from_triplets(nv, nv, &kp),
        m_theta,
        b: CsrMatrix::from_triplets(nv, 2 * ns, &b),
        e2: CsrMatrix::from_triplets(2 * ns, nv, &e2),
        p1_integrals,
    }
}

/// Matrix `N(w)` with entries `b(w, phi_j, phi_i)` over all velocity dofs.
pub fn assemble_convection_velocity(mesh: &Mesh, dofs: &DofMaps, elements: &ElementData, w: &[f64]) -> CsrMatrix {
    let nv = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(16 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let n = elements.local_convection(t, &ElementData::local_velocity(dofs, t, w));
        for i in 0..4 {
            for j in 0..4 {
                triplets.push((scalar_mini_index(nv, tri, t, i), scalar_mini_index(nv, tri, t, j), n[i][j]));
            }
        }
    }
    let ns = dofs.velocity.scalar_dofs;
    block_diag2(&CsrMatrix::from_triplets(ns, ns, &triplets))
}

/// Matrix `N~(w)` with entries `b~(w, psi_j, psi_i)` over the P1 temperature
/// dofs.
pub fn assemble_convection_temperature(mesh: &Mesh, dofs: &DofMaps, elements: &ElementData, w: &[f64]) -> CsrMatrix {
    let nv = mesh.n_vertices();
    let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let n = elements.local_convection(t, &ElementData::local_velocity(dofs, t, w));
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], n[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(nv, nv, &triplets)
}

/// Everything on one mesh that is shared read-only by all trajectories.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub dofs: DofMaps,
    pub quadrature: QuadratureRule,
    pub elements: ElementData,
    pub operators: OperatorSet,
}

impl Discretization {
    pub fn new(nx: usize) -> Result<Self> {
        Self::from_mesh(build_structured_mesh(nx)?)
    }

    pub fn from_mesh(mesh: Mesh) -> Result<Self> {
        let dofs = DofMaps::new(&mesh);
        let quadrature = make_quadrature(ASSEMBLY_DEGREE)?;
        let elements = ElementData::new(&mesh, &quadrature);
        let operators = assemble_operators(&mesh, &dofs, &elements);
        Ok(Discretization {
            mesh,
            dofs,
            quadrature,
            elements,
            operators,
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.dofs.velocity.n_dofs
    }

    pub fn n_pressure(&self) -> usize {
        self.dofs.pressure.n_dofs
    }

    pub fn n_temperature(&self) -> usize {
        self.dofs.temperature.n_dofs
    }

    /// Evaluates a velocity field given by coefficients at a physical point.
    pub fn eval_velocity(&self, u: &[f64], point: [f64; 2]) -> Option<([f64; 2], [[f64; 2]; 2])> {
        let t = self.mesh.locate(point)?;
        let geo = &self.elements.geometry[t];
        let b = eval_at_barycentric(SpaceKind::VelocityMini, geo, geo.barycentric(point));
        let wl = ElementData::local_velocity(&self.dofs, t, u);
        let mut val = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for c in 0..2 {
            for a in 0..4 {
                val[c] += wl[c][a] * b.values[a];
                for d in 0..2 {
                    grad[c][d] += wl[c][a] * b.grads[a][d];
                }
            }
        }
        Some((val, grad))
    }

    /// Evaluates a P1 field at a physical point.
    pub fn eval_scalar(&self, s: &[f64], point: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let t = self.mesh.locate(point)?;
        let geo = &self.elements.geometry[t];
        let l = geo.barycentric(point);
        let tri = self.mesh.triangles[t];
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for a in 0..3 {
            val += s[tri[a]] * l[a];
            grad[0] += s[tri[a]] * geo.grad_lambda[a][0];
            grad[1] += s[tri[a]] * geo.grad_lambda[a][1];
        }
        Some((val, grad))
    }

    /// `integral f . phi_i` for every velocity dof.
    pub fn load_velocity(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let ns = self.dofs.velocity.scalar_dofs;
        let nv = self.mesh.n_vertices();
        let mut out = vec![0.0; 2 * ns];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = &self.elements.geometry[t];
            for (l, w) in self.quadrature.points.iter().zip(&self.quadrature.weights) {
                let wq = w * 2.0 * geo.area;
                let fx = f(geo.point(*l));
                let b = eval_at_barycentric(SpaceKind::VelocityMini, geo, *l);
                for a in 0..4 {
                    let g = scalar_mini_index(nv, tri, t, a);
                    out[g] += wq * fx[0] * b.values[a];
                    out[ns + g] += wq * fx[1] * b.values[a];
                }
            }
        }
        out
    }

    /// `integral f psi_i` for every P1 dof.
    pub fn load_scalar(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_vertices()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = &self.elements.geometry[t];
            for (l, w) in self.quadrature.points.iter().zip(&self.quadrature.weights) {
                let wq = w * 2.0 * geo.area * f(geo.point(*l));
                for a in 0..3 {
                    out[tri[a]] += wq * l[a];
                }
            }
        }
        out
    }

    /// Squared L2 and H1-seminorm distances between a continuous field and a
    /// discrete velocity, by element quadrature.
    pub fn velocity_error_sq(&self, u: &[f64], exact: impl Fn([f64; 2]) -> ([f64; 2], [[f64; 2]; 2])) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let geo = &self.elements.geometry[t];
            let wl = ElementData::local_velocity(&self.dofs, t, u);
            for (l, w) in self.quadrature.points.iter().zip(&self.quadrature.weights) {
                let wq = w * 2.0 * geo.area;
                let b = eval_at_barycentric(SpaceKind::VelocityMini, geo, *l);
                let (ev, eg) = exact(geo.point(*l));
                for c in 0..2 {
                    let mut v = 0.0;
                    let mut g = [0.0; 2];
                    for a in 0..4 {
                        v += wl[c][a] * b.values[a];
                        g[0] += wl[c][a] * b.grads[a][0];
                        g[1] += wl[c][a] * b.grads[a][1];
                    }
                    l2 += wq * (v - ev[c]).powi(2);
                    h1 += wq * ((g[0] - eg[c][0]).powi(2) + (g[1] - eg[c][1]).powi(2));
                }
            }
        }
        (l2, h1)
    }

    /// Squared L2 and H1-seminorm distances between a continuous scalar field
    /// and a P1 function.
    pub fn scalar_error_sq(&self, s: &[f64], exact: impl Fn([f64; 2]) -> (f64, [f64; 2])) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            let geo = &self.elements.geometry[t];
            let mut g = [0.0; 2];
            for a in 0..3 {
                g[0] += s[tri[a]] * geo.grad_lambda[a][0];
                g[1] += s[tri[a]] * geo.grad_lambda[a][1];
            }
            for (l, w) in self.quadrature.points.iter().zip(&self.quadrature.weights) {
                let wq = w * 2.0 * geo.area;
                let v: f64 = (0..3).map(|a| s[tri[a]] * l[a]).sum();
                let (ev, eg) = exact(geo.point(*l));
                l2 += wq * (v - ev).powi(2);
                h1 += wq * ((g[0] - eg[0]).powi(2) + (g[1] - eg[1]).powi(2));
            }
        }
        (l2, h1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_velocity(d: &Discretization, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut w: Vec<f64> = (0..d.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
        d.dofs.velocity.zero_dirichlet(&mut w);
        w
    }

    #[test]
    fn p1_mass_on_reference_triangle() {
        let mut mesh = build_structured_mesh(1).unwrap();
        mesh.vertices[3] = [0.0, 1.0];
        mesh.triangles[0] = [0, 1, 3];
        let quad = make_quadrature(ASSEMBLY_DEGREE).unwrap();
        // analytic: int l_i l_j = (1/24) [[2,1,1],[1,2,1],[1,1,2]]
        let m = &ElementData::new(&mesh, &quad).mass[0];
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 / 24.0 } else { 1.0 / 24.0 };
                assert!((m[i][j] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_fields() {
        let d = Discretization::new(3).unwrap();
        let ns = d.dofs.velocity.scalar_dofs;
        let nv = d.mesh.n_vertices();
        let mut c = vec![0.0; d.n_velocity()];
        for v in 0..nv {
            c[v] = 0.6;
            c[ns + v] = -0.8;
        }
        assert!((d.operators.m_u.quadratic_form(&c) - 1.0).abs() < 1e-13);
        assert!(d.operators.k_u.mul_vec(&c).iter().all(|v| v.abs() < 1e-12));
        let ones = vec![1.0; nv];
        assert!((d.operators.p1_integrals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(d.operators.k_theta.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn mass_and_stiffness_definiteness_after_reduction() {
        let d = Discretization::new(3).unwrap();
        let free = d.dofs.temperature.free_dofs();
        for m in [&d.operators.m_theta, &d.operators.k_theta] {
            let dense = m.submatrix(&free, &free).to_dense();
            assert!((&dense - dense.transpose()).amax() < 1e-14);
            let eig = nalgebra::SymmetricEigen::new(dense).eigenvalues;
            assert!(eig.min() > 0.0);
        }
        let free_u = d.dofs.velocity.free_dofs();
        for m in [&d.operators.m_u, &d.operators.k_u] {
            let dense = m.submatrix(&free_u, &free_u).to_dense();
            assert!(nalgebra::SymmetricEigen::new(dense).eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn zero_convecting_field_gives_zero_matrix() {
        let d = Discretization::new(2).unwrap();
        let w = vec![0.0; d.n_velocity()];
        assert_eq!(assemble_convection_velocity(&d.mesh, &d.dofs, &d.elements, &w).max_abs(), 0.0);
        assert_eq!(assemble_convection_temperature(&d.mesh, &d.dofs, &d.elements, &w).max_abs(), 0.0);
    }

    #[test]
    fn convection_is_skew_and_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for nx in [2, 4] {
            let d = Discretization::new(nx).unwrap();
            for _ in 0..5 {
                let w = random_velocity(&d, &mut rng);
                let n = assemble_convection_velocity(&d.mesh, &d.dofs, &d.elements, &w);
                let sum = n.linear_combination(1.0, &n.transpose(), 1.0).unwrap();
                assert!(sum.max_abs() < 1e-12 * n.max_abs().max(1.0));
                let nt = assemble_convection_temperature(&d.mesh, &d.dofs, &d.elements, &w);
                let sum = nt.linear_combination(1.0, &nt.transpose(), 1.0).unwrap();
                assert!(sum.max_abs() < 1e-12 * nt.max_abs().max(1.0));

                let v1: Vec<f64> = (0..d.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v2: Vec<f64> = (0..d.n_velocity()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let alpha = 0.37;
                let combo: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| alpha * a + b).collect();
                let lhs = n.mul_vec(&combo);
                let (r1, r2) = (n.mul_vec(&v1), n.mul_vec(&v2));
                for i in 0..lhs.len() {
                    assert!((lhs[i] - (alpha * r1[i] + r2[i])).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn divergence_annihilates_constants_in_pressure() {
        let d = Discretization::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_velocity(&d, &mut rng);
        let bw = d.operators.b.mul_vec(&w);
        // (div w, 1) = 0 for w vanishing on the boundary
        assert!(bw.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn galerkin_consistency_for_linear_fields() {
        // u = (x, -y) is divergence free; theta = 2x + 3y. Then
        // b~(u, theta, 1) = (u . grad theta, 1) = int 2x - 3y = -1/2
        // b(u, v, e1) with v = (y, 0): ([u . grad] v, e1) = int -y = -1/2
        let d = Discretization::new(3).unwrap();
        let ns = d.dofs.velocity.scalar_dofs;
        let nv = d.mesh.n_vertices();
        let mut u = vec![0.0; d.n_velocity()];
        let mut theta = vec![0.0; nv];
        let mut v = vec![0.0; d.n_velocity()];
        let mut e1 = vec![0.0; d.n_velocity()];
        for (i, &[x, y]) in d.mesh.vertices.iter().enumerate() {
            u[i] = x;
            u[ns + i] = -y;
            theta[i] = 2.0 * x + 3.0 * y;
            v[i] = y;
            e1[i] = 1.0;
        }
        let nt = assemble_convection_temperature(&d.mesh, &d.dofs, &d.elements, &u);
        assert!((nt.bilinear(&vec![1.0; nv], &theta) + 0.5).abs() < 1e-12);
        let n = assemble_convection_velocity(&d.mesh, &d.dofs, &d.elements, &u);
        assert!((n.bilinear(&e1, &v) + 0.5).abs() < 1e-12);
        // (div u, q) = 0 for this u and any q; B is consistent with that
        assert!(d.operators.b.mul_vec(&u).iter().all(|r| r.abs() < 1e-13));
        // (theta e2, phi) with phi = e2 constant equals int theta = 5/2
        let mut e2v = vec![0.0; d.n_velocity()];
        for i in 0..nv {
            e2v[ns + i] = 1.0;
        }
        assert!((d.operators.e2.bilinear(&e2v, &theta) - 2.5).abs() < 1e-12);
    }
}
