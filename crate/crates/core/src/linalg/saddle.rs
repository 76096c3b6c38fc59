//! Velocity-pressure saddle-point systems for the MINI pair.
//!
//! The full system over free velocity dofs, pressure and the mean-zero
//! multiplier `lambda` reads
//!
//! ```text
//! [  A   -B^T   0 ] [u]   [f]
//! [ -B    0     m ] [p] = [0]
//! [  0    m^T   0 ] [l]   [0]
//! ```
//!
//! with `A = s M + nu K + N(w)` acting identically on both components and
//! `m_q = integral psi_q`. Each bubble couples only to its own triangle, so
//! bubbles are eliminated element by element before the sparse LU and
//! recovered afterwards.
//!
//! The multiplier is always zero: summing the pressure rows gives
//! `(div u, 1) = 0` for velocities vanishing on the boundary. A dense border
//! row wrecks the fill-reducing ordering, so the factorized matrix pins the
//! pressure at one vertex instead, and the mean is removed afterwards. The
//! result is checked against the bordered system above.
//!
//! The condensed pressure rows are stored negated. The symmetric part of the
//! factorized matrix is then block diagonal with positive definite blocks
//! (condensed `A` and the bubble Schur complement), which the no-pivot LU
//! needs.

use std::sync::Arc;

use super::lu::{LuPlan, PlannedLu, SOLVE_RESIDUAL_TOL};
use super::sparse::{norm2, CsrMatrix};
use crate::assembly::{Discretization, ElementData, Local4};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;
/// Vertex whose pressure is fixed in the factorized matrix.
const PINNED_VERTEX: usize = 0;

/// Sparsity pattern, slot tables and symbolic factorization of the condensed
/// system. Depends only on the mesh; shared by every trajectory.
#[derive(Debug)]
pub struct SaddleStructure {
    nv: usize,
    ns: usize,
    /// Position of each vertex among the free (interior) vertices.
    free_index: Vec<usize>,
    nf: usize,
    pattern: CsrMatrix,
    lu: LuPlan,
    slots_vv: Vec<[[usize; 9]; 2]>,
    slots_vp: Vec<[[usize; 9]; 2]>,
    slots_pv: Vec<[[usize; 9]; 2]>,
    slots_pp: Vec<[usize; 9]>,
    /// Slots in the row or column of the pinned pressure, and its diagonal.
    slots_pin: Vec<usize>,
    slot_pin_diag: usize,
    p1_integrals: Vec<f64>,
}

impl SaddleStructure {
    pub fn new(disc: &Discretization) -> Result<Arc<Self>> {
        let mesh = &disc.mesh;
        let nv = mesh.n_vertices();
        let ns = disc.dofs.velocity.scalar_dofs;
        let mut free_index = vec![NONE; nv];
        let mut nf = 0;
        for (v, slot) in free_index.iter_mut().enumerate() {
            if !mesh.is_boundary(v) {
                *slot = nf;
                nf += 1;
            }
        }
        let n = 2 * nf + nv;
        let vel = |c: usize, v: usize| if free_index[v] == NONE { NONE } else { c * nf + free_index[v] };
        let pres = |q: usize| 2 * nf + q;

        let mut pairs = Vec::new();
        for tri in &mesh.triangles {
            for c in 0..2 {
                for &a in tri {
                    let r = vel(c, a);
                    if r == NONE {
                        continue;
                    }
                    for &b in tri {
                        if vel(c, b) != NONE {
                            pairs.push((r, vel(c, b)));
                        }
                        pairs.push((r, pres(b)));
                        pairs.push((pres(b), r));
                    }
                }
            }
            for &q in tri {
                for &q2 in tri {
                    pairs.push((pres(q), pres(q2)));
                }
            }
        }
        let pattern = CsrMatrix::from_pattern(n, n, pairs);
        let slot = |r: usize, c: usize| {
            if r == NONE || c == NONE {
                NONE
            } else {
                pattern.slot(r, c).expect("pattern covers element couplings")
            }
        };
        let nt = mesh.n_triangles();
        let mut slots_vv = Vec::with_capacity(nt);
        let mut slots_vp = Vec::with_capacity(nt);
        let mut slots_pv = Vec::with_capacity(nt);
        let mut slots_pp = Vec::with_capacity(nt);
        for tri in &mesh.triangles {
            let mut vv = [[NONE; 9]; 2];
            let mut vp = [[NONE; 9]; 2];
            let mut pv = [[NONE; 9]; 2];
            let mut pp = [NONE; 9];
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..2 {
                        vv[c][3 * a + b] = slot(vel(c, tri[a]), vel(c, tri[b]));
                        vp[c][3 * a + b] = slot(vel(c, tri[a]), pres(tri[b]));
                        pv[c][3 * a + b] = slot(pres(tri[a]), vel(c, tri[b]));
                    }
                    pp[3 * a + b] = slot(pres(tri[a]), pres(tri[b]));
                }
            }
            slots_vv.push(vv);
            slots_vp.push(vp);
            slots_pv.push(pv);
            slots_pp.push(pp);
        }
        let pin = pres(PINNED_VERTEX);
        let mut slots_pin = Vec::new();
        for r in 0..n {
            for (i, &c) in pattern.col_idx()[pattern.row_ptr()[r]..pattern.row_ptr()[r + 1]].iter().enumerate() {
                if r == pin || c == pin {
                    slots_pin.push(pattern.row_ptr()[r] + i);
                }
            }
        }
        let slot_pin_diag = slot(pin, pin);
        let lu = LuPlan::analyze(&pattern)?;
        Ok(Arc::new(SaddleStructure {
            nv,
            ns,
            free_index,
            nf,
            pattern,
            lu,
            slots_vv,
            slots_vp,
            slots_pv,
            slots_pp,
            slots_pin,
            slot_pin_diag,
            p1_integrals: disc.operators.p1_integrals.clone(),
        }))
    }

    /// Size of the condensed system.
    pub fn condensed_size(&self) -> usize {
        self.pattern.nrows()
    }
}

/// Velocity, pressure and multiplier of one saddle solve.
#[derive(Debug, Clone)]
pub struct SaddleSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub multiplier: f64,
}

/// Numeric values and factorization of one saddle system.
pub struct SaddleSystem {
    structure: Arc<SaddleStructure>,
    matrix: CsrMatrix,
    local: Vec<Local4>,
    lu: Option<PlannedLu>,
}

impl SaddleSystem {
    pub fn new(structure: Arc<SaddleStructure>) -> Self {
        let matrix = structure.pattern.clone();
        SaddleSystem {
            structure,
            matrix,
            local: Vec::new(),
            lu: None,
        }
    }

    /// Condensed matrix of the last assembly.
    pub fn condensed_matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Assembles and factorizes `A = mass_scale M + viscosity K + N(w)`
    /// (`N` omitted when `convecting` is `None`).
    pub fn assemble(
        &mut self,
        disc: &Discretization,
        mass_scale: f64,
        viscosity: f64,
        convecting: Option<&[f64]>,
    ) -> Result<()> {
        let st = Arc::clone(&self.structure);
        let el = &disc.elements;
        let vals = self.matrix.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        self.local.clear();
        for (t, _) in disc.mesh.triangles.iter().enumerate() {
            let mut a = [[0.0; 4]; 4];
            let (m, k) = (&el.mass[t], &el.stiffness[t]);
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] = mass_scale * m[i][j] + viscosity * k[i][j];
                }
            }
            if let Some(w) = convecting {
                let n = el.local_convection(t, &ElementData::local_velocity(&disc.dofs, t, w));
                for i in 0..4 {
                    for j in 0..4 {
                        a[i][j] += n[i][j];
                    }
                }
            }
            let abb = a[3][3];
            if abb.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(Error::Factorization(format!(
                    "non-positive bubble pivot {abb:e} on triangle {t} (mass scale and viscosity must not both vanish)"
                )));
            }
            let d = &el.div[t];
            for c in 0..2 {
                let (vv, vp, pv) = (&st.slots_vv[t][c], &st.slots_vp[t][c], &st.slots_pv[t][c]);
                for i in 0..3 {
                    for j in 0..3 {
                        let s = vv[3 * i + j];
                        if s != NONE {
                            vals[s] += a[i][j] - a[i][3] * a[3][j] / abb;
                        }
                        // velocity row i, pressure column j
                        let s = vp[3 * i + j];
                        if s != NONE {
                            vals[s] += -d[c][j][i] + a[i][3] * d[c][j][3] / abb;
                        }
                        // pressure row i, velocity column j (rows negated)
                        let s = pv[3 * i + j];
                        if s != NONE {
                            vals[s] += d[c][i][j] - d[c][i][3] * a[3][j] / abb;
                        }
                        vals[st.slots_pp[t][3 * i + j]] += d[c][i][3] * d[c][j][3] / abb;
                    }
                }
            }
            self.local.push(a);
        }
        for &s in &st.slots_pin {
            vals[s] = 0.0;
        }
        vals[st.slot_pin_diag] = 1.0;
        match self.lu.as_mut() {
            Some(lu) => {
                if let Err(e) = lu.refactor(&self.matrix) {
                    self.lu = None;
                    return Err(e);
                }
            }
            None => self.lu = Some(PlannedLu::factor_with(&st.lu, &self.matrix)?),
        }
        Ok(())
    }

    /// Solves with velocity load `rhs` (one entry per velocity dof; entries
    /// at constrained dofs are ignored). The returned velocity vanishes on
    /// the boundary.
    pub fn solve(&mut self, disc: &Discretization, rhs: &[f64]) -> Result<SaddleSolution> {
        let st = &*self.structure;
        let lu = self
            .lu
            .as_mut()
            .ok_or_else(|| Error::Factorization("saddle system solved before assembly".into()))?;
        if rhs.len() != 2 * st.ns {
            return Err(Error::DimensionMismatch(format!("velocity rhs {} vs {}", rhs.len(), 2 * st.ns)));
        }
        let (nv, ns, nf) = (st.nv, st.ns, st.nf);
        let el = &disc.elements;
        let mut x = vec![0.0; self.matrix.nrows()];
        for v in 0..nv {
            if st.free_index[v] != NONE {
                x[st.free_index[v]] = rhs[v];
                x[nf + st.free_index[v]] = rhs[ns + v];
            }
        }
        for (t, tri) in disc.mesh.triangles.iter().enumerate() {
            let a = &self.local[t];
            let d = &el.div[t];
            for c in 0..2 {
                let fb = rhs[c * ns + nv + t];
                if fb == 0.0 {
                    continue;
                }
                let scaled = fb / a[3][3];
                for i in 0..3 {
                    let fi = st.free_index[tri[i]];
                    if fi != NONE {
                        x[c * nf + fi] -= a[i][3] * scaled;
                    }
                    x[2 * nf + tri[i]] -= d[c][i][3] * scaled;
                }
            }
        }
        x[2 * nf + PINNED_VERTEX] = 0.0;
        let cond_rhs = x.clone();
        lu.solve_in_place(&mut x);
        let cond_res = super::lu::relative_residual(&self.matrix, &x, &cond_rhs);
        if !(cond_res < SOLVE_RESIDUAL_TOL) {
            return Err(Error::Residual {
                context: "condensed saddle solve",
                residual: cond_res,
                tolerance: SOLVE_RESIDUAL_TOL,
            });
        }

        let mut pressure = x[2 * nf..2 * nf + nv].to_vec();
        let area: f64 = st.p1_integrals.iter().sum();
        let mean = st.p1_integrals.iter().zip(&pressure).map(|(m, p)| m * p).sum::<f64>() / area;
        pressure.iter_mut().for_each(|p| *p -= mean);
        let multiplier = 0.0;
        let mut velocity = vec![0.0; 2 * ns];
        for v in 0..nv {
            if st.free_index[v] != NONE {
                velocity[v] = x[st.free_index[v]];
                velocity[ns + v] = x[nf + st.free_index[v]];
            }
        }
        for (t, tri) in disc.mesh.triangles.iter().enumerate() {
            let a = &self.local[t];
            let d = &el.div[t];
            for c in 0..2 {
                let mut r = rhs[c * ns + nv + t];
                for j in 0..3 {
                    r -= a[3][j] * velocity[c * ns + tri[j]];
                    r += d[c][j][3] * pressure[tri[j]];
                }
                velocity[c * ns + nv + t] = r / a[3][3];
            }
        }
        let sol = SaddleSolution {
            velocity,
            pressure,
            multiplier,
        };
        let residual = self.full_residual(disc, rhs, &sol);
        if residual.is_finite() && residual < SOLVE_RESIDUAL_TOL {
            Ok(sol)
        } else {
            Err(Error::Residual {
                context: "saddle solve",
                residual,
                tolerance: SOLVE_RESIDUAL_TOL,
            })
        }
    }

    /// Relative residual of the uncondensed system.
    pub fn full_residual(&self, disc: &Discretization, rhs: &[f64], sol: &SaddleSolution) -> f64 {
        let st = &*self.structure;
        let (nv, ns) = (st.nv, st.ns);
        let (u, p) = (&sol.velocity, &sol.pressure);
        let mut r_u = vec![0.0; 2 * ns];
        let mut r_p = vec![0.0; nv];
        for (t, tri) in disc.mesh.triangles.iter().enumerate() {
            let a = &self.local[t];
            let d = &disc.elements.div[t];
            let idx = [tri[0], tri[1], tri[2], nv + t];
            for c in 0..2 {
                for i in 0..4 {
                    let mut acc = 0.0;
                    for j in 0..4 {
                        acc += a[i][j] * u[c * ns + idx[j]];
                    }
                    for q in 0..3 {
                        acc -= d[c][q][i] * p[tri[q]];
                    }
                    r_u[c * ns + idx[i]] += acc;
                }
                for q in 0..3 {
                    let div: f64 = (0..4).map(|j| d[c][q][j] * u[c * ns + idx[j]]).sum();
                    r_p[tri[q]] -= div;
                }
            }
        }
        let mut f_norm_sq = 0.0;
        for (i, r) in r_u.iter_mut().enumerate() {
            let v = i % ns;
            if v < nv && st.free_index[v] == NONE {
                *r = 0.0;
            } else {
                *r -= rhs[i];
                f_norm_sq += rhs[i] * rhs[i];
            }
        }
        for (q, r) in r_p.iter_mut().enumerate() {
            *r += st.p1_integrals[q] * sol.multiplier;
        }
        let mean: f64 = st.p1_integrals.iter().zip(p).map(|(m, v)| m * v).sum();
        let res = (norm2(&r_u).powi(2) + norm2(&r_p).powi(2) + mean * mean).sqrt();
        if f_norm_sq > 0.0 {
            res / f_norm_sq.sqrt()
        } else {
            res
        }
    }
}
