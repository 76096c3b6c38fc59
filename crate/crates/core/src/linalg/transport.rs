//! Scalar P1 systems `s M + mu K + N~(w)` on the interior vertices.

use std::sync::Arc;

use super::lu::{relative_residual, LuPlan, PlannedLu, SOLVE_RESIDUAL_TOL};
use super::sparse::CsrMatrix;
use crate::assembly::{Discretization, ElementData};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug)]
pub struct TransportStructure {
    free_index: Vec<usize>,
    free: Vec<usize>,
    pattern: CsrMatrix,
    lu: LuPlan,
    slots: Vec<[usize; 9]>,
}

impl TransportStructure {
    pub fn new(disc: &Discretization) -> Result<Arc<Self>> {
        let mesh = &disc.mesh;
        let free = disc.dofs.temperature.free_dofs();
        let mut free_index = vec![NONE; mesh.n_vertices()];
        for (i, &v) in free.iter().enumerate() {
            free_index[v] = i;
        }
        let mut pairs = Vec::new();
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    if free_index[a] != NONE && free_index[b] != NONE {
                        pairs.push((free_index[a], free_index[b]));
                    }
                }
            }
        }
        let n = free.len();
        let pattern = CsrMatrix::from_pattern(n, n, pairs);
        let slots = mesh
            .triangles
            .iter()
            .map(|tri| {
                let mut s = [NONE; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let (r, c) = (free_index[tri[a]], free_index[tri[b]]);
                        if r != NONE && c != NONE {
                            s[3 * a + b] = pattern.slot(r, c).expect("pattern covers element couplings");
                        }
                    }
                }
                s
            })
            .collect();
        let lu = LuPlan::analyze(&pattern)?;
        Ok(Arc::new(TransportStructure {
            free_index,
            free,
            pattern,
            lu,
            slots,
        }))
    }
}

pub struct TransportSystem {
    structure: Arc<TransportStructure>,
    matrix: CsrMatrix,
    lu: Option<PlannedLu>,
}

impl TransportSystem {
    pub fn new(structure: Arc<TransportStructure>) -> Self {
        let matrix = structure.pattern.clone();
        TransportSystem {
            structure,
            matrix,
            lu: None,
        }
    }

    /// Matrix over interior vertices from the last assembly.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn assemble(
        &mut self,
        disc: &Discretization,
        mass_scale: f64,
        diffusivity: f64,
        convecting: Option<&[f64]>,
    ) -> Result<()> {
        let st = Arc::clone(&self.structure);
        let el = &disc.elements;
        let vals = self.matrix.values_mut();
        vals.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..disc.mesh.n_triangles() {
            let (m, k) = (&el.mass[t], &el.stiffness[t]);
            let n = convecting.map(|w| el.local_convection(t, &ElementData::local_velocity(&disc.dofs, t, w)));
            let slots = &st.slots[t];
            for i in 0..3 {
                for j in 0..3 {
                    let s = slots[3 * i + j];
                    if s == NONE {
                        continue;
                    }
                    let mut v = mass_scale * m[i][j] + diffusivity * k[i][j];
                    if let Some(n) = &n {
                        v += n[i][j];
                    }
                    vals[s] += v;
                }
            }
        }
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

    /// Solves with load `rhs` given per P1 dof; boundary entries are ignored
    /// and the result vanishes on the boundary.
    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let st = &*self.structure;
        let lu = self
            .lu
            .as_mut()
            .ok_or_else(|| Error::Factorization("transport system solved before assembly".into()))?;
        if rhs.len() != st.free_index.len() {
            return Err(Error::DimensionMismatch(format!("rhs {} vs {}", rhs.len(), st.free_index.len())));
        }
        let b: Vec<f64> = st.free.iter().map(|&v| rhs[v]).collect();
        let x = lu.solve(&b);
        let residual = relative_residual(&self.matrix, &x, &b);
        if !(residual < SOLVE_RESIDUAL_TOL) {
            return Err(Error::Residual {
                context: "transport solve",
                residual,
                tolerance: SOLVE_RESIDUAL_TOL,
            });
        }
        let mut out = vec![0.0; rhs.len()];
        for (i, &v) in st.free.iter().enumerate() {
            out[v] = x[i];
        }
        Ok(out)
    }
}
