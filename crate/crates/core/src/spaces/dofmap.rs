use crate::mesh::Mesh;

use super::basis::SpaceKind;

/// Global numbering of the degrees of freedom of one space.
///
/// Velocity layout: `[x: vertices, x: bubbles, y: vertices, y: bubbles]`, so
/// the scalar index of vertex `v` is `v` and that of the bubble of triangle
/// `t` is `n_vertices + t`; component `c` is offset by `c * scalar_dofs`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub n_dofs: usize,
    /// Dofs per component (`n_vertices + n_triangles` for velocity).
    pub scalar_dofs: usize,
    pub components: usize,
    /// Local-to-global table, `local_size` entries per triangle, component
    /// major.
    local_to_global: Vec<usize>,
    pub local_size: usize,
    /// Sorted constrained dofs (boundary vertices of each constrained
    /// component).
    pub dirichlet_dofs: Vec<usize>,
    is_dirichlet: Vec<bool>,
}

impl DofMap {
    pub fn new(kind: SpaceKind, mesh: &Mesh) -> Self {
        let nv = mesh.n_vertices();
        let nt = mesh.n_triangles();
        let (scalar_dofs, components) = match kind {
            SpaceKind::VelocityMini => (nv + nt, 2),
            SpaceKind::PressureP1MeanFree | SpaceKind::TemperatureP1 => (nv, 1),
        };
        let per_comp = kind.local_scalar_functions();
        let local_size = per_comp * components;
        let mut local_to_global = Vec::with_capacity(nt * local_size);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for c in 0..components {
                let off = c * scalar_dofs;
                local_to_global.extend(tri.iter().map(|&v| off + v));
                if kind == SpaceKind::VelocityMini {
                    local_to_global.push(off + nv + t);
                }
            }
        }
        let n_dofs = scalar_dofs * components;
        let mut is_dirichlet = vec![false; n_dofs];
        if kind != SpaceKind::PressureP1MeanFree {
            for c in 0..components {
                for &v in &mesh.boundary_vertices {
                    is_dirichlet[c * scalar_dofs + v] = true;
                }
            }
        }
        let dirichlet_dofs = (0..n_dofs).filter(|&i| is_dirichlet[i]).collect();
        DofMap {
            kind,
            n_dofs,
            scalar_dofs,
            components,
            local_to_global,
            local_size,
            dirichlet_dofs,
            is_dirichlet,
        }
    }

    pub fn local_dofs(&self, t: usize) -> &[usize] {
        &self.local_to_global[t * self.local_size..(t + 1) * self.local_size]
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.is_dirichlet[dof]
    }

    /// Unconstrained dofs in increasing order.
    pub fn free_dofs(&self) -> Vec<usize> {
        (0..self.n_dofs).filter(|&i| !self.is_dirichlet[i]).collect()
    }

    /// Sets every constrained coefficient to zero.
    pub fn zero_dirichlet(&self, coeffs: &mut [f64]) {
        for &d in &self.dirichlet_dofs {
            coeffs[d] = 0.0;
        }
    }
}

/// The three discrete spaces of the scheme on one mesh.
#[derive(Debug, Clone)]
pub struct DofMaps {
    pub velocity: DofMap,
    pub pressure: DofMap,
    pub temperature: DofMap,
}

impl DofMaps {
    pub fn new(mesh: &Mesh) -> Self {
        DofMaps {
            velocity: DofMap::new(SpaceKind::VelocityMini, mesh),
            pressure: DofMap::new(SpaceKind::PressureP1MeanFree, mesh),
            temperature: DofMap::new(SpaceKind::TemperatureP1, mesh),
        }
    }
}
