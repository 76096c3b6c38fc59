//! Local shape functions: P1 hat functions and the MINI cubic bubble.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

const INSIDE_EPS: f64 = 1e-14;

/// Which finite element space a set of local functions belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Vector P1 + bubble. Each component uses the four scalar functions
    /// `[l0, l1, l2, bubble]`.
    VelocityMini,
    /// Continuous P1 with the mean-zero constraint applied at solve time.
    PressureP1MeanFree,
    TemperatureP1,
}

impl SpaceKind {
    /// Number of scalar local shape functions per component.
    pub fn local_scalar_functions(self) -> usize {
        match self {
            SpaceKind::VelocityMini => 4,
            _ => 3,
        }
    }
}

/// Affine geometry of one triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub corners: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(corners: [Point; 3]) -> Self {
        let [p0, p1, p2] = corners;
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * det;
        let grad_lambda = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        TriangleGeometry {
            corners,
            area,
            grad_lambda,
        }
    }

    pub fn of(mesh: &Mesh, t: usize) -> Self {
        Self::new(mesh.corners(t))
    }

    pub fn barycentric(&self, point: Point) -> [f64; 3] {
        let p0 = self.corners[0];
        let dx = point[0] - p0[0];
        let dy = point[1] - p0[1];
        let l1 = self.grad_lambda[1][0] * dx + self.grad_lambda[1][1] * dy;
        let l2 = self.grad_lambda[2][0] * dx + self.grad_lambda[2][1] * dy;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let [p0, p1, p2] = self.corners;
        [
            l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
            l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
        ]
    }
}

/// Values and gradients of the local scalar shape functions at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct BasisValues {
    pub values: [f64; 4],
    pub grads: [[f64; 2]; 4],
    pub len: usize,
}

/// Evaluates P1 (+ bubble) functions at barycentric coordinates `l`.
pub fn eval_at_barycentric(kind: SpaceKind, geo: &TriangleGeometry, l: [f64; 3]) -> BasisValues {
    let g = &geo.grad_lambda;
    let mut out = BasisValues {
        len: kind.local_scalar_functions(),
        ..Default::default()
    };
    for i in 0..3 {
        out.values[i] = l[i];
        out.grads[i] = g[i];
    }
    if kind == SpaceKind::VelocityMini {
        // normalized so that the value at the barycenter is 1
        out.values[3] = 27.0 * l[0] * l[1] * l[2];
        for d in 0..2 {
            out.grads[3][d] =
                27.0 * (l[1] * l[2] * g[0][d] + l[0] * l[2] * g[1][d] + l[0] * l[1] * g[2][d]);
        }
    }
    out
}

/// Evaluates the local shape functions of triangle `t` at a physical point.
pub fn eval_basis(kind: SpaceKind, mesh: &Mesh, t: usize, point: Point) -> Result<BasisValues> {
    let geo = TriangleGeometry::of(mesh, t);
    let l = geo.barycentric(point);
    if l.iter().any(|&c| c < -INSIDE_EPS) {
        return Err(Error::PointOutsideTriangle {
            triangle: t,
            x: point[0],
            y: point[1],
        });
    }
    Ok(eval_at_barycentric(kind, &geo, l))
}
