//! Structured triangulations of the unit square.
//!
//! Each grid cell `[i/nx, (i+1)/nx] x [j/nx, (j+1)/nx]` is split along the
//! diagonal from its lower-left to its upper-right corner. Refining `nx` by
//! two therefore yields a nested mesh: every fine triangle lies inside exactly
//! one coarse triangle.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

const BOUNDARY_EPS: f64 = 1e-14;

/// A point of the plane.
pub type Point = [f64; 2];

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Sorted indices of vertices on the boundary of the unit square.
    pub boundary_vertices: Vec<usize>,
    is_boundary: Vec<bool>,
    /// Longest edge length.
    pub h: f64,
    pub nx: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStatistics {
    pub h: f64,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    pub area_total: f64,
}

/// Builds the structured right-triangle mesh with `nx` cells per side.
pub fn build_structured_mesh(nx: usize) -> Result<Mesh> {
    if nx == 0 {
        return Err(Error::InvalidMesh("nx must be at least 1".into()));
    }
    let n1 = nx + 1;
    let inv = 1.0 / nx as f64;
    let mut vertices = Vec::with_capacity(n1 * n1);
    for j in 0..n1 {
        for i in 0..n1 {
            // exact endpoints so that boundary detection never depends on rounding
            let x = if i == nx { 1.0 } else { i as f64 * inv };
            let y = if j == nx { 1.0 } else { j as f64 * inv };
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * nx);
    for j in 0..nx {
        for i in 0..nx {
            let v00 = j * n1 + i;
            let v10 = v00 + 1;
            let v01 = v00 + n1;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let is_boundary: Vec<bool> = vertices
        .iter()
        .map(|&[x, y]| {
            x.abs() <= BOUNDARY_EPS
                || (x - 1.0).abs() <= BOUNDARY_EPS
                || y.abs() <= BOUNDARY_EPS
                || (y - 1.0).abs() <= BOUNDARY_EPS
        })
        .collect();
    let boundary_vertices = (0..vertices.len()).filter(|&v| is_boundary[v]).collect();
    let mut mesh = Mesh {
        vertices,
        triangles,
        boundary_vertices,
        is_boundary,
        h: 0.0,
        nx,
    };
    mesh.h = mesh.longest_edge();
    Ok(mesh)
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_boundary(&self, vertex: usize) -> bool {
        self.is_boundary[vertex]
    }

    /// Grid spacing `1/nx` (the other common meaning of "mesh size").
    pub fn grid_spacing(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.corners(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    fn longest_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.n_triangles() {
            let p = self.corners(t);
            for e in 0..3 {
                let (a, b) = (p[e], p[(e + 1) % 3]);
                h = h.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        h
    }

    /// Index of a triangle containing `point`. Points on shared edges are
    /// assigned to one of the neighbours deterministically.
    pub fn locate(&self, point: Point) -> Option<usize> {
        let [x, y] = point;
        let tol = 1e-12;
        if !(-tol..=1.0 + tol).contains(&x) || !(-tol..=1.0 + tol).contains(&y) {
            return None;
        }
        let n = self.nx as f64;
        let i = ((x * n).floor().max(0.0) as usize).min(self.nx - 1);
        let j = ((y * n).floor().max(0.0) as usize).min(self.nx - 1);
        let lx = x * n - i as f64;
        let ly = y * n - j as f64;
        let cell = j * self.nx + i;
        Some(if lx >= ly { 2 * cell } else { 2 * cell + 1 })
    }

    /// Number of triangles sharing each undirected edge.
    pub fn edge_multiplicities(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Plain-text export: one `v x y` line per vertex, one `t i j k` line per
    /// triangle (zero-based vertex indices).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for [x, y] in &self.vertices {
            let _ = writeln!(out, "v {x} {y}");
        }
        for [a, b, c] in &self.triangles {
            let _ = writeln!(out, "t {a} {b} {c}");
        }
        out
    }
}

pub fn mesh_statistics(mesh: &Mesh) -> MeshStatistics {
    let mut min_angle = f64::INFINITY;
    let mut area_total = 0.0;
    for t in 0..mesh.n_triangles() {
        area_total += mesh.signed_area(t);
        let p = mesh.corners(t);
        for v in 0..3 {
            let a = p[v];
            let b = p[(v + 1) % 3];
            let c = p[(v + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let w = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * w[0] + u[1] * w[1]) / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    MeshStatistics {
        h: mesh.h,
        min_angle,
        area_total,
    }
}
