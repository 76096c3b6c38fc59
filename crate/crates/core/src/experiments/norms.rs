//! Per-sample error norms between two trajectories.
//!
//! With `e^n` the difference at time level `n` (`n = 1..M`) and `k` the
//! coarse step, one sample contributes
//!
//! ```text
//! u, theta:  max_n |e^n|_{L2}        (k sum_n |e^n|_{H1}^2)^{1/2}
//! p:         | k sum_n p^n - k_ref sum_m p_ref^m |_{L2}   (mean removed)
//! ```
//!
//! where `|.|_{H1}` is the full norm. Same-mesh comparisons use the Gram
//! matrices; cross-mesh comparisons integrate exactly on the finer mesh.

use crate::assembly::{Discretization, ElementData};
use crate::error::{Error, Result};
use crate::spaces::{eval_at_barycentric, make_quadrature, BasisValues, SpaceKind};
use crate::stepper::{FieldState, Trajectory};

pub const N_NORMS: usize = 5;

/// Column names, in the order used everywhere.
pub const NORM_NAMES: [&str; N_NORMS] = ["err_u_L2Linf", "err_u_H1", "err_th_L2Linf", "err_th_H1", "err_p"];

/// One sample's five error norms (not squared).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorSample(pub [f64; N_NORMS]);

/// Squared distances of one time level: `(L2^2, grad^2)` for velocity and
/// temperature.
type LevelDistance = ([f64; 2], [f64; 2]);

fn accumulate(
    coarse: &Trajectory,
    fine: &Trajectory,
    k: f64,
    level: impl Fn(&FieldState, &FieldState) -> LevelDistance,
    pressure: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<ErrorSample> {
    let m = coarse.states.len().saturating_sub(1);
    let mf = fine.states.len().saturating_sub(1);
    if m == 0 || mf % m != 0 {
        return Err(Error::Incompatible(format!("{m} coarse steps do not nest in {mf} fine steps")));
    }
    let r = mf / m;
    let kf = k / r as f64;
    let (mut u_max, mut u_sum, mut t_max, mut t_sum) = (0.0f64, 0.0, 0.0f64, 0.0);
    for n in 1..=m {
        let (du, dt) = level(&coarse.states[n], &fine.states[r * n]);
        u_max = u_max.max(du[0]);
        t_max = t_max.max(dt[0]);
        u_sum += k * (du[0] + du[1]);
        t_sum += k * (dt[0] + dt[1]);
    }
    let average = |states: &[FieldState], step: f64| {
        let mut acc = vec![0.0; states[0].p.len()];
        for s in &states[1..] {
            for (a, p) in acc.iter_mut().zip(&s.p) {
                *a += step * p;
            }
        }
        acc
    };
    let p_sq = pressure(&average(&coarse.states, k), &average(&fine.states, kf));
    Ok(ErrorSample([u_max.sqrt(), u_sum.sqrt(), t_max.sqrt(), t_sum.sqrt(), p_sq.max(0.0).sqrt()]))
}

/// Temporal errors of a `k` run against a finer-step run on the same mesh.
pub fn compute_errors(disc: &Discretization, coarse: &Trajectory, fine: &Trajectory, k: f64) -> Result<ErrorSample> {
    let ops = &disc.operators;
    let sizes = |t: &Trajectory| t.states.iter().all(|s| s.u.len() == disc.n_velocity() && s.theta.len() == disc.n_temperature());
    if !sizes(coarse) || !sizes(fine) {
        return Err(Error::Incompatible("trajectory does not belong to this mesh".into()));
    }
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    accumulate(
        coarse,
        fine,
        k,
        |c, f| {
            let du = diff(&c.u, &f.u);
            let dt = diff(&c.theta, &f.theta);
            (
                [ops.m_u.quadratic_form(&du), ops.k_u.quadratic_form(&du)],
                [ops.m_theta.quadratic_form(&dt), ops.k_theta.quadratic_form(&dt)],
            )
        },
        |pc, pf| {
            // the domain has unit area
            let mut d = diff(pc, pf);
            let mean = crate::linalg::dot(&ops.p1_integrals, &d);
            d.iter_mut().for_each(|v| *v -= mean);
            ops.m_theta.quadratic_form(&d)
        },
    )
}

/// Distances between fields on a coarse mesh and a nested fine mesh,
/// integrated exactly on the fine triangles (every fine triangle lies in one
/// coarse triangle, so both fields are polynomials there).
pub struct CrossMeshNorm<'a> {
    coarse: &'a Discretization,
    fine: &'a Discretization,
    parent: Vec<usize>,
    /// Per fine triangle and quadrature point.
    weights: Vec<f64>,
    coarse_basis: Vec<BasisValues>,
    fine_basis: Vec<BasisValues>,
    nq: usize,
}

impl<'a> CrossMeshNorm<'a> {
    pub fn new(coarse: &'a Discretization, fine: &'a Discretization) -> Result<Self> {
        let (nc, nf) = (coarse.mesh.nx, fine.mesh.nx);
        if nf < nc || nf % nc != 0 {
            return Err(Error::Incompatible(format!("mesh nx = {nf} is not a refinement of nx = {nc}")));
        }
        // products of two cubics
        let quad = make_quadrature(6)?;
        let nq = quad.len();
        let nt = fine.mesh.n_triangles();
        let mut parent = Vec::with_capacity(nt);
        let mut weights = Vec::with_capacity(nt * nq);
        let mut coarse_basis = Vec::with_capacity(nt * nq);
        let mut fine_basis = Vec::with_capacity(nt * nq);
        for t in 0..nt {
            let geo = &fine.elements.geometry[t];
            let centroid = geo.point([1.0 / 3.0; 3]);
            let ct = coarse
                .mesh
                .locate(centroid)
                .ok_or_else(|| Error::Incompatible("fine triangle outside the coarse mesh".into()))?;
            let cgeo = &coarse.elements.geometry[ct];
            if cgeo.barycentric(centroid).iter().any(|&l| l < -1e-12) {
                return Err(Error::Incompatible("meshes are not nested".into()));
            }
            parent.push(ct);
            for (l, w) in quad.points.iter().zip(&quad.weights) {
                let x = geo.point(*l);
                weights.push(w * 2.0 * geo.area);
                fine_basis.push(eval_at_barycentric(SpaceKind::VelocityMini, geo, *l));
                coarse_basis.push(eval_at_barycentric(SpaceKind::VelocityMini, cgeo, cgeo.barycentric(x)));
            }
        }
        Ok(CrossMeshNorm {
            coarse,
            fine,
            parent,
            weights,
            coarse_basis,
            fine_basis,
            nq,
        })
    }

    /// `(|u_c - u_f|_{L2}^2, |grad(u_c - u_f)|_{L2}^2)` for MINI velocities.
    pub fn velocity_sq(&self, uc: &[f64], uf: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (t, &ct) in self.parent.iter().enumerate() {
            let lc = ElementData::local_velocity(&self.coarse.dofs, ct, uc);
            let lf = ElementData::local_velocity(&self.fine.dofs, t, uf);
            for q in t * self.nq..(t + 1) * self.nq {
                let (bc, bf) = (&self.coarse_basis[q], &self.fine_basis[q]);
                for c in 0..2 {
                    let mut v = 0.0;
                    let mut g = [0.0; 2];
                    for a in 0..4 {
                        v += lc[c][a] * bc.values[a] - lf[c][a] * bf.values[a];
                        for d in 0..2 {
                            g[d] += lc[c][a] * bc.grads[a][d] - lf[c][a] * bf.grads[a][d];
                        }
                    }
                    out[0] += self.weights[q] * v * v;
                    out[1] += self.weights[q] * (g[0] * g[0] + g[1] * g[1]);
                }
            }
        }
        out
    }

    /// `(|s_c - s_f|^2, |grad(s_c - s_f)|^2, integral (s_c - s_f))` for P1
    /// fields.
    pub fn scalar_sq(&self, sc: &[f64], sf: &[f64]) -> [f64; 3] {
        self.scalar_sq_shifted(sc, sf, 0.0)
    }

    /// As [`Self::scalar_sq`] for `s_c - s_f - shift`.
    pub fn scalar_sq_shifted(&self, sc: &[f64], sf: &[f64], shift: f64) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (t, &ct) in self.parent.iter().enumerate() {
            let (tc, tf) = (&self.coarse.mesh.triangles[ct], &self.fine.mesh.triangles[t]);
            for q in t * self.nq..(t + 1) * self.nq {
                let (bc, bf) = (&self.coarse_basis[q], &self.fine_basis[q]);
                let mut v = -shift;
                let mut g = [0.0; 2];
                for a in 0..3 {
                    v += sc[tc[a]] * bc.values[a] - sf[tf[a]] * bf.values[a];
                    for d in 0..2 {
                        g[d] += sc[tc[a]] * bc.grads[a][d] - sf[tf[a]] * bf.grads[a][d];
                    }
                }
                out[0] += self.weights[q] * v * v;
                out[1] += self.weights[q] * (g[0] * g[0] + g[1] * g[1]);
                out[2] += self.weights[q] * v;
            }
        }
        out
    }

    /// Errors of a coarse-mesh trajectory against a fine-mesh one on the
    /// same (or a nested) time grid.
    pub fn compare(&self, coarse: &Trajectory, fine: &Trajectory, k: f64) -> Result<ErrorSample> {
        let belongs = |t: &Trajectory, d: &Discretization| t.states.iter().all(|s| s.u.len() == d.n_velocity());
        if !belongs(coarse, self.coarse) || !belongs(fine, self.fine) {
            return Err(Error::Incompatible("trajectory does not belong to the expected mesh".into()));
        }
        accumulate(
            coarse,
            fine,
            k,
            |c, f| {
                let t = self.scalar_sq(&c.theta, &f.theta);
                (self.velocity_sq(&c.u, &f.u), [t[0], t[1]])
            },
            |pc, pf| {
                let mean = self.scalar_sq(pc, pf)[2];
                self.scalar_sq_shifted(pc, pf, mean)[0]
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepper::StabilityTrace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(d: &Discretization, rng: &mut ChaCha8Rng) -> FieldState {
        let mut s = FieldState::zero(d);
        for v in s.u.iter_mut().chain(s.p.iter_mut()).chain(s.theta.iter_mut()) {
            *v = rng.random_range(-1.0..1.0);
        }
        d.dofs.velocity.zero_dirichlet(&mut s.u);
        d.dofs.temperature.zero_dirichlet(&mut s.theta);
        s
    }

    fn trajectory(states: Vec<FieldState>) -> Trajectory {
        Trajectory {
            states,
            trace: StabilityTrace::default(),
        }
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let d = Discretization::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = trajectory((0..5).map(|_| random_state(&d, &mut rng)).collect());
        assert_eq!(compute_errors(&d, &t, &t, 0.25).unwrap(), ErrorSample::default());
    }

    #[test]
    fn gram_norms_match_quadrature_of_the_difference() {
        let d = Discretization::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random_state(&d, &mut rng), random_state(&d, &mut rng));
        let du: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| x - y).collect();
        let dt: Vec<f64> = a.theta.iter().zip(&b.theta).map(|(x, y)| x - y).collect();
        let (ul2, uh1) = d.velocity_error_sq(&du, |_| ([0.0; 2], [[0.0; 2]; 2]));
        let (tl2, th1) = d.scalar_error_sq(&dt, |_| (0.0, [0.0; 2]));
        let ops = &d.operators;
        for (gram, quad) in [
            (ops.m_u.quadratic_form(&du), ul2),
            (ops.k_u.quadratic_form(&du), uh1),
            (ops.m_theta.quadratic_form(&dt), tl2),
            (ops.k_theta.quadratic_form(&dt), th1),
        ] {
            assert!((gram - quad).abs() < 1e-10 * quad, "{gram} vs {quad}");
        }
        // one coarse step against two fine steps, ending at the same state
        let zero = FieldState::zero(&d);
        let coarse = trajectory(vec![zero.clone(), a.clone()]);
        let fine = trajectory(vec![zero, b.clone(), b]);
        let e = compute_errors(&d, &coarse, &fine, 0.5).unwrap().0;
        assert!((e[0] - ul2.sqrt()).abs() < 1e-12);
        assert!((e[1] - (0.5 * (ul2 + uh1)).sqrt()).abs() < 1e-12);
        assert!((e[2] - tl2.sqrt()).abs() < 1e-12);
        assert!((e[3] - (0.5 * (tl2 + th1)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pressure_shift_is_invisible() {
        let d = Discretization::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_state(&d, &mut rng);
        let mut b = a.clone();
        b.p.iter_mut().for_each(|p| *p += 0.7);
        let zero = FieldState::zero(&d);
        let e = compute_errors(&d, &trajectory(vec![zero.clone(), a]), &trajectory(vec![zero, b]), 0.5).unwrap();
        assert!(e.0[4] < 1e-12, "{:?}", e);
    }

    #[test]
    fn non_nested_grids_are_rejected() {
        let d = Discretization::new(2).unwrap();
        let z = FieldState::zero(&d);
        let coarse = trajectory(vec![z.clone(); 3]);
        let fine = trajectory(vec![z; 4]);
        assert!(compute_errors(&d, &coarse, &fine, 0.5).is_err());
        let other = Discretization::new(3).unwrap();
        assert!(compute_errors(&other, &coarse, &coarse, 0.5).is_err());
        assert!(CrossMeshNorm::new(&d, &other).is_err());
    }

    #[test]
    fn cross_mesh_norm_of_a_prolonged_field_is_zero() {
        // P1 fields are reproduced exactly by vertex interpolation on the
        // refined mesh; bubbles are not, so only check P1 parts there
        let (c, f) = (Discretization::new(2).unwrap(), Discretization::new(6).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sc = random_state(&c, &mut rng);
        let mut uc = sc.u.clone();
        let nsc = c.dofs.velocity.scalar_dofs;
        for t in 0..c.mesh.n_triangles() {
            uc[c.mesh.n_vertices() + t] = 0.0;
            uc[nsc + c.mesh.n_vertices() + t] = 0.0;
        }
        let mut sf = FieldState::zero(&f);
        let nsf = f.dofs.velocity.scalar_dofs;
        for (v, &x) in f.mesh.vertices.iter().enumerate() {
            let (val, _) = c.eval_velocity(&uc, x).unwrap();
            sf.u[v] = val[0];
            sf.u[nsf + v] = val[1];
            sf.theta[v] = c.eval_scalar(&sc.theta, x).unwrap().0;
        }
        let norm = CrossMeshNorm::new(&c, &f).unwrap();
        let v = norm.velocity_sq(&uc, &sf.u);
        let s = norm.scalar_sq(&sc.theta, &sf.theta);
        assert!(v[0] < 1e-26 && v[1] < 1e-24 && s[0] < 1e-26 && s[1] < 1e-24, "{v:?} {s:?}");
    }

    #[test]
    fn cross_mesh_norm_matches_same_mesh_gram() {
        // on identical meshes the cross norm is the Gram norm
        let d = Discretization::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (random_state(&d, &mut rng), random_state(&d, &mut rng));
        let norm = CrossMeshNorm::new(&d, &d).unwrap();
        let zero = FieldState::zero(&d);
        let (ta, tb) = (trajectory(vec![zero.clone(), a]), trajectory(vec![zero, b]));
        let x = norm.compare(&ta, &tb, 0.5).unwrap().0;
        let y = compute_errors(&d, &ta, &tb, 0.5).unwrap().0;
        for i in 0..N_NORMS {
            assert!((x[i] - y[i]).abs() < 1e-10 * y[i], "{i}: {} vs {}", x[i], y[i]);
        }
    }

    #[test]
    fn cross_mesh_norm_matches_independent_quadrature() {
        // coarse field against the zero field on a fine mesh equals its own norm
        let (c, f) = (Discretization::new(2).unwrap(), Discretization::new(4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random_state(&c, &mut rng);
        let norm = CrossMeshNorm::new(&c, &f).unwrap();
        let v = norm.velocity_sq(&s.u, &vec![0.0; f.n_velocity()]);
        let (l2, h1) = c.velocity_error_sq(&s.u, |_| ([0.0; 2], [[0.0; 2]; 2]));
        assert!((v[0] - l2).abs() < 1e-10 * l2 && (v[1] - h1).abs() < 1e-10 * h1);
    }
}
