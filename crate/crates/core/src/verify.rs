//! Quick invariant suite behind the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_convection_temperature, assemble_convection_velocity, Discretization};
use crate::experiments::check_refinement;
use crate::linalg::{dot, estimate_infsup, norm2};
use crate::mesh::{build_structured_mesh, mesh_statistics};
use crate::spaces::{eval_at_barycentric, make_quadrature, project_bh_load, project_ph_load, project_qh, project_qh_coeffs, SpaceKind};
use crate::stepper::{run_trajectory, SolverConfig, SolverContext, DIVERGENCE_TOL};
use crate::stochastic::sample_path;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, result: crate::Result<(bool, String)>) -> Check {
    match result {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn mesh_invariants() -> crate::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for nx in 1..=16 {
        let mesh = build_structured_mesh(nx)?;
        let stats = mesh_statistics(&mesh);
        worst = worst.max((stats.area_total - 1.0).abs());
        ok &= (0..mesh.n_triangles()).all(|t| mesh.signed_area(t) > 0.0);
        ok &= mesh.edge_multiplicities().values().all(|&m| m == 1 || m == 2);
        ok &= (stats.min_angle - 45.0).abs() < 1e-9;
    }
    Ok((ok && worst < 1e-12, format!("max area defect {worst:.1e} over nx = 1..16")))
}

fn quadrature_exactness() -> crate::Result<(bool, String)> {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mut worst: f64 = 0.0;
    for degree in 1..=10 {
        let rule = make_quadrature(degree)?;
        for a in 0..=degree as u32 {
            for b in 0..=(degree as u32 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let got = rule.integrate_reference(|x, y| x.powi(a as i32) * y.powi(b as i32));
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    Ok((worst < 1e-13, format!("max relative monomial error {worst:.1e}")))
}

fn partition_of_unity() -> crate::Result<(bool, String)> {
    let disc = Discretization::new(4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let t = rng.random_range(0..disc.mesh.n_triangles());
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let l = if a + b <= 1.0 { [a, b, 1.0 - a - b] } else { [1.0 - a, 1.0 - b, a + b - 1.0] };
        let v = eval_at_barycentric(SpaceKind::TemperatureP1, &disc.elements.geometry[t], l);
        worst = worst.max((v.values[..3].iter().sum::<f64>() - 1.0).abs());
    }
    Ok((worst < 1e-13, format!("max defect {worst:.1e} at 10^4 points")))
}

fn skew_symmetry() -> crate::Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for nx in [2, 4, 8] {
        let d = Discretization::new(nx)?;
        for _ in 0..50 {
            let mut random = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            let (mut w, mut v, mut s) = (random(d.n_velocity()), random(d.n_velocity()), random(d.n_temperature()));
            d.dofs.velocity.zero_dirichlet(&mut w);
            d.dofs.velocity.zero_dirichlet(&mut v);
            d.dofs.temperature.zero_dirichlet(&mut s);
            let n = assemble_convection_velocity(&d.mesh, &d.dofs, &d.elements, &w);
            let nt = assemble_convection_temperature(&d.mesh, &d.dofs, &d.elements, &w);
            worst = worst.max(n.quadratic_form(&v).abs() / (norm2(&w) * dot(&v, &v)));
            worst = worst.max(nt.quadratic_form(&s).abs() / (norm2(&w) * dot(&s, &s)));
        }
    }
    Ok((worst < 1e-12, format!("max |v^T N(w) v| / (|w| |v|^2) = {worst:.1e}")))
}

fn inf_sup() -> crate::Result<(bool, String)> {
    let mut betas = Vec::new();
    for nx in [2, 4, 8, 16] {
        betas.push(estimate_infsup(&Discretization::new(nx)?)?.beta);
    }
    let (lo, hi) = betas.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &b| (l.min(b), h.max(b)));
    Ok((lo > 0.05 && lo / hi > 0.4, format!("beta over nx = 2,4,8,16: {betas:.4?}")))
}

fn projection_idempotence() -> crate::Result<(bool, String)> {
    let d = Discretization::new(8)?;
    let q1 = project_qh(&d, |[x, y]| [y * (1.0 - y) * x, x.sin() * y])?;
    let q2 = project_qh_coeffs(&d, &q1)?;
    let p1 = project_ph_load(&d, &d.load_scalar(|[x, y]| (3.0 * x).sin() + y))?;
    let p2 = project_ph_load(&d, &d.operators.m_theta.mul_vec(&p1))?;
    let b1 = project_bh_load(&d, &d.load_scalar(|[x, y]| x * y * (2.0 * y).cos()))?;
    let b2 = project_bh_load(&d, &d.operators.m_theta.mul_vec(&b1))?;
    let rel = |a: &[f64], b: &[f64]| norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()) / norm2(a);
    let worst = rel(&q1, &q2).max(rel(&p1, &p2)).max(rel(&b1, &b2));
    Ok((worst < 1e-10, format!("max relative change on reapplication {worst:.1e}")))
}

fn brownian_refinement() -> crate::Result<(bool, String)> {
    let path = sample_path(7, 1.0, 2f64.powi(-11))?;
    let (mut bad, mut checks) = (0, 0);
    for m in 0..11 {
        let (b, c) = check_refinement(&path, 1.0, 2f64.powi(-m))?;
        bad += b;
        checks += c;
    }
    Ok((bad == 0, format!("{bad} mismatches in {checks} coarse increments")))
}

fn trajectory_invariants() -> crate::Result<(bool, String)> {
    let cfg = SolverConfig {
        nx: 8,
        k: 2f64.powi(-5),
        ..SolverConfig::default()
    };
    let ctx = SolverContext::new(8)?;
    let mut violations = 0;
    let mut div: f64 = 0.0;
    let mut mean: f64 = 0.0;
    for seed in 0..4 {
        let tr = run_trajectory(&ctx, &cfg, &sample_path(seed, cfg.t_final, cfg.k0)?)?;
        violations += tr.trace.energy_violations();
        div = div.max(tr.trace.max_divergence());
        for s in &tr.states {
            mean = mean.max(dot(&ctx.disc.operators.p1_integrals, &s.p).abs());
        }
    }
    Ok((
        violations == 0 && div < DIVERGENCE_TOL && mean < 1e-12,
        format!("{violations} energy violations, max divergence {div:.1e}, max |mean p| {mean:.1e}"),
    ))
}

/// Runs every check; takes a few seconds.
pub fn run_all() -> Vec<Check> {
    vec![
        check("mesh invariants", mesh_invariants()),
        check("quadrature exactness", quadrature_exactness()),
        check("P1 partition of unity", partition_of_unity()),
        check("convection skew symmetry", skew_symmetry()),
        check("inf-sup stability", inf_sup()),
        check("projection idempotence", projection_idempotence()),
        check("Brownian refinement", brownian_refinement()),
        check("trajectory invariants", trajectory_invariants()),
    ]
}
