//! Monte Carlo driver and the two convergence studies.
//!
//! Samples run on the rayon pool; results are collected in sample order and
//! reduced in sorted order, so reports do not depend on scheduling.

use rayon::prelude::*;

use super::norms::{compute_errors, CrossMeshNorm};
use super::report::{aggregate, ErrorReport, LevelErrors, SampleOutcome, StudyDiagnostics, StudyMode};
use crate::error::{Error, Result};
use crate::stepper::{run_trajectory, SolverConfig, SolverContext, Trajectory};
use crate::stochastic::{sample_path, sample_seed, BrownianPath};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub base: SolverConfig,
    pub samples: usize,
    pub seed: u64,
}

/// Runs `run(seed_j)` for `j = 0..samples` with `seed_j = seed ^ j`. The
/// first failing sample aborts the study.
pub fn monte_carlo<F>(samples: usize, seed: u64, run: F) -> Result<Vec<SampleOutcome>>
where
    F: Fn(u64) -> Result<SampleOutcome> + Sync,
{
    if samples == 0 {
        return Err(Error::Config("Monte Carlo needs at least one sample".into()));
    }
    (0..samples)
        .into_par_iter()
        .map(|j| {
            run(sample_seed(seed, j as u64)).map_err(|e| Error::Sample {
                sample: j,
                source: Box::new(e),
            })
        })
        .collect()
}

fn merged_diagnostics(outcomes: &[SampleOutcome]) -> StudyDiagnostics {
    let mut d = StudyDiagnostics::default();
    for o in outcomes {
        d.merge(&o.diagnostics);
    }
    d
}

/// Counts `(mismatches, checks)` of coarse increments at step `k` against
/// the sums of two increments at `k/2`, both Wiener processes.
pub fn check_refinement(path: &BrownianPath, t_final: f64, k: f64) -> Result<(usize, usize)> {
    let m = crate::stochastic::step_count(t_final, k)
        .ok_or_else(|| Error::Config(format!("T = {t_final} is not a multiple of k = {k}")))?;
    let (mut bad, mut checks) = (0, 0);
    for which in [1, 2] {
        for n in 0..m {
            let coarse = path.coarse_increment(which, n, k)?;
            let fine = path.coarse_increment(which, 2 * n, k / 2.0)? + path.coarse_increment(which, 2 * n + 1, k / 2.0)?;
            checks += 1;
            if coarse.to_bits() != fine.to_bits() {
                bad += 1;
            }
        }
    }
    Ok((bad, checks))
}

/// Strong errors in time on a fixed mesh: each level `k` is compared with a
/// `k/2` run on the same Brownian path.
pub fn study_temporal(cfg: &StudyConfig, levels: &[f64]) -> Result<ErrorReport> {
    if levels.is_empty() {
        return Err(Error::Config("no time step levels given".into()));
    }
    let mut steps: Vec<f64> = Vec::new();
    for &k in levels {
        for s in [k, k / 2.0] {
            SolverConfig { k: s, ..cfg.base.clone() }.validate()?;
            if !steps.contains(&s) {
                steps.push(s);
            }
        }
    }
    for (i, k) in levels.iter().enumerate() {
        if levels[..i].contains(k) {
            return Err(Error::Config(format!("time step {k} listed twice")));
        }
    }
    let ctx = SolverContext::new(cfg.base.nx)?;
    let base = &cfg.base;
    let outcomes = monte_carlo(cfg.samples, cfg.seed, |seed| {
        let path = sample_path(seed, base.t_final, base.k0)?;
        let mut diagnostics = StudyDiagnostics::default();
        let runs = steps
            .iter()
            .map(|&k| run_trajectory(&ctx, &SolverConfig { k, ..base.clone() }, &path))
            .collect::<Result<Vec<Trajectory>>>()?;
        for r in &runs {
            diagnostics.record_trace(&r.trace);
        }
        let index = |k: f64| steps.iter().position(|&s| s == k).expect("every step was run");
        let mut errors = Vec::with_capacity(levels.len());
        for &k in levels {
            errors.push(compute_errors(&ctx.disc, &runs[index(k)], &runs[index(k / 2.0)], k)?);
            let (bad, checks) = check_refinement(&path, base.t_final, k)?;
            diagnostics.path_mismatches += bad;
            diagnostics.path_checks += checks;
        }
        Ok(SampleOutcome { errors, diagnostics })
    })?;

    let mesh = &ctx.disc.mesh;
    let levels = levels
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (errors, std_errors) = aggregate(&outcomes, i);
            LevelErrors {
                level: i,
                k,
                h: mesh.h,
                grid_spacing: mesh.grid_spacing(),
                errors,
                std_errors,
            }
        })
        .collect();
    Ok(ErrorReport {
        mode: StudyMode::Temporal,
        levels,
        samples: cfg.samples,
        seed: cfg.seed,
        diagnostics: merged_diagnostics(&outcomes),
        reference: format!("same mesh (nx = {}), step k/2, same Brownian path", cfg.base.nx),
    })
}

/// Strong errors in space at a fixed step: each mesh is compared with a
/// nested reference mesh on the same Brownian path.
pub fn study_spatial(cfg: &StudyConfig, levels: &[usize], reference_nx: Option<usize>) -> Result<ErrorReport> {
    let finest = *levels.last().ok_or_else(|| Error::Config("no mesh levels given".into()))?;
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("mesh levels must be strictly increasing".into()));
    }
    let reference_nx = reference_nx.unwrap_or(2 * finest);
    if reference_nx <= finest || levels.iter().any(|&nx| nx == 0 || reference_nx % nx != 0) {
        return Err(Error::Config(format!(
            "reference nx = {reference_nx} must be a proper multiple of every level"
        )));
    }
    let base = &cfg.base;
    for &nx in levels.iter().chain([&reference_nx]) {
        SolverConfig { nx, ..base.clone() }.validate()?;
    }
    let reference = SolverContext::new(reference_nx)?;
    let contexts = levels.iter().map(|&nx| SolverContext::new(nx)).collect::<Result<Vec<_>>>()?;
    let norms = contexts
        .iter()
        .map(|c| CrossMeshNorm::new(&c.disc, &reference.disc))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = monte_carlo(cfg.samples, cfg.seed, |seed| {
        let path = sample_path(seed, base.t_final, base.k0)?;
        let mut diagnostics = StudyDiagnostics::default();
        let fine = run_trajectory(&reference, &SolverConfig { nx: reference_nx, ..base.clone() }, &path)?;
        diagnostics.record_trace(&fine.trace);
        let mut errors = Vec::with_capacity(levels.len());
        for ((ctx, norm), &nx) in contexts.iter().zip(&norms).zip(levels) {
            let coarse = run_trajectory(ctx, &SolverConfig { nx, ..base.clone() }, &path)?;
            diagnostics.record_trace(&coarse.trace);
            errors.push(norm.compare(&coarse, &fine, base.k)?);
        }
        Ok(SampleOutcome { errors, diagnostics })
    })?;

    let levels = contexts
        .iter()
        .enumerate()
        .map(|(i, ctx)| {
            let (errors, std_errors) = aggregate(&outcomes, i);
            LevelErrors {
                level: i,
                k: base.k,
                h: ctx.disc.mesh.h,
                grid_spacing: ctx.disc.mesh.grid_spacing(),
                errors,
                std_errors,
            }
        })
        .collect();
    Ok(ErrorReport {
        mode: StudyMode::Spatial,
        levels,
        samples: cfg.samples,
        seed: cfg.seed,
        diagnostics: merged_diagnostics(&outcomes),
        reference: format!("mesh nx = {reference_nx}, same step, same Brownian path"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::NoiseCoefficient;

    fn small(samples: usize) -> StudyConfig {
        StudyConfig {
            base: SolverConfig {
                nx: 4,
                t_final: 0.25,
                k0: 2f64.powi(-8),
                ..SolverConfig::default()
            },
            samples,
            seed: 5,
        }
    }

    #[test]
    fn single_noise_free_sample_is_the_deterministic_error() {
        let mut cfg = small(1);
        cfg.base.noise1 = NoiseCoefficient::Zero;
        cfg.base.noise2 = NoiseCoefficient::Zero;
        let report = study_temporal(&cfg, &[2f64.powi(-3), 2f64.powi(-4)]).unwrap();
        let ctx = SolverContext::new(4).unwrap();
        let path = sample_path(99, 0.25, cfg.base.k0).unwrap();
        let run = |k: f64| run_trajectory(&ctx, &SolverConfig { k, ..cfg.base.clone() }, &path).unwrap();
        let direct = compute_errors(&ctx.disc, &run(0.125), &run(0.0625), 0.125).unwrap();
        assert_eq!(report.levels[0].errors, direct.0);
        assert!(report.levels[0].errors.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn temporal_study_checks_paths_and_invariants() {
        let report = study_temporal(&small(4), &[2f64.powi(-3), 2f64.powi(-4), 2f64.powi(-5)]).unwrap();
        let d = report.diagnostics;
        assert_eq!(d.path_mismatches, 0);
        assert_eq!(d.path_checks, 4 * 2 * (2 + 4 + 8));
        assert_eq!(d.energy_violations, 0);
        assert!(d.max_divergence < 1e-9);
        // runs at 1/8, 1/16, 1/32, 1/64
        assert_eq!(d.trajectories, 4 * 4);
        assert_eq!(d.steps, 4 * (2 + 4 + 8 + 16));
        assert!(report.rates().iter().all(|r| r.is_some()));
    }

    #[test]
    fn doubling_samples_stays_within_monte_carlo_error() {
        let levels = [2f64.powi(-3)];
        let a = study_temporal(&small(16), &levels).unwrap();
        let b = study_temporal(&small(32), &levels).unwrap();
        for i in 0..5 {
            let (ea, eb) = (a.levels[0].errors[i], b.levels[0].errors[i]);
            let se = a.levels[0].std_errors[i].max(b.levels[0].std_errors[i]);
            assert!((ea - eb).abs() < 3.0 * se, "norm {i}: {ea} vs {eb} (se {se})");
        }
    }

    #[test]
    fn spatial_study_runs_and_shrinks() {
        let mut cfg = small(2);
        cfg.base.k = 2f64.powi(-4);
        let report = study_spatial(&cfg, &[2, 4], Some(8)).unwrap();
        assert_eq!(report.levels.len(), 2);
        for i in 0..5 {
            assert!(report.levels[1].errors[i] < report.levels[0].errors[i], "norm {i}");
        }
        assert_eq!(report.diagnostics.trajectories, 6);
    }

    #[test]
    fn invalid_studies_are_rejected() {
        let cfg = small(2);
        assert!(study_temporal(&cfg, &[]).is_err());
        assert!(study_temporal(&cfg, &[0.1]).is_err());
        assert!(study_temporal(&cfg, &[0.125, 0.125]).is_err());
        // k/2 below the finest path resolution
        assert!(study_temporal(&cfg, &[2f64.powi(-8)]).is_err());
        assert!(study_spatial(&cfg, &[4, 2], None).is_err());
        assert!(study_spatial(&cfg, &[2, 3], Some(8)).is_err());
        assert!(monte_carlo(0, 0, |_| Ok(SampleOutcome::default())).is_err());
    }
}
