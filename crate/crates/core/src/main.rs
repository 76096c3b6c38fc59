use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use sboussinesq::assembly::Discretization;
use sboussinesq::config::{parse_number, RunConfig};
use sboussinesq::experiments::{emit_results, study_spatial, study_temporal, ErrorReport, StudyConfig, NORM_NAMES};
use sboussinesq::linalg::estimate_infsup;
use sboussinesq::mesh::build_structured_mesh;
use sboussinesq::stepper::{run_trajectory, SolverContext};
use sboussinesq::stochastic::sample_path;

#[derive(Parser)]
#[command(name = "sbq", about = "Stochastic Boussinesq FEM solver and convergence harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Time,
    Space,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory; writes the stability trace and the final state.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also dump every time level's coefficients.
        #[arg(long)]
        dump_states: bool,
    },
    /// Monte Carlo strong-error study in time (levels are steps k) or space
    /// (levels are subdivisions nx).
    Convergence {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Reference mesh for `--mode space` (default: twice the finest level).
        #[arg(long)]
        reference_nx: Option<usize>,
    },
    /// Inf-sup constant of the velocity-pressure pair.
    Infsup {
        #[arg(long)]
        nx: usize,
    },
    /// Runs the invariant suite.
    Verify,
    /// Writes the mesh as `v x y` / `t i j k` lines.
    Mesh {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn print_report(report: &ErrorReport) {
    println!("{:>5} {:>12} {:>12}  {}", "level", "k", "h", NORM_NAMES.join("  "));
    for l in &report.levels {
        print!("{:>5} {:>12.4e} {:>12.4e}", l.level, l.k, l.h);
        for e in l.errors {
            print!("  {e:.4e}");
        }
        println!();
    }
    for (name, r) in NORM_NAMES.iter().zip(report.rates()) {
        match r {
            Some(r) => println!("rate {name}: {r:.3}"),
            None => println!("rate {name}: undefined"),
        }
    }
    let d = &report.diagnostics;
    println!(
        "{} trajectories, {} steps, {} energy violations, max divergence {:.2e}, path mismatches {}/{}",
        d.trajectories, d.steps, d.energy_violations, d.max_divergence, d.path_mismatches, d.path_checks
    );
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            dump_states,
        } => {
            let cfg = load_config(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let solver = cfg.solver;
            solver.validate()?;
            let ctx = SolverContext::new(solver.nx)?;
            let path = sample_path(seed, solver.t_final, solver.k0)?;
            let start = Instant::now();
            let tr = run_trajectory(&ctx, &solver, &path)?;
            std::fs::create_dir_all(&out)?;
            tr.trace.write_csv(BufWriter::new(File::create(out.join("trace.csv"))?), solver.k)?;
            let last = tr.states.last().expect("trajectory has an initial state");
            last.write_text(BufWriter::new(File::create(out.join("final_state.txt"))?))?;
            if dump_states {
                let mut w = BufWriter::new(File::create(out.join("states.txt"))?);
                for s in &tr.states {
                    s.write_text(&mut w)?;
                }
                w.flush()?;
            }
            println!(
                "{} steps on nx = {} in {:.2?}; max divergence {:.2e}, energy violations {}",
                solver.n_steps(),
                solver.nx,
                start.elapsed(),
                tr.trace.max_divergence(),
                tr.trace.energy_violations()
            );
        }
        Command::Convergence {
            mode,
            config,
            levels,
            samples,
            seed,
            out,
            reference_nx,
        } => {
            let cfg = load_config(&config)?;
            let study = StudyConfig {
                base: cfg.solver,
                samples: samples.unwrap_or(cfg.samples),
                seed: seed.unwrap_or(cfg.seed),
            };
            let start = Instant::now();
            let report = match mode {
                Mode::Time => {
                    let ks = levels.iter().map(|l| parse_number(l)).collect::<Result<Vec<_>, _>>()?;
                    study_temporal(&study, &ks)?
                }
                Mode::Space => {
                    let nxs = levels
                        .iter()
                        .map(|l| l.trim().parse::<usize>().with_context(|| format!("mesh level '{l}'")))
                        .collect::<anyhow::Result<Vec<_>>>()?;
                    study_spatial(&study, &nxs, reference_nx)?
                }
            };
            emit_results(&report, &out)?;
            print_report(&report);
            println!("wrote {} in {:.1?}", out.display(), start.elapsed());
        }
        Command::Infsup { nx } => {
            let est = estimate_infsup(&Discretization::new(nx)?)?;
            println!("nx = {nx}: beta = {:.6}", est.beta);
        }
        Command::Verify => {
            let checks = sboussinesq::verify::run_all();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
        }
        Command::Mesh { nx, out } => {
            std::fs::write(&out, build_structured_mesh(nx)?.to_text())?;
        }
    }
    Ok(())
}
