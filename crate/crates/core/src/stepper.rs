//! One step of the semi-implicit Euler-Maruyama scheme and whole
//! trajectories.
//!
//! Per step, with `k` the time step:
//!
//! ```text
//! (1/k) M_u (u' - u) + nu K_u u' + N(u) u' - B^T p' = E2 theta + (1/k) M_u G1(u) dW1,   B u' = 0
//! (1/k) M_t (t' - t) + mu K_t t' + N~(u') t'        = (1/k) M_t G2(t) dW2
//! ```
//!
//! Both solves are linear; the convection fields are frozen at the previous
//! velocity (momentum) and the new velocity (temperature).

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use crate::assembly::Discretization;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, SaddleStructure, SaddleSystem, TransportStructure, TransportSystem};
use crate::mesh::Point;
use crate::spaces::project_qh_load_with;
use crate::stochastic::{apply_noise, dyadic_exponent, step_count, BrownianPath, NoiseCoefficient};

/// Slack allowed in the per-step temperature energy inequality.
pub const ENERGY_SLACK: f64 = 1e-10;
/// Bound on `max |B u| / |u|` asserted after every velocity solve.
pub const DIVERGENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialVelocity {
    /// `curl` of `0.1 sin^2(pi x) sin^2(pi y)`.
    StreamFunction,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialTemperature {
    /// `sin(pi x) sin(pi y)`.
    Bump,
    Zero,
}

impl InitialVelocity {
    pub fn eval(&self, [x, y]: Point) -> [f64; 2] {
        match self {
            InitialVelocity::Zero => [0.0, 0.0],
            InitialVelocity::StreamFunction => {
                let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
                [
                    0.1 * PI * sx * sx * (2.0 * PI * y).sin(),
                    -0.1 * PI * (2.0 * PI * x).sin() * sy * sy,
                ]
            }
        }
    }
}

impl InitialTemperature {
    pub fn eval(&self, [x, y]: Point) -> f64 {
        match self {
            InitialTemperature::Zero => 0.0,
            InitialTemperature::Bump => (PI * x).sin() * (PI * y).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub nu: f64,
    pub mu: f64,
    pub t_final: f64,
    pub k: f64,
    /// Finest step of the Brownian paths.
    pub k0: f64,
    pub nx: usize,
    pub noise1: NoiseCoefficient,
    pub noise2: NoiseCoefficient,
    /// Drive the temperature with `W1` instead of an independent `W2`.
    pub shared_noise: bool,
    pub u0: InitialVelocity,
    pub theta0: InitialTemperature,
    /// Switch for the convection terms (off only for linearity checks).
    pub convection: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nu: 1.0,
            mu: 1.0,
            t_final: 1.0,
            k: 2f64.powi(-6),
            k0: 2f64.powi(-11),
            nx: 16,
            noise1: NoiseCoefficient::Linear,
            noise2: NoiseCoefficient::Linear,
            shared_noise: false,
            u0: InitialVelocity::StreamFunction,
            theta0: InitialTemperature::Bump,
            convection: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("nu", self.nu), ("mu", self.mu), ("T", self.t_final), ("k", self.k), ("k0", self.k0)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.nx == 0 {
            return Err(Error::Config("nx must be at least 1".into()));
        }
        if dyadic_exponent(self.k0).is_none() {
            return Err(Error::Config(format!("k0 = {} is not a power of two", self.k0)));
        }
        let r = self.k / self.k0;
        if r < 1.0 || r.fract() != 0.0 || !(r as u64).is_power_of_two() {
            return Err(Error::Config(format!("k = {} is not a dyadic multiple of k0 = {}", self.k, self.k0)));
        }
        if step_count(self.t_final, self.k).is_none() {
            return Err(Error::Config(format!("T = {} is not a multiple of k = {}", self.t_final, self.k)));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        step_count(self.t_final, self.k).unwrap_or(0)
    }
}

/// Discretization plus the solver structures every trajectory on the mesh
/// shares.
pub struct SolverContext {
    pub disc: Discretization,
    pub saddle: Arc<SaddleStructure>,
    pub transport: Arc<TransportStructure>,
}

impl SolverContext {
    pub fn new(nx: usize) -> Result<Self> {
        let disc = Discretization::new(nx)?;
        let saddle = SaddleStructure::new(&disc)?;
        let transport = TransportStructure::new(&disc)?;
        Ok(SolverContext { disc, saddle, transport })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub theta: Vec<f64>,
    pub n: usize,
    pub t: f64,
}

impl FieldState {
    pub fn zero(disc: &Discretization) -> Self {
        FieldState {
            u: vec![0.0; disc.n_velocity()],
            p: vec![0.0; disc.n_pressure()],
            theta: vec![0.0; disc.n_temperature()],
            n: 0,
            t: 0.0,
        }
    }

    /// Plain-text dump: a header line, then one line per field.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# n = {} t = {:e}", self.n, self.t)?;
        for (name, v) in [("u", &self.u), ("p", &self.p), ("theta", &self.theta)] {
            write!(w, "{name}")?;
            for x in v.iter() {
                write!(w, " {x:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `max_q |(div u, psi_q)| / |u|` (zero for `u = 0`).
pub fn divergence_residual(disc: &Discretization, u: &[f64]) -> f64 {
    let scale = norm2(u);
    if scale == 0.0 {
        return 0.0;
    }
    disc.operators.b.mul_vec(u).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
}

/// Interpolates the configured data, projects the velocity onto the
/// discretely divergence-free space, and sets `p = 0`.
pub fn initial_state(ctx: &SolverContext, config: &SolverConfig) -> Result<FieldState> {
    let disc = &ctx.disc;
    let mut state = FieldState::zero(disc);
    let ns = disc.dofs.velocity.scalar_dofs;
    for (v, &x) in disc.mesh.vertices.iter().enumerate() {
        let u = config.u0.eval(x);
        state.u[v] = u[0];
        state.u[ns + v] = u[1];
        state.theta[v] = config.theta0.eval(x);
    }
    disc.dofs.velocity.zero_dirichlet(&mut state.u);
    disc.dofs.temperature.zero_dirichlet(&mut state.theta);
    if config.u0 != InitialVelocity::Zero {
        let load = disc.operators.m_u.mul_vec(&state.u);
        state.u = project_qh_load_with(Arc::clone(&ctx.saddle), disc, &load)?;
    }
    Ok(state)
}

/// Per-step checks of the scheme's structural properties.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepDiagnostics {
    pub divergence: f64,
    /// Left minus right side of the temperature energy inequality; must not
    /// exceed [`ENERGY_SLACK`].
    pub energy_excess: f64,
}

pub struct Stepper<'a> {
    ctx: &'a SolverContext,
    config: SolverConfig,
    saddle: SaddleSystem,
    transport: TransportSystem,
    frozen: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(ctx: &'a SolverContext, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        if config.nx != ctx.disc.mesh.nx {
            return Err(Error::Incompatible(format!(
                "config nx = {} but mesh nx = {}",
                config.nx, ctx.disc.mesh.nx
            )));
        }
        Ok(Stepper {
            ctx,
            config: config.clone(),
            saddle: SaddleSystem::new(Arc::clone(&ctx.saddle)),
            transport: TransportSystem::new(Arc::clone(&ctx.transport)),
            frozen: false,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Brownian increments `(dW1, dW2)` driving step `n`.
    pub fn increments(&self, path: &BrownianPath, n: usize) -> Result<(f64, f64)> {
        let dw1 = path.coarse_increment(1, n, self.config.k)?;
        let dw2 = if self.config.shared_noise {
            dw1
        } else {
            path.coarse_increment(2, n, self.config.k)?
        };
        Ok((dw1, dw2))
    }

    pub fn step(&mut self, state: &FieldState, path: &BrownianPath) -> Result<(FieldState, StepDiagnostics)> {
        let (dw1, dw2) = self.increments(path, state.n)?;
        self.step_with_increments(state, dw1, dw2)
    }

    pub fn step_with_increments(&mut self, state: &FieldState, dw1: f64, dw2: f64) -> Result<(FieldState, StepDiagnostics)> {
        self.advance(state, dw1, dw2).map_err(|e| Error::Step {
            step: state.n,
            source: Box::new(e),
        })
    }

    fn advance(&mut self, state: &FieldState, dw1: f64, dw2: f64) -> Result<(FieldState, StepDiagnostics)> {
        let disc = &self.ctx.disc;
        let ops = &disc.operators;
        let cfg = &self.config;
        let inv_k = 1.0 / cfg.k;

        if cfg.convection {
            self.saddle.assemble(disc, inv_k, cfg.nu, Some(&state.u))?;
        } else if !self.frozen {
            self.saddle.assemble(disc, inv_k, cfg.nu, None)?;
        }
        let mut rhs_u = apply_noise(cfg.noise1, &ops.m_u, &state.u, dw1);
        ops.m_u.mul_vec_add(1.0, &state.u, &mut rhs_u);
        rhs_u.iter_mut().for_each(|r| *r *= inv_k);
        ops.e2.mul_vec_add(1.0, &state.theta, &mut rhs_u);
        let sol = self.saddle.solve(disc, &rhs_u)?;

        let divergence = divergence_residual(disc, &sol.velocity);
        if !(divergence < DIVERGENCE_TOL) {
            return Err(Error::Residual {
                context: "weak divergence",
                residual: divergence,
                tolerance: DIVERGENCE_TOL,
            });
        }

        if cfg.convection {
            self.transport.assemble(disc, inv_k, cfg.mu, Some(&sol.velocity))?;
        } else if !self.frozen {
            self.transport.assemble(disc, inv_k, cfg.mu, None)?;
        }
        self.frozen = !cfg.convection;
        let noise_t = apply_noise(cfg.noise2, &ops.m_theta, &state.theta, dw2);
        let mut rhs_t = noise_t.clone();
        ops.m_theta.mul_vec_add(1.0, &state.theta, &mut rhs_t);
        rhs_t.iter_mut().for_each(|r| *r *= inv_k);
        let theta = self.transport.solve(&rhs_t)?;

        // temperature energy inequality, from testing the step with theta'
        let diff: Vec<f64> = theta.iter().zip(&state.theta).map(|(a, b)| a - b).collect();
        let m = &ops.m_theta;
        let lhs = 0.5 * (m.quadratic_form(&theta) - m.quadratic_form(&state.theta))
            + 0.25 * m.quadratic_form(&diff)
            + cfg.mu * cfg.k * ops.k_theta.quadratic_form(&theta);
        // noise_t = M G(theta) dW, so both terms come out of one vector
        let g_dw = cfg.noise2.apply(&state.theta).iter().map(|v| v * dw2).collect::<Vec<_>>();
        let rhs = dot(&noise_t, &g_dw) + dot(&noise_t, &state.theta);
        let energy_excess = lhs - rhs;

        let next = FieldState {
            u: sol.velocity,
            p: sol.pressure,
            theta,
            n: state.n + 1,
            t: (state.n + 1) as f64 * cfg.k,
        };
        Ok((next, StepDiagnostics { divergence, energy_excess }))
    }
}

/// Squared norms per time level (`n = 0..=M`) and per-step checks
/// (`n = 1..=M`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StabilityTrace {
    pub u_l2_sq: Vec<f64>,
    pub u_grad_sq: Vec<f64>,
    pub theta_l2_sq: Vec<f64>,
    pub theta_grad_sq: Vec<f64>,
    pub divergence: Vec<f64>,
    pub energy_excess: Vec<f64>,
}

impl StabilityTrace {
    fn record(&mut self, disc: &Discretization, s: &FieldState) {
        let ops = &disc.operators;
        self.u_l2_sq.push(ops.m_u.quadratic_form(&s.u));
        self.u_grad_sq.push(ops.k_u.quadratic_form(&s.u));
        self.theta_l2_sq.push(ops.m_theta.quadratic_form(&s.theta));
        self.theta_grad_sq.push(ops.k_theta.quadratic_form(&s.theta));
    }

    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_energy_excess(&self) -> f64 {
        self.energy_excess.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Steps where the energy inequality fails by more than [`ENERGY_SLACK`].
    pub fn energy_violations(&self) -> usize {
        self.energy_excess.iter().filter(|&&e| !(e <= ENERGY_SLACK)).count()
    }

    pub fn write_csv(&self, mut w: impl Write, k: f64) -> std::io::Result<()> {
        writeln!(w, "n,t,u_L2_sq,u_grad_sq,theta_L2_sq,theta_grad_sq,divergence,energy_excess")?;
        for n in 0..self.u_l2_sq.len() {
            let (div, ex) = match n {
                0 => (String::new(), String::new()),
                _ => (format!("{:e}", self.divergence[n - 1]), format!("{:e}", self.energy_excess[n - 1])),
            };
            writeln!(
                w,
                "{n},{:e},{:e},{:e},{:e},{:e},{div},{ex}",
                n as f64 * k,
                self.u_l2_sq[n],
                self.u_grad_sq[n],
                self.theta_l2_sq[n],
                self.theta_grad_sq[n]
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States `n = 0..=M`.
    pub states: Vec<FieldState>,
    pub trace: StabilityTrace,
}

pub fn run_trajectory(ctx: &SolverContext, config: &SolverConfig, path: &BrownianPath) -> Result<Trajectory> {
    let initial = initial_state(ctx, config)?;
    run_trajectory_from(ctx, config, path, initial)
}

/// Runs `M = T/k` steps from a given initial state.
pub fn run_trajectory_from(
    ctx: &SolverContext,
    config: &SolverConfig,
    path: &BrownianPath,
    initial: FieldState,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(ctx, config)?;
    let m = config.n_steps();
    let mut trace = StabilityTrace::default();
    trace.record(&ctx.disc, &initial);
    let mut states = Vec::with_capacity(m + 1);
    states.push(initial);
    for _ in 0..m {
        let (next, diag) = stepper.step(states.last().expect("initial state present"), path)?;
        trace.record(&ctx.disc, &next);
        trace.divergence.push(diag.divergence);
        trace.energy_excess.push(diag.energy_excess);
        states.push(next);
    }
    Ok(Trajectory { states, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_convection_temperature, assemble_convection_velocity};
    use crate::linalg::CsrMatrix;
    use crate::stochastic::sample_path;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config(nx: usize, k: f64, t_final: f64) -> SolverConfig {
        SolverConfig {
            nx,
            k,
            t_final,
            ..SolverConfig::default()
        }
    }

    fn quiet(mut cfg: SolverConfig) -> SolverConfig {
        cfg.noise1 = NoiseCoefficient::Zero;
        cfg.noise2 = NoiseCoefficient::Zero;
        cfg
    }

    fn dense(a: &CsrMatrix) -> DMatrix<f64> {
        a.to_dense()
    }

    /// One step from the globally assembled operators: bordered
    /// velocity/pressure system over free dofs, then the temperature system.
    fn dense_step(disc: &Discretization, cfg: &SolverConfig, s: &FieldState, dw1: f64, dw2: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let ops = &disc.operators;
        let k = cfg.k;
        let mut a = dense(&ops.m_u) / k + dense(&ops.k_u) * cfg.nu;
        if cfg.convection {
            a += dense(&assemble_convection_velocity(&disc.mesh, &disc.dofs, &disc.elements, &s.u));
        }
        let b = dense(&ops.b);
        let mu_u = dense(&ops.m_u) * DVector::from_column_slice(&s.u);
        let f = mu_u.clone() * ((1.0 + cfg.noise1.scale() * dw1) / k) + dense(&ops.e2) * DVector::from_column_slice(&s.theta);
        let free = disc.dofs.velocity.free_dofs();
        let (nf, np) = (free.len(), disc.n_pressure());
        let n = nf + np + 1;
        let mut sys = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (i, &gi) in free.iter().enumerate() {
            for (j, &gj) in free.iter().enumerate() {
                sys[(i, j)] = a[(gi, gj)];
            }
            for q in 0..np {
                sys[(i, nf + q)] = -b[(q, gi)];
                sys[(nf + q, i)] = -b[(q, gi)];
            }
            rhs[i] = f[gi];
        }
        for q in 0..np {
            sys[(nf + q, n - 1)] = ops.p1_integrals[q];
            sys[(n - 1, nf + q)] = ops.p1_integrals[q];
        }
        let x = sys.lu().solve(&rhs).unwrap();
        let mut u = vec![0.0; disc.n_velocity()];
        for (i, &gi) in free.iter().enumerate() {
            u[gi] = x[i];
        }
        let p: Vec<f64> = (0..np).map(|q| x[nf + q]).collect();

        let mut at = dense(&ops.m_theta) / k + dense(&ops.k_theta) * cfg.mu;
        if cfg.convection {
            at += dense(&assemble_convection_temperature(&disc.mesh, &disc.dofs, &disc.elements, &u));
        }
        let ft = dense(&ops.m_theta) * DVector::from_column_slice(&s.theta) * ((1.0 + cfg.noise2.scale() * dw2) / k);
        let free_t = disc.dofs.temperature.free_dofs();
        let mut st = DMatrix::zeros(free_t.len(), free_t.len());
        let mut rt = DVector::zeros(free_t.len());
        for (i, &gi) in free_t.iter().enumerate() {
            for (j, &gj) in free_t.iter().enumerate() {
                st[(i, j)] = at[(gi, gj)];
            }
            rt[i] = ft[gi];
        }
        let y = st.lu().solve(&rt).unwrap();
        let mut theta = vec![0.0; disc.n_temperature()];
        for (i, &gi) in free_t.iter().enumerate() {
            theta[gi] = y[i];
        }
        (u, p, theta)
    }

    fn random_state(disc: &Discretization, rng: &mut ChaCha8Rng) -> FieldState {
        let mut s = FieldState::zero(disc);
        s.u.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        s.theta.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        disc.dofs.velocity.zero_dirichlet(&mut s.u);
        disc.dofs.temperature.zero_dirichlet(&mut s.theta);
        s
    }

    #[test]
    fn one_step_matches_dense_oracle() {
        let ctx = SolverContext::new(2).unwrap();
        let cfg = config(2, 0.25, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let s = random_state(&ctx.disc, &mut rng);
            let (dw1, dw2) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let mut stepper = Stepper::new(&ctx, &cfg).unwrap();
            // velocities off the divergence-free space are fine for one step
            let (next, _) = stepper.step_with_increments(&s, dw1, dw2).unwrap();
            let (u, p, theta) = dense_step(&ctx.disc, &cfg, &s, dw1, dw2);
            for (a, b) in next.u.iter().zip(&u).chain(next.p.iter().zip(&p)).chain(next.theta.iter().zip(&theta)) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let ctx = SolverContext::new(4).unwrap();
        let cfg = quiet(config(4, 0.125, 1.0));
        let mut stepper = Stepper::new(&ctx, &cfg).unwrap();
        let zero = FieldState::zero(&ctx.disc);
        let (next, _) = stepper.step_with_increments(&zero, 0.3, -0.2).unwrap();
        assert!(next.u.iter().chain(&next.p).chain(&next.theta).all(|&v| v == 0.0));
        assert_eq!(next.n, 1);
    }

    #[test]
    fn zero_data_gives_zero_traces() {
        let ctx = SolverContext::new(4).unwrap();
        let mut cfg = quiet(config(4, 0.125, 1.0));
        cfg.u0 = InitialVelocity::Zero;
        cfg.theta0 = InitialTemperature::Zero;
        let path = sample_path(3, 1.0, cfg.k0).unwrap();
        let tr = run_trajectory(&ctx, &cfg, &path).unwrap();
        assert_eq!(tr.states.len(), 9);
        let t = &tr.trace;
        assert!(t.u_l2_sq.iter().chain(&t.u_grad_sq).chain(&t.theta_l2_sq).chain(&t.theta_grad_sq).all(|&v| v == 0.0));
    }

    #[test]
    fn buoyancy_lifts_fluid() {
        let ctx = SolverContext::new(4).unwrap();
        let cfg = quiet(config(4, 0.125, 1.0));
        let disc = &ctx.disc;
        let mut s = FieldState::zero(disc);
        for (v, &x) in disc.mesh.vertices.iter().enumerate() {
            s.theta[v] = 2.0 * InitialTemperature::Bump.eval(x);
        }
        disc.dofs.temperature.zero_dirichlet(&mut s.theta);
        let (next, _) = Stepper::new(&ctx, &cfg).unwrap().step_with_increments(&s, 0.0, 0.0).unwrap();
        let ns = disc.dofs.velocity.scalar_dofs;
        let uy = next.u[ns..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(uy > 1e-4, "vertical velocity {uy}");
        // a warm centre rises
        let centre = disc.mesh.vertices.iter().position(|&x| x == [0.5, 0.5]).unwrap();
        assert!(next.u[ns + centre] > 0.0);
    }

    #[test]
    fn noise_free_energy_decays_every_step() {
        let ctx = SolverContext::new(8).unwrap();
        let cfg = quiet(config(8, 1.0 / 32.0, 0.5));
        let path = sample_path(1, cfg.t_final, cfg.k0).unwrap();
        let tr = run_trajectory(&ctx, &cfg, &path).unwrap();
        let ops = &ctx.disc.operators;
        for w in tr.states.windows(2) {
            let d: Vec<f64> = w[1].theta.iter().zip(&w[0].theta).map(|(a, b)| a - b).collect();
            let lhs = ops.m_theta.quadratic_form(&w[1].theta)
                + 0.5 * ops.m_theta.quadratic_form(&d)
                + 2.0 * cfg.mu * cfg.k * ops.k_theta.quadratic_form(&w[1].theta);
            assert!(lhs <= ops.m_theta.quadratic_form(&w[0].theta) + 1e-12);
        }
        assert_eq!(tr.trace.energy_violations(), 0);
    }

    #[test]
    fn noisy_energy_inequality_and_divergence_hold() {
        let ctx = SolverContext::new(8).unwrap();
        let cfg = config(8, 1.0 / 32.0, 1.0);
        for seed in 0..3 {
            let path = sample_path(seed, cfg.t_final, cfg.k0).unwrap();
            let tr = run_trajectory(&ctx, &cfg, &path).unwrap();
            assert_eq!(tr.trace.energy_violations(), 0);
            assert!(tr.trace.max_divergence() < DIVERGENCE_TOL);
            for s in &tr.states[1..] {
                assert!(dot(&s.p, &ctx.disc.operators.p1_integrals).abs() < 1e-12);
                assert!(ctx.disc.dofs.velocity.dirichlet_dofs.iter().all(|&d| s.u[d] == 0.0));
                assert!(ctx.disc.dofs.temperature.dirichlet_dofs.iter().all(|&d| s.theta[d] == 0.0));
            }
        }
    }

    #[test]
    fn noise_free_runs_ignore_the_seed() {
        let ctx = SolverContext::new(4).unwrap();
        let cfg = quiet(config(4, 1.0 / 16.0, 0.5));
        let a = run_trajectory(&ctx, &cfg, &sample_path(1, 0.5, cfg.k0).unwrap()).unwrap();
        let b = run_trajectory(&ctx, &cfg, &sample_path(2, 0.5, cfg.k0).unwrap()).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn scheme_is_linear_without_convection_and_noise() {
        let ctx = SolverContext::new(4).unwrap();
        let mut cfg = quiet(config(4, 1.0 / 16.0, 0.5));
        cfg.convection = false;
        let path = sample_path(1, 0.5, cfg.k0).unwrap();
        let s0 = initial_state(&ctx, &cfg).unwrap();
        let mut s1 = s0.clone();
        s1.u.iter_mut().chain(s1.theta.iter_mut()).for_each(|v| *v *= 2.0);
        let a = run_trajectory_from(&ctx, &cfg, &path, s0).unwrap();
        let b = run_trajectory_from(&ctx, &cfg, &path, s1).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (p, q) in [(&x.u, &y.u), (&x.theta, &y.theta)] {
                let d: Vec<f64> = p.iter().zip(q.iter()).map(|(a, b)| 2.0 * a - b).collect();
                assert!(norm2(&d) <= 1e-12 * norm2(q));
            }
        }
    }

    #[test]
    fn initial_state_is_discretely_solenoidal() {
        let ctx = SolverContext::new(8).unwrap();
        let s = initial_state(&ctx, &SolverConfig { nx: 8, ..SolverConfig::default() }).unwrap();
        assert!(divergence_residual(&ctx.disc, &s.u) < 1e-9);
        assert!(s.p.iter().all(|&p| p == 0.0));
        let mut cfg = SolverConfig { nx: 8, ..SolverConfig::default() };
        cfg.u0 = InitialVelocity::Zero;
        cfg.theta0 = InitialTemperature::Zero;
        assert_eq!(initial_state(&ctx, &cfg).unwrap(), FieldState::zero(&ctx.disc));
    }

    #[test]
    fn initial_velocity_norm_converges() {
        // |u0|^2 = 0.01 pi^2 * 2 * (3/8) * (1/2) = 0.00375 pi^2
        let exact = (0.00375f64).sqrt() * PI;
        let mut errs = Vec::new();
        for nx in [8, 16, 32] {
            let ctx = SolverContext::new(nx).unwrap();
            let s = initial_state(&ctx, &SolverConfig { nx, ..SolverConfig::default() }).unwrap();
            errs.push((ctx.disc.operators.m_u.quadratic_form(&s.u).sqrt() - exact).abs());
        }
        assert!(errs[2] < 0.02 * exact, "{errs:?}");
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn temperature_moments_stay_under_gronwall_bound() {
        let ctx = SolverContext::new(4).unwrap();
        let cfg = config(4, 1.0 / 16.0, 1.0);
        let samples = 100;
        let mut mean_max = 0.0;
        let mut theta0 = 0.0;
        for j in 0..samples {
            let path = sample_path(crate::stochastic::sample_seed(99, j), cfg.t_final, cfg.k0).unwrap();
            let tr = run_trajectory(&ctx, &cfg, &path).unwrap();
            theta0 = tr.trace.theta_l2_sq[0];
            mean_max += tr.trace.theta_l2_sq.iter().copied().fold(0.0, f64::max) / samples as f64;
        }
        assert!(mean_max < 1.5 * 2.0 * theta0 * (4.0 * cfg.t_final).exp());
        assert!(mean_max >= theta0 * (1.0 - 1e-12));
    }

    #[test]
    fn mismatched_mesh_and_bad_steps_are_rejected() {
        let ctx = SolverContext::new(2).unwrap();
        assert!(Stepper::new(&ctx, &config(4, 0.25, 1.0)).is_err());
        assert!(Stepper::new(&ctx, &config(2, 0.3, 1.0)).is_err());
        assert!(Stepper::new(&ctx, &config(2, 0.25, 0.9)).is_err());
    }
}
