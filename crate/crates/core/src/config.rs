//! `key = value` configuration files.
//!
//! Blank lines and text after `#` are ignored. Numbers may be written as
//! decimals, `a/b` or powers of two such as `2^-11`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stepper::{InitialTemperature, InitialVelocity, SolverConfig};
use crate::stochastic::NoiseCoefficient;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    /// Monte Carlo sample count.
    pub samples: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverConfig::default(),
            samples: 100,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses a file, starting from the defaults. Unknown keys and repeated
    /// keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got '{line}'", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            seen.push(key);
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.solver;
        match key {
            "nu" => s.nu = parse_number(value)?,
            "mu" => s.mu = parse_number(value)?,
            "T" => s.t_final = parse_number(value)?,
            "k" => s.k = parse_number(value)?,
            "k0" => s.k0 = parse_number(value)?,
            "nx" => s.nx = parse_count(value)?,
            "samples" => self.samples = parse_count(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed must be a non-negative integer, got '{value}'")))?
            }
            "noise1" => s.noise1 = NoiseCoefficient::parse(value)?,
            "noise2" => s.noise2 = NoiseCoefficient::parse(value)?,
            "shared_noise" => {
                s.shared_noise = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(Error::Config(format!("shared_noise must be true or false, got '{value}'"))),
                }
            }
            "u0" => {
                s.u0 = match value {
                    "default" => InitialVelocity::StreamFunction,
                    "zero" => InitialVelocity::Zero,
                    _ => return Err(Error::Config(format!("u0 must be default or zero, got '{value}'"))),
                }
            }
            "theta0" => {
                s.theta0 = match value {
                    "default" => InitialTemperature::Bump,
                    "zero" => InitialTemperature::Zero,
                    _ => return Err(Error::Config(format!("theta0 must be default or zero, got '{value}'"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}

pub fn parse_number(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::Config(format!("not a number: '{text}'"));
    let v = if let Some(e) = t.strip_prefix("2^") {
        let e = e.trim_start_matches('(').trim_end_matches(')');
        2f64.powi(e.parse::<i32>().map_err(|_| bad())?)
    } else if let Some((a, b)) = t.split_once('/') {
        a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_count(text: &str) -> Result<usize> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("expected a non-negative integer, got '{text}'")))
}
