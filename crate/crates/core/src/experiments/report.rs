use super::fit::fit_rate;
use super::norms::{ErrorSample, N_NORMS};

/// Checks gathered over every trajectory of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyDiagnostics {
    pub trajectories: usize,
    pub steps: usize,
    /// Steps where the temperature energy inequality failed.
    pub energy_violations: usize,
    pub max_energy_excess: f64,
    pub max_divergence: f64,
    /// Coarse increments that were not bit-equal to the sum of the
    /// corresponding finer ones.
    pub path_mismatches: usize,
    pub path_checks: usize,
}

impl Default for StudyDiagnostics {
    fn default() -> Self {
        StudyDiagnostics {
            trajectories: 0,
            steps: 0,
            energy_violations: 0,
            max_energy_excess: f64::NEG_INFINITY,
            max_divergence: 0.0,
            path_mismatches: 0,
            path_checks: 0,
        }
    }
}

impl StudyDiagnostics {
    pub fn merge(&mut self, other: &StudyDiagnostics) {
        self.trajectories += other.trajectories;
        self.steps += other.steps;
        self.energy_violations += other.energy_violations;
        self.max_energy_excess = self.max_energy_excess.max(other.max_energy_excess);
        self.max_divergence = self.max_divergence.max(other.max_divergence);
        self.path_mismatches += other.path_mismatches;
        self.path_checks += other.path_checks;
    }

    pub fn record_trace(&mut self, trace: &crate::stepper::StabilityTrace) {
        self.trajectories += 1;
        self.steps += trace.energy_excess.len();
        self.energy_violations += trace.energy_violations();
        self.max_energy_excess = self.max_energy_excess.max(trace.max_energy_excess());
        self.max_divergence = self.max_divergence.max(trace.max_divergence());
    }
}

/// What one Monte Carlo sample produced: errors per level plus checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleOutcome {
    pub errors: Vec<ErrorSample>,
    pub diagnostics: StudyDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyMode {
    Temporal,
    Spatial,
}

impl std::fmt::Display for StudyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StudyMode::Temporal => "time",
            StudyMode::Spatial => "space",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    pub level: usize,
    pub k: f64,
    /// Longest edge.
    pub h: f64,
    /// `1/nx`.
    pub grid_spacing: f64,
    /// `sqrt(E[e^2])` per norm.
    pub errors: [f64; N_NORMS],
    /// Monte Carlo standard error of each entry of `errors`.
    pub std_errors: [f64; N_NORMS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mode: StudyMode,
    pub levels: Vec<LevelErrors>,
    pub samples: usize,
    pub seed: u64,
    pub diagnostics: StudyDiagnostics,
    /// Free-form description of the reference solutions.
    pub reference: String,
}

impl ErrorReport {
    /// Fitted rate per norm, against `k` (temporal) or `h` (spatial). `None`
    /// where the fit is undefined.
    pub fn rates(&self) -> [Option<f64>; N_NORMS] {
        std::array::from_fn(|i| {
            let pairs: Vec<(f64, f64)> = self
                .levels
                .iter()
                .map(|l| {
                    let x = match self.mode {
                        StudyMode::Temporal => l.k,
                        StudyMode::Spatial => l.h,
                    };
                    (x, l.errors[i])
                })
                .collect();
            fit_rate(&pairs).ok()
        })
    }
}

/// Root-mean-square estimate and its standard error from per-sample norms.
/// The squares are summed in sorted order, so the result does not depend on
/// the order of the samples.
pub fn rms_estimate(values: &[f64]) -> (f64, f64) {
    let j = values.len();
    if j == 0 {
        return (0.0, 0.0);
    }
    let mut sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    let mean = sq.iter().sum::<f64>() / j as f64;
    let est = mean.sqrt();
    if j < 2 || est == 0.0 {
        return (est, 0.0);
    }
    let mut dev: Vec<f64> = sq.iter().map(|s| (s - mean) * (s - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (j - 1) as f64;
    // delta method for the square root
    (est, (var / j as f64).sqrt() / (2.0 * est))
}

/// Per-level RMS over samples.
pub fn aggregate(outcomes: &[SampleOutcome], level: usize) -> ([f64; N_NORMS], [f64; N_NORMS]) {
    let mut errors = [0.0; N_NORMS];
    let mut std_errors = [0.0; N_NORMS];
    for i in 0..N_NORMS {
        let column: Vec<f64> = outcomes.iter().map(|o| o.errors[level].0[i]).collect();
        (errors[i], std_errors[i]) = rms_estimate(&column);
    }
    (errors, std_errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_is_permutation_invariant() {
        let v: Vec<f64> = (0..97).map(|i| ((i * 37 % 97) as f64 * 0.123).sin() * 1e-3 + 0.1 / (i + 1) as f64).collect();
        let mut w = v.clone();
        w.reverse();
        w.swap(3, 50);
        assert_eq!(rms_estimate(&v), rms_estimate(&w));
    }

    #[test]
    fn rms_of_constants() {
        let (e, s) = rms_estimate(&[2.0; 10]);
        assert_eq!((e, s), (2.0, 0.0));
        assert_eq!(rms_estimate(&[]), (0.0, 0.0));
        assert_eq!(rms_estimate(&[3.0, 4.0]).0, 12.5f64.sqrt());
    }
}
