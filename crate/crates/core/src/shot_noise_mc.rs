//! Seeded Monte Carlo simulation of shot-noise-limited detection.
//!
//! This is the stochastic oracle for the closed forms in
//! [`crate::detection`]: it rebuilds the difference photocurrent trial by
//! trial — deterministic signal plus quantum noise — and must land on the
//! analytic SNRs without touching their code paths.
//!
//! Signal conventions match the vacuum-normalized homodyne photocurrent: the
//! balanced-homodyne trial mean is `2 sqrt(N') |A_w| k w0` with unit noise
//! variance. The split-detector trial uses the same normalization with its
//! spatial efficiency left to *emerge* from the half-plane integrals of the
//! sampled dark-port intensity (the flipped-mode overlap
//! `∫ sign(x) psi_0 psi_1 dx = sqrt(2/pi)`, hence the 2/pi SNR penalty);
//! nothing scheme-specific is hard-coded.
//!
//! Randomness comes from the counter-based ChaCha12 stream cipher
//! (`rand_chacha::ChaCha12Rng`), seeded explicitly. Trials are split into
//! fixed 65536-trial partitions, each drawing from its own stream
//! `(seed, partition index)`, and partial results are merged in partition
//! order — identical output for any worker count, bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{DetectionError, PhotonBudget};
use crate::hg_modes::{self, BeamGeometry, FieldError, SampledField};
use crate::numerics;
use crate::weak_measurement::{
    dark_port_field, weak_value, InterferometerSetting, TiltKick, WeakMeasurementError,
};

/// Trials per independent random stream; fixed so results do not depend on
/// how partitions are scheduled across workers.
pub const TRIALS_PER_PARTITION: u64 = 1 << 16;

#[derive(Debug, Error)]
pub enum McError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("poisson counting needs a positive photon number, got {0}")]
    DegeneratePoisson(f64),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    WeakValue(#[from] WeakMeasurementError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Photon-statistics model for the noise draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhotonModel {
    /// Unit-variance Gaussian quadrature noise; valid for a bright local
    /// oscillator, which is the experimental regime. Default.
    GaussianQuadratureNoise,
    /// Paired detector counting with Poisson statistics; retained for
    /// small-count validation.
    PoissonCounting,
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub model: PhotonModel,
}

impl McConfig {
    pub fn new(trials: u64, seed: u64, model: PhotonModel) -> Result<Self, McError> {
        if trials == 0 {
            return Err(McError::NoTrials);
        }
        Ok(Self {
            trials,
            seed,
            model,
        })
    }

    pub fn gaussian(trials: u64, seed: u64) -> Result<Self, McError> {
        Self::new(trials, seed, PhotonModel::GaussianQuadratureNoise)
    }
}

/// Per-run summary; serializes to the interchange JSON
/// `{trials, seed, mean, variance, snr, stderr}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub trials: u64,
    pub seed: u64,
    /// Empirical mean of the difference photocurrent.
    pub mean: f64,
    /// Unbiased empirical variance (0 for a single trial).
    pub variance: f64,
    /// `mean^2 / variance` (0 when degenerate).
    pub snr: f64,
    /// Delta-method standard error of the empirical SNR under Gaussian
    /// moments: `sqrt(4 snr / n + 2 snr^2 / (n - 1))`.
    pub stderr: f64,
}

/// How one trial of a scheme is drawn.
enum TrialKind {
    /// `mean + g`, `g ~ N(0, 1)`.
    Gaussian { mean: f64 },
    /// `(n_plus - n_minus + offset) * scale` with Poisson-distributed counts.
    PoissonPair {
        mu_plus: f64,
        mu_minus: f64,
        offset: f64,
        scale: f64,
    },
}

/// Running first and second central moments (Welford).
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn empty() -> Self {
        Self {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pairwise merge; applied in fixed partition order.
    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 =
            self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }
}

fn run_partition(seed: u64, partition: u64, trials: u64, kind: &TrialKind) -> Moments {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(partition);
    let mut acc = Moments::empty();
    match *kind {
        TrialKind::Gaussian { mean } => {
            for _ in 0..trials {
                let noise: f64 = StandardNormal.sample(&mut rng);
                acc.push(mean + noise);
            }
        }
        TrialKind::PoissonPair {
            mu_plus,
            mu_minus,
            offset,
            scale,
        } => {
            let plus = Poisson::new(mu_plus).expect("positive mean");
            let minus = Poisson::new(mu_minus).expect("positive mean");
            for _ in 0..trials {
                let np: f64 = plus.sample(&mut rng);
                let nm: f64 = minus.sample(&mut rng);
                acc.push((np - nm + offset) * scale);
            }
        }
    }
    acc
}

fn run_trials(config: &McConfig, kind: TrialKind) -> McSummary {
    let partitions = config.trials.div_ceil(TRIALS_PER_PARTITION);
    let combined = (0..partitions)
        .into_par_iter()
        .map(|p| {
            let start = p * TRIALS_PER_PARTITION;
            let count = TRIALS_PER_PARTITION.min(config.trials - start);
            run_partition(config.seed, p, count, &kind)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::empty(), Moments::merge);

    let variance = if combined.n > 1 {
        combined.m2 / (combined.n - 1) as f64
    } else {
        0.0
    };
    let snr = if variance > 0.0 {
        combined.mean * combined.mean / variance
    } else {
        0.0
    };
    let stderr = if combined.n > 1 && variance > 0.0 {
        (4.0 * snr / combined.n as f64 + 2.0 * snr * snr / (combined.n - 1) as f64).sqrt()
    } else {
        0.0
    };
    McSummary {
        trials: config.trials,
        seed: config.seed,
        mean: combined.mean,
        variance,
        snr,
        stderr,
    }
}

/// Simulates the balanced-homodyne difference photocurrent.
///
/// Gaussian model: deterministic mean `2 sqrt(N') |A_w| k w0` plus unit
/// quadrature noise. Poisson model: the two detector counts behind the 50/50
/// splitter are drawn with means `(N_LO + N_sig ± 2 sqrt(N_LO N_sig)) / 2`
/// (`N_sig = N' (A_w k w0)^2` the detected signal-mode photons) and the
/// normalized difference `(n_+ - n_-) / sqrt(N_LO)` recovers the same signal
/// with variance `1 + N_sig / N_LO`.
pub fn simulate_bhd(
    config: &McConfig,
    budget: &PhotonBudget,
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
) -> Result<McSummary, McError> {
    let a_w = weak_value(setting)?.norm();
    let amplitude = a_w * kick.momentum_kick() * geometry.waist();
    let mean = 2.0 * budget.n_signal().sqrt() * amplitude;
    let kind = match config.model {
        PhotonModel::GaussianQuadratureNoise => TrialKind::Gaussian { mean },
        PhotonModel::PoissonCounting => {
            let n_lo = budget.n_lo();
            if !(n_lo > 0.0) {
                return Err(McError::DegeneratePoisson(n_lo));
            }
            let n_sig = budget.n_signal() * amplitude * amplitude;
            let cross = 2.0 * (n_lo * n_sig).sqrt();
            TrialKind::PoissonPair {
                mu_plus: 0.5 * (n_lo + n_sig + cross),
                mu_minus: 0.5 * (n_lo + n_sig - cross),
                offset: 0.0,
                scale: 1.0 / n_lo.sqrt(),
            }
        }
    };
    Ok(run_trials(config, kind))
}

/// Simulates split detection of the dark-port beam.
///
/// The exact dark-port intensity is integrated over the half-planes `x > 0`
/// and `x < 0` on a quadrature grid (`None` uses the default grid); the
/// normalized contrast `(I_+ - I_-) / (I_+ + I_-)` carries the tilt signal
/// with the flipped-mode efficiency baked in spatially. Each trial adds the
/// shot noise of the detected photon number at the same vacuum-normalized
/// scale as the homodyne trial.
pub fn simulate_sd(
    config: &McConfig,
    budget: &PhotonBudget,
    setting: &InterferometerSetting,
    kick: &TiltKick,
    geometry: &BeamGeometry,
    grid: Option<&[f64]>,
) -> Result<McSummary, McError> {
    let owned_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned_grid = hg_modes::default_grid(geometry);
            &owned_grid
        }
    };
    let dark = dark_port_field(setting, kick, geometry, grid)?;
    let (i_minus, i_plus) = half_plane_intensities(&dark.field);
    let total = i_plus + i_minus;
    let contrast = (i_plus - i_minus) / total;
    let n_signal = budget.n_signal();
    let mean = 2.0 * n_signal.sqrt() * contrast;

    let kind = match config.model {
        PhotonModel::GaussianQuadratureNoise => TrialKind::Gaussian { mean },
        PhotonModel::PoissonCounting => {
            if !(n_signal > 0.0) {
                return Err(McError::DegeneratePoisson(n_signal));
            }
            // Counting supplies the shot noise; the deterministic offset
            // brings the mean to the homodyne-normalized signal scale.
            TrialKind::PoissonPair {
                mu_plus: n_signal * i_plus / total,
                mu_minus: n_signal * i_minus / total,
                offset: n_signal * contrast,
                scale: 1.0 / n_signal.sqrt(),
            }
        }
    };
    Ok(run_trials(config, kind))
}

/// Half-plane integrals `(∫_{x<0} |E|^2, ∫_{x>0} |E|^2)` of a sampled field.
pub fn half_plane_intensities(field: &SampledField) -> (f64, f64) {
    let intensity: Vec<f64> = field.samples().iter().map(|s| s.norm_sqr()).collect();
    numerics::split_at_origin(field.grid(), &intensity)
}

/// The flipped-mode overlap `∫ sign(x) psi_0(x) psi_1(x) dx`, evaluated by
/// quadrature on `grid` (default grid for `None`). Analytically `sqrt(2/pi)`;
/// squaring it gives the split-detector efficiency.
pub fn half_plane_overlap(
    geometry: &BeamGeometry,
    grid: Option<&[f64]>,
) -> Result<f64, FieldError> {
    let owned_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned_grid = hg_modes::default_grid(geometry);
            &owned_grid
        }
    };
    let product = SampledField::from_fn(grid, |x| {
        num_complex::Complex64::new(
            hg_modes::mode_amplitude(0, x, geometry) * hg_modes::mode_amplitude(1, x, geometry),
            0.0,
        )
    })?;
    product.require_span(geometry, hg_modes::MIN_GRID_HALF_SPAN_WAISTS)?;
    let values: Vec<f64> = product.samples().iter().map(|s| s.re).collect();
    let (neg, pos) = numerics::split_at_origin(product.grid(), &values);
    Ok(pos - neg)
}
