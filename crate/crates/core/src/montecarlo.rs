//! Monte Carlo validation harness: empirical upcrossing counts, excursion
//! probabilities, and confidence-ellipsoid coverage with standard errors.
//!
//! Realizations are processed in parallel with deterministic per-realization
//! RNG streams; accumulators are integer-valued, so reductions are exact and
//! order-independent.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::kernels::{stationary_kernel, ComplexKernel, SequenceSpec};
use crate::regression::{confidence_ellipsoid, Dataset, RegressionError, RegressionModel};
use crate::sampling::{draw_series_coefficients, evaluate_series, gains_on_half_grid, stream_rng};

/// Grid points on `[0, pi)` used for discrete crossing detection.
pub const CROSSING_GRID: usize = 4096;

/// One Monte Carlo estimate with its standard error.
#[derive(Debug, Clone)]
pub struct McReport {
    pub quantity: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub n: usize,
    pub seed: u64,
}

/// Per-gamma empirical crossing statistics from a single sampling pass.
#[derive(Debug, Clone)]
pub struct GainStatistics {
    /// Mean number of discrete upcrossings per realization, per gamma.
    pub upcrossings: Vec<McReport>,
    /// Fraction of realizations whose maximum grid gain exceeds gamma.
    pub excursion_probability: Vec<McReport>,
}

struct Accumulator {
    count_sum: Vec<u64>,
    count_sq_sum: Vec<u64>,
    exceed: Vec<u64>,
}

impl Accumulator {
    fn zero(k: usize) -> Self {
        Self {
            count_sum: vec![0; k],
            count_sq_sum: vec![0; k],
            exceed: vec![0; k],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..self.count_sum.len() {
            self.count_sum[i] += other.count_sum[i];
            self.count_sq_sum[i] += other.count_sq_sum[i];
            self.exceed[i] += other.exceed[i];
        }
        self
    }
}

/// Counts indices with `gains[i] <= gamma < gains[i+1]` (upward sign change
/// with positive slope between adjacent grid points).
pub fn count_discrete_upcrossings(gains: &[f64], gamma: f64) -> usize {
    gains
        .windows(2)
        .filter(|w| w[0] <= gamma && w[1] > gamma)
        .count()
}

fn run_gain_pass(
    spec: &SequenceSpec,
    gamma_grid: &[f64],
    n: usize,
    seed: u64,
    grid_points: usize,
) -> Accumulator {
    let a2 = spec.coefficients();
    let k = gamma_grid.len();
    (0..n as u64)
        .into_par_iter()
        .fold(
            || Accumulator::zero(k),
            |mut acc, index| {
                let mut rng = stream_rng(seed, index);
                let h = draw_series_coefficients(&a2, &mut rng);
                let gains = gains_on_half_grid(&h, grid_points);
                let max_gain = gains.iter().fold(0.0f64, |m, &g| m.max(g));
                for (i, &gamma) in gamma_grid.iter().enumerate() {
                    let c = count_discrete_upcrossings(&gains, gamma) as u64;
                    acc.count_sum[i] += c;
                    acc.count_sq_sum[i] += c * c;
                    if max_gain > gamma {
                        acc.exceed[i] += 1;
                    }
                }
                acc
            },
        )
        .reduce(|| Accumulator::zero(k), Accumulator::merge)
}

/// Empirical upcrossing counts and excursion probabilities over the gamma
/// grid, computed in one pass over `n` realizations sampled on the
/// `grid_points`-point uniform grid covering `[0, pi)`.
pub fn mc_gain_statistics(
    spec: &SequenceSpec,
    gamma_grid: &[f64],
    n: usize,
    seed: u64,
    grid_points: usize,
) -> GainStatistics {
    assert!(n >= 100, "need at least 100 realizations");
    assert!(grid_points.is_power_of_two(), "crossing grid must be a power of two");
    let acc = run_gain_pass(spec, gamma_grid, n, seed, grid_points);
    let nf = n as f64;
    let upcrossings = gamma_grid
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let mean = acc.count_sum[i] as f64 / nf;
            let var = (acc.count_sq_sum[i] as f64 - nf * mean * mean) / (nf - 1.0);
            McReport {
                quantity: format!("E[N_gamma] at gamma = {gamma}"),
                estimate: mean,
                standard_error: (var.max(0.0) / nf).sqrt(),
                n,
                seed,
            }
        })
        .collect();
    let excursion_probability = gamma_grid
        .iter()
        .enumerate()
        .map(|(i, &gamma)| {
            let p = acc.exceed[i] as f64 / nf;
            McReport {
                quantity: format!("P_gamma at gamma = {gamma}"),
                estimate: p,
                standard_error: (p * (1.0 - p) / nf).sqrt(),
                n,
                seed,
            }
        })
        .collect();
    GainStatistics {
        upcrossings,
        excursion_probability,
    }
}

/// Empirical `E[N_gamma]` per gamma on the default crossing grid.
pub fn mc_upcrossings(
    spec: &SequenceSpec,
    gamma_grid: &[f64],
    n: usize,
    seed: u64,
) -> Vec<McReport> {
    mc_gain_statistics(spec, gamma_grid, n, seed, CROSSING_GRID).upcrossings
}

/// Empirical `Pr{max grid gain > gamma}` per gamma.
pub fn mc_excursion_probability(
    spec: &SequenceSpec,
    gamma_grid: &[f64],
    n: usize,
    seed: u64,
) -> Vec<McReport> {
    mc_gain_statistics(spec, gamma_grid, n, seed, CROSSING_GRID).excursion_probability
}

/// Empirical `Pr{|f(e^{j omega})| > gamma}` at a single frequency.
pub fn mc_start_violation(
    spec: &SequenceSpec,
    gamma: f64,
    omega: f64,
    n: usize,
    seed: u64,
) -> McReport {
    let a2 = spec.coefficients();
    let hits: u64 = (0..n as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(seed, index);
            let h = draw_series_coefficients(&a2, &mut rng);
            u64::from(evaluate_series(&h, omega).norm() > gamma)
        })
        .sum();
    let p = hits as f64 / n as f64;
    McReport {
        quantity: format!("start violation at omega = {omega}, gamma = {gamma}"),
        estimate: p,
        standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        n,
        seed,
    }
}

/// Configuration for the ellipsoid-coverage experiment: sample a prior
/// realization, observe it noisily at the training angles, predict the
/// latent value at the held-out angle, and test ellipsoid membership.
#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub sequence: SequenceSpec,
    pub train_angles: Vec<f64>,
    pub test_angle: f64,
    pub noise_variance: f64,
    pub eta: f64,
}

impl CoverageConfig {
    pub fn default_geometric() -> Self {
        Self {
            sequence: SequenceSpec::geometric(0.5).expect("valid alpha"),
            train_angles: (0..8).map(|i| 0.25 + 0.35 * i as f64).collect(),
            test_angle: 1.43,
            noise_variance: 0.01,
            eta: 3.0,
        }
    }
}

/// Fraction of trials in which the true latent value lies inside the
/// `eta`-confidence disk of the strictly linear prediction.
pub fn mc_ellipsoid_coverage(
    cfg: &CoverageConfig,
    trials: usize,
    seed: u64,
) -> Result<McReport, RegressionError> {
    assert!(trials >= 100, "need at least 100 trials");
    let kernel: Arc<dyn ComplexKernel> = Arc::new(stationary_kernel(cfg.sequence.clone())?);
    let a2 = cfg.sequence.coefficients();
    let train: Vec<Complex64> = cfg
        .train_angles
        .iter()
        .map(|&w| Complex64::from_polar(1.0, w))
        .collect();
    let test_point = Complex64::from_polar(1.0, cfg.test_angle);
    let sd = (cfg.noise_variance / 2.0).sqrt();

    let hits: Result<Vec<bool>, RegressionError> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial);
            let h = draw_series_coefficients(&a2, &mut rng);
            let truth = evaluate_series(&h, cfg.test_angle);
            let ys: Vec<Complex64> = cfg
                .train_angles
                .iter()
                .map(|&w| {
                    let noise = Complex64::new(
                        sd * rng.sample::<f64, _>(StandardNormal),
                        sd * rng.sample::<f64, _>(StandardNormal),
                    );
                    evaluate_series(&h, w) + noise
                })
                .collect();
            let data = Dataset::new(train.clone(), ys, cfg.noise_variance)?;
            let model = RegressionModel::new(kernel.clone(), data)?
                .with_noise_free_prediction(true);
            let p = model.predict_strict(test_point)?;
            Ok(confidence_ellipsoid(&p, cfg.eta).contains(truth))
        })
        .collect();
    let hits = hits?;
    let count = hits.iter().filter(|h| **h).count();
    let p = count as f64 / trials as f64;
    Ok(McReport {
        quantity: format!("ellipsoid coverage at eta = {}", cfg.eta),
        estimate: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        n: trials,
        seed,
    })
}
