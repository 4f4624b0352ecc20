//! Time-domain simulation and frequency-domain estimation for the resonance
//! identification experiment: a second-order plant discretized by zero-order
//! hold, driven by white noise, observed through a bank of windowed DFT
//! filters whose readout ratios form an empirical transfer function estimate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::regression::{Dataset, RegressionError};

#[derive(Debug, Error)]
pub enum SysidError {
    #[error("bad plant parameters: {0}")]
    BadParameters(String),
    #[error("denominator root at magnitude {magnitude} >= 1; plant is unstable")]
    UnstablePlant { magnitude: f64 },
    #[error("filter output magnitude {magnitude:.3e} below 1e-12 at readout for center frequency {omega}; excitation too weak")]
    FilterUnderflow { omega: f64, magnitude: f64 },
    #[error("series length {len} shorter than the filter length {taps}")]
    SeriesTooShort { len: usize, taps: usize },
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

/// Discrete-time SISO plant as numerator/denominator coefficients in
/// powers of z^{-1}; the denominator is monic.
#[derive(Debug, Clone)]
pub struct DiscretePlant {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    pub sample_rate: f64,
}

impl DiscretePlant {
    pub fn new(
        numerator: Vec<f64>,
        denominator: Vec<f64>,
        sample_rate: f64,
    ) -> Result<Self, SysidError> {
        if denominator.is_empty() || (denominator[0] - 1.0).abs() > 1e-12 {
            return Err(SysidError::BadParameters(
                "denominator must be monic (leading coefficient 1)".into(),
            ));
        }
        if sample_rate <= 0.0 {
            return Err(SysidError::BadParameters("sample rate must be positive".into()));
        }
        let plant = Self {
            numerator,
            denominator,
            sample_rate,
        };
        for root in plant.denominator_roots() {
            let magnitude = root.norm();
            if magnitude >= 1.0 {
                return Err(SysidError::UnstablePlant { magnitude });
            }
        }
        Ok(plant)
    }

    /// Frequency response at `z = e^{j omega}` (omega in radians/sample).
    pub fn frequency_response(&self, omega: f64) -> Complex64 {
        let zi = Complex64::from_polar(1.0, -omega);
        let eval = |coeffs: &[f64]| {
            let mut acc = Complex64::ZERO;
            for &c in coeffs.iter().rev() {
                acc = acc * zi + c;
            }
            acc
        };
        eval(&self.numerator) / eval(&self.denominator)
    }

    /// Roots of the denominator polynomial in z (poles), via Durand-Kerner
    /// iteration on the monic z-polynomial.
    pub fn denominator_roots(&self) -> Vec<Complex64> {
        // a_0 + a_1 z^{-1} + ... + a_d z^{-d} = z^{-d} (a_0 z^d + ... + a_d)
        let coeffs: Vec<f64> = self.denominator.clone();
        polynomial_roots(&coeffs)
    }
}

/// Roots of `c[0] x^d + c[1] x^{d-1} + ... + c[d]` (c[0] != 0) by
/// Durand-Kerner fixed-point iteration.
fn polynomial_roots(c: &[f64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let lead = c[0];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |x: Complex64| {
        let mut acc = Complex64::ZERO;
        for &v in &monic {
            acc = acc * x + v;
        }
        acc
    };
    // Distinct non-real starting points.
    let mut roots: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(0.7, 0.4 + 2.0 * PI * k as f64 / d as f64))
        .collect();
    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for i in 0..d {
            let mut denom = Complex64::ONE;
            for j in 0..d {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-13 {
            break;
        }
    }
    roots
}

/// Exact zero-order-hold discretization of the canonical second-order system
/// `omega0^2 / (s^2 + 2 xi omega0 s + omega0^2)` at sample rate `fs`.
///
/// The 2x2 matrix exponential is evaluated in closed form from the damped
/// eigenstructure, so the result carries unit DC gain to rounding.
pub fn zoh_second_order(omega0: f64, xi: f64, fs: f64) -> Result<DiscretePlant, SysidError> {
    if omega0 <= 0.0 {
        return Err(SysidError::BadParameters(format!("omega0 = {omega0} must be positive")));
    }
    if !(0.0 < xi && xi < 1.0) {
        return Err(SysidError::BadParameters(format!("damping xi = {xi} must lie in (0, 1)")));
    }
    if fs <= 2.0 * omega0 / (2.0 * PI) {
        return Err(SysidError::BadParameters(format!(
            "sample rate {fs} below the Nyquist rate for omega0 = {omega0}"
        )));
    }
    let t = 1.0 / fs;
    // State space: x' = A x + B u, y = [1 0] x with
    // A = [[0, 1], [-w0^2, -2 xi w0]], B = [0; w0^2].
    let w2 = omega0 * omega0;
    let a = [[0.0, 1.0], [-w2, -2.0 * xi * omega0]];
    // exp(At) = e^{lr t} (cos(wd t) I + sin(wd t)/wd (A - lr I)) for the
    // complex-conjugate eigenvalue pair lr +- j wd.
    let lr = -xi * omega0;
    let wd = omega0 * (1.0 - xi * xi).sqrt();
    let e = (lr * t).exp();
    let cos = (wd * t).cos();
    let sin = (wd * t).sin();
    let mut ad = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let eye = if i == j { 1.0 } else { 0.0 };
            ad[i][j] = e * (cos * eye + sin / wd * (a[i][j] - lr * eye));
        }
    }
    // Bd = A^{-1} (Ad - I) B; with B = [0; w2] and det A = w2:
    // A^{-1} = [[-2 xi w0 / w2, -1/w2], [1, 0]].
    let m = [[ad[0][0] - 1.0, ad[0][1]], [ad[1][0], ad[1][1] - 1.0]];
    let ainv = [[-2.0 * xi * omega0 / w2, -1.0 / w2], [1.0, 0.0]];
    let bd = [
        (ainv[0][0] * m[0][1] + ainv[0][1] * m[1][1]) * w2,
        (ainv[1][0] * m[0][1] + ainv[1][1] * m[1][1]) * w2,
    ];
    // g(z) = C (zI - Ad)^{-1} Bd with C = [1 0]:
    // numerator b1 z + (a12 b2 - a22 b1), denominator z^2 - tr z + det.
    let tr = ad[0][0] + ad[1][1];
    let det = ad[0][0] * ad[1][1] - ad[0][1] * ad[1][0];
    let b1 = bd[0];
    let b0 = ad[0][1] * bd[1] - ad[1][1] * bd[0];
    DiscretePlant::new(vec![0.0, b1, b0], vec![1.0, -tr, det], fs)
}

/// Direct-form difference equation with zero initial conditions.
pub fn simulate(plant: &DiscretePlant, input: &[f64]) -> Vec<f64> {
    let nb = plant.numerator.len();
    let na = plant.denominator.len();
    let mut output = vec![0.0; input.len()];
    for n in 0..input.len() {
        let mut acc = 0.0;
        for (k, &b) in plant.numerator.iter().enumerate().take(nb.min(n + 1)) {
            acc += b * input[n - k];
        }
        for (k, &a) in plant.denominator.iter().enumerate().take(na.min(n + 1)).skip(1) {
            acc -= a * output[n - k];
        }
        output[n] = acc;
    }
    output
}

/// Windowed DFT filter bank configuration. Filter i has impulse response
/// `h_i(n) = e^{j omega_i n} w(n)` for `n = 0..taps`, with the Gaussian
/// window `w(n) = exp(-((sigma_w (n - taps/2) / taps)^2) / 2)`.
#[derive(Debug, Clone)]
pub struct FilterBankConfig {
    pub centers: Vec<f64>,
    pub taps: usize,
    pub window_half_width: f64,
}

impl FilterBankConfig {
    /// 25 filters spaced linearly over [0.05 pi, 0.95 pi], 1000 taps,
    /// half-width 0.25.
    pub fn default_bank() -> Self {
        Self::spaced(25, 1000, 0.25)
    }

    /// `count` centers linearly spaced over [0.05 pi, 0.95 pi].
    pub fn spaced(count: usize, taps: usize, window_half_width: f64) -> Self {
        let lo = 0.05 * PI;
        let hi = 0.95 * PI;
        let centers = (0..count)
            .map(|i| {
                if count == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect();
        Self {
            centers,
            taps,
            window_half_width,
        }
    }

    fn window(&self, n: usize) -> f64 {
        let taps = self.taps as f64;
        let arg = self.window_half_width * (n as f64 - taps / 2.0) / taps;
        (-0.5 * arg * arg).exp()
    }
}

/// Filter-bank outputs of one filter at one readout sample:
/// `sum_k h(k) x(n - k)` evaluated at `n = readout`.
fn filter_output(
    cfg: &FilterBankConfig,
    omega: f64,
    series: &[f64],
    readout: usize,
) -> Complex64 {
    let mut acc = Complex64::ZERO;
    for k in 0..cfg.taps.min(readout + 1) {
        let h = Complex64::from_polar(cfg.window(k), omega * k as f64);
        acc += h * series[readout - k];
    }
    acc
}

/// Empirical transfer function estimate: for each filter, convolve both
/// traces and take the output ratio at sample `taps - 1`, giving an
/// observation of the response at `z_i = e^{j omega_i}`. `noise_variance`
/// is passed through to the resulting dataset.
pub fn etfe(
    cfg: &FilterBankConfig,
    input: &[f64],
    output: &[f64],
    noise_variance: f64,
) -> Result<Dataset, SysidError> {
    let len = input.len().min(output.len());
    if len < cfg.taps {
        return Err(SysidError::SeriesTooShort { len, taps: cfg.taps });
    }
    let readout = cfg.taps - 1;
    let mut zs = Vec::with_capacity(cfg.centers.len());
    let mut ys = Vec::with_capacity(cfg.centers.len());
    for &omega in &cfg.centers {
        let u = filter_output(cfg, omega, input, readout);
        if u.norm() < 1e-12 {
            return Err(SysidError::FilterUnderflow { omega, magnitude: u.norm() });
        }
        let y = filter_output(cfg, omega, output, readout);
        zs.push(Complex64::from_polar(1.0, omega));
        ys.push(y / u);
    }
    Ok(Dataset::new(zs, ys, noise_variance)?)
}

/// Plug-in observation-noise estimate: median over filters of the sample
/// variance of the running ratio over the last 100 readout samples.
pub fn estimate_ratio_noise(
    cfg: &FilterBankConfig,
    input: &[f64],
    output: &[f64],
) -> Result<f64, SysidError> {
    let len = input.len().min(output.len());
    if len < cfg.taps {
        return Err(SysidError::SeriesTooShort { len, taps: cfg.taps });
    }
    let window = 100.min(cfg.taps);
    let mut variances = Vec::with_capacity(cfg.centers.len());
    for &omega in &cfg.centers {
        let ratios: Vec<Complex64> = (cfg.taps - window..cfg.taps)
            .filter_map(|n| {
                let u = filter_output(cfg, omega, input, n);
                if u.norm() < 1e-12 {
                    None
                } else {
                    Some(filter_output(cfg, omega, output, n) / u)
                }
            })
            .collect();
        if ratios.len() < 2 {
            continue;
        }
        let mean: Complex64 = ratios.iter().sum::<Complex64>() / ratios.len() as f64;
        let var = ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>()
            / (ratios.len() - 1) as f64;
        variances.push(var);
    }
    if variances.is_empty() {
        return Ok(0.0);
    }
    variances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(variances[variances.len() / 2].max(1e-12))
}

/// Constants of the resonance experiment.
pub const EXPERIMENT_OMEGA0: f64 = 20.0 * PI;
pub const EXPERIMENT_DAMPING: f64 = 0.1;
pub const EXPERIMENT_SAMPLE_RATE: f64 = 100.0;

/// Output of [`run_experiment`]: the ETFE dataset, the true response on a
/// dense grid, and the plant itself.
pub struct ExperimentData {
    pub dataset: Dataset,
    pub truth_grid: Vec<(f64, Complex64)>,
    pub plant: DiscretePlant,
    pub estimated_noise: f64,
}

/// Runs the full identification pipeline with the experiment constants:
/// second-order plant (omega0 = 20 pi rad/s, damping 0.1) discretized at
/// 100 Hz, 1000 samples of white-noise input with variance 1/fs, both traces
/// corrupted by white measurement noise of variance 1e-4/fs, and a
/// 25-filter 1000-tap bank. When `noise_variance` is `None` the dataset
/// carries the plug-in ratio-noise estimate.
pub fn run_experiment(
    seed: u64,
    noise_variance: Option<f64>,
) -> Result<ExperimentData, SysidError> {
    let fs = EXPERIMENT_SAMPLE_RATE;
    let plant = zoh_second_order(EXPERIMENT_OMEGA0, EXPERIMENT_DAMPING, fs)?;
    let cfg = FilterBankConfig::default_bank();
    let samples = cfg.taps;
    let sigma_u = (1.0 / fs).sqrt();
    let sigma_e = (1e-4 / fs).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input: Vec<f64> = (0..samples)
        .map(|_| sigma_u * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let output = simulate(&plant, &input);
    let observed_input: Vec<f64> = input
        .iter()
        .map(|u| u + sigma_e * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let observed_output: Vec<f64> = output
        .iter()
        .map(|y| y + sigma_e * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let estimated_noise = estimate_ratio_noise(&cfg, &observed_input, &observed_output)?;
    let dataset_noise = noise_variance.unwrap_or(estimated_noise);
    let dataset = etfe(&cfg, &observed_input, &observed_output, dataset_noise)?;

    let truth_grid = (0..200)
        .map(|i| {
            let omega = (i as f64 + 0.5) * PI / 200.0;
            (omega, plant.frequency_response(omega))
        })
        .collect();

    Ok(ExperimentData {
        dataset,
        truth_grid,
        plant,
        estimated_noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zoh_has_unit_dc_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let omega0 = rng.gen_range(1.0..100.0);
            let xi = rng.gen_range(0.05..0.95);
            let fs = rng.gen_range(2.5..20.0) * omega0 / (2.0 * PI) * 2.0;
            let plant = zoh_second_order(omega0, xi, fs).unwrap();
            let dc = plant.frequency_response(0.0);
            assert!(
                (dc - Complex64::ONE).norm() < 1e-10,
                "dc gain {dc} for omega0={omega0}, xi={xi}, fs={fs}"
            );
        }
    }

    #[test]
    fn zoh_pole_magnitudes_match_damping() {
        let plant = zoh_second_order(EXPERIMENT_OMEGA0, EXPERIMENT_DAMPING, 100.0).unwrap();
        let expected = (-EXPERIMENT_DAMPING * EXPERIMENT_OMEGA0 / 100.0).exp();
        for root in plant.denominator_roots() {
            assert!(
                (root.norm() - expected).abs() < 1e-10,
                "pole magnitude {} vs {expected}",
                root.norm()
            );
        }
        assert!((expected - 0.9391).abs() < 1e-4);
    }

    #[test]
    fn zoh_peak_gain_matches_continuous_resonance() {
        let plant = zoh_second_order(EXPERIMENT_OMEGA0, EXPERIMENT_DAMPING, 100.0).unwrap();
        let peak = (0..4000)
            .map(|i| plant.frequency_response(PI * i as f64 / 4000.0).norm())
            .fold(0.0, f64::max);
        let xi = EXPERIMENT_DAMPING;
        let expected = 1.0 / (2.0 * xi * (1.0 - xi * xi).sqrt());
        assert!(
            (peak - expected).abs() / expected < 0.02,
            "peak {peak} vs {expected}"
        );
    }

    #[test]
    fn zoh_rejects_bad_parameters() {
        assert!(zoh_second_order(-1.0, 0.1, 100.0).is_err());
        assert!(zoh_second_order(10.0, 1.2, 100.0).is_err());
        assert!(zoh_second_order(20.0 * PI, 0.1, 10.0).is_err());
    }

    #[test]
    fn simulate_identity_and_step() {
        let identity = DiscretePlant::new(vec![1.0], vec![1.0], 1.0).unwrap();
        let mut impulse = vec![0.0; 8];
        impulse[0] = 1.0;
        assert_eq!(simulate(&identity, &impulse), impulse);

        let plant = zoh_second_order(5.0, 0.4, 20.0).unwrap();
        let step = vec![1.0; 2000];
        let out = simulate(&plant, &step);
        let dc = plant.frequency_response(0.0).re;
        assert!((out[1999] - dc).abs() < 1e-6, "final value {} vs {dc}", out[1999]);
    }

    #[test]
    fn white_noise_output_peaks_near_resonance() {
        let plant = zoh_second_order(EXPERIMENT_OMEGA0, EXPERIMENT_DAMPING, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let input: Vec<f64> = (0..20_000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let output = simulate(&plant, &input);
        // Crude periodogram over a coarse grid.
        let mut best = (0.0, 0.0);
        for i in 1..100 {
            let omega = PI * i as f64 / 100.0;
            let mut acc = Complex64::ZERO;
            for (n, &y) in output.iter().enumerate() {
                acc += y * Complex64::from_polar(1.0, -omega * n as f64);
            }
            let p = acc.norm_sqr();
            if p > best.1 {
                best = (omega, p);
            }
        }
        let resonance = EXPERIMENT_OMEGA0 / 100.0; // 0.2 pi rad/sample
        assert!(
            (best.0 - resonance).abs() < 0.1,
            "periodogram peak at {} vs resonance {resonance}",
            best.0
        );
    }

    #[test]
    fn etfe_constant_system_recovers_constant() {
        let cfg = FilterBankConfig::spaced(8, 200, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let input: Vec<f64> = (0..400).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let output: Vec<f64> = input.iter().map(|u| 3.5 * u).collect();
        let data = etfe(&cfg, &input, &output, 0.0).unwrap();
        for y in data.observations() {
            assert!((y - Complex64::new(3.5, 0.0)).norm() < 1e-6, "obs {y}");
        }
    }

    #[test]
    fn etfe_identity_ratio() {
        let cfg = FilterBankConfig::spaced(5, 100, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let series: Vec<f64> = (0..150).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let data = etfe(&cfg, &series, &series, 0.0).unwrap();
        for y in data.observations() {
            assert!((y - Complex64::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn etfe_is_linear_in_the_output_path() {
        let cfg = FilterBankConfig::spaced(6, 128, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let input: Vec<f64> = (0..256).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y1: Vec<f64> = (0..256).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y2: Vec<f64> = (0..256).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (a, b) = (1.7, -0.6);
        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + b * q).collect();
        let obs1 = etfe(&cfg, &input, &y1, 0.0).unwrap();
        let obs2 = etfe(&cfg, &input, &y2, 0.0).unwrap();
        let obs = etfe(&cfg, &input, &combo, 0.0).unwrap();
        for i in 0..cfg.centers.len() {
            let expect = a * obs1.observations()[i] + b * obs2.observations()[i];
            assert!((obs.observations()[i] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn etfe_rejects_short_series() {
        let cfg = FilterBankConfig::spaced(4, 100, 0.25);
        let series = vec![1.0; 50];
        assert!(matches!(
            etfe(&cfg, &series, &series, 0.0),
            Err(SysidError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn etfe_flags_missing_excitation() {
        let cfg = FilterBankConfig::spaced(3, 64, 0.25);
        let input = vec![0.0; 128];
        let output = vec![0.0; 128];
        assert!(matches!(
            etfe(&cfg, &input, &output, 0.0),
            Err(SysidError::FilterUnderflow { .. })
        ));
    }

    #[test]
    fn experiment_is_deterministic_with_25_circle_points() {
        let a = run_experiment(7, None).unwrap();
        let b = run_experiment(7, None).unwrap();
        assert_eq!(a.dataset.len(), 25);
        assert_eq!(a.dataset.observations(), b.dataset.observations());
        assert!((a.estimated_noise - b.estimated_noise).abs() == 0.0);
        for z in a.dataset.inputs() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        let c = run_experiment(8, None).unwrap();
        assert_ne!(a.dataset.observations(), c.dataset.observations());
    }

    #[test]
    fn experiment_peak_observation_tracks_truth() {
        // The observation nearest the resonance should be within 25% of the
        // true response magnitude there (finite-window bias allowance).
        let data = run_experiment(3, None).unwrap();
        let resonance = EXPERIMENT_OMEGA0 / EXPERIMENT_SAMPLE_RATE;
        let (idx, _) = data
            .dataset
            .inputs()
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = (a.arg() - resonance).abs();
                let db = (b.arg() - resonance).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let z = data.dataset.inputs()[idx];
        let obs = data.dataset.observations()[idx].norm();
        let truth = data.plant.frequency_response(z.arg()).norm();
        assert!(
            (obs - truth).abs() / truth < 0.25,
            "observation {obs} vs truth {truth}"
        );
    }

    #[test]
    fn etfe_error_shrinks_with_longer_filters() {
        // Noise-free ladder: the median (over seeds and filters) estimation
        // error decreases as taps grow 500 -> 1000 -> 4000.
        let plant = zoh_second_order(EXPERIMENT_OMEGA0, EXPERIMENT_DAMPING, 100.0).unwrap();
        let taps_ladder = [500usize, 1000, 4000];
        let mut medians = Vec::new();
        for &taps in &taps_ladder {
            let cfg = FilterBankConfig::spaced(25, taps, 0.25);
            let mut errors = Vec::new();
            for seed in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let input: Vec<f64> = (0..taps).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
                let output = simulate(&plant, &input);
                let data = etfe(&cfg, &input, &output, 0.0).unwrap();
                for (z, y) in data.inputs().iter().zip(data.observations()) {
                    let truth = plant.frequency_response(z.arg());
                    errors.push((y - truth).norm());
                }
            }
            errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(errors[errors.len() / 2]);
        }
        assert!(
            medians[0] > medians[1] && medians[1] > medians[2],
            "medians not decreasing: {medians:?}"
        );
    }
}
