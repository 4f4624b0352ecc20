//! Realization sampling for H-infinity Gaussian process priors.
//!
//! Stationary-series processes are sampled exactly from their coefficient
//! expansion `f(z) = sum h_n z^{-n}` with `h_n = a_n w_n`, `w_n` i.i.d.
//! standard normal; cozine processes from their two amplitude draws. Each
//! realization consumes an independent, deterministically derived RNG stream,
//! so results do not depend on thread scheduling.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{KernelError, KernelSpec, SequenceSpec};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("gain below 1e-14 at grid index {index} (omega = {omega}); derivative undefined")]
    ZeroGain { index: usize, omega: f64 },
    #[error("realization carries no series coefficients; gain derivative needs the series form")]
    MissingCoefficients,
    #[error("frequency grid must be nonempty, strictly increasing, within [-pi, pi): {reason}")]
    BadGrid { reason: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Strictly increasing frequencies in `[-pi, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    values: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(values: Vec<f64>) -> Result<Self, SamplingError> {
        if values.is_empty() {
            return Err(SamplingError::BadGrid {
                reason: "empty".into(),
            });
        }
        for w in values.windows(2) {
            if w[1] <= w[0] {
                return Err(SamplingError::BadGrid {
                    reason: format!("not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
        }
        let lo = values[0];
        let hi = *values.last().unwrap();
        if lo < -PI || hi >= PI {
            return Err(SamplingError::BadGrid {
                reason: format!("range [{lo}, {hi}] outside [-pi, pi)"),
            });
        }
        Ok(Self { values })
    }

    /// `m` uniform points covering `[-pi, pi)`.
    pub fn uniform_full(m: usize) -> Self {
        let values = (0..m).map(|i| -PI + 2.0 * PI * i as f64 / m as f64).collect();
        Self { values }
    }

    /// `m` uniform points covering `[0, pi)`, the reduced range for
    /// conjugate-symmetric processes whose gain is even in frequency.
    pub fn uniform_half(m: usize) -> Self {
        let values = (0..m).map(|i| PI * i as f64 / m as f64).collect();
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A sampled transfer function on a frequency grid.
#[derive(Debug, Clone)]
pub struct Realization {
    pub grid: Arc<FrequencyGrid>,
    pub values: Vec<Complex64>,
    /// Real series coefficients `h_n`, present for series-form models.
    pub coefficients: Option<Vec<f64>>,
    pub seed: u64,
    /// Stream index within the batch that produced this realization.
    pub index: u64,
}

/// Gain and its angular derivative at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    pub gain: f64,
    pub slope: f64,
}

/// Per-realization RNG: one ChaCha stream per (seed, index) pair.
pub(crate) fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the series coefficients `h_n = a_n w_n` for one realization.
pub(crate) fn draw_series_coefficients(a2: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    a2.iter()
        .map(|&c| {
            let w: f64 = rng.sample(StandardNormal);
            c.sqrt() * w
        })
        .collect()
}

/// Evaluates `sum h_n e^{-j n omega}` by Horner recursion.
pub fn evaluate_series(coefficients: &[f64], omega: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, -omega);
    let mut acc = Complex64::ZERO;
    for &h in coefficients.iter().rev() {
        acc = acc * e + h;
    }
    acc
}

/// Evaluates the series derivative `sum -j n h_n e^{-j n omega}`.
fn evaluate_series_derivative(coefficients: &[f64], omega: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, -omega);
    let mut acc = Complex64::ZERO;
    for (n, &h) in coefficients.iter().enumerate().rev() {
        acc = acc * e + Complex64::new(0.0, -(n as f64)) * h;
    }
    acc
}

/// Draws `count` realizations of the stationary-series process on `grid`.
pub fn sample_stationary(
    spec: &SequenceSpec,
    grid: &FrequencyGrid,
    seed: u64,
    count: usize,
) -> Vec<Realization> {
    let a2 = spec.coefficients();
    let grid = Arc::new(grid.clone());
    (0..count as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(seed, index);
            let h = draw_series_coefficients(&a2, &mut rng);
            let values = grid.values().iter().map(|&w| evaluate_series(&h, w)).collect();
            Realization {
                grid: grid.clone(),
                values,
                coefficients: Some(h),
                seed,
                index,
            }
        })
        .collect()
}

/// Deterministic cozine realization from given amplitude draws:
/// `f(z) = (x - a (x cos w0 - y sin w0) z^{-1}) / (1 - 2 a cos(w0) z^{-1} + a^2 z^{-2})`.
pub fn cozine_realization_from_draws(
    a: f64,
    omega0: f64,
    x: f64,
    y: f64,
    grid: &FrequencyGrid,
    seed: u64,
    index: u64,
) -> Realization {
    let c = omega0.cos();
    let s = omega0.sin();
    let num1 = a * (x * c - y * s);
    let values = grid
        .values()
        .iter()
        .map(|&w| {
            let zi = Complex64::from_polar(1.0, -w); // z^{-1} on the circle
            let num = x - num1 * zi;
            let den = Complex64::ONE - 2.0 * a * c * zi + a * a * zi * zi;
            num / den
        })
        .collect();
    Realization {
        grid: Arc::new(grid.clone()),
        values,
        coefficients: None,
        seed,
        index,
    }
}

/// Draws `count` cozine realizations.
pub fn sample_cozine(
    a: f64,
    omega0: f64,
    seed: u64,
    count: usize,
    grid: &FrequencyGrid,
) -> Vec<Realization> {
    (0..count as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(seed, index);
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            cozine_realization_from_draws(a, omega0, x, y, grid, seed, index)
        })
        .collect()
}

/// Gain `|f|` and its analytic angular derivative at every grid point,
/// computed from the series form: `d|f|/dOmega = Re(conj(f) f') / |f|`.
pub fn gain_and_derivative(r: &Realization) -> Result<Vec<GainPoint>, SamplingError> {
    let coeffs = r
        .coefficients
        .as_deref()
        .ok_or(SamplingError::MissingCoefficients)?;
    r.grid
        .values()
        .iter()
        .enumerate()
        .map(|(index, &omega)| {
            let f = r.values[index];
            let gain = f.norm();
            if gain < 1e-14 {
                return Err(SamplingError::ZeroGain { index, omega });
            }
            let fp = evaluate_series_derivative(coeffs, omega);
            Ok(GainPoint {
                gain,
                slope: (f.conj() * fp).re / gain,
            })
        })
        .collect()
}

/// Draws realizations of any serializable kernel specification. Every model
/// draws from a single per-realization stream, parts in declaration order,
/// so results are reproducible for sums as well. The coefficient field is
/// retained when every component has a series form.
pub fn sample_spec(
    spec: &KernelSpec,
    grid: &FrequencyGrid,
    seed: u64,
    count: usize,
) -> Result<Vec<Realization>, SamplingError> {
    // Validate eagerly so errors surface before the parallel loop.
    spec.build()?;
    let grid = Arc::new(grid.clone());
    (0..count as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(seed, index);
            let (values, coefficients) = draw_spec_value(spec, &grid, &mut rng, 1.0)?;
            Ok(Realization {
                grid: grid.clone(),
                values,
                coefficients,
                seed,
                index,
            })
        })
        .collect()
}

fn draw_spec_value(
    spec: &KernelSpec,
    grid: &FrequencyGrid,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> Result<(Vec<Complex64>, Option<Vec<f64>>), SamplingError> {
    match spec {
        KernelSpec::Geometric { alpha } => {
            let seq = SequenceSpec::geometric(*alpha)?;
            let mut h = draw_series_coefficients(&seq.coefficients(), rng);
            h.iter_mut().for_each(|c| *c *= amplitude);
            let values = grid.values().iter().map(|&w| evaluate_series(&h, w)).collect();
            Ok((values, Some(h)))
        }
        KernelSpec::Stationary { sequence } => {
            let mut h = draw_series_coefficients(&sequence.coefficients(), rng);
            h.iter_mut().for_each(|c| *c *= amplitude);
            let values = grid.values().iter().map(|&w| evaluate_series(&h, w)).collect();
            Ok((values, Some(h)))
        }
        KernelSpec::Cozine { a, omega0 } => {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let r = cozine_realization_from_draws(*a, *omega0, x, y, grid, 0, 0);
            let values = r.values.into_iter().map(|v| v * amplitude).collect();
            Ok((values, None))
        }
        KernelSpec::Sum { parts } => {
            let mut values = vec![Complex64::ZERO; grid.len()];
            let mut coeffs: Option<Vec<f64>> = Some(Vec::new());
            for part in parts {
                let (v, h) = draw_spec_value(&part.kernel, grid, rng, amplitude * part.weight.sqrt())?;
                for (acc, x) in values.iter_mut().zip(&v) {
                    *acc += x;
                }
                match (&mut coeffs, h) {
                    (Some(total), Some(part_h)) => {
                        if total.len() < part_h.len() {
                            total.resize(part_h.len(), 0.0);
                        }
                        for (t, c) in total.iter_mut().zip(&part_h) {
                            *t += c;
                        }
                    }
                    _ => coeffs = None,
                }
            }
            Ok((values, coeffs))
        }
    }
}

// ---------------------------------------------------------------------------
// Fast evaluation on canonical uniform grids
// ---------------------------------------------------------------------------

/// In-place forward DFT (`X[k] = sum x[n] e^{-j 2 pi n k / N}`), radix-2.
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * PI / len as f64;
        let wlen = Complex64::from_polar(1.0, ang);
        let mut i = 0;
        while i < n {
            let mut w = Complex64::ONE;
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Gains `|f(e^{j pi i / m})|` for `i = 0..m` via one size-`2m` FFT.
/// `m` must be a power of two and at least the coefficient count.
pub(crate) fn gains_on_half_grid(coefficients: &[f64], m: usize) -> Vec<f64> {
    let n = 2 * m;
    assert!(n.is_power_of_two() && coefficients.len() <= n);
    let mut buf = vec![Complex64::ZERO; n];
    for (i, &h) in coefficients.iter().enumerate() {
        buf[i] = Complex64::new(h, 0.0);
    }
    fft_in_place(&mut buf);
    buf[..m].iter().map(|z| z.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{cozine_kernel, geometric_kernel, ComplexKernel};

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 0.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, PI]).is_err());
        assert!(FrequencyGrid::new(vec![-PI, 0.0, 1.0]).is_ok());
        assert_eq!(FrequencyGrid::uniform_full(8).len(), 8);
        assert!(FrequencyGrid::uniform_half(16)
            .values()
            .iter()
            .all(|&w| (0.0..PI).contains(&w)));
    }

    #[test]
    fn constant_spec_gives_constant_real_realizations() {
        let spec = SequenceSpec::explicit(vec![1.0]).unwrap();
        let grid = FrequencyGrid::uniform_full(32);
        for r in sample_stationary(&spec, &grid, 42, 4) {
            let first = r.values[0];
            assert!(first.im == 0.0);
            assert!(r.values.iter().all(|v| *v == first));
        }
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let spec = SequenceSpec::geometric(0.5).unwrap();
        let grid = FrequencyGrid::uniform_full(64);
        let a = sample_stationary(&spec, &grid, 7, 5);
        let b = sample_stationary(&spec, &grid, 7, 5);
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.values, rb.values);
            assert_eq!(ra.coefficients, rb.coefficients);
        }
        let c = sample_stationary(&spec, &grid, 8, 1);
        assert_ne!(a[0].values, c[0].values);
    }

    #[test]
    fn conjugate_closed_grid_symmetry_is_exact() {
        let spec = SequenceSpec::geometric(0.5).unwrap();
        let grid = FrequencyGrid::new(vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]).unwrap();
        for r in sample_stationary(&spec, &grid, 3, 8) {
            let v = &r.values;
            assert_eq!(v[0], v[5].conj());
            assert_eq!(v[1], v[4].conj());
            assert_eq!(v[2], v[3].conj());
        }
        // Cozine realizations satisfy the same symmetry.
        for r in sample_cozine(0.9, PI / 2.0, 3, 8, &grid) {
            let v = &r.values;
            for (i, j) in [(0, 5), (1, 4), (2, 3)] {
                assert!((v[i] - v[j].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn empirical_covariance_matches_geometric_closed_form() {
        let spec = SequenceSpec::geometric(0.5).unwrap();
        let grid = FrequencyGrid::new(vec![0.0]).unwrap();
        let n = 50_000;
        let samples = sample_stationary(&spec, &grid, 11, n);
        let vals: Vec<f64> = samples.iter().map(|r| r.values[0].norm_sqr()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let truth = geometric_kernel(0.5)
            .unwrap()
            .hermitian(Complex64::ONE, Complex64::ONE)
            .re;
        assert!(
            (mean - truth).abs() <= 3.0 * se,
            "E|f(1)|^2 = {mean} vs {truth} (se {se})"
        );
    }

    #[test]
    fn cozine_forced_draw_value() {
        let grid = FrequencyGrid::new(vec![0.0]).unwrap();
        let r = cozine_realization_from_draws(0.9, PI / 2.0, 1.0, 0.0, &grid, 0, 0);
        assert!((r.values[0].re - 1.0 / 1.81).abs() < 1e-12);
        assert!(r.values[0].im.abs() < 1e-15);
    }

    #[test]
    fn cozine_empirical_covariance_matches_kernel() {
        let grid = FrequencyGrid::new(vec![0.0]).unwrap();
        let n = 50_000;
        let samples = sample_cozine(0.9, PI / 2.0, 13, n, &grid);
        let vals: Vec<f64> = samples.iter().map(|r| r.values[0].norm_sqr()).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let truth = cozine_kernel(0.9, PI / 2.0)
            .unwrap()
            .hermitian(Complex64::ONE, Complex64::ONE)
            .re;
        assert!(
            (mean - truth).abs() <= 3.0 * se,
            "cozine E|f(1)|^2 = {mean} vs {truth} (se {se})"
        );
    }

    #[test]
    fn gain_derivative_trivial_cases() {
        let grid = FrequencyGrid::uniform_full(16);
        // Constant series.
        let r = Realization {
            grid: Arc::new(grid.clone()),
            values: grid.values().iter().map(|&w| evaluate_series(&[2.5], w)).collect(),
            coefficients: Some(vec![2.5]),
            seed: 0,
            index: 0,
        };
        for p in gain_and_derivative(&r).unwrap() {
            assert!((p.gain - 2.5).abs() < 1e-15);
            assert!(p.slope.abs() < 1e-15);
        }
        // Single h_1 coefficient: constant gain |h_1|.
        let h = vec![0.0, -1.7];
        let r = Realization {
            grid: Arc::new(grid.clone()),
            values: grid.values().iter().map(|&w| evaluate_series(&h, w)).collect(),
            coefficients: Some(h),
            seed: 0,
            index: 0,
        };
        for p in gain_and_derivative(&r).unwrap() {
            assert!((p.gain - 1.7).abs() < 1e-14);
            assert!(p.slope.abs() < 1e-13);
        }
    }

    #[test]
    fn gain_derivative_matches_finite_difference() {
        let spec = SequenceSpec::geometric(0.5).unwrap();
        let grid = FrequencyGrid::new((1..40).map(|i| i as f64 * 0.07).collect()).unwrap();
        let r = &sample_stationary(&spec, &grid, 19, 1)[0];
        let coeffs = r.coefficients.as_ref().unwrap();
        let points = gain_and_derivative(r).unwrap();
        for (i, &omega) in grid.values().iter().enumerate() {
            let h = 1e-6;
            let gp = evaluate_series(coeffs, omega + h).norm();
            let gm = evaluate_series(coeffs, omega - h).norm();
            let fd = (gp - gm) / (2.0 * h);
            assert!(
                (points[i].slope - fd).abs() < 1e-6,
                "at {omega}: {} vs {fd}",
                points[i].slope
            );
        }
    }

    #[test]
    fn gain_derivative_errors() {
        let grid = FrequencyGrid::new(vec![0.0]).unwrap();
        let r = cozine_realization_from_draws(0.5, 1.0, 1.0, 0.0, &grid, 0, 0);
        assert!(matches!(
            gain_and_derivative(&r),
            Err(SamplingError::MissingCoefficients)
        ));
        let zero = Realization {
            grid: Arc::new(grid),
            values: vec![Complex64::ZERO],
            coefficients: Some(vec![0.0]),
            seed: 0,
            index: 0,
        };
        assert!(matches!(
            gain_and_derivative(&zero),
            Err(SamplingError::ZeroGain { .. })
        ));
    }

    #[test]
    fn sampled_gains_are_bounded() {
        let spec = SequenceSpec::geometric(0.5).unwrap();
        let grid = FrequencyGrid::uniform_full(256);
        for r in sample_stationary(&spec, &grid, 21, 50) {
            assert!(r.values.iter().all(|v| v.norm().is_finite()));
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.31).sin(), (i as f64 * 0.17).cos()))
            .collect();
        let mut fast = x.clone();
        fft_in_place(&mut fast);
        for (k, value) in fast.iter().enumerate() {
            let direct: Complex64 = (0..64)
                .map(|n| x[n] * Complex64::from_polar(1.0, -2.0 * PI * (n * k) as f64 / 64.0))
                .sum();
            assert!((value - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn half_grid_gains_match_direct_evaluation() {
        let spec = SequenceSpec::geometric(0.5).unwrap();
        let mut rng = stream_rng(5, 0);
        let h = draw_series_coefficients(&spec.coefficients(), &mut rng);
        let m = 256;
        let gains = gains_on_half_grid(&h, m);
        for i in (0..m).step_by(17) {
            let omega = PI * i as f64 / m as f64;
            let direct = evaluate_series(&h, omega).norm();
            assert!((gains[i] - direct).abs() < 1e-9);
        }
    }
}
