//! Complex-valued Gaussian process regression for frequency-domain
//! identification.
//!
//! Observations are noisy point evaluations `y_i = f(z_i) + e_i` with
//! circular complex noise of variance `sigma_n^2` (so the complementary
//! covariance of the noise vanishes and the noise enters only the Hermitian
//! Gramian diagonal). Two posterior predictors are provided:
//!
//! * the strictly linear estimator `K_xy K_yy^{-1} y`, and
//! * the widely linear estimator, which also uses `conj(y)` through the
//!   Schur complement `P = K_yy - Kt_yy (conj K_yy)^{-1} conj(Kt_yy)`.
//!
//! Hyperparameters are tuned by maximizing the log marginal likelihood with
//! a multi-restart Nelder-Mead search in log/logit coordinates.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels::{
    complementary_gramian, hermitian_gramian, ComplexKernel, KernelError, KernelPart, KernelSpec,
    Transform,
};
use crate::linalg::{cholesky, CholeskyFactor, HermitianMatrix, LinalgError};
use crate::sampling::stream_rng;

/// Unit-circle slack for observation inputs.
const RADIUS_TOL: f64 = 1e-12;

/// Relative base jitter applied when factoring Gramians.
const BASE_JITTER_REL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("input and observation lengths differ: {inputs} vs {observations}")]
    LengthMismatch { inputs: usize, observations: usize },
    #[error("input z_{index} = {z} lies inside the unit circle")]
    InputInsideDisk { index: usize, z: Complex64 },
    #[error("noise variance must be nonnegative, got {0}")]
    NegativeNoise(f64),
    #[error("duplicated inputs with zero noise variance make the Gramian exactly singular (indices {i}, {j})")]
    SingularData { i: usize, j: usize },
    #[error("operation needs a nonempty dataset")]
    EmptyDataset,
    #[error("Schur complement stayed singular through jitter escalation; the data is in the near-maximally-improper regime")]
    SchurSingular(#[source] LinalgError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Frequency-domain training data.
#[derive(Debug, Clone)]
pub struct Dataset {
    inputs: Vec<Complex64>,
    observations: Vec<Complex64>,
    noise_variance: f64,
}

impl Dataset {
    pub fn new(
        inputs: Vec<Complex64>,
        observations: Vec<Complex64>,
        noise_variance: f64,
    ) -> Result<Self, RegressionError> {
        if inputs.len() != observations.len() {
            return Err(RegressionError::LengthMismatch {
                inputs: inputs.len(),
                observations: observations.len(),
            });
        }
        if noise_variance < 0.0 {
            return Err(RegressionError::NegativeNoise(noise_variance));
        }
        for (index, z) in inputs.iter().enumerate() {
            if z.norm() < 1.0 - RADIUS_TOL {
                return Err(RegressionError::InputInsideDisk { index, z: *z });
            }
        }
        if noise_variance == 0.0 {
            for i in 0..inputs.len() {
                for j in (i + 1)..inputs.len() {
                    if inputs[i] == inputs[j] {
                        return Err(RegressionError::SingularData { i, j });
                    }
                }
            }
        }
        Ok(Self {
            inputs,
            observations,
            noise_variance,
        })
    }

    pub fn empty(noise_variance: f64) -> Self {
        Self {
            inputs: Vec::new(),
            observations: Vec::new(),
            noise_variance,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Complex64] {
        &self.inputs
    }

    pub fn observations(&self) -> &[Complex64] {
        &self.observations
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Parses the dataset CSV format: header `re_z,im_z,re_y,im_y`, one row
    /// per observation. The noise variance is supplied separately.
    pub fn from_csv(text: &str, noise_variance: f64) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty dataset file")?;
        let expected = "re_z,im_z,re_y,im_y";
        if header.trim() != expected {
            return Err(format!("expected header '{expected}', got '{header}'"));
        }
        let mut inputs = Vec::new();
        let mut observations = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 4 {
                return Err(format!("line {}: expected 4 fields", lineno + 2));
            }
            let parse = |s: &str| -> Result<f64, String> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: {e}", lineno + 2))
            };
            inputs.push(Complex64::new(parse(fields[0])?, parse(fields[1])?));
            observations.push(Complex64::new(parse(fields[2])?, parse(fields[3])?));
        }
        Dataset::new(inputs, observations, noise_variance).map_err(|e| e.to_string())
    }

    /// Serializes to the dataset CSV format with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re_z,im_z,re_y,im_y\n");
        for (z, y) in self.inputs.iter().zip(&self.observations) {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                z.re, z.im, y.re, y.im
            ));
        }
        out
    }
}

/// Which estimator produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Strict,
    Wide,
}

/// Posterior law of the transfer function at one query point.
#[derive(Debug, Clone)]
pub struct PosteriorPrediction {
    pub point: Complex64,
    pub mean: Complex64,
    /// Hermitian predictive variance (clamped at zero).
    pub hermitian_variance: f64,
    /// Complementary predictive variance; `|value| <= hermitian_variance`
    /// up to roundoff for any valid complex Gaussian law.
    pub complementary_variance: Complex64,
    pub estimator_kind: EstimatorKind,
    /// Jitter added to the Schur complement (wide estimator only).
    pub schur_jitter: Option<f64>,
    /// Diagnostic `||P||_F / ||K_yy||_F` (wide estimator only); small values
    /// signal the near-maximally-improper regime.
    pub improperness_ratio: Option<f64>,
}

/// Training data bound to a kernel, with the Hermitian Gramian factored once.
pub struct RegressionModel {
    kernel: Arc<dyn ComplexKernel>,
    data: Dataset,
    /// Centered observations (prior mean subtracted).
    centered: Vec<Complex64>,
    factor: Option<CholeskyFactor>,
    /// K_yy^{-1} (y - m).
    alpha: Vec<Complex64>,
    /// Complementary Gramian of the observations (no noise term).
    kt_yy: Vec<Complex64>,
    noise_free_prediction: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl RegressionModel {
    pub fn new(kernel: Arc<dyn ComplexKernel>, data: Dataset) -> Result<Self, RegressionError> {
        let n = data.len();
        let centered: Vec<Complex64> = data
            .observations
            .iter()
            .zip(&data.inputs)
            .map(|(y, z)| y - kernel.mean(*z))
            .collect();
        let (factor, alpha) = if n == 0 {
            (None, Vec::new())
        } else {
            let gram = noisy_gramian(kernel.as_ref(), &data.inputs, data.noise_variance);
            let base = BASE_JITTER_REL * gram.trace_real().max(0.0) / n as f64;
            let factor = cholesky(&gram, base)?;
            let alpha = factor.solve(&centered)?;
            (Some(factor), alpha)
        };
        let kt_yy = complementary_gramian(kernel.as_ref(), &data.inputs);
        Ok(Self {
            kernel,
            data,
            centered,
            factor,
            alpha,
            kt_yy,
            noise_free_prediction: false,
        })
    }

    /// Predict the latent function rather than a noisy observation
    /// (subtracts `sigma_n^2` from the leading variance term).
    pub fn with_noise_free_prediction(mut self, on: bool) -> Self {
        self.noise_free_prediction = on;
        self
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn kernel(&self) -> &Arc<dyn ComplexKernel> {
        &self.kernel
    }

    /// Jitter used when factoring the noisy Hermitian Gramian.
    pub fn gramian_jitter(&self) -> f64 {
        self.factor.as_ref().map_or(0.0, |f| f.jitter_used)
    }

    fn kxx(&self, z: Complex64) -> f64 {
        let noise = if self.noise_free_prediction {
            0.0
        } else {
            self.data.noise_variance
        };
        self.kernel.hermitian(z, z).re + noise
    }

    fn cross_rows(&self, z: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
        let kx: Vec<Complex64> = self
            .data
            .inputs
            .iter()
            .map(|zi| self.kernel.hermitian(z, *zi))
            .collect();
        let ktx: Vec<Complex64> = self
            .data
            .inputs
            .iter()
            .map(|zi| self.kernel.complementary(z, *zi))
            .collect();
        (kx, ktx)
    }

    /// Minimum mean-square strictly linear estimate at `z`.
    ///
    /// Mean `m(z) + K_xy K_yy^{-1} (y - m)`, Hermitian variance
    /// `K_xx - K_xy K_yy^{-1} K_xy^H`. The complementary variance reported
    /// here is the second moment `E[(f(z) - fhat(z))^2]` of the strict
    /// residual, a diagnostic extension beyond the estimator itself.
    pub fn predict_strict(&self, z: Complex64) -> Result<PosteriorPrediction, RegressionError> {
        let prior_mean = self.kernel.mean(z);
        let kxx = self.kxx(z);
        let ktxx = self.kernel.complementary(z, z);
        if self.data.is_empty() {
            return Ok(PosteriorPrediction {
                point: z,
                mean: prior_mean,
                hermitian_variance: kxx.max(0.0),
                complementary_variance: ktxx,
                estimator_kind: EstimatorKind::Strict,
                schur_jitter: None,
                improperness_ratio: None,
            });
        }
        let factor = self.factor.as_ref().expect("factor exists for nonempty data");
        let (kx, ktx) = self.cross_rows(z);
        let mean = prior_mean + dot(&kx, &self.alpha);

        let kx_conj: Vec<Complex64> = kx.iter().map(|v| v.conj()).collect();
        let u = factor.solve(&kx_conj)?;
        let variance = (kxx - dot(&kx, &u).re).max(0.0);

        // E[(f - fhat)^2] = Kt_xx - 2 A E[y f] + A Kt_yy A^T with A = kx K^{-1}.
        let t1 = dot(&kx, &factor.solve(&ktx)?);
        let n = self.data.len();
        let w: Vec<Complex64> = u.iter().map(|v| v.conj()).collect();
        let ktw: Vec<Complex64> = (0..n)
            .map(|i| (0..n).map(|j| self.kt_yy[i * n + j] * w[j]).sum())
            .collect();
        let t2 = dot(&kx, &factor.solve(&ktw)?);
        let complementary = ktxx - 2.0 * t1 + t2;

        Ok(PosteriorPrediction {
            point: z,
            mean,
            hermitian_variance: variance,
            complementary_variance: complementary,
            estimator_kind: EstimatorKind::Strict,
            schur_jitter: None,
            improperness_ratio: None,
        })
    }

    /// Widely linear (conditional complex Gaussian) prediction at `z`.
    ///
    /// Uses both `y` and `conj(y)` through the Schur complement
    /// `P = K_yy - Kt_yy (conj K_yy)^{-1} conj(Kt_yy)`, which is factored with
    /// the standard jitter escalation; exhaustion maps to [`RegressionError::SchurSingular`].
    pub fn predict_wide(&self, z: Complex64) -> Result<PosteriorPrediction, RegressionError> {
        let n = self.data.len();
        if n == 0 {
            return Err(RegressionError::EmptyDataset);
        }
        let factor = self.factor.as_ref().expect("factor exists for nonempty data");
        let kt = &self.kt_yy;

        // conj-solve: (conj K)^{-1} v = conj(K^{-1} conj v).
        let conj_solve = |f: &CholeskyFactor, v: &[Complex64]| -> Result<Vec<Complex64>, LinalgError> {
            let vc: Vec<Complex64> = v.iter().map(|x| x.conj()).collect();
            Ok(f.solve(&vc)?.into_iter().map(|x| x.conj()).collect())
        };

        // X = (conj K)^{-1} conj(Kt); Y = K^{-1} Kt, built column-wise.
        let mut x_cols = Vec::with_capacity(n);
        let mut y_cols = Vec::with_capacity(n);
        for j in 0..n {
            let col: Vec<Complex64> = (0..n).map(|i| kt[i * n + j]).collect();
            let col_conj: Vec<Complex64> = col.iter().map(|v| v.conj()).collect();
            x_cols.push(conj_solve(factor, &col_conj)?);
            y_cols.push(factor.solve(&col)?);
        }

        // P = K_yy - Kt X, assembled Hermitian from the upper triangle.
        let gram = noisy_gramian(self.kernel.as_ref(), &self.data.inputs, self.data.noise_variance);
        let p = HermitianMatrix::from_fn(n, |i, j| {
            let kx: Complex64 = (0..n).map(|l| kt[i * n + l] * x_cols[j][l]).sum();
            gram.get(i, j) - kx
        });
        let p_ratio = p.frobenius_norm() / gram.frobenius_norm().max(1e-300);
        let base = BASE_JITTER_REL * p.trace_real().abs().max(1e-300) / n as f64;
        let fp = cholesky(&p, base).map_err(RegressionError::SchurSingular)?;

        let (kx, ktx) = self.cross_rows(z);
        // r1 = K_xy - Kt_xy X; r2 = Kt_xy - K_xy Y.
        let r1: Vec<Complex64> = (0..n)
            .map(|j| kx[j] - dot(&ktx, &x_cols[j]))
            .collect();
        let r2: Vec<Complex64> = (0..n)
            .map(|j| ktx[j] - dot(&kx, &y_cols[j]))
            .collect();

        let py = fp.solve(&self.centered)?;
        let py_conj: Vec<Complex64> = py.iter().map(|v| v.conj()).collect();
        let mean = self.kernel.mean(z) + dot(&r1, &py) + dot(&r2, &py_conj);

        // a = P^{-1} conj(kx), b = P^{-1} ktx.
        let kx_conj: Vec<Complex64> = kx.iter().map(|v| v.conj()).collect();
        let a = fp.solve(&kx_conj)?;
        let b = fp.solve(&ktx)?;
        let a_conj: Vec<Complex64> = a.iter().map(|v| v.conj()).collect();
        let b_conj: Vec<Complex64> = b.iter().map(|v| v.conj()).collect();

        let kxx = self.kxx(z);
        let ktxx = self.kernel.complementary(z, z);
        let variance = (kxx - dot(&r1, &a).re - dot(&r2, &b_conj).re).max(0.0);
        let complementary = ktxx - dot(&r1, &b) - dot(&r2, &a_conj);

        Ok(PosteriorPrediction {
            point: z,
            mean,
            hermitian_variance: variance,
            complementary_variance: complementary,
            estimator_kind: EstimatorKind::Wide,
            schur_jitter: Some(fp.jitter_used),
            improperness_ratio: Some(p_ratio),
        })
    }

    /// `-(y^H K_yy^{-1} y + log det K_yy + n log 2 pi) / 2` on centered data.
    pub fn log_marginal_likelihood(&self) -> Result<f64, RegressionError> {
        let n = self.data.len();
        if n == 0 {
            return Err(RegressionError::EmptyDataset);
        }
        let factor = self.factor.as_ref().expect("factor exists for nonempty data");
        let quad = self
            .centered
            .iter()
            .zip(&self.alpha)
            .map(|(y, a)| (y.conj() * a).re)
            .sum::<f64>();
        Ok(-0.5 * (quad + factor.logdet() + n as f64 * (2.0 * PI).ln()))
    }
}

fn noisy_gramian(
    kernel: &dyn ComplexKernel,
    inputs: &[Complex64],
    noise_variance: f64,
) -> HermitianMatrix {
    let gram = hermitian_gramian(kernel, inputs);
    HermitianMatrix::from_fn(inputs.len(), |i, j| {
        gram.get(i, j)
            + if i == j {
                Complex64::new(noise_variance, 0.0)
            } else {
                Complex64::ZERO
            }
    })
}

/// Convenience: marginal likelihood of `data` under `kernel`.
pub fn log_marginal_likelihood(
    kernel: Arc<dyn ComplexKernel>,
    data: &Dataset,
) -> Result<f64, RegressionError> {
    RegressionModel::new(kernel, data.clone())?.log_marginal_likelihood()
}

// ---------------------------------------------------------------------------
// Confidence ellipsoids
// ---------------------------------------------------------------------------

/// Disk of radius `eta * sigma` around the posterior mean; membership holds
/// with probability at least `1 - 1/eta^2` by the Chebyshev bound.
#[derive(Debug, Clone)]
pub struct ConfidenceEllipsoid {
    pub center: Complex64,
    pub radius: f64,
    pub eta: f64,
    pub magnitude_lo: f64,
    pub magnitude_hi: f64,
    /// `(lo, hi)` phase interval when the disk excludes the origin, else
    /// `None` (every phase is possible).
    pub phase: Option<(f64, f64)>,
}

pub fn confidence_ellipsoid(p: &PosteriorPrediction, eta: f64) -> ConfidenceEllipsoid {
    assert!(eta > 0.0, "eta must be positive");
    let radius = eta * p.hermitian_variance.sqrt();
    let mag = p.mean.norm();
    let magnitude_lo = (mag - radius).max(0.0);
    let magnitude_hi = mag + radius;
    let phase = if mag > radius {
        let half = (radius / mag).asin();
        let arg = p.mean.arg();
        Some((arg - half, arg + half))
    } else {
        None
    };
    ConfidenceEllipsoid {
        center: p.mean,
        radius,
        eta,
        magnitude_lo,
        magnitude_hi,
        phase,
    }
}

impl ConfidenceEllipsoid {
    pub fn contains(&self, w: Complex64) -> bool {
        (w - self.center).norm() <= self.radius
    }
}

// ---------------------------------------------------------------------------
// Hyperparameter families and maximum-likelihood fitting
// ---------------------------------------------------------------------------

/// Named parameter with box bounds and optimizer transform.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub transform: Transform,
}

type Builder = dyn Fn(&[f64]) -> Result<KernelSpec, KernelError> + Send + Sync;

/// A kernel constructor over a named parameter vector.
pub struct KernelFamily {
    pub name: &'static str,
    pub params: Vec<ParamSpec>,
    builder: Arc<Builder>,
}

impl KernelFamily {
    pub fn build_spec(&self, theta: &[f64]) -> Result<KernelSpec, KernelError> {
        assert_eq!(theta.len(), self.params.len(), "theta length mismatch");
        (self.builder)(theta)
    }

    /// Zero-parameter family pinned to a fixed kernel.
    pub fn fixed(spec: KernelSpec) -> Self {
        Self {
            name: "fixed",
            params: Vec::new(),
            builder: Arc::new(move |_| Ok(spec.clone())),
        }
    }

    /// Single-parameter geometric family.
    pub fn geometric() -> Self {
        Self {
            name: "geometric",
            params: vec![ParamSpec {
                name: "alpha",
                lo: 1e-3,
                hi: 1.0 - 1e-3,
                transform: Transform::Logit { lo: 0.0, hi: 1.0 },
            }],
            builder: Arc::new(|t| Ok(KernelSpec::Geometric { alpha: t[0] })),
        }
    }

    /// Five-parameter mixture of a geometric background and a cozine
    /// resonance: `sigma_g^2 k_geo(alpha) + sigma_c^2 k_coz(a, omega0)`.
    /// Parameter order: `sigma_g, alpha, sigma_c, omega0, a`.
    pub fn resonance_mixture() -> Self {
        Self {
            name: "resonance_mixture",
            params: vec![
                ParamSpec {
                    name: "sigma_g",
                    lo: 1e-6,
                    hi: 1e3,
                    transform: Transform::Log,
                },
                ParamSpec {
                    name: "alpha",
                    lo: 1e-3,
                    hi: 1.0 - 1e-3,
                    transform: Transform::Logit { lo: 0.0, hi: 1.0 },
                },
                ParamSpec {
                    name: "sigma_c",
                    lo: 1e-6,
                    hi: 1e3,
                    transform: Transform::Log,
                },
                ParamSpec {
                    name: "omega0",
                    lo: 0.0,
                    hi: PI,
                    transform: Transform::Logit { lo: 0.0, hi: PI },
                },
                ParamSpec {
                    name: "a",
                    lo: 1e-3,
                    hi: 1.0 - 1e-3,
                    transform: Transform::Logit { lo: 0.0, hi: 1.0 },
                },
            ],
            builder: Arc::new(|t| {
                Ok(KernelSpec::Sum {
                    parts: vec![
                        KernelPart {
                            weight: t[0] * t[0],
                            kernel: KernelSpec::Geometric { alpha: t[1] },
                        },
                        KernelPart {
                            weight: t[2] * t[2],
                            kernel: KernelSpec::Cozine { a: t[4], omega0: t[3] },
                        },
                    ],
                })
            }),
        }
    }
}

/// One restart's record in the fit trace.
#[derive(Debug, Clone)]
pub struct RestartRecord {
    pub restart: usize,
    pub theta_init: Vec<f64>,
    pub lml_init: f64,
    pub theta_best: Vec<f64>,
    pub lml_best: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub lml: f64,
    pub spec: KernelSpec,
    pub trace: Vec<RestartRecord>,
}

const NM_MAX_ITERATIONS: usize = 400;
const NM_TOLERANCE: f64 = 1e-8;

/// Maximizes the log marginal likelihood over the family's parameters with
/// `restarts` Nelder-Mead searches from seeded random initial points.
/// Restarts run in parallel with deterministic per-restart seeds; failed
/// restarts are recorded in the trace rather than aborting the fit.
pub fn fit_hyperparameters(
    family: &KernelFamily,
    data: &Dataset,
    restarts: usize,
    seed: u64,
) -> Result<FitResult, RegressionError> {
    assert!(restarts >= 1, "need at least one restart");
    if data.is_empty() {
        return Err(RegressionError::EmptyDataset);
    }
    let dim = family.params.len();
    let objective = |u: &[f64]| -> Option<f64> {
        let theta: Vec<f64> = u
            .iter()
            .zip(&family.params)
            .map(|(ui, p)| p.transform.to_constrained(*ui))
            .collect();
        let spec = family.build_spec(&theta).ok()?;
        let kernel = spec.build().ok()?;
        log_marginal_likelihood(kernel, data).ok()
    };

    if dim == 0 {
        let spec = family.build_spec(&[])?;
        let lml = log_marginal_likelihood(spec.build()?, data)?;
        return Ok(FitResult {
            theta: Vec::new(),
            lml,
            spec,
            trace: vec![RestartRecord {
                restart: 0,
                theta_init: Vec::new(),
                lml_init: lml,
                theta_best: Vec::new(),
                lml_best: lml,
                iterations: 0,
                converged: true,
                error: None,
            }],
        });
    }

    let records: Vec<RestartRecord> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = stream_rng(seed, restart as u64);
            let u0: Vec<f64> = family
                .params
                .iter()
                .map(|p| match p.transform {
                    // Log-uniform over the box for scale parameters.
                    Transform::Log => rng.gen_range(p.lo.ln()..p.hi.ln()),
                    Transform::Logit { .. } => {
                        let margin = 1e-3 * (p.hi - p.lo);
                        p.transform
                            .to_unconstrained(rng.gen_range(p.lo + margin..p.hi - margin))
                    }
                })
                .collect();
            let theta_init: Vec<f64> = u0
                .iter()
                .zip(&family.params)
                .map(|(u, p)| p.transform.to_constrained(*u))
                .collect();
            match objective(&u0) {
                None => RestartRecord {
                    restart,
                    theta_init: theta_init.clone(),
                    lml_init: f64::NEG_INFINITY,
                    theta_best: theta_init,
                    lml_best: f64::NEG_INFINITY,
                    iterations: 0,
                    converged: false,
                    error: Some("objective failed at the initial point".into()),
                },
                Some(lml_init) => {
                    let (u_best, neg_best, iterations, converged) =
                        nelder_mead(&|u| objective(u).map(|l| -l), &u0);
                    let theta_best: Vec<f64> = u_best
                        .iter()
                        .zip(&family.params)
                        .map(|(u, p)| p.transform.to_constrained(*u))
                        .collect();
                    RestartRecord {
                        restart,
                        theta_init,
                        lml_init,
                        theta_best,
                        lml_best: -neg_best,
                        iterations,
                        converged,
                        error: None,
                    }
                }
            }
        })
        .collect();

    let best = records
        .iter()
        .max_by(|a, b| a.lml_best.partial_cmp(&b.lml_best).unwrap())
        .expect("at least one restart");
    if best.lml_best == f64::NEG_INFINITY {
        // Every restart failed; surface the underlying numerical problem.
        let spec = family.build_spec(&best.theta_init)?;
        return log_marginal_likelihood(spec.build()?, data).map(|_| unreachable!());
    }
    let spec = family.build_spec(&best.theta_best)?;
    let lml = best.lml_best;
    Ok(FitResult {
        theta: best.theta_best.clone(),
        lml,
        spec,
        trace: records,
    })
}

/// Nelder-Mead simplex minimization; `f` returning `None` is treated as an
/// infinitely bad point. Returns (best point, best value, iterations,
/// converged-by-tolerance).
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> Option<f64>,
    x0: &[f64],
) -> (Vec<f64>, f64, usize, bool) {
    let dim = x0.len();
    let eval = |x: &[f64]| f(x).unwrap_or(f64::INFINITY);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += 0.25;
        let v = eval(&x);
        simplex.push((x, v));
    }

    let mut converged = false;
    let mut iterations = 0;
    for it in 0..NM_MAX_ITERATIONS {
        iterations = it + 1;
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if (worst - best).abs() <= NM_TOLERANCE * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / dim as f64;
            }
        }
        let worst_x = simplex[dim].0.clone();
        let blend = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_x)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let reflected = blend(1.0);
        let fr = eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(2.0);
            let fe = eval(&expanded);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let contracted = if fr < worst { blend(0.5) } else { blend(-0.5) };
            let fc = eval(&contracted);
            if fc < worst.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                // Shrink toward the best vertex.
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = entry
                        .0
                        .iter()
                        .zip(&best_x)
                        .map(|(xi, bi)| bi + 0.5 * (xi - bi))
                        .collect();
                    let v = eval(&x);
                    *entry = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    (simplex[0].0.clone(), simplex[0].1, iterations, converged)
}
