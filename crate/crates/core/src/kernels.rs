//! Covariance models for conjugate-symmetric H-infinity Gaussian processes.
//!
//! A process is described by a Hermitian covariance `k(z, w)` and a
//! complementary covariance `kt(z, w)`. All built-in families here come from
//! real impulse responses, so they satisfy `kt(z, w) = k(z, conj(w))`.
//! Besides pointwise evaluation, every kernel exposes analytic partial
//! derivatives of `k(e^{j a}, e^{j b})` with respect to the angles up to
//! mixed second order; the gain-crossing integrand consumes those through
//! [`decompose_derivatives`], which assembles the covariance blocks of the
//! real/imaginary part pair and its frequency derivative.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::HermitianMatrix;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Relative series tail allowed when truncating a generator sequence.
pub const TAIL_FRACTION_LIMIT: f64 = 1e-10;

/// Default truncation length for generator-backed sequences.
pub const DEFAULT_TRUNCATION: usize = 200;

/// Finite-difference step for mean derivatives when no analytic form exists.
const MEAN_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("hyperparameter {name} = {value} outside valid range ({lo}, {hi})")]
    BadHyperparameter {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("series tail beyond truncation {truncation} is {tail_fraction:.3e} of the total, above {TAIL_FRACTION_LIMIT:.0e}")]
    TailTooLarge {
        truncation: usize,
        tail_fraction: f64,
    },
    #[error("sequence coefficient a2[{index}] = {value} is negative")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("sum kernel needs a nonempty part list")]
    EmptySum,
    #[error("sum kernel weight {value} is negative")]
    NegativeWeight { value: f64 },
}

/// Angular derivative order of an on-circle covariance evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    /// Plain value, no derivative.
    Value,
    /// d/dOmega1.
    D1,
    /// d/dOmega2.
    D2,
    /// d^2/(dOmega1 dOmega2).
    D12,
}

/// Evaluation contract of a complex Gaussian process covariance model.
///
/// `hermitian`/`complementary` accept any points on or outside the unit
/// circle; the `*_deriv` methods evaluate on-circle values and angular
/// derivatives of `k(e^{j a}, e^{j b})` analytically.
pub trait ComplexKernel: Send + Sync {
    /// Hermitian covariance k(z, w) = E[(f(z)-m(z)) conj(f(w)-m(w))].
    fn hermitian(&self, z: Complex64, w: Complex64) -> Complex64;

    /// Complementary covariance kt(z, w) = E[(f(z)-m(z)) (f(w)-m(w))].
    fn complementary(&self, z: Complex64, w: Complex64) -> Complex64;

    /// Process mean. Built-in priors are mean-zero.
    fn mean(&self, _z: Complex64) -> Complex64 {
        Complex64::ZERO
    }

    /// On-circle angular derivative of the Hermitian covariance.
    fn hermitian_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64;

    /// On-circle angular derivative of the complementary covariance.
    fn complementary_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64;

    /// Analytic d/dOmega of the mean along the circle, when available.
    /// `None` makes consumers fall back to central differences.
    fn mean_circle_derivative(&self, _omega: f64) -> Option<Complex64> {
        Some(Complex64::ZERO)
    }

    /// Named hyperparameters with box bounds, in construction order.
    fn hyperparameters(&self) -> Vec<Hyperparameter> {
        Vec::new()
    }
}

/// A named hyperparameter with box bounds and its optimizer-space transform.
#[derive(Debug, Clone)]
pub struct Hyperparameter {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub transform: Transform,
}

/// Coordinate transform used when optimizing a hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// `u = ln(theta)` for positive scale parameters.
    Log,
    /// `u = logit((theta - lo) / (hi - lo))` for interval parameters.
    Logit { lo: f64, hi: f64 },
}

impl Transform {
    pub fn to_unconstrained(&self, theta: f64) -> f64 {
        match self {
            Transform::Log => theta.ln(),
            Transform::Logit { lo, hi } => {
                let t = (theta - lo) / (hi - lo);
                (t / (1.0 - t)).ln()
            }
        }
    }

    pub fn to_constrained(&self, u: f64) -> f64 {
        match self {
            Transform::Log => u.exp(),
            Transform::Logit { lo, hi } => lo + (hi - lo) / (1.0 + (-u).exp()),
        }
    }
}

// ---------------------------------------------------------------------------
// Sequence specifications (stationary family)
// ---------------------------------------------------------------------------

/// Nonnegative squared-coefficient sequence `a_n^2` defining a Hermitian
/// stationary process, either as an explicit list or a named generator.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SequenceSpec {
    /// Geometric generator `a_n^2 = alpha^n`, truncated after `truncation` terms.
    Geometric {
        alpha: f64,
        #[serde(default = "default_truncation")]
        truncation: usize,
    },
    /// Explicit finite list, used as-is.
    Explicit { coefficients: Vec<f64> },
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

impl SequenceSpec {
    pub fn geometric(alpha: f64) -> Result<Self, KernelError> {
        Self::geometric_truncated(alpha, DEFAULT_TRUNCATION)
    }

    pub fn geometric_truncated(alpha: f64, truncation: usize) -> Result<Self, KernelError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(KernelError::BadHyperparameter {
                name: "alpha",
                value: alpha,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(SequenceSpec::Geometric { alpha, truncation })
    }

    pub fn explicit(coefficients: Vec<f64>) -> Result<Self, KernelError> {
        for (index, &value) in coefficients.iter().enumerate() {
            if value < 0.0 {
                return Err(KernelError::NegativeCoefficient { index, value });
            }
        }
        Ok(SequenceSpec::Explicit { coefficients })
    }

    /// Materialized squared coefficients `a_0^2 .. a_N^2`.
    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            SequenceSpec::Explicit { coefficients } => coefficients.clone(),
            SequenceSpec::Geometric { alpha, truncation } => {
                let mut out = Vec::with_capacity(truncation + 1);
                let mut term = 1.0;
                for _ in 0..=*truncation {
                    out.push(term);
                    term *= alpha;
                }
                out
            }
        }
    }

    /// Fraction of the total sum that the truncation discards (0 for explicit lists).
    pub fn tail_fraction(&self) -> f64 {
        match self {
            SequenceSpec::Explicit { .. } => 0.0,
            SequenceSpec::Geometric { alpha, truncation } => alpha.powi(*truncation as i32 + 1),
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        match self {
            SequenceSpec::Explicit { coefficients } => {
                for (index, &value) in coefficients.iter().enumerate() {
                    if value < 0.0 {
                        return Err(KernelError::NegativeCoefficient { index, value });
                    }
                }
                Ok(())
            }
            SequenceSpec::Geometric { alpha, truncation } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(KernelError::BadHyperparameter {
                        name: "alpha",
                        value: *alpha,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
                let tail = self.tail_fraction();
                if tail > TAIL_FRACTION_LIMIT {
                    return Err(KernelError::TailTooLarge {
                        truncation: *truncation,
                        tail_fraction: tail,
                    });
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Built-in kernels
// ---------------------------------------------------------------------------

/// Geometric family: `k(z, w) = z conj(w) / (z conj(w) - alpha)` and
/// `kt(z, w) = z w / (z w - alpha)` with `alpha` in (0, 1).
#[derive(Debug, Clone)]
pub struct GeometricKernel {
    alpha: f64,
}

pub fn geometric_kernel(alpha: f64) -> Result<GeometricKernel, KernelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(KernelError::BadHyperparameter {
            name: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(GeometricKernel { alpha })
}

impl GeometricKernel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// g(u) = 1 / (1 - alpha e^{-ju}) and its first two u-derivatives.
    fn g(&self, u: f64, order: u8) -> Complex64 {
        let e = Complex64::from_polar(1.0, -u);
        let d = Complex64::ONE - self.alpha * e;
        match order {
            0 => d.inv(),
            1 => -J * self.alpha * e / (d * d),
            2 => -self.alpha * (e / (d * d) + 2.0 * self.alpha * e * e / (d * d * d)),
            _ => unreachable!("derivative order above 2 is never requested"),
        }
    }
}

impl ComplexKernel for GeometricKernel {
    fn hermitian(&self, z: Complex64, w: Complex64) -> Complex64 {
        let zw = z * w.conj();
        zw / (zw - self.alpha)
    }

    fn complementary(&self, z: Complex64, w: Complex64) -> Complex64 {
        let zw = z * w;
        zw / (zw - self.alpha)
    }

    fn hermitian_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        // k on the circle depends on u = omega1 - omega2 only.
        let u = omega1 - omega2;
        match order {
            DerivOrder::Value => self.g(u, 0),
            DerivOrder::D1 => self.g(u, 1),
            DerivOrder::D2 => -self.g(u, 1),
            DerivOrder::D12 => -self.g(u, 2),
        }
    }

    fn complementary_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        // kt depends on s = omega1 + omega2.
        let s = omega1 + omega2;
        match order {
            DerivOrder::Value => self.g(s, 0),
            DerivOrder::D1 | DerivOrder::D2 => self.g(s, 1),
            DerivOrder::D12 => self.g(s, 2),
        }
    }

    fn hyperparameters(&self) -> Vec<Hyperparameter> {
        vec![Hyperparameter {
            name: "alpha".into(),
            value: self.alpha,
            lo: 1e-3,
            hi: 1.0 - 1e-3,
            transform: Transform::Logit { lo: 0.0, hi: 1.0 },
        }]
    }
}

/// Cozine family: the z-transform of an exponentially decaying discrete
/// cosine `a^n (X cos(w0 n) + Y sin(w0 n))` with independent standard normal
/// amplitudes. Writing `zeta = 1/z`, both covariances share the rational form
/// `F(zeta1, zeta2) = N / (D(zeta1) D(zeta2))` with
/// `N = 1 - a cos(w0)(zeta1 + zeta2) + a^2 zeta1 zeta2` and
/// `D(zeta) = 1 - 2 a cos(w0) zeta + a^2 zeta^2`; the Hermitian covariance
/// evaluates at `zeta2 = 1/conj(w)`, the complementary at `zeta2 = 1/w`.
#[derive(Debug, Clone)]
pub struct CozineKernel {
    a: f64,
    omega0: f64,
}

pub fn cozine_kernel(a: f64, omega0: f64) -> Result<CozineKernel, KernelError> {
    if !(a > 0.0 && a < 1.0) {
        return Err(KernelError::BadHyperparameter {
            name: "a",
            value: a,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(0.0..=PI).contains(&omega0) {
        return Err(KernelError::BadHyperparameter {
            name: "omega0",
            value: omega0,
            lo: 0.0,
            hi: PI,
        });
    }
    Ok(CozineKernel { a, omega0 })
}

/// Value and partials of the shared rational form.
struct CozinePartials {
    f: Complex64,
    f1: Complex64,
    f2: Complex64,
    f12: Complex64,
}

impl CozineKernel {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    fn partials(&self, zeta1: Complex64, zeta2: Complex64) -> CozinePartials {
        let a = self.a;
        let ac = a * self.omega0.cos();
        let a2 = a * a;
        let num = Complex64::ONE - ac * (zeta1 + zeta2) + a2 * zeta1 * zeta2;
        let n1 = -ac + a2 * zeta2;
        let n2 = -ac + a2 * zeta1;
        let n12 = Complex64::new(a2, 0.0);
        let d = |zeta: Complex64| Complex64::ONE - 2.0 * ac * zeta + a2 * zeta * zeta;
        let dp = |zeta: Complex64| -2.0 * ac + 2.0 * a2 * zeta;
        let d1 = d(zeta1);
        let d2 = d(zeta2);
        let l1 = dp(zeta1) / d1;
        let l2 = dp(zeta2) / d2;
        let dd = d1 * d2;
        CozinePartials {
            f: num / dd,
            f1: (n1 - num * l1) / dd,
            f2: (n2 - num * l2) / dd,
            f12: (n12 - n1 * l2 - n2 * l1 + num * l1 * l2) / dd,
        }
    }

    fn value(&self, zeta1: Complex64, zeta2: Complex64) -> Complex64 {
        self.partials(zeta1, zeta2).f
    }
}

impl ComplexKernel for CozineKernel {
    fn hermitian(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.value(z.inv(), w.conj().inv())
    }

    fn complementary(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.value(z.inv(), w.inv())
    }

    fn hermitian_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        // zeta1 = e^{-j omega1} so d zeta1/d omega1 = -j zeta1;
        // zeta2 = e^{+j omega2} so d zeta2/d omega2 = +j zeta2.
        let zeta1 = Complex64::from_polar(1.0, -omega1);
        let zeta2 = Complex64::from_polar(1.0, omega2);
        let p = self.partials(zeta1, zeta2);
        match order {
            DerivOrder::Value => p.f,
            DerivOrder::D1 => p.f1 * (-J * zeta1),
            DerivOrder::D2 => p.f2 * (J * zeta2),
            DerivOrder::D12 => p.f12 * zeta1 * zeta2,
        }
    }

    fn complementary_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        // Both zetas carry e^{-j omega} here.
        let zeta1 = Complex64::from_polar(1.0, -omega1);
        let zeta2 = Complex64::from_polar(1.0, -omega2);
        let p = self.partials(zeta1, zeta2);
        match order {
            DerivOrder::Value => p.f,
            DerivOrder::D1 => p.f1 * (-J * zeta1),
            DerivOrder::D2 => p.f2 * (-J * zeta2),
            DerivOrder::D12 => -p.f12 * zeta1 * zeta2,
        }
    }

    fn hyperparameters(&self) -> Vec<Hyperparameter> {
        vec![
            Hyperparameter {
                name: "a".into(),
                value: self.a,
                lo: 1e-3,
                hi: 1.0 - 1e-3,
                transform: Transform::Logit { lo: 0.0, hi: 1.0 },
            },
            Hyperparameter {
                name: "omega0".into(),
                value: self.omega0,
                lo: 0.0,
                hi: PI,
                transform: Transform::Logit { lo: 0.0, hi: PI },
            },
        ]
    }
}

/// Hermitian stationary family from a truncated nonnegative series:
/// `k(z, w) = sum a_n^2 (z conj(w))^{-n}`, `kt(z, w) = sum a_n^2 (z w)^{-n}`.
#[derive(Debug, Clone)]
pub struct StationaryKernel {
    spec: SequenceSpec,
    a2: Vec<f64>,
}

pub fn stationary_kernel(spec: SequenceSpec) -> Result<StationaryKernel, KernelError> {
    spec.validate()?;
    let a2 = spec.coefficients();
    Ok(StationaryKernel { spec, a2 })
}

impl StationaryKernel {
    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn squared_coefficients(&self) -> &[f64] {
        &self.a2
    }

    /// Discarded tail mass as a fraction of the total (metadata).
    pub fn tail_fraction(&self) -> f64 {
        self.spec.tail_fraction()
    }

    fn series(&self, ratio: Complex64) -> Complex64 {
        // sum a2[n] * ratio^n with |ratio| <= 1 on/outside the circle.
        let mut acc = Complex64::ZERO;
        let mut pow = Complex64::ONE;
        for &c in &self.a2 {
            acc += c * pow;
            pow *= ratio;
        }
        acc
    }

    /// Weighted series for derivative orders; `weight(n)` multiplies term n.
    fn weighted_series(&self, phase: f64, weight: impl Fn(f64) -> Complex64) -> Complex64 {
        let step = Complex64::from_polar(1.0, -phase);
        let mut pow = Complex64::ONE;
        let mut acc = Complex64::ZERO;
        for (n, &c) in self.a2.iter().enumerate() {
            acc += c * weight(n as f64) * pow;
            pow *= step;
        }
        acc
    }
}

impl ComplexKernel for StationaryKernel {
    fn hermitian(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.series((z * w.conj()).inv())
    }

    fn complementary(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.series((z * w).inv())
    }

    fn hermitian_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        // Term n carries e^{-j n (omega1 - omega2)}.
        let u = omega1 - omega2;
        match order {
            DerivOrder::Value => self.weighted_series(u, |_| Complex64::ONE),
            DerivOrder::D1 => self.weighted_series(u, |n| -J * n),
            DerivOrder::D2 => self.weighted_series(u, |n| J * n),
            DerivOrder::D12 => self.weighted_series(u, |n| Complex64::new(n * n, 0.0)),
        }
    }

    fn complementary_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        // Term n carries e^{-j n (omega1 + omega2)}.
        let s = omega1 + omega2;
        match order {
            DerivOrder::Value => self.weighted_series(s, |_| Complex64::ONE),
            DerivOrder::D1 | DerivOrder::D2 => self.weighted_series(s, |n| -J * n),
            DerivOrder::D12 => self.weighted_series(s, |n| Complex64::new(-n * n, 0.0)),
        }
    }
}

/// Weighted sum of independent component processes: covariances and means
/// combine as `sum w_i k_i` and `sum sqrt(w_i) m_i`.
pub struct SumKernel {
    parts: Vec<(f64, Arc<dyn ComplexKernel>)>,
}

pub fn sum_kernel(parts: Vec<(f64, Arc<dyn ComplexKernel>)>) -> Result<SumKernel, KernelError> {
    if parts.is_empty() {
        return Err(KernelError::EmptySum);
    }
    for (w, _) in &parts {
        if *w < 0.0 {
            return Err(KernelError::NegativeWeight { value: *w });
        }
    }
    Ok(SumKernel { parts })
}

impl SumKernel {
    fn combine(&self, f: impl Fn(&dyn ComplexKernel) -> Complex64) -> Complex64 {
        self.parts
            .iter()
            .map(|(w, k)| *w * f(k.as_ref()))
            .sum()
    }
}

impl ComplexKernel for SumKernel {
    fn hermitian(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.combine(|k| k.hermitian(z, w))
    }

    fn complementary(&self, z: Complex64, w: Complex64) -> Complex64 {
        self.combine(|k| k.complementary(z, w))
    }

    fn mean(&self, z: Complex64) -> Complex64 {
        self.parts
            .iter()
            .map(|(w, k)| w.sqrt() * k.mean(z))
            .sum()
    }

    fn hermitian_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        self.combine(|k| k.hermitian_deriv(omega1, omega2, order))
    }

    fn complementary_deriv(&self, omega1: f64, omega2: f64, order: DerivOrder) -> Complex64 {
        self.combine(|k| k.complementary_deriv(omega1, omega2, order))
    }

    fn mean_circle_derivative(&self, omega: f64) -> Option<Complex64> {
        let mut acc = Complex64::ZERO;
        for (w, k) in &self.parts {
            acc += w.sqrt() * k.mean_circle_derivative(omega)?;
        }
        Some(acc)
    }

    fn hyperparameters(&self) -> Vec<Hyperparameter> {
        let mut out = Vec::new();
        for (i, (w, k)) in self.parts.iter().enumerate() {
            out.push(Hyperparameter {
                name: format!("weight_{i}"),
                value: *w,
                lo: 1e-12,
                hi: 1e6,
                transform: Transform::Log,
            });
            out.extend(k.hyperparameters());
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Serializable kernel specifications
// ---------------------------------------------------------------------------

/// Serializable kernel description. The JSON schema is
/// `{"type": "...", ...params}` with `sum` variants carrying
/// `{"parts": [{"weight": w, "kernel": {...}}]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Geometric { alpha: f64 },
    Cozine { a: f64, omega0: f64 },
    Stationary {
        #[serde(flatten)]
        sequence: SequenceSpec,
    },
    Sum { parts: Vec<KernelPart> },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct KernelPart {
    pub weight: f64,
    pub kernel: KernelSpec,
}

impl KernelSpec {
    /// Instantiates the evaluation object, validating hyperparameters.
    pub fn build(&self) -> Result<Arc<dyn ComplexKernel>, KernelError> {
        Ok(match self {
            KernelSpec::Geometric { alpha } => Arc::new(geometric_kernel(*alpha)?),
            KernelSpec::Cozine { a, omega0 } => Arc::new(cozine_kernel(*a, *omega0)?),
            KernelSpec::Stationary { sequence } => Arc::new(stationary_kernel(sequence.clone())?),
            KernelSpec::Sum { parts } => {
                let built: Result<Vec<_>, KernelError> = parts
                    .iter()
                    .map(|p| p.kernel.build().map(|k| (p.weight, k)))
                    .collect();
                Arc::new(sum_kernel(built?)?)
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Real/imaginary decomposition for the gain process
// ---------------------------------------------------------------------------

/// Small dense 2x2 real matrix used by the crossing-rate machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn inverse(&self) -> Self {
        let d = self.det();
        Self::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        )
    }

    pub fn matvec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    #[allow(clippy::needless_range_loop)]
    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j];
            }
        }
        Mat2 { m: out }
    }

    pub fn add_diag(&self, v: f64) -> Mat2 {
        Mat2::new(self.m[0][0] + v, self.m[0][1], self.m[1][0], self.m[1][1] + v)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] - o.m[0][0],
            self.m[0][1] - o.m[0][1],
            self.m[1][0] - o.m[1][0],
            self.m[1][1] - o.m[1][1],
        )
    }

    /// Eigenvalues of a symmetric 2x2 (closed form), ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * self.trace();
        let diff = 0.5 * (self.m[0][0] - self.m[1][1]);
        let rad = (diff * diff + self.m[0][1] * self.m[1][0]).max(0.0).sqrt();
        [half_tr - rad, half_tr + rad]
    }
}

/// Covariance blocks of the stacked real/imaginary pair
/// `g(Omega) = (Re f(e^{j Omega}), Im f(e^{j Omega}))` and its frequency
/// derivative, evaluated from the kernel's analytic derivative entries:
///
/// * `position_cov`: Cov(g, g) at (Omega1, Omega2),
/// * `velocity_cov`: Cov(g', g'),
/// * `cross_cov`: Cov(g'(Omega1), g(Omega2)),
/// * `mean` / `mean_deriv`: mean of g at Omega1 and its derivative.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeDecomposition {
    pub position_cov: Mat2,
    pub velocity_cov: Mat2,
    pub cross_cov: Mat2,
    pub mean: [f64; 2],
    pub mean_deriv: [f64; 2],
}

/// Assembles the real-pair covariance blocks at `(omega1, omega2)` from the
/// kernel's on-circle derivatives. With `kx = Re(k + kt)/2`,
/// `ky = Re(k - kt)/2`, `kc = Im(kt - k)/2`:
///
/// ```text
/// position_cov = [kx  kc ; kc  ky]            (value order)
/// velocity_cov = [kx'' kc''; kc'' ky'']       (mixed d1 d2 order)
/// cross_cov    = [kx^1 kc^1; kc^2 ky^1]       (first-order entries)
/// ```
///
/// where the cross block's lower-left entry differentiates `kc` in its
/// second argument, matching Cov(Im', Re).
pub fn decompose_derivatives(
    kern: &dyn ComplexKernel,
    omega1: f64,
    omega2: f64,
) -> DerivativeDecomposition {
    let entry = |order: DerivOrder| {
        let a = kern.hermitian_deriv(omega1, omega2, order);
        let b = kern.complementary_deriv(omega1, omega2, order);
        let kx = 0.5 * (a + b).re;
        let ky = 0.5 * (a - b).re;
        let kc = 0.5 * (b - a).im;
        (kx, ky, kc)
    };
    let (kx, ky, kc) = entry(DerivOrder::Value);
    let (kx1, ky1, kc1) = entry(DerivOrder::D1);
    let (_, _, kc2) = entry(DerivOrder::D2);
    let (kx12, ky12, kc12) = entry(DerivOrder::D12);

    let zc = Complex64::from_polar(1.0, omega1);
    let m = kern.mean(zc);
    let md = kern.mean_circle_derivative(omega1).unwrap_or_else(|| {
        let h = MEAN_FD_STEP;
        let hi = kern.mean(Complex64::from_polar(1.0, omega1 + h));
        let lo = kern.mean(Complex64::from_polar(1.0, omega1 - h));
        (hi - lo) / (2.0 * h)
    });

    DerivativeDecomposition {
        position_cov: Mat2::new(kx, kc, kc, ky),
        velocity_cov: Mat2::new(kx12, kc12, kc12, ky12),
        cross_cov: Mat2::new(kx1, kc1, kc2, ky1),
        mean: [m.re, m.im],
        mean_deriv: [md.re, md.im],
    }
}

// ---------------------------------------------------------------------------
// Gramian helpers
// ---------------------------------------------------------------------------

/// Hermitian Gramian `K[i][j] = k(z_i, z_j)`, mirrored so the result is
/// exactly Hermitian.
pub fn hermitian_gramian(kern: &dyn ComplexKernel, points: &[Complex64]) -> HermitianMatrix {
    HermitianMatrix::from_fn(points.len(), |i, j| kern.hermitian(points[i], points[j]))
}

/// Complementary Gramian `Kt[i][j] = kt(z_i, z_j)`, symmetrized.
pub fn complementary_gramian(kern: &dyn ComplexKernel, points: &[Complex64]) -> Vec<Complex64> {
    let n = points.len();
    let mut out = vec![Complex64::ZERO; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kern.complementary(points[i], points[j]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}
