//! Minimal dense complex Hermitian linear algebra.
//!
//! Just enough for the regression and excursion paths: Cholesky factorization
//! with escalating jitter, triangular solves, log-determinants, the augmented
//! real representation of complex Gaussian vectors, and a cyclic Jacobi
//! eigensolver for real symmetric matrices (used for PSD checks and as a test
//! oracle). No general eigen-solvers, sparsity, or pivoting.

use num_complex::Complex64;
use thiserror::Error;

/// Hermitian-symmetry validation tolerance for [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalue slack accepted by PSD checks.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix of dimension {n} is not Hermitian: |A[{i}][{j}] - conj(A[{j}][{i}])| = {deviation:.3e}")]
    NotHermitian {
        n: usize,
        i: usize,
        j: usize,
        deviation: f64,
    },
    #[error("Cholesky factorization failed for dimension {n} after jitter escalation up to {max_jitter:.3e}")]
    FactorizationFailed { n: usize, max_jitter: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("augmented real covariance fails the PSD check: min eigenvalue {min_eig:.3e}")]
    InvalidPair { min_eig: f64 },
}

/// Dense Hermitian matrix, row-major storage.
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Validates Hermitian symmetry within [`HERMITIAN_TOL`] (absolute).
    pub fn new(n: usize, entries: Vec<Complex64>) -> Result<Self, LinalgError> {
        assert_eq!(entries.len(), n * n, "entry count must be n^2");
        for i in 0..n {
            for j in i..n {
                let dev = (entries[i * n + j] - entries[j * n + i].conj()).norm();
                if dev > HERMITIAN_TOL {
                    return Err(LinalgError::NotHermitian { n, i, j, deviation: dev });
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds from the upper triangle of `f`, mirroring so the result is
    /// Hermitian by construction (diagonal imaginary parts are dropped).
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = vec![Complex64::ZERO; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if i == j {
                    entries[i * n + i] = Complex64::new(v.re, 0.0);
                } else {
                    entries[i * n + j] = v;
                    entries[j * n + i] = v.conj();
                }
            }
        }
        Self { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| {
            if i == j {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    /// Elementwise complex conjugate (equals the transpose for Hermitian input).
    pub fn conjugate(&self) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.get(i, j) * x[j])
                    .sum::<Complex64>()
            })
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace_real(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    /// All eigenvalues via the real symmetric embedding `[[X, -Y], [Y, X]]`
    /// (each eigenvalue of the Hermitian matrix appears twice), ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut m = vec![0.0; 4 * n * n];
        let dim = 2 * n;
        for i in 0..n {
            for j in 0..n {
                let z = self.get(i, j);
                m[i * dim + j] = z.re;
                m[i * dim + (n + j)] = -z.im;
                m[(n + i) * dim + j] = z.im;
                m[(n + i) * dim + (n + j)] = z.re;
            }
        }
        let mut eigs = sym_eigenvalues(dim, &m);
        // Doubled spectrum: keep every other value after sorting.
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eigs.into_iter().step_by(2).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Lower-triangular Cholesky factor of a Hermitian PSD matrix plus jitter.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// Row-major lower triangle (upper part zero).
    lower: Vec<Complex64>,
    /// Diagonal regularization that was added to make the factorization succeed.
    pub jitter_used: f64,
}

/// Factors `m + jI = L L^H`, where `j` is the smallest value in
/// `{0, base_jitter, base_jitter*10, ..., base_jitter*10^8}` for which the
/// factorization succeeds.
pub fn cholesky(m: &HermitianMatrix, base_jitter: f64) -> Result<CholeskyFactor, LinalgError> {
    assert!(base_jitter >= 0.0, "base_jitter must be nonnegative");
    let mut jitter = 0.0;
    let mut max_tried = 0.0;
    for step in 0..10 {
        if let Some(lower) = try_factor(m, jitter) {
            return Ok(CholeskyFactor {
                n: m.dim(),
                lower,
                jitter_used: jitter,
            });
        }
        max_tried = jitter;
        jitter = base_jitter * 10f64.powi(step);
        if jitter == 0.0 {
            break; // base_jitter == 0: nothing further to escalate
        }
    }
    Err(LinalgError::FactorizationFailed {
        n: m.dim(),
        max_jitter: max_tried,
    })
}

fn try_factor(m: &HermitianMatrix, jitter: f64) -> Option<Vec<Complex64>> {
    let n = m.dim();
    let mut l = vec![Complex64::ZERO; n * n];
    for j in 0..n {
        let mut d = m.get(j, j).re + jitter;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = m.get(i, j) + if i == j { Complex64::new(jitter, 0.0) } else { Complex64::ZERO };
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self, i: usize, j: usize) -> Complex64 {
        self.lower[i * self.n + j]
    }

    /// Solves `(L L^H) x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        // Forward: L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = self.lower[i * n + k];
                y[i] = y[i] - lik * y[k];
            }
            y[i] /= self.lower[i * n + i];
        }
        // Backward: L^H x = y
        let mut x = y;
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let lki = self.lower[k * n + i].conj();
                x[i] = x[i] - lki * x[k];
            }
            x[i] /= self.lower[i * n + i];
        }
        Ok(x)
    }

    /// `log det(m + jitter I) = 2 * sum(log diag(L))`.
    pub fn logdet(&self) -> f64 {
        (0..self.n)
            .map(|i| self.lower[i * self.n + i].re.ln())
            .sum::<f64>()
            * 2.0
    }

    /// Reconstructs `L L^H` (test support and residual diagnostics).
    pub fn reconstruct(&self) -> HermitianMatrix {
        let n = self.n;
        HermitianMatrix::from_fn(n, |i, j| {
            (0..=i.min(j))
                .map(|k| self.lower[i * n + k] * self.lower[j * n + k].conj())
                .sum()
        })
    }
}

/// Real symmetric matrix in row-major storage with its dimension carried
/// alongside; the augmented representation below and the Jacobi eigensolver
/// use this plain layout rather than a dedicated type.
pub type RealMatrix = Vec<f64>;

/// Covariance of the stacked real vector `(Re f_1..Re f_n, Im f_1..Im f_n)`
/// of a complex Gaussian vector with Hermitian covariance `k` and
/// complementary covariance `kt`:
///
/// ```text
/// Cov(Re_i, Re_j) = Re(k + kt)_ij / 2
/// Cov(Im_i, Im_j) = Re(k - kt)_ij / 2
/// Cov(Re_i, Im_j) = Im(kt - k)_ij / 2
/// ```
///
/// Returns the `2n x 2n` real symmetric matrix, or `InvalidPair` if its
/// minimum eigenvalue is below `-1e-8`.
pub fn augmented_real(
    k: &HermitianMatrix,
    kt: &[Complex64],
) -> Result<(usize, RealMatrix), LinalgError> {
    let n = k.dim();
    assert_eq!(kt.len(), n * n, "complementary matrix must be n^2");
    for i in 0..n {
        for j in 0..n {
            debug_assert!(
                (kt[i * n + j] - kt[j * n + i]).norm() <= 1e-9,
                "complementary covariance must be symmetric"
            );
        }
    }
    let dim = 2 * n;
    let mut out = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            let kij = k.get(i, j);
            let ktij = kt[i * n + j];
            let kx = 0.5 * (kij + ktij).re;
            let ky = 0.5 * (kij - ktij).re;
            let kc = 0.5 * (ktij - kij).im;
            out[i * dim + j] = kx;
            out[(n + i) * dim + (n + j)] = ky;
            out[i * dim + (n + j)] = kc;
            out[(n + j) * dim + i] = kc;
        }
    }
    let min_eig = sym_eigenvalues(dim, &out)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL {
        return Err(LinalgError::InvalidPair { min_eig });
    }
    Ok((dim, out))
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
/// Intended for small diagnostic problems (n up to a few hundred).
pub fn sym_eigenvalues(n: usize, m: &[f64]) -> Vec<f64> {
    assert_eq!(m.len(), n * n);
    let mut a = m.to_vec();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/cols p and q.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

/// Solves the real symmetric system `A x = b` by routing through the complex
/// Cholesky path (oracle and plumbing use; A must be PSD up to jitter).
pub fn solve_real_spd(n: usize, a: &[f64], b: &[f64], base_jitter: f64) -> Result<Vec<f64>, LinalgError> {
    let m = HermitianMatrix::from_fn(n, |i, j| Complex64::new(a[i * n + j], 0.0));
    let f = cholesky(&m, base_jitter)?;
    let bc: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    Ok(f.solve(&bc)?.into_iter().map(|z| z.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        // G G^H is PSD for any complex G.
        let g: Vec<Complex64> = (0..n * n)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        HermitianMatrix::from_fn(n, |i, j| {
            (0..n).map(|k| g[i * n + k] * g[j * n + k].conj()).sum()
        })
    }

    #[test]
    fn identity_factors_without_jitter() {
        let m = HermitianMatrix::identity(2);
        let f = cholesky(&m, 1e-10).unwrap();
        assert_eq!(f.jitter_used, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((f.lower(i, j) - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn diagonal_factor_is_sqrt() {
        let m = HermitianMatrix::from_fn(2, |i, j| {
            if i == j {
                c(2.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let f = cholesky(&m, 0.0).unwrap();
        assert!((f.lower(0, 0).re - 2f64.sqrt()).abs() < 1e-15);
        assert!((f.lower(1, 1).re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rank_one_psd_needs_small_jitter() {
        let m = HermitianMatrix::from_fn(2, |_, _| c(2.0, 0.0));
        let f = cholesky(&m, 1e-10).unwrap();
        assert!(f.jitter_used <= 1e-6);
        let rec = f.reconstruct();
        let mut err = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let target = m.get(i, j)
                    + if i == j {
                        c(f.jitter_used, 0.0)
                    } else {
                        Complex64::ZERO
                    };
                err += (rec.get(i, j) - target).norm_sqr();
            }
        }
        assert!(err.sqrt() <= 1e-8 * m.frobenius_norm());
    }

    #[test]
    fn factorization_failure_reports_error() {
        // Strongly indefinite matrix: jitter ladder cannot rescue it.
        let m = HermitianMatrix::from_fn(2, |i, j| {
            if i == j {
                c(-1e12, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let err = cholesky(&m, 1e-10).unwrap_err();
        assert!(matches!(err, LinalgError::FactorizationFailed { .. }));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let f = cholesky(&HermitianMatrix::identity(2), 0.0).unwrap();
        let b = vec![c(1.0, 1.0), c(2.0, 0.0)];
        let x = f.solve(&b).unwrap();
        assert!((x[0] - c(1.0, 1.0)).norm() < 1e-15);
        assert!((x[1] - c(2.0, 0.0)).norm() < 1e-15);

        let d = HermitianMatrix::from_fn(2, |i, j| if i == j { c(2.0, 0.0) } else { c(0.0, 0.0) });
        let f = cholesky(&d, 0.0).unwrap();
        let x = f.solve(&[c(2.0, 0.0), c(0.0, 4.0)]).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - c(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn solve_dimension_mismatch() {
        let f = cholesky(&HermitianMatrix::identity(3), 0.0).unwrap();
        assert!(matches!(
            f.solve(&[Complex64::ONE]),
            Err(LinalgError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn solve_residual_on_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_psd(5, &mut rng);
            // Make it comfortably positive definite.
            let m = HermitianMatrix::from_fn(5, |i, j| {
                m.get(i, j) + if i == j { c(0.5, 0.0) } else { Complex64::ZERO }
            });
            let b: Vec<Complex64> = (0..5)
                .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let f = cholesky(&m, 1e-12).unwrap();
            let x = f.solve(&b).unwrap();
            let ax = m.matvec(&x);
            let jx: Vec<Complex64> = x.iter().map(|z| z * f.jitter_used).collect();
            let res: f64 = ax
                .iter()
                .zip(&jx)
                .zip(&b)
                .map(|((a, j), b)| (a + j - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let bnorm: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-8 * bnorm, "residual {res} too large");
        }
    }

    #[test]
    fn logdet_matches_known_and_eigen_oracle() {
        let f = cholesky(&HermitianMatrix::identity(4), 0.0).unwrap();
        assert!(f.logdet().abs() < 1e-14);

        let d = HermitianMatrix::from_fn(2, |i, j| if i == j { c(2.0, 0.0) } else { c(0.0, 0.0) });
        let f = cholesky(&d, 0.0).unwrap();
        assert!((f.logdet() - 4f64.ln()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_psd(6, &mut rng);
            let m = HermitianMatrix::from_fn(6, |i, j| {
                m.get(i, j) + if i == j { c(1.0, 0.0) } else { Complex64::ZERO }
            });
            let f = cholesky(&m, 0.0).unwrap();
            let eig_logdet: f64 = m.eigenvalues().iter().map(|e| e.ln()).sum();
            assert!(
                (f.logdet() - eig_logdet).abs() <= 1e-8 * eig_logdet.abs().max(1.0),
                "cholesky logdet {} vs eigen oracle {}",
                f.logdet(),
                eig_logdet
            );
        }
    }

    #[test]
    fn augmented_real_examples() {
        // Fully improper scalar: all mass on the real part.
        let k = HermitianMatrix::from_fn(1, |_, _| c(2.0, 0.0));
        let (dim, m) = augmented_real(&k, &[c(2.0, 0.0)]).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(m, vec![2.0, 0.0, 0.0, 0.0]);

        // Proper scalar: equal halves.
        let (_, m) = augmented_real(&k, &[c(0.0, 0.0)]).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 0.0, 1.0]);

        // Zero matrices.
        let k0 = HermitianMatrix::from_fn(1, |_, _| Complex64::ZERO);
        let (_, m) = augmented_real(&k0, &[Complex64::ZERO]).unwrap();
        assert_eq!(m, vec![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn augmented_real_rejects_invalid_pair() {
        // |kt| > k on the diagonal cannot come from any complex Gaussian.
        let k = HermitianMatrix::from_fn(1, |_, _| c(1.0, 0.0));
        let err = augmented_real(&k, &[c(3.0, 0.0)]).unwrap_err();
        assert!(matches!(err, LinalgError::InvalidPair { .. }));
    }

    #[test]
    fn jacobi_eigenvalues_match_known() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let eigs = sym_eigenvalues(2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((eigs[0] - 1.0).abs() < 1e-12);
        assert!((eigs[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_match_trace_and_det() {
        let m = HermitianMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(3.0, 0.0),
            _ => c(0.5, 0.7),
        });
        let eigs = m.eigenvalues();
        assert_eq!(eigs.len(), 2);
        let tr = eigs[0] + eigs[1];
        let det = eigs[0] * eigs[1];
        assert!((tr - 5.0).abs() < 1e-10);
        // det = 2*3 - |0.5 + 0.7i|^2
        assert!((det - (6.0 - (0.25 + 0.49))).abs() < 1e-10);
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let entries = vec![c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            HermitianMatrix::new(2, entries),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    proptest! {
        #[test]
        fn cholesky_reconstructs_random_psd(seed in 0u64..500, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_psd(n, &mut rng);
            let f = cholesky(&m, 1e-12).unwrap();
            let rec = f.reconstruct();
            let mut err = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let target = m.get(i, j)
                        + if i == j { c(f.jitter_used, 0.0) } else { Complex64::ZERO };
                    err += (rec.get(i, j) - target).norm_sqr();
                }
            }
            let scale = m.frobenius_norm().max(1e-12);
            prop_assert!(err.sqrt() <= 1e-8 * scale);
        }
    }
}
