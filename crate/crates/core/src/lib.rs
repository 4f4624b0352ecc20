//! Numerical toolkit for conjugate-symmetric H-infinity Gaussian processes.
//!
//! The crate covers four workflows around z-domain Gaussian process models of
//! stable LTI systems:
//!
//! * [`kernels`] constructs Hermitian/complementary covariance pairs with the
//!   on-circle angular derivatives needed by crossing-rate formulas.
//! * [`sampling`] draws transfer-function realizations on frequency grids.
//! * [`regression`] performs complex-valued GP regression (strictly and widely
//!   linear estimators), marginal-likelihood hyperparameter fitting, and
//!   confidence ellipsoids, with [`sysid`] generating frequency-domain data
//!   from time traces via a windowed DFT filter bank.
//! * [`excursion`] computes expected gain-upcrossing counts and excursion
//!   probability bounds, including the IQC-to-gain reduction, validated by the
//!   Monte Carlo harness in [`montecarlo`].
//!
//! Dense complex linear algebra shared by these modules lives in [`linalg`].

pub mod excursion;
pub mod kernels;
pub mod linalg;
pub mod montecarlo;
pub mod regression;
pub mod sampling;
pub mod spline;
pub mod sysid;

pub use excursion::{ExcursionQuery, ExcursionReport, MultiplierGrid};
pub use kernels::{ComplexKernel, KernelSpec, SequenceSpec};
pub use linalg::{CholeskyFactor, HermitianMatrix};
pub use montecarlo::McReport;
pub use regression::{ConfidenceEllipsoid, Dataset, PosteriorPrediction, RegressionModel};
pub use sampling::{FrequencyGrid, Realization};
pub use sysid::{DiscretePlant, FilterBankConfig};
