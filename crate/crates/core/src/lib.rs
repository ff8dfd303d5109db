//! Off-grid direction-of-arrival estimation.
//!
//! The pipeline has two stages. A sparse-recovery method (M-OMP or M-SBL)
//! picks coarse DOAs on a uniform angle grid whose spacing is tied to the
//! array's half-power beamwidth, and a safeguarded Newton iteration then
//! minimizes the deterministic maximum-likelihood criterion `tr(P⊥R)`
//! starting from those coarse values.
//!
//! Modules:
//!
//! * [`array`]: geometry, steering vectors, snapshot synthesis, covariances.
//! * [`recovery`]: angle grids, dictionaries, SVD reduction, M-OMP, M-SBL.
//! * [`dml`]: projector workspace, DML objective/gradient/Hessian, Newton
//!   refinement and the two-stage [`dml::csdml`] driver.
//! * [`convexity`]: scans of the positive-semidefinite Hessian region and
//!   its beamwidth-based approximation, IRR/IAR agreement metrics.
//! * [`harness`]: Monte Carlo sweeps, RMSE, grid lower bounds, CRB, CSV.
//!
//! All angles are radians inside the library. Degrees appear only in
//! configuration parsing and CSV output.

pub mod array;
pub mod convexity;
pub mod dml;
mod error;
pub mod harness;
pub mod linalg;
pub mod recovery;

pub use array::{ArrayGeometry, CovarianceKind, CovarianceMatrix, SnapshotMatrix, SourceScenario};
pub use convexity::{ApproxMode, ConvexRegion, ConvexityCondition, RegionScanSpec};
pub use dml::{
    csdml, newton_refine, CsdmlDiagnostics, CsdmlOptions, DmlEvaluation, GridSpec, NewtonConfig,
    NewtonDiagnostics, ProjectorBundle,
};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentResult, Method, SweepVar};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
pub use recovery::{AngleGrid, Dictionary, RecoveryMethod, RecoveryResult, SblOptions};
