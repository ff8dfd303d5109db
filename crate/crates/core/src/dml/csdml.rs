use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use crate::array::{sample_covariance, ArrayGeometry, CovarianceMatrix, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::recovery::{
    build_grid, build_grid_explicit, estimate_noise_variance, recover, svd_reduce, AngleGrid,
    Dictionary, RecoveryMethod, RecoveryResult, SblOptions,
};

use super::newton::{newton_refine, NewtonConfig, NewtonDiagnostics};

/// How the coarse grid interval is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// `r = γ·BW_0.5/2`.
    Gamma(f64),
    /// Fixed interval in degrees.
    IntervalDeg(f64),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Gamma(0.5)
    }
}

impl GridSpec {
    pub fn build(&self, geom: &ArrayGeometry) -> Result<AngleGrid> {
        match *self {
            GridSpec::Gamma(g) => build_grid(geom, g),
            GridSpec::IntervalDeg(r) => build_grid_explicit(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsdmlOptions {
    pub method: Option<RecoveryMethod>,
    pub grid: GridSpec,
    pub newton: NewtonConfig,
    pub sbl: SblOptions,
}

impl CsdmlOptions {
    pub fn with_method(method: RecoveryMethod) -> Self {
        Self {
            method: Some(method),
            ..Self::default()
        }
    }

    fn method(&self) -> RecoveryMethod {
        self.method.unwrap_or(RecoveryMethod::Omp)
    }
}

/// Result of the on-grid stage.
#[derive(Debug, Clone)]
pub struct CoarseStage {
    pub grid: AngleGrid,
    pub recovery: RecoveryResult,
    /// Recovery time only; grid, dictionary and SVD set-up are excluded.
    pub elapsed: Duration,
}

/// Builds the grid and dictionary, SVD-reduces `x` to `k` columns and runs
/// the chosen recovery method on the reduced data.
///
/// For SBL without a known noise variance, σ² is estimated from the sample
/// covariance of `x`.
pub fn coarse_stage(
    x: &SnapshotMatrix,
    geom: &ArrayGeometry,
    k: usize,
    method: RecoveryMethod,
    grid: &GridSpec,
    sbl: &SblOptions,
) -> Result<CoarseStage> {
    if x.sensors() != geom.sensors() {
        return Err(Error::DimensionMismatch(format!(
            "snapshots have {} rows, array has {} sensors",
            x.sensors(),
            geom.sensors()
        )));
    }
    let grid = grid.build(geom)?;
    let dict = Dictionary::new(geom, &grid);
    let reduced = svd_reduce(x, k)?;
    let mut sbl = sbl.clone();
    if method == RecoveryMethod::Sbl && sbl.noise_variance.is_none() {
        sbl.noise_variance = Some(estimate_noise_variance(sample_covariance(x).data(), k));
    }

    let start = Instant::now();
    let recovery = recover(method, &dict, &grid, &reduced, k, &sbl)?;
    let elapsed = start.elapsed();
    Ok(CoarseStage {
        grid,
        recovery,
        elapsed,
    })
}

#[derive(Debug, Clone)]
pub struct RefineStage {
    pub estimate: Vec<f64>,
    pub newton: NewtonDiagnostics,
    /// Coincident or boundary starting values were nudged apart/inward.
    pub perturbed: bool,
    pub elapsed: Duration,
}

/// Newton refinement from coarse grid estimates.
///
/// Starting values closer than 1e-12 rad are spread `interval/4` apart, and
/// starts on the ±90° grid endpoints are moved `interval/4` inward; either
/// case sets `perturbed`.
pub fn refine_stage(
    geom: &ArrayGeometry,
    cov: &CovarianceMatrix,
    coarse: &[f64],
    k: usize,
    interval: f64,
    cfg: &NewtonConfig,
) -> Result<RefineStage> {
    if coarse.len() < k {
        return Err(Error::InsufficientPeaks {
            found: coarse.len(),
            expected: k,
        });
    }
    let mut init: Vec<f64> = coarse[..k].to_vec();
    init.sort_by(f64::total_cmp);
    let mut perturbed = false;
    let edge = FRAC_PI_2 - interval / 4.0;
    for t in init.iter_mut() {
        if t.abs() > edge {
            *t = t.clamp(-edge, edge);
            perturbed = true;
        }
    }
    for i in 1..init.len() {
        if init[i] - init[i - 1] < 1e-12 {
            init[i - 1] -= interval / 8.0;
            init[i] += interval / 8.0;
            perturbed = true;
        }
    }

    let start = Instant::now();
    let (estimate, newton) = newton_refine(geom, cov, &init, cfg)?;
    Ok(RefineStage {
        estimate,
        newton,
        perturbed,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct CsdmlDiagnostics {
    pub method: RecoveryMethod,
    pub grid_interval_deg: f64,
    /// Coarse DOAs from the on-grid stage, ascending, radians.
    pub coarse: Vec<f64>,
    pub recovery_iterations: usize,
    pub recovery_converged: bool,
    pub perturbed: bool,
    pub newton: NewtonDiagnostics,
    pub recovery_time: Duration,
    pub newton_time: Duration,
}

/// Two-stage off-grid DOA estimate from raw snapshots.
///
/// 1. Grid from `opts.grid` (default `γ = 0.5`) and its dictionary.
/// 2. Coarse DOAs by M-OMP or M-SBL on the SVD-reduced data.
/// 3. Those coarse DOAs start the Newton iteration.
/// 4. Newton steps on `tr(P⊥R̂)` until the step length drops below `tol`.
///
/// Returns the refined DOAs (radians, ascending).
pub fn csdml(
    x: &SnapshotMatrix,
    geom: &ArrayGeometry,
    k: usize,
    opts: &CsdmlOptions,
) -> Result<(Vec<f64>, CsdmlDiagnostics)> {
    let method = opts.method();
    let coarse = coarse_stage(x, geom, k, method, &opts.grid, &opts.sbl)?;
    let cov = sample_covariance(x);
    let refined = refine_stage(
        geom,
        &cov,
        &coarse.recovery.coarse_doas,
        k,
        coarse.grid.interval(),
        &opts.newton,
    )?;
    let diag = CsdmlDiagnostics {
        method,
        grid_interval_deg: coarse.grid.interval_deg(),
        coarse: coarse.recovery.coarse_doas.clone(),
        recovery_iterations: coarse.recovery.iterations,
        recovery_converged: coarse.recovery.converged,
        perturbed: refined.perturbed,
        newton: refined.newton,
        recovery_time: coarse.elapsed,
        newton_time: refined.elapsed,
    };
    Ok((refined.estimate, diag))
}
