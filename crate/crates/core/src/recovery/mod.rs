//! Coarse on-grid DOA estimation.
//!
//! A uniform angle grid over [-90°, 90°] defines an overcomplete dictionary
//! `Ψ = [a(Θ_1) ⋯ a(Θ_N)]`. The snapshot matrix is first reduced to its `K`
//! dominant singular directions, then a simultaneous sparse solver picks `K`
//! grid atoms.

mod omp;
mod sbl;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::array::{ArrayGeometry, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub use omp::m_omp;
pub use sbl::{estimate_noise_variance, m_sbl, SblOptions};

/// Uniform grid `{-90°, -90°+r, …, 90°}`, stored in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    angles: Vec<f64>,
    interval_deg: f64,
    gamma: Option<f64>,
}

impl AngleGrid {
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Grid interval `r` in degrees.
    pub fn interval_deg(&self) -> f64 {
        self.interval_deg
    }

    pub fn interval(&self) -> f64 {
        self.interval_deg.to_radians()
    }

    /// Regulation parameter used to derive the interval, if any.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// Angle of grid point `index`, in degrees, computed without going
    /// through radians.
    pub fn angle_deg(&self, index: usize) -> f64 {
        -90.0 + index as f64 * self.interval_deg
    }

    /// Nearest grid index to `angle_deg`; exact midpoints go to the lower
    /// grid point.
    pub fn nearest_index(&self, angle_deg: f64) -> usize {
        let pos = (angle_deg + 90.0) / self.interval_deg;
        let lower = pos.floor().max(0.0);
        let idx = if pos - lower > 0.5 { lower + 1.0 } else { lower };
        (idx as usize).min(self.len() - 1)
    }

    fn uniform(interval_deg: f64, gamma: Option<f64>) -> Self {
        let ratio = 180.0 / interval_deg;
        let steps = if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.floor() as usize
        };
        let angles = (0..=steps)
            .map(|k| (-90.0 + k as f64 * interval_deg).to_radians())
            .collect();
        Self {
            angles,
            interval_deg,
            gamma,
        }
    }
}

/// Grid with interval `r = γ·BW_0.5/2`, snapped down so that `180°/r` is an
/// integer and both ±90° are grid points.
pub fn build_grid(geom: &ArrayGeometry, gamma: f64) -> Result<AngleGrid> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} not in (0, 1]")));
    }
    let raw = gamma * geom.half_power_beamwidth()?.to_degrees() / 2.0;
    let steps = (180.0 / raw - 1e-9).ceil();
    Ok(AngleGrid::uniform(180.0 / steps, Some(gamma)))
}

/// Grid at a caller-chosen interval in degrees, `0 < r ≤ 30`.
pub fn build_grid_explicit(interval_deg: f64) -> Result<AngleGrid> {
    if !(interval_deg > 0.0 && interval_deg <= 30.0) {
        return Err(Error::InvalidParameter(format!(
            "grid interval {interval_deg}° not in (0, 30]"
        )));
    }
    Ok(AngleGrid::uniform(interval_deg, None))
}

/// `Ψ`: one unit-norm steering column per grid angle.
#[derive(Debug, Clone)]
pub struct Dictionary {
    psi: CMatrix,
}

impl Dictionary {
    pub fn new(geom: &ArrayGeometry, grid: &AngleGrid) -> Self {
        Self {
            psi: geom.columns(grid.angles(), |g, t| g.steering_unchecked(t)),
        }
    }

    pub fn psi(&self) -> &CMatrix {
        &self.psi
    }

    pub fn atoms(&self) -> usize {
        self.psi.ncols()
    }
}

/// Projects `X` onto its `K` dominant right singular vectors: `X·V_K`.
///
/// Columns come out in order of descending singular value. Equivalent to
/// `U_K·S_K`.
pub fn svd_reduce(x: &SnapshotMatrix, k: usize) -> Result<CMatrix> {
    if k == 0 || x.snapshots() < k {
        return Err(Error::InvalidParameter(format!(
            "SVD reduction to {k} columns needs at least {k} snapshots, got {}",
            x.snapshots()
        )));
    }
    let svd = x.data().clone().svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut out = CMatrix::zeros(x.sensors(), k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let s = Complex64::new(svd.singular_values[idx], 0.0);
        out.set_column(col, &(u.column(idx) * s));
    }
    Ok(out)
}

/// Output of a coarse recovery run. `coarse_doas` is ascending and
/// `support`/`coefficients` rows follow the same order.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub support: Vec<usize>,
    pub coarse_doas: Vec<f64>,
    pub coefficients: CMatrix,
    pub iterations: usize,
    /// False when an iterative solver hit its iteration cap, or when the
    /// input carried no signal.
    pub converged: bool,
}

impl RecoveryResult {
    pub(crate) fn from_support(
        grid: &AngleGrid,
        mut support: Vec<usize>,
        coefficients: CMatrix,
        iterations: usize,
        converged: bool,
    ) -> Self {
        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by_key(|&i| support[i]);
        let coefficients = if coefficients.nrows() == support.len() {
            CMatrix::from_fn(support.len(), coefficients.ncols(), |r, c| {
                coefficients[(order[r], c)]
            })
        } else {
            coefficients
        };
        support.sort_unstable();
        let coarse_doas = support.iter().map(|&i| grid.angles()[i]).collect();
        Self {
            support,
            coarse_doas,
            coefficients,
            iterations,
            converged,
        }
    }

    pub(crate) fn empty(cols: usize) -> Self {
        Self {
            support: Vec::new(),
            coarse_doas: Vec::new(),
            coefficients: CMatrix::zeros(0, cols),
            iterations: 0,
            converged: false,
        }
    }
}

/// Coarse-stage solver selector. Parses from `omp` or `sbl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecoveryMethod {
    Omp,
    Sbl,
}

impl RecoveryMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryMethod::Omp => "omp",
            RecoveryMethod::Sbl => "sbl",
        }
    }
}

impl fmt::Display for RecoveryMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecoveryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "omp" => Ok(RecoveryMethod::Omp),
            "sbl" => Ok(RecoveryMethod::Sbl),
            other => Err(Error::Config(format!("unknown recovery method '{other}'"))),
        }
    }
}

/// Runs the selected solver on `y`.
pub fn recover(
    method: RecoveryMethod,
    dict: &Dictionary,
    grid: &AngleGrid,
    y: &CMatrix,
    k: usize,
    sbl: &SblOptions,
) -> Result<RecoveryResult> {
    match method {
        RecoveryMethod::Omp => m_omp(dict, grid, y, k),
        RecoveryMethod::Sbl => m_sbl(dict, grid, y, k, sbl),
    }
}
