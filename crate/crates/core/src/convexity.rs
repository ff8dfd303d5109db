//! Where is the DML criterion convex around the true DOAs?
//!
//! [`exact_region`] scans a uniform lattice of candidate DOA vectors around
//! the truth and keeps the cells whose full Hessian is positive
//! semidefinite. [`approx_region`] builds the cheap approximation: either
//! the cells where every `β_i = |a(ϑ_i)ᴴa(θ_i)|²` is at least 0.5, or a box
//! of per-axis width `BW_0.5/2`. [`irr_iar`] compares the two by cell count.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::array::{
    exact_covariance, sample_covariance, synthesize_snapshots, ArrayGeometry, CovarianceMatrix,
    SourceScenario,
};
use crate::dml::{dml_hessian, ProjectorBundle};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

/// Threshold on `β_i` for the approximate convex region.
pub const BETA_THRESHOLD: f64 = 0.5;

/// Lattice of candidate DOA vectors centred on the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionScanSpec {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub step: Vec<f64>,
    /// Cell is convex when `λ_min(H) ≥ −psd_tolerance·‖H‖₂`.
    pub psd_tolerance: f64,
}

impl RegionScanSpec {
    /// Half-width `BW_0.5` and step `BW_0.5/40` on every axis.
    pub fn around(geom: &ArrayGeometry, center: &[f64]) -> Result<Self> {
        let bw = geom.half_power_beamwidth()?;
        let k = center.len();
        Ok(Self {
            center: center.to_vec(),
            half_width: vec![bw; k],
            step: vec![bw / 40.0; k],
            psd_tolerance: 1e-8,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.center.len();
        if k == 0 || self.half_width.len() != k || self.step.len() != k {
            return Err(Error::InvalidParameter(
                "scan spec needs one half-width and step per DOA".into(),
            ));
        }
        for (h, s) in self.half_width.iter().zip(&self.step) {
            if !(*s > 0.0) || !(*h >= *s) {
                return Err(Error::InvalidParameter(format!(
                    "scan step {s} must be positive and not exceed half-width {h}"
                )));
            }
        }
        if !(self.psd_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("negative PSD tolerance".into()));
        }
        Ok(())
    }

    fn lattice(&self) -> Lattice {
        let radius: Vec<usize> = self
            .half_width
            .iter()
            .zip(&self.step)
            .map(|(h, s)| (h / s + 1e-9).floor() as usize)
            .collect();
        Lattice { radius }
    }
}

/// Row-major index space `∏ (2·radius_i + 1)`; the centre cell has offset 0
/// on every axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    radius: Vec<usize>,
}

impl Lattice {
    pub fn dims(&self) -> Vec<usize> {
        self.radius.iter().map(|r| 2 * r + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Signed per-axis offsets of a flat index.
    pub fn offsets(&self, mut flat: usize) -> Vec<i64> {
        let dims = self.dims();
        let mut out = vec![0i64; dims.len()];
        for axis in (0..dims.len()).rev() {
            out[axis] = (flat % dims[axis]) as i64 - self.radius[axis] as i64;
            flat /= dims[axis];
        }
        out
    }

    pub fn flat(&self, offsets: &[i64]) -> Option<usize> {
        let dims = self.dims();
        let mut flat = 0usize;
        for (axis, &o) in offsets.iter().enumerate() {
            let shifted = o + self.radius[axis] as i64;
            if shifted < 0 || shifted as usize >= dims[axis] {
                return None;
            }
            flat = flat * dims[axis] + shifted as usize;
        }
        Some(flat)
    }

    pub fn center(&self) -> usize {
        self.flat(&vec![0; self.radius.len()]).expect("centre is on the lattice")
    }
}

/// A set of lattice cells; its measure is the cell count.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRegion {
    lattice: Lattice,
    mask: Vec<bool>,
}

impl ConvexRegion {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn measure(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.mask.get(flat).copied().unwrap_or(false)
    }

    pub fn contains_offsets(&self, offsets: &[i64]) -> bool {
        self.lattice.flat(offsets).is_some_and(|f| self.mask[f])
    }

    /// Member cells as signed per-axis offsets from the centre.
    pub fn cells(&self) -> Vec<Vec<i64>> {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.lattice.offsets(i))
            .collect()
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::DimensionMismatch("regions on different lattices".into()));
        }
        Ok(Self {
            lattice: self.lattice.clone(),
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect(),
        })
    }

    /// Face-connected component containing `flat` (empty if `flat` is not
    /// a member).
    pub fn component_containing(&self, flat: usize) -> Self {
        let mut mask = vec![false; self.mask.len()];
        if self.contains(flat) {
            let k = self.lattice.radius.len();
            let mut queue = VecDeque::from([flat]);
            mask[flat] = true;
            while let Some(cell) = queue.pop_front() {
                let base = self.lattice.offsets(cell);
                for axis in 0..k {
                    for delta in [-1i64, 1] {
                        let mut next = base.clone();
                        next[axis] += delta;
                        if let Some(n) = self.lattice.flat(&next) {
                            if self.mask[n] && !mask[n] {
                                mask[n] = true;
                                queue.push_back(n);
                            }
                        }
                    }
                }
            }
        }
        Self {
            lattice: self.lattice.clone(),
            mask,
        }
    }

    /// Number of lattice steps spanned on each axis, `max − min + 1`.
    pub fn axis_extent(&self) -> Vec<usize> {
        let k = self.lattice.radius.len();
        let mut lo = vec![i64::MAX; k];
        let mut hi = vec![i64::MIN; k];
        for cell in self.cells() {
            for axis in 0..k {
                lo[axis] = lo[axis].min(cell[axis]);
                hi[axis] = hi[axis].max(cell[axis]);
            }
        }
        (0..k)
            .map(|a| if hi[a] >= lo[a] { (hi[a] - lo[a] + 1) as usize } else { 0 })
            .collect()
    }

    /// Any member cell on the outer face of the lattice.
    pub fn touches_boundary(&self) -> bool {
        self.cells().iter().any(|c| {
            c.iter()
                .zip(&self.lattice.radius)
                .any(|(&o, &r)| o.unsigned_abs() as usize == r)
        })
    }
}

/// Per-cell Hessian scan result.
#[derive(Debug, Clone)]
pub struct HessianScan {
    pub spec: RegionScanSpec,
    lattice: Lattice,
    /// `λ_min(H)` per cell; NaN where the projector could not be formed.
    pub lambda_min: Vec<f64>,
    pub in_exact: Vec<bool>,
    /// Cells skipped as ill-conditioned or outside ±90°.
    pub degenerate_cells: usize,
}

impl HessianScan {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn region(&self) -> ConvexRegion {
        ConvexRegion {
            lattice: self.lattice.clone(),
            mask: self.in_exact.clone(),
        }
    }

    /// DOA vector (radians) at a flat cell index.
    pub fn cell_angles(&self, flat: usize) -> Vec<f64> {
        cell_angles(&self.spec, &self.lattice, flat)
    }
}

fn cell_angles(spec: &RegionScanSpec, lattice: &Lattice, flat: usize) -> Vec<f64> {
    lattice
        .offsets(flat)
        .iter()
        .zip(spec.center.iter().zip(&spec.step))
        .map(|(&o, (c, s))| c + o as f64 * s)
        .collect()
}

/// Evaluates the full Hessian at every lattice cell.
pub fn scan_hessian(
    geom: &ArrayGeometry,
    cov: &CovarianceMatrix,
    spec: &RegionScanSpec,
) -> Result<HessianScan> {
    spec.validate()?;
    if cov.dim() != geom.sensors() {
        return Err(Error::DimensionMismatch("covariance does not match array".into()));
    }
    let lattice = spec.lattice();
    let cells: Vec<(f64, bool)> = (0..lattice.len())
        .into_par_iter()
        .map(|flat| {
            let angles = cell_angles(spec, &lattice, flat);
            match ProjectorBundle::new(geom, &angles) {
                Ok(bundle) => {
                    let h = dml_hessian(&bundle, cov);
                    let ev = symmetric_eigenvalues(&h);
                    let norm = ev.iter().map(|e| e.abs()).fold(0.0, f64::max);
                    (ev[0], ev[0] >= -spec.psd_tolerance * norm)
                }
                Err(_) => (f64::NAN, false),
            }
        })
        .collect();
    let degenerate_cells = cells.iter().filter(|(l, _)| l.is_nan()).count();
    let (lambda_min, in_exact) = cells.into_iter().unzip();
    Ok(HessianScan {
        spec: spec.clone(),
        lattice,
        lambda_min,
        in_exact,
        degenerate_cells,
    })
}

/// `Ω_R`: cells where the full Hessian is positive semidefinite.
pub fn exact_region(
    geom: &ArrayGeometry,
    cov: &CovarianceMatrix,
    spec: &RegionScanSpec,
) -> Result<ConvexRegion> {
    Ok(scan_hessian(geom, cov, spec)?.region())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ApproxMode {
    /// `β_i ≥ 0.5` on every axis.
    #[default]
    Criterion,
    /// Box of per-axis width `BW_0.5/2` centred on the truth.
    HalfBeamwidth,
}

impl ApproxMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ApproxMode::Criterion => "criterion",
            ApproxMode::HalfBeamwidth => "half_beamwidth",
        }
    }
}

impl fmt::Display for ApproxMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApproxMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "criterion" => Ok(ApproxMode::Criterion),
            "half_beamwidth" | "half-beamwidth" => Ok(ApproxMode::HalfBeamwidth),
            other => Err(Error::Config(format!("unknown approximation mode '{other}'"))),
        }
    }
}

/// `β_i = |a(ϑ_i)ᴴ a(θ_i)|²` for each source.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityCondition {
    pub beta: Vec<f64>,
}

impl ConvexityCondition {
    pub fn at(geom: &ArrayGeometry, truth: &[f64], vartheta: &[f64]) -> Result<Self> {
        if truth.len() != vartheta.len() {
            return Err(Error::DimensionMismatch("truth and candidate lengths differ".into()));
        }
        let beta = truth
            .iter()
            .zip(vartheta)
            .map(|(&t, &v)| Ok(geom.steering_vector(v)?.dotc(&geom.steering_vector(t)?).norm_sqr()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { beta })
    }

    pub fn satisfied(&self) -> bool {
        self.beta.iter().all(|&b| b >= BETA_THRESHOLD)
    }
}

/// `Ω_A` on the same lattice as [`exact_region`]. Only the geometry and the
/// true DOAs (`spec.center`) enter; the covariance does not.
pub fn approx_region(
    geom: &ArrayGeometry,
    spec: &RegionScanSpec,
    mode: ApproxMode,
) -> Result<ConvexRegion> {
    spec.validate()?;
    let lattice = spec.lattice();
    let k = spec.center.len();
    // Both modes factor over axes.
    let mut axis_ok: Vec<Vec<bool>> = Vec::with_capacity(k);
    let quarter_bw = match mode {
        ApproxMode::HalfBeamwidth => Some(geom.half_power_beamwidth()? / 4.0),
        ApproxMode::Criterion => None,
    };
    for axis in 0..k {
        let r = lattice.radius[axis] as i64;
        let truth = spec.center[axis];
        let a_true = geom.steering_unchecked(truth);
        let ok = (-r..=r)
            .map(|o| {
                let offset = o as f64 * spec.step[axis];
                match quarter_bw {
                    Some(q) => offset.abs() <= q * (1.0 + 1e-12),
                    None => {
                        let v = truth + offset;
                        crate::array::check_angle(v).is_ok()
                            && geom.steering_unchecked(v).dotc(&a_true).norm_sqr() >= BETA_THRESHOLD
                    }
                }
            })
            .collect();
        axis_ok.push(ok);
    }
    let mask = (0..lattice.len())
        .map(|flat| {
            lattice
                .offsets(flat)
                .iter()
                .enumerate()
                .all(|(axis, &o)| axis_ok[axis][(o + lattice.radius[axis] as i64) as usize])
        })
        .collect();
    Ok(ConvexRegion { lattice, mask })
}

/// `IRR = (|Ω_I|/|Ω_R|)^{1/K}` and `IAR = (|Ω_I|/|Ω_A|)^{1/K}` with
/// `Ω_I = Ω_R ∩ Ω_A`.
pub fn irr_iar(exact: &ConvexRegion, approx: &ConvexRegion, k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    let inter = exact.intersection(approx)?.measure() as f64;
    let (r, a) = (exact.measure(), approx.measure());
    if r == 0 || a == 0 {
        return Err(Error::UndefinedMetric(format!(
            "empty region (|Ω_R| = {r}, |Ω_A| = {a})"
        )));
    }
    let root = 1.0 / k as f64;
    Ok(((inter / r as f64).powf(root), (inter / a as f64).powf(root)))
}

/// Which covariance the exact region is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceSource {
    Exact,
    #[default]
    Sample,
}

impl FromStr for CovarianceSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(CovarianceSource::Exact),
            "sample" => Ok(CovarianceSource::Sample),
            other => Err(Error::Config(format!("unknown covariance source '{other}'"))),
        }
    }
}

/// IRR/IAR for one trial under each requested approximation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub trial: usize,
    pub exact_measure: usize,
    pub per_mode: Vec<(ApproxMode, f64, f64)>,
}

/// Runs `trials` independent IRR/IAR evaluations. Trial `t` draws its data
/// with seed `base_seed ^ t`; an exact covariance makes every trial equal.
pub fn irr_iar_trials(
    geom: &ArrayGeometry,
    scenario: &SourceScenario,
    source: CovarianceSource,
    modes: &[ApproxMode],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<TrialMetrics>> {
    let spec = RegionScanSpec::around(geom, scenario.doas())?;
    let approx = modes
        .iter()
        .map(|&m| Ok((m, approx_region(geom, &spec, m)?)))
        .collect::<Result<Vec<_>>>()?;
    let k = scenario.num_sources();
    (0..trials)
        .map(|trial| {
            let cov = match source {
                CovarianceSource::Exact => exact_covariance(geom, scenario)?,
                CovarianceSource::Sample => {
                    sample_covariance(&synthesize_snapshots(geom, scenario, base_seed ^ trial as u64)?)
                }
            };
            let exact = exact_region(geom, &cov, &spec)?;
            let per_mode = approx
                .iter()
                .map(|(m, a)| {
                    let (irr, iar) = irr_iar(&exact, a, k)?;
                    Ok((*m, irr, iar))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrialMetrics {
                trial,
                exact_measure: exact.measure(),
                per_mode,
            })
        })
        .collect()
}
