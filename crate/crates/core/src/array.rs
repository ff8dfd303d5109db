//! Array geometry, steering vectors and their angle derivatives, snapshot
//! synthesis and covariance construction.
//!
//! Sensor positions are stored in wavelengths, so the carrier wavelength is
//! normalized to 1 and only `d/λ` ever enters a phase term. Steering vectors
//! are unit-norm: `a_m(θ) = exp(-j·2π·sin θ·d_m) / √M`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, CMatrix, CVector};

/// Spacing of the uniform linear arrays built by [`ArrayGeometry::ula`].
pub const HALF_WAVELENGTH: f64 = 0.5;

/// Checks that an angle lies in the open interval (-π/2, π/2).
pub fn check_angle(angle: f64) -> Result<()> {
    if angle.is_finite() && angle.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange(angle))
    }
}

/// One-dimensional sensor array. Positions are in wavelengths and strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
}

impl ArrayGeometry {
    /// Half-wavelength ULA with its origin at the first sensor.
    pub fn ula(sensors: usize) -> Result<Self> {
        Self::from_positions((0..sensors).map(|m| m as f64 * HALF_WAVELENGTH).collect())
    }

    /// Half-wavelength ULA with its origin at the array midpoint.
    pub fn ula_centered(sensors: usize) -> Result<Self> {
        let mid = (sensors.saturating_sub(1)) as f64 * HALF_WAVELENGTH / 2.0;
        Self::from_positions(
            (0..sensors)
                .map(|m| m as f64 * HALF_WAVELENGTH - mid)
                .collect(),
        )
    }

    pub fn from_positions(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 sensors, got {}",
                positions.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite sensor position".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry(
                "sensor positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Number of sensors `M`.
    pub fn sensors(&self) -> usize {
        self.positions.len()
    }

    /// Same array with every sensor shifted by `offset` wavelengths.
    pub fn translated(&self, offset: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
        }
    }

    pub fn steering_vector(&self, angle: f64) -> Result<CVector> {
        check_angle(angle)?;
        Ok(self.steering_unchecked(angle))
    }

    /// Steering vector without the open-interval check. Used for grid
    /// dictionaries, which include the endpoints ±90°.
    pub(crate) fn steering_unchecked(&self, angle: f64) -> CVector {
        let norm = 1.0 / (self.sensors() as f64).sqrt();
        let s = angle.sin();
        CVector::from_iterator(
            self.sensors(),
            self.positions
                .iter()
                .map(|&d| Complex64::from_polar(norm, -2.0 * PI * s * d)),
        )
    }

    /// `a′(θ)`, element `m` = `-j·2π·cos θ·d_m·a_m(θ)`.
    pub fn steering_derivative(&self, angle: f64) -> Result<CVector> {
        check_angle(angle)?;
        Ok(self.derivative_unchecked(angle))
    }

    pub(crate) fn derivative_unchecked(&self, angle: f64) -> CVector {
        let a = self.steering_unchecked(angle);
        let c = angle.cos();
        CVector::from_iterator(
            self.sensors(),
            self.positions
                .iter()
                .zip(a.iter())
                .map(|(&d, &am)| Complex64::new(0.0, -2.0 * PI * c * d) * am),
        )
    }

    /// `a″(θ)`, element `m` = `(j·2π·sin θ·d_m + (-j·2π·cos θ·d_m)²)·a_m(θ)`.
    pub fn steering_second_derivative(&self, angle: f64) -> Result<CVector> {
        check_angle(angle)?;
        Ok(self.second_derivative_unchecked(angle))
    }

    pub(crate) fn second_derivative_unchecked(&self, angle: f64) -> CVector {
        let a = self.steering_unchecked(angle);
        let (s, c) = angle.sin_cos();
        CVector::from_iterator(
            self.sensors(),
            self.positions.iter().zip(a.iter()).map(|(&d, &am)| {
                let first = Complex64::new(0.0, -2.0 * PI * c * d);
                (Complex64::new(0.0, 2.0 * PI * s * d) + first * first) * am
            }),
        )
    }

    /// `A(θ) = [a(θ_1) ⋯ a(θ_K)]`.
    pub fn steering_matrix(&self, angles: &[f64]) -> Result<CMatrix> {
        for &a in angles {
            check_angle(a)?;
        }
        Ok(self.columns(angles, |g, t| g.steering_unchecked(t)))
    }

    pub(crate) fn columns(&self, angles: &[f64], f: impl Fn(&Self, f64) -> CVector) -> CMatrix {
        let mut out = CMatrix::zeros(self.sensors(), angles.len());
        for (k, &t) in angles.iter().enumerate() {
            out.set_column(k, &f(self, t));
        }
        out
    }

    /// Full half-power (3 dB) beamwidth at broadside, in radians.
    ///
    /// Finds the first angle where `|aᴴ(θ)a(0)|²` drops to 0.5 and doubles
    /// it. The beampattern of real positions is symmetric in θ about
    /// broadside, so the half width on either side is the same.
    pub fn half_power_beamwidth(&self) -> Result<f64> {
        let a0 = self.steering_unchecked(0.0);
        let power = |t: f64| self.steering_unchecked(t).dotc(&a0).norm_sqr() - 0.5;

        let step = 1e-3;
        let mut lo = 0.0;
        let mut hi = step;
        while power(hi) > 0.0 {
            lo = hi;
            hi += step;
            if hi >= FRAC_PI_2 {
                return Err(Error::InvalidGeometry(
                    "beampattern never drops to half power".into(),
                ));
            }
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if power(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + hi)
    }
}

impl fmt::Display for ArrayGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let is_ula = self.positions[0] == 0.0
            && self
                .positions
                .iter()
                .enumerate()
                .all(|(m, &p)| (p - m as f64 * HALF_WAVELENGTH).abs() < 1e-12);
        if is_ula {
            return write!(f, "ula({})", self.sensors());
        }
        let parts: Vec<String> = self.positions.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Parses `ula(M)`, `ula_centered(M)` or a comma-separated position list in
/// wavelengths.
impl FromStr for ArrayGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let count = |inner: &str| {
            inner.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!("bad sensor count in geometry '{s}'"))
            })
        };
        if let Some(inner) = s.strip_prefix("ula_centered(").and_then(|r| r.strip_suffix(')')) {
            return Self::ula_centered(count(inner)?);
        }
        if let Some(inner) = s.strip_prefix("ula(").and_then(|r| r.strip_suffix(')')) {
            return Self::ula(count(inner)?);
        }
        let positions = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sensor position '{p}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_positions(positions)
    }
}

/// Sources, noise level and snapshot count for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    doas: Vec<f64>,
    powers: Vec<f64>,
    noise_power: f64,
    snapshots: usize,
}

impl SourceScenario {
    /// `doas` in radians, strictly increasing inside (-π/2, π/2).
    pub fn new(doas: Vec<f64>, powers: Vec<f64>, noise_power: f64, snapshots: usize) -> Result<Self> {
        if doas.len() != powers.len() {
            return Err(Error::InvalidScenario(format!(
                "{} DOAs but {} powers",
                doas.len(),
                powers.len()
            )));
        }
        for &t in &doas {
            check_angle(t)?;
        }
        if doas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidScenario("DOAs must be strictly increasing".into()));
        }
        if powers.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidScenario("source powers must be positive".into()));
        }
        if !(noise_power > 0.0 && noise_power.is_finite()) {
            return Err(Error::InvalidScenario("noise power must be positive".into()));
        }
        if snapshots == 0 {
            return Err(Error::InvalidScenario("need at least one snapshot".into()));
        }
        Ok(Self {
            doas,
            powers,
            noise_power,
            snapshots,
        })
    }

    /// Unit-power non-coherent sources at a common SNR (dB).
    pub fn equal_power(doas: Vec<f64>, snr_db: f64, snapshots: usize) -> Result<Self> {
        let k = doas.len();
        Self::new(doas, vec![1.0; k], 10f64.powf(-snr_db / 10.0), snapshots)
    }

    pub fn doas(&self) -> &[f64] {
        &self.doas
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn num_sources(&self) -> usize {
        self.doas.len()
    }

    /// `10·log10(p_i / σ²)`.
    pub fn snr_db(&self, source: usize) -> f64 {
        10.0 * (self.powers[source] / self.noise_power).log10()
    }

    pub fn with_snapshots(&self, snapshots: usize) -> Result<Self> {
        Self::new(self.doas.clone(), self.powers.clone(), self.noise_power, snapshots)
    }

    /// Checks `K < M`.
    pub fn check_against(&self, geom: &ArrayGeometry) -> Result<()> {
        if self.num_sources() >= geom.sensors() {
            return Err(Error::InvalidScenario(format!(
                "{} sources need more than {} sensors",
                self.num_sources(),
                geom.sensors()
            )));
        }
        Ok(())
    }
}

/// `M×T` array output, column `t` is `x(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: CMatrix,
}

impl SnapshotMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::DimensionMismatch("empty snapshot matrix".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn sensors(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// Draws `x(t) = A(θ)s(t) + n(t)` with circular complex Gaussian signals of
/// covariance `diag(powers)` and white noise of power `σ²`.
///
/// Each real and imaginary part has half the target variance. The output
/// depends only on `seed`.
pub fn synthesize_snapshots(
    geom: &ArrayGeometry,
    scenario: &SourceScenario,
    seed: u64,
) -> Result<SnapshotMatrix> {
    scenario.check_against(geom)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = geom.steering_matrix(scenario.doas())?;
    let (m, k, t) = (geom.sensors(), scenario.num_sources(), scenario.snapshots());

    let mut gauss = |var: f64| {
        let sd = (var / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(sd * re, sd * im)
    };

    let mut signals = CMatrix::zeros(k, t);
    let mut noise = CMatrix::zeros(m, t);
    for col in 0..t {
        for (src, &p) in scenario.powers().iter().enumerate() {
            signals[(src, col)] = gauss(p);
        }
        for row in 0..m {
            noise[(row, col)] = gauss(scenario.noise_power());
        }
    }
    SnapshotMatrix::new(a * signals + noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Exact,
    Sample,
}

/// Hermitian positive-semidefinite `M×M` array covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: CMatrix,
    kind: CovarianceKind,
}

impl CovarianceMatrix {
    /// Wraps a caller-supplied matrix after checking it is square,
    /// Hermitian (1e-12 relative) and PSD (min eigenvalue ≥ -1e-10·‖R‖).
    pub fn from_matrix(data: CMatrix, kind: CovarianceKind) -> Result<Self> {
        if !data.is_square() || data.nrows() == 0 {
            return Err(Error::DimensionMismatch("covariance must be square".into()));
        }
        let norm = data.norm();
        let skew = (&data - data.adjoint()).norm();
        if skew > 1e-12 * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter("covariance is not Hermitian".into()));
        }
        let min_ev = hermitian_eigenvalues(&data)[0];
        if min_ev < -1e-10 * norm {
            return Err(Error::InvalidParameter(format!(
                "covariance is not PSD (min eigenvalue {min_ev:e})"
            )));
        }
        Ok(Self {
            data: crate::linalg::hermitian_part(&data),
            kind,
        })
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn kind(&self) -> CovarianceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }
}

/// `R̂ = (1/T) Σ x(t)xᴴ(t)`.
pub fn sample_covariance(x: &SnapshotMatrix) -> CovarianceMatrix {
    let t = x.snapshots() as f64;
    let r = x.data() * x.data().adjoint() / Complex64::new(t, 0.0);
    CovarianceMatrix {
        data: crate::linalg::hermitian_part(&r),
        kind: CovarianceKind::Sample,
    }
}

/// `R = AΣAᴴ + σ²I`.
pub fn exact_covariance(geom: &ArrayGeometry, scenario: &SourceScenario) -> Result<CovarianceMatrix> {
    scenario.check_against(geom)?;
    let a = geom.steering_matrix(scenario.doas())?;
    let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        scenario.num_sources(),
        scenario.powers().iter().map(|&p| Complex64::new(p, 0.0)),
    ));
    let m = geom.sensors();
    let r = &a * sigma * a.adjoint()
        + CMatrix::identity(m, m) * Complex64::new(scenario.noise_power(), 0.0);
    Ok(CovarianceMatrix {
        data: crate::linalg::hermitian_part(&r),
        kind: CovarianceKind::Exact,
    })
}
