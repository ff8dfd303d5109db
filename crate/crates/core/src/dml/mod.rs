//! Deterministic maximum-likelihood criterion `tr(P⊥R)` with its exact
//! gradient and Hessian, Newton refinement, and the two-stage driver.

mod csdml;
mod newton;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::{check_angle, ArrayGeometry, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, CMatrix};

pub use csdml::{coarse_stage, csdml, refine_stage, CoarseStage, CsdmlDiagnostics, CsdmlOptions, GridSpec, RefineStage};
pub use newton::{newton_refine, NewtonConfig, NewtonDiagnostics};

/// Largest accepted condition number of `BᴴB`.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Everything the criterion needs at a candidate DOA vector `ϑ`: the
/// steering matrix `B`, its pseudo-inverse `B† = (BᴴB)⁻¹Bᴴ`, the projector
/// `P⊥ = I − BB†`, and the first/second derivative columns `D`, `F`.
#[derive(Debug, Clone)]
pub struct ProjectorBundle {
    vartheta: Vec<f64>,
    b: CMatrix,
    b_pinv: CMatrix,
    p_perp: CMatrix,
    d: CMatrix,
    f: CMatrix,
}

impl ProjectorBundle {
    /// Fails on angles outside (-π/2, π/2), and with
    /// [`Error::IllConditioned`] when `BᴴB` has condition number above
    /// [`MAX_GRAM_CONDITION`] (coincident or nearly coincident angles).
    pub fn new(geom: &ArrayGeometry, vartheta: &[f64]) -> Result<Self> {
        if vartheta.is_empty() {
            return Err(Error::InvalidParameter("empty DOA vector".into()));
        }
        if vartheta.len() >= geom.sensors() {
            return Err(Error::InvalidParameter(format!(
                "{} DOAs need more than {} sensors",
                vartheta.len(),
                geom.sensors()
            )));
        }
        for &t in vartheta {
            check_angle(t)?;
        }
        let b = geom.columns(vartheta, |g, t| g.steering_unchecked(t));

        let sv = singular_values(&b);
        let smallest = *sv.last().expect("non-empty");
        let cond = if smallest > 0.0 { (sv[0] / smallest).powi(2) } else { f64::INFINITY };
        if !(cond <= MAX_GRAM_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }

        let k = vartheta.len();
        let m = geom.sensors();
        let qr = b.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let b_pinv = r
            .solve_upper_triangular(&q.adjoint())
            .ok_or_else(|| Error::Singular("triangular factor of B".into()))?;
        let p_perp = CMatrix::identity(m, m) - &q * q.adjoint();
        debug_assert_eq!(b_pinv.shape(), (k, m));

        Ok(Self {
            vartheta: vartheta.to_vec(),
            d: geom.columns(vartheta, |g, t| g.derivative_unchecked(t)),
            f: geom.columns(vartheta, |g, t| g.second_derivative_unchecked(t)),
            b,
            b_pinv,
            p_perp,
        })
    }

    pub fn vartheta(&self) -> &[f64] {
        &self.vartheta
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn b_pinv(&self) -> &CMatrix {
        &self.b_pinv
    }

    pub fn p_perp(&self) -> &CMatrix {
        &self.p_perp
    }

    pub fn d(&self) -> &CMatrix {
        &self.d
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    pub fn num_sources(&self) -> usize {
        self.vartheta.len()
    }
}

/// `tr(P⊥R)`.
pub fn dml_objective(bundle: &ProjectorBundle, r: &CovarianceMatrix) -> f64 {
    // tr(XY) = Σ_ij X_ij Y_ji, without forming the product.
    let p = bundle.p_perp();
    let r = r.data();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            acc += p[(i, j)] * r[(j, i)];
        }
    }
    acc.re
}

/// `∇ = −2ℜ(diag(B†RP⊥D))`.
pub fn dml_gradient(bundle: &ProjectorBundle, r: &CovarianceMatrix) -> Vec<f64> {
    let brpd = bundle.b_pinv() * r.data() * (bundle.p_perp() * bundle.d());
    (0..bundle.num_sources()).map(|i| -2.0 * brpd[(i, i)].re).collect()
}

/// Full DML Hessian `H = 2ℜ(C)` with
///
/// ```text
/// C = (DᴴP⊥D) ⊙ (B†RB†ᴴ)ᵀ
///   − (DᴴP⊥RP⊥D) ⊙ (B†B†ᴴ)ᵀ
///   + (B†D) ⊙ (B†RP⊥D)ᵀ
///   + (B†D)ᵀ ⊙ (B†RP⊥D)
///   − I ⊙ (B†RP⊥F)ᵀ
/// ```
///
/// symmetrized as `(H + Hᵀ)/2`. The last term, which carries the second
/// derivative of the steering vector, is included.
pub fn dml_hessian(bundle: &ProjectorBundle, r: &CovarianceMatrix) -> DMatrix<f64> {
    HessianTerms::new(bundle, r).hessian()
}

/// Objective, gradient and Hessian at one `ϑ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmlEvaluation {
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

impl DmlEvaluation {
    pub fn new(bundle: &ProjectorBundle, r: &CovarianceMatrix) -> Self {
        let terms = HessianTerms::new(bundle, r);
        Self {
            objective: dml_objective(bundle, r),
            gradient: (0..bundle.num_sources())
                .map(|i| -2.0 * terms.brpd[(i, i)].re)
                .collect(),
            hessian: terms.hessian(),
        }
    }

    pub fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Shared intermediate products of the gradient and Hessian.
struct HessianTerms {
    dpd: CMatrix,
    brb: CMatrix,
    dprpd: CMatrix,
    bb: CMatrix,
    bd: CMatrix,
    brpd: CMatrix,
    brpf_diag: Vec<Complex64>,
}

impl HessianTerms {
    fn new(bundle: &ProjectorBundle, r: &CovarianceMatrix) -> Self {
        let r = r.data();
        let bp = bundle.b_pinv();
        let pd = bundle.p_perp() * bundle.d();
        let br = bp * r;
        let brp = &br * bundle.p_perp();
        let brpf_diag = (0..bundle.num_sources())
            .map(|i| brp.row(i).transpose().dot(&bundle.f().column(i)))
            .collect();
        Self {
            dpd: bundle.d().adjoint() * &pd,
            brb: &br * bp.adjoint(),
            dprpd: pd.adjoint() * r * &pd,
            bb: bp * bp.adjoint(),
            bd: bp * bundle.d(),
            brpd: &br * &pd,
            brpf_diag,
        }
    }

    fn hessian(&self) -> DMatrix<f64> {
        let k = self.dpd.nrows();
        let mut h = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                let mut c = self.dpd[(i, j)] * self.brb[(j, i)]
                    - self.dprpd[(i, j)] * self.bb[(j, i)]
                    + self.bd[(i, j)] * self.brpd[(j, i)]
                    + self.bd[(j, i)] * self.brpd[(i, j)];
                if i == j {
                    c -= self.brpf_diag[i];
                }
                h[(i, j)] = 2.0 * c.re;
            }
        }
        (&h + h.transpose()) * 0.5
    }
}
