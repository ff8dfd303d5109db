use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::array::{ArrayGeometry, CovarianceMatrix};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

use super::{dml_objective, DmlEvaluation, ProjectorBundle};

/// Iterates are kept at least this far inside ±π/2.
const EDGE_MARGIN: f64 = 1e-6;
const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    /// Stop when `‖ϑ^{k+1} − ϑ^k‖₂ ≤ tol` (radians).
    pub tol: f64,
    pub max_iters: usize,
    /// Eigenvalue floor for the Hessian shift, relative to `tr(R)`.
    pub damping: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50,
            damping: 1e-12,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iters == 0 || !(self.damping > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid Newton config: tol={}, max_iters={}, damping={}",
                self.tol, self.max_iters, self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NewtonDiagnostics {
    pub iterations: usize,
    /// Step length fell to `tol` before `max_iters`.
    pub converged: bool,
    pub objective: f64,
    pub gradient_norm: f64,
    /// Iterations where the Hessian was not positive definite and had to be
    /// shifted.
    pub pd_fallbacks: usize,
    pub step_halvings: usize,
    /// Line search could not decrease the objective; the last accepted
    /// iterate is returned.
    pub stalled: bool,
    /// An iterate hit the ±π/2 boundary and was clamped.
    pub clamped: bool,
}

/// Newton iteration `ϑ ← ϑ − H⁻¹∇` on `tr(P⊥R)` from `init`.
///
/// When `H` is not positive definite it is replaced by `H + μI` with
/// `μ = −λ_min(H) + ε·tr(R)`. Each step is halved up to ten times until the
/// objective does not increase. The result is sorted ascending.
pub fn newton_refine(
    geom: &ArrayGeometry,
    r: &CovarianceMatrix,
    init: &[f64],
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, NewtonDiagnostics)> {
    cfg.validate()?;
    if r.dim() != geom.sensors() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, array has {} sensors",
            r.dim(),
            r.dim(),
            geom.sensors()
        )));
    }
    let floor = cfg.damping * r.trace().abs().max(f64::MIN_POSITIVE);
    let limit = FRAC_PI_2 - EDGE_MARGIN;

    let mut diag = NewtonDiagnostics::default();
    let mut theta = init.to_vec();
    let mut bundle = ProjectorBundle::new(geom, &theta)?;

    while diag.iterations < cfg.max_iters {
        diag.iterations += 1;
        let eval = DmlEvaluation::new(&bundle, r);
        let k = theta.len();

        let mut h = eval.hessian.clone();
        let min_ev = symmetric_eigenvalues(&h)[0];
        if min_ev <= 0.0 {
            diag.pd_fallbacks += 1;
            h += DMatrix::identity(k, k) * (floor - min_ev);
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::Singular("damped Newton system".into()))?
            .solve(&DVector::from_column_slice(&eval.gradient));

        let mut scale = 1.0;
        let mut accepted = None;
        for attempt in 0..=MAX_HALVINGS {
            if attempt > 0 {
                diag.step_halvings += 1;
                scale *= 0.5;
            }
            let candidate: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| {
                    let next = t - scale * s;
                    if next.abs() > limit {
                        diag.clamped = true;
                        next.clamp(-limit, limit)
                    } else {
                        next
                    }
                })
                .collect();
            let Ok(cand_bundle) = ProjectorBundle::new(geom, &candidate) else {
                continue;
            };
            let value = dml_objective(&cand_bundle, r);
            if value <= eval.objective + 1e-14 * eval.objective.abs() {
                accepted = Some((candidate, cand_bundle));
                break;
            }
        }

        let Some((candidate, cand_bundle)) = accepted else {
            diag.stalled = true;
            break;
        };
        let moved = theta
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        theta = candidate;
        bundle = cand_bundle;
        if moved <= cfg.tol {
            diag.converged = true;
            break;
        }
    }

    let last = DmlEvaluation::new(&bundle, r);
    diag.objective = last.objective;
    diag.gradient_norm = last.gradient_norm();
    theta.sort_by(f64::total_cmp);
    Ok((theta, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{exact_covariance, SourceScenario};

    fn setup(doas: &[f64]) -> (ArrayGeometry, SourceScenario, CovarianceMatrix) {
        let g = ArrayGeometry::ula(8).unwrap();
        let s = SourceScenario::equal_power(doas.to_vec(), 10.0, 200).unwrap();
        let r = exact_covariance(&g, &s).unwrap();
        (g, s, r)
    }

    #[test]
    fn start_at_truth_converges_immediately() {
        let (g, s, r) = setup(&[0.0413, 0.5379]);
        let (est, diag) = newton_refine(&g, &r, s.doas(), &NewtonConfig::default()).unwrap();
        assert!(diag.converged);
        assert!(diag.iterations <= 1);
        for (e, t) in est.iter().zip(s.doas()) {
            assert!((e - t).abs() < 1e-12);
        }
    }

    #[test]
    fn converges_from_nearby_start() {
        let (g, s, r) = setup(&[0.0413, 0.5379]);
        let init = [0.0413 + 0.03, 0.5379 - 0.04];
        let (est, diag) = newton_refine(&g, &r, &init, &NewtonConfig::default()).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.pd_fallbacks, 0);
        for (e, t) in est.iter().zip(s.doas()) {
            assert!((e - t).abs() < 1e-8);
        }
    }

    #[test]
    fn output_is_sorted() {
        let (g, s, r) = setup(&[-0.3, 0.4]);
        let (est, _) = newton_refine(&g, &r, &[0.41, -0.29], &NewtonConfig::default()).unwrap();
        assert!(est[0] < est[1]);
        assert!((est[0] - s.doas()[0]).abs() < 1e-8);
    }

    #[test]
    fn safeguard_engages_outside_basin() {
        let (g, _, r) = setup(&[0.0]);
        // Near a sidelobe the Hessian is indefinite; the iteration must still
        // decrease the objective and terminate cleanly.
        let start = [0.25];
        let f0 = dml_objective(&ProjectorBundle::new(&g, &start).unwrap(), &r);
        let (_, diag) = newton_refine(&g, &r, &start, &NewtonConfig::default()).unwrap();
        assert!(diag.pd_fallbacks > 0);
        assert!(diag.objective <= f0);
    }

    #[test]
    fn objective_non_increasing_per_iteration() {
        let (g, _, r) = setup(&[-0.2, 0.3]);
        let mut theta = vec![-0.05, 0.45];
        let mut last = dml_objective(&ProjectorBundle::new(&g, &theta).unwrap(), &r);
        for _ in 0..8 {
            let cfg = NewtonConfig { max_iters: 1, ..NewtonConfig::default() };
            let (next, diag) = newton_refine(&g, &r, &theta, &cfg).unwrap();
            assert!(diag.objective <= last + 1e-14 * last.abs());
            last = diag.objective;
            theta = next;
        }
    }

    #[test]
    fn rejects_bad_config_and_inputs() {
        let (g, _, r) = setup(&[0.1]);
        let bad = NewtonConfig { tol: 0.0, ..NewtonConfig::default() };
        assert!(newton_refine(&g, &r, &[0.1], &bad).is_err());
        assert!(newton_refine(&g, &r, &[0.1, 0.1], &NewtonConfig::default()).is_err());
        let small = ArrayGeometry::ula(4).unwrap();
        assert!(newton_refine(&small, &r, &[0.1], &NewtonConfig::default()).is_err());
    }
}
