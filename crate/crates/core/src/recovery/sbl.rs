use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, hermitian_eigenvalues, CMatrix};

use super::{AngleGrid, Dictionary, RecoveryResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SblOptions {
    /// Noise variance σ². When `None` it is estimated from `y` itself as the
    /// mean of the `M−K` smallest eigenvalues of `YYᴴ/L`, which is only
    /// meaningful for unreduced data; callers working on SVD-reduced data
    /// should pass the value explicitly (see [`estimate_noise_variance`]).
    pub noise_variance: Option<f64>,
    pub max_iters: usize,
    /// Stop once `‖γ_new − γ‖₂ / ‖γ‖₂` falls below this.
    pub tol: f64,
}

impl Default for SblOptions {
    fn default() -> Self {
        Self {
            noise_variance: None,
            max_iters: 200,
            tol: 1e-4,
        }
    }
}

/// Mean of the `M−K` smallest eigenvalues of a covariance estimate.
pub fn estimate_noise_variance(cov: &CMatrix, k: usize) -> f64 {
    let ev = hermitian_eigenvalues(cov);
    let noise = ev.len().saturating_sub(k).max(1);
    ev[..noise].iter().map(|e| e.max(0.0)).sum::<f64>() / noise as f64
}

/// Multiple-measurement sparse Bayesian learning with EM hyperparameter
/// updates.
///
/// All `L` response columns share one variance `γ_n` per atom. Each sweep
/// computes the posterior `μ = ΓΨᴴΣ_y⁻¹Y`, `Σ_x = Γ − ΓΨᴴΣ_y⁻¹ΨΓ` with
/// `Σ_y = σ²I + ΨΓΨᴴ`, and sets `γ_n ← ‖μ_n‖²/L + (Σ_x)_nn`.
///
/// The support is the `k` largest local maxima of the final `γ` profile
/// along the grid, topped up with the largest remaining values if there are
/// fewer than `k` peaks. An all-zero `y` yields an empty support with
/// `converged = false`; hitting `max_iters` returns the last iterate with
/// `converged = false`.
pub fn m_sbl(
    dict: &Dictionary,
    grid: &AngleGrid,
    y: &CMatrix,
    k: usize,
    opts: &SblOptions,
) -> Result<RecoveryResult> {
    let psi = dict.psi();
    let (m, n) = psi.shape();
    let l = y.ncols();
    if y.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "data has {} rows, dictionary {}",
            y.nrows(),
            m
        )));
    }
    if k == 0 || k >= m {
        return Err(Error::InvalidParameter(format!("need 0 < K < M, got K={k}, M={m}")));
    }
    if dict.atoms() != grid.len() {
        return Err(Error::DimensionMismatch("dictionary does not match grid".into()));
    }
    let energy = frobenius_sq(y);
    if energy == 0.0 || l == 0 {
        return Ok(RecoveryResult::empty(l));
    }

    let sigma2 = opts
        .noise_variance
        .unwrap_or_else(|| estimate_noise_variance(&(y * y.adjoint() / Complex64::new(l as f64, 0.0)), k));
    // Keeps Σ_y invertible for noiseless input.
    let sigma2 = sigma2.max(1e-12 * energy / (m * l) as f64);

    let correlations = psi.adjoint() * y;
    let mut gamma: Vec<f64> = correlations
        .row_iter()
        .map(|row| row.norm_squared() / l as f64)
        .collect();

    let mut mu = CMatrix::zeros(n, l);
    let mut iterations = 0;
    let mut converged = false;
    let identity = CMatrix::identity(m, m);
    while iterations < opts.max_iters {
        iterations += 1;
        let mut sigma_y = &identity * Complex64::new(sigma2, 0.0);
        for (col, &g) in psi.column_iter().zip(&gamma) {
            if g > 0.0 {
                sigma_y.gerc(Complex64::new(g, 0.0), &col, &col, Complex64::new(1.0, 0.0));
            }
        }
        let chol = crate::linalg::hermitian_part(&sigma_y)
            .cholesky()
            .ok_or_else(|| Error::Singular("SBL data covariance not positive definite".into()))?;
        let w = chol.solve(psi); // Σ_y⁻¹Ψ
        let wy = w.adjoint() * y; // ΨᴴΣ_y⁻¹Y

        let mut next = vec![0.0; n];
        for j in 0..n {
            let g = gamma[j];
            let quad = psi.column(j).dotc(&w.column(j)).re;
            for c in 0..l {
                mu[(j, c)] = wy[(j, c)] * g;
            }
            let posterior_var = (g - g * g * quad).max(0.0);
            next[j] = mu.row(j).norm_squared() / l as f64 + posterior_var;
        }

        let diff: f64 = next.iter().zip(&gamma).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        gamma = next;
        if scale > 0.0 && diff / scale < opts.tol {
            converged = true;
            break;
        }
    }

    let support = pick_peaks(&gamma, k);
    let coefficients = mu.select_rows(&support);
    Ok(RecoveryResult::from_support(grid, support, coefficients, iterations, converged))
}

/// Indices of the `k` largest local maxima of `profile`, filled with the
/// largest remaining entries when there are fewer than `k` maxima.
fn pick_peaks(profile: &[f64], k: usize) -> Vec<usize> {
    let n = profile.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || profile[i] >= profile[i - 1];
            let right = i + 1 == n || profile[i] > profile[i + 1];
            left && right && profile[i] > 0.0
        })
        .collect();
    peaks.sort_by(|&a, &b| profile[b].total_cmp(&profile[a]).then(a.cmp(&b)));
    peaks.truncate(k);
    if peaks.len() < k {
        let mut rest: Vec<usize> = (0..n).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(|&a, &b| profile[b].total_cmp(&profile[a]).then(a.cmp(&b)));
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{synthesize_snapshots, ArrayGeometry, SourceScenario};
    use crate::recovery::{build_grid_explicit, m_omp, svd_reduce};

    fn setup(interval: f64) -> (ArrayGeometry, AngleGrid, Dictionary) {
        let geom = ArrayGeometry::ula(8).unwrap();
        let grid = build_grid_explicit(interval).unwrap();
        let dict = Dictionary::new(&geom, &grid);
        (geom, grid, dict)
    }

    #[test]
    fn peak_picking_prefers_local_maxima() {
        let profile = [0.0, 1.0, 5.0, 4.9, 0.2, 3.0, 0.1];
        // 4.9 is larger than 3.0 but is the shoulder of the first peak.
        assert_eq!(pick_peaks(&profile, 2), vec![2, 5]);
        assert_eq!(pick_peaks(&[1.0, 2.0, 3.0], 2), vec![2, 1]);
    }

    #[test]
    fn noiseless_on_grid_source_peaks_at_truth() {
        let (_, grid, dict) = setup(2.0);
        let n = 47;
        let y = dict.psi().columns(n, 1) * Complex64::new(0.8, -0.3);
        let res = m_sbl(&dict, &grid, &y, 1, &SblOptions::default()).unwrap();
        assert_eq!(res.support, vec![n]);
    }

    #[test]
    fn zero_input_is_flagged() {
        let (_, grid, dict) = setup(2.0);
        let res = m_sbl(&dict, &grid, &CMatrix::zeros(8, 2), 2, &SblOptions::default()).unwrap();
        assert!(res.support.is_empty());
        assert!(!res.converged);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let (geom, grid, dict) = setup(2.0);
        let s = SourceScenario::equal_power(vec![0.1, 0.6], 10.0, 50).unwrap();
        let x = synthesize_snapshots(&geom, &s, 2).unwrap();
        let y = svd_reduce(&x, 2).unwrap();
        let opts = SblOptions {
            noise_variance: Some(s.noise_power()),
            max_iters: 2,
            tol: 1e-12,
        };
        let res = m_sbl(&dict, &grid, &y, 2, &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 2);
        assert_eq!(res.support.len(), 2);
    }

    #[test]
    fn agrees_with_omp_off_grid() {
        let (geom, grid, dict) = setup(2.0);
        let s = SourceScenario::equal_power(vec![2.37f64.to_radians()], 10.0, 200).unwrap();
        let x = synthesize_snapshots(&geom, &s, 13).unwrap();
        let y = svd_reduce(&x, 1).unwrap();
        let opts = SblOptions {
            noise_variance: Some(s.noise_power()),
            ..SblOptions::default()
        };
        let sbl = m_sbl(&dict, &grid, &y, 1, &opts).unwrap();
        let omp = m_omp(&dict, &grid, &y, 1).unwrap();
        assert_eq!(sbl.support, omp.support);
        assert_eq!(grid.angle_deg(sbl.support[0]), 2.0);
    }

    #[test]
    fn noise_estimate_from_covariance() {
        let geom = ArrayGeometry::ula(8).unwrap();
        let s = SourceScenario::equal_power(vec![-0.2, 0.4], 10.0, 20_000).unwrap();
        let x = synthesize_snapshots(&geom, &s, 8).unwrap();
        let r = crate::array::sample_covariance(&x);
        let est = estimate_noise_variance(r.data(), 2);
        assert!((est / 0.1 - 1.0).abs() < 0.05, "{est}");
    }

    #[test]
    fn phase_rotation_does_not_change_support() {
        let (geom, grid, dict) = setup(2.0);
        let s = SourceScenario::equal_power(vec![-0.3, 0.45], 5.0, 100).unwrap();
        let y = svd_reduce(&synthesize_snapshots(&geom, &s, 21).unwrap(), 2).unwrap();
        let opts = SblOptions {
            noise_variance: Some(s.noise_power()),
            ..SblOptions::default()
        };
        let rotated = &y * Complex64::from_polar(1.0, -0.77);
        let a = m_sbl(&dict, &grid, &y, 2, &opts).unwrap();
        let b = m_sbl(&dict, &grid, &rotated, 2, &opts).unwrap();
        assert_eq!(a.support, b.support);
    }
}
