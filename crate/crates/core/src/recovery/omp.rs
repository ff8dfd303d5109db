use crate::error::{Error, Result};
use crate::linalg::{least_squares, CMatrix};

use super::{AngleGrid, Dictionary, RecoveryResult};

/// Multiple-response orthogonal matching pursuit.
///
/// Runs exactly `k` iterations. Each one picks the atom whose correlation
/// row `ψ_nᴴ·residual` has the largest ℓ2 norm (lowest index on ties), then
/// refits all accumulated coefficients by least squares and updates the
/// residual.
pub fn m_omp(dict: &Dictionary, grid: &AngleGrid, y: &CMatrix, k: usize) -> Result<RecoveryResult> {
    let psi = dict.psi();
    let m = psi.nrows();
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

    let mut support: Vec<usize> = Vec::with_capacity(k);
    let mut residual = y.clone();
    let mut coefficients = CMatrix::zeros(0, y.ncols());

    for _ in 0..k {
        let correlations = psi.adjoint() * &residual;
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for (n, row) in correlations.row_iter().enumerate() {
            if support.contains(&n) {
                continue;
            }
            let score = row.norm_squared();
            if score > best_score {
                best_score = score;
                best = Some(n);
            }
        }
        let chosen = best.ok_or_else(|| Error::InvalidParameter("dictionary exhausted".into()))?;
        support.push(chosen);

        let sub = psi.select_columns(&support);
        coefficients = least_squares(&sub, y)?;
        residual = y - &sub * &coefficients;
    }

    Ok(RecoveryResult::from_support(grid, support, coefficients, k, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{synthesize_snapshots, ArrayGeometry, SourceScenario};
    use crate::linalg::frobenius_sq;
    use crate::recovery::{build_grid_explicit, svd_reduce};
    use num_complex::Complex64;

    fn setup(interval: f64, m: usize) -> (ArrayGeometry, AngleGrid, Dictionary) {
        let geom = ArrayGeometry::ula(m).unwrap();
        let grid = build_grid_explicit(interval).unwrap();
        let dict = Dictionary::new(&geom, &grid);
        (geom, grid, dict)
    }

    #[test]
    fn exact_atom_is_selected() {
        let (_, grid, dict) = setup(2.0, 8);
        let n = 50;
        let y = dict.psi().columns(n, 1).into_owned();
        let res = m_omp(&dict, &grid, &y, 1).unwrap();
        assert_eq!(res.support, vec![n]);
        assert_eq!(res.coarse_doas, vec![grid.angles()[n]]);
    }

    #[test]
    fn two_on_grid_sources_match_brute_force() {
        let (_, grid, dict) = setup(2.0, 8);
        let truth = [40usize, 60];
        let y = dict.psi().columns(truth[0], 1) * Complex64::new(1.0, 0.5)
            + dict.psi().columns(truth[1], 1) * Complex64::new(-0.7, 0.2);
        let res = m_omp(&dict, &grid, &y, 2).unwrap();

        // Brute force over every pair: least-squares residual of each support.
        let mut best = (f64::INFINITY, (0, 0));
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                let sub = dict.psi().select_columns(&[i, j]);
                let Ok(c) = least_squares(&sub, &y) else { continue };
                let r = frobenius_sq(&(&y - &sub * c));
                if r < best.0 {
                    best = (r, (i, j));
                }
            }
        }
        assert_eq!(best.1, (truth[0], truth[1]));
        assert_eq!(res.support, truth.to_vec());
    }

    #[test]
    fn off_grid_source_maps_to_nearest_grid_point() {
        let (geom, grid, dict) = setup(2.0, 8);
        let s = SourceScenario::equal_power(vec![2.37f64.to_radians()], 30.0, 200).unwrap();
        let x = synthesize_snapshots(&geom, &s, 9).unwrap();
        let y = svd_reduce(&x, 1).unwrap();
        let res = m_omp(&dict, &grid, &y, 1).unwrap();
        assert_eq!(grid.angle_deg(res.support[0]), 2.0);
    }

    #[test]
    fn residual_is_non_increasing() {
        let (geom, grid, dict) = setup(1.0, 8);
        let s = SourceScenario::equal_power(vec![-0.6, 0.05, 0.5], 5.0, 100).unwrap();
        let x = synthesize_snapshots(&geom, &s, 4).unwrap();
        let y = svd_reduce(&x, 3).unwrap();
        let mut last = frobenius_sq(&y);
        for k in 1..=3 {
            let res = m_omp(&dict, &grid, &y, k).unwrap();
            let sub = dict.psi().select_columns(&res.support);
            let r = frobenius_sq(&(&y - &sub * &res.coefficients));
            assert!(r <= last + 1e-12);
            last = r;
        }
    }

    #[test]
    fn phase_rotation_does_not_change_support() {
        let (geom, grid, dict) = setup(2.0, 8);
        let s = SourceScenario::equal_power(vec![-0.3, 0.45], 5.0, 100).unwrap();
        let y = svd_reduce(&synthesize_snapshots(&geom, &s, 21).unwrap(), 2).unwrap();
        let rotated = &y * Complex64::from_polar(1.0, 1.234);
        let a = m_omp(&dict, &grid, &y, 2).unwrap();
        let b = m_omp(&dict, &grid, &rotated, 2).unwrap();
        assert_eq!(a.support, b.support);
    }

    #[test]
    fn invalid_k_rejected() {
        let (_, grid, dict) = setup(5.0, 4);
        let y = CMatrix::zeros(4, 2);
        assert!(m_omp(&dict, &grid, &y, 0).is_err());
        assert!(m_omp(&dict, &grid, &y, 4).is_err());
        assert!(m_omp(&dict, &grid, &CMatrix::zeros(3, 2), 1).is_err());
    }
}
