//! Fixtures shared by the criterion benchmarks.

use csdml_core::array::{exact_covariance, sample_covariance, synthesize_snapshots};
use csdml_core::{ArrayGeometry, CovarianceMatrix, SnapshotMatrix, SourceScenario};

/// Two sources at 2.37° and 30.82°, M = 8, SNR 10 dB, T = 200.
pub struct Fixture {
    pub geometry: ArrayGeometry,
    pub scenario: SourceScenario,
    pub snapshots: SnapshotMatrix,
    pub sample: CovarianceMatrix,
    pub exact: CovarianceMatrix,
}

impl Fixture {
    pub fn standard() -> Self {
        Self::with_sensors(8)
    }

    pub fn with_sensors(m: usize) -> Self {
        let geometry = ArrayGeometry::ula(m).expect("valid ULA");
        let doas = vec![2.37f64.to_radians(), 30.82f64.to_radians()];
        let scenario = SourceScenario::equal_power(doas, 10.0, 200).expect("valid scenario");
        let snapshots = synthesize_snapshots(&geometry, &scenario, 7).expect("snapshots");
        let sample = sample_covariance(&snapshots);
        let exact = exact_covariance(&geometry, &scenario).expect("covariance");
        Self {
            geometry,
            scenario,
            snapshots,
            sample,
            exact,
        }
    }
}
