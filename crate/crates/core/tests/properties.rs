use csdml_core::array::synthesize_snapshots;
use csdml_core::convexity::{irr_iar_trials, CovarianceSource};
use csdml_core::dml::coarse_stage;
use csdml_core::harness::{glb_uniform, run_sweep, DoaSpec, ExperimentConfig, Method, SweepVar};
use csdml_core::{ApproxMode, ArrayGeometry, GridSpec, RecoveryMethod, SblOptions, SourceScenario};

#[test]
fn off_grid_beats_on_grid_on_shared_data() {
    let cfg = ExperimentConfig {
        values: vec![0.0, 10.0, 20.0],
        trials: 40,
        base_seed: 0x5eed_0000,
        ..ExperimentConfig::default()
    };
    let res = run_sweep(&cfg).unwrap();
    for &snr in &cfg.values {
        let glb = res.row(snr, "GLB").unwrap().rmse_deg;
        for (refined, coarse) in [("csdml-omp", "omp"), ("csdml-sbl", "sbl")] {
            let r = res.row(snr, refined).unwrap().rmse_deg;
            let c = res.row(snr, coarse).unwrap().rmse_deg;
            assert!(r <= c, "{refined} {r} vs {coarse} {c} at {snr} dB");
            assert!(c >= glb - 0.01, "{coarse} below the grid bound at {snr} dB");
        }
    }
}

#[test]
fn uniform_doas_respect_grid_bound() {
    let cfg = ExperimentConfig {
        doas: DoaSpec::Uniform(vec![(-3.0, 3.0), (27.0, 33.0)]),
        sweep: SweepVar::Grid,
        values: vec![2.0, 4.0, 6.0],
        methods: vec![Method::Omp, Method::Sbl],
        trials: 60,
        base_seed: 0xabc0_0000,
        ..ExperimentConfig::default()
    };
    let res = run_sweep(&cfg).unwrap();
    for &r in &cfg.values {
        for m in ["omp", "sbl"] {
            let v = res.row(r, m).unwrap().rmse_deg;
            assert!(v >= glb_uniform(r) - 0.02, "{m} at r={r}: {v}");
        }
    }
}

#[test]
fn coarse_error_is_within_half_interval() {
    let geom = ArrayGeometry::ula(8).unwrap();
    let truth = vec![2.37f64.to_radians(), 30.82f64.to_radians()];
    let s = SourceScenario::equal_power(truth.clone(), 10.0, 200).unwrap();
    let r = 2f64.to_radians();
    for method in [RecoveryMethod::Omp, RecoveryMethod::Sbl] {
        let sbl = SblOptions {
            noise_variance: Some(s.noise_power()),
            ..SblOptions::default()
        };
        let good = (0..100)
            .filter(|&seed| {
                let x = synthesize_snapshots(&geom, &s, seed).unwrap();
                let c = coarse_stage(&x, &geom, 2, method, &GridSpec::IntervalDeg(2.0), &sbl).unwrap();
                c.recovery
                    .coarse_doas
                    .iter()
                    .zip(&truth)
                    .all(|(e, t)| (e - t).abs() <= r / 2.0 + r / 10.0)
            })
            .count();
        assert!(good >= 95, "{method}: {good}/100");
    }
}

#[test]
fn agreement_grows_then_plateaus_with_array_size() {
    let doas = vec![-10f64.to_radians(), 10f64.to_radians()];
    let iar: Vec<f64> = [8, 10, 12, 14, 16]
        .iter()
        .map(|&m| {
            let geom = ArrayGeometry::ula(m).unwrap();
            let s = SourceScenario::equal_power(doas.clone(), 10.0, 200).unwrap();
            let t = irr_iar_trials(&geom, &s, CovarianceSource::Exact, &[ApproxMode::Criterion], 1, 0).unwrap();
            let (_, irr, iar) = t[0].per_mode[0];
            assert!(irr > 0.99, "M={m}: IRR {irr}");
            iar
        })
        .collect();
    assert!(iar[0] < iar[1] && iar[1] < iar[2], "{iar:?}");
    for v in &iar[2..] {
        assert!((v - 0.93).abs() < 0.03, "{iar:?}");
    }
}
