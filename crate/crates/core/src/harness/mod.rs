//! Monte Carlo experiment driver: RMSE sweeps over SNR, snapshot count or
//! grid interval, CRB and grid-lower-bound reference rows, stage timings and
//! CSV output.

mod config;
mod metrics;
mod sweep;

use crate::convexity::{ConvexRegion, HessianScan, TrialMetrics};

pub use config::{DoaSpec, ExperimentConfig, Method, SweepVar};
pub use metrics::{crb_matrix, crb_rmse, glb_fixed, glb_uniform, rmse};
pub use sweep::{
    draw_doas, run_sweep, timing_table, trial_seed, ExperimentResult, ResultRow, TimingRow,
    TimingTable, FAILURE_GRADIENT_NORM, SWEEP_CSV_HEADER, TIMING_CSV_HEADER,
};

/// One row per lattice cell: DOAs in degrees, `λ_min(H)`, membership of
/// the exact region and of `approx`.
pub fn convexity_map_csv(scan: &HessianScan, approx: &ConvexRegion) -> String {
    let k = scan.spec.center.len();
    let mut out: String = (0..k).map(|i| format!("theta{}_deg,", i + 1)).collect();
    out.push_str("lambda_min,in_exact,in_approx\n");
    for flat in 0..scan.lattice().len() {
        for a in scan.cell_angles(flat) {
            out.push_str(&format!("{:.6},", a.to_degrees()));
        }
        out.push_str(&format!(
            "{},{},{}\n",
            scan.lambda_min[flat],
            u8::from(scan.in_exact[flat]),
            u8::from(approx.contains(flat))
        ));
    }
    out
}

/// Per-trial IRR/IAR rows followed by a `mean` row for each mode.
pub fn convexity_metrics_csv(label: &str, trials: &[TrialMetrics]) -> String {
    let mut out = String::from("label,trial,mode,irr,iar,exact_cells\n");
    for t in trials {
        for (mode, irr, iar) in &t.per_mode {
            out.push_str(&format!("{label},{},{mode},{irr},{iar},{}\n", t.trial, t.exact_measure));
        }
    }
    if let Some(first) = trials.first() {
        for (i, (mode, _, _)) in first.per_mode.iter().enumerate() {
            let n = trials.len() as f64;
            let irr = trials.iter().map(|t| t.per_mode[i].1).sum::<f64>() / n;
            let iar = trials.iter().map(|t| t.per_mode[i].2).sum::<f64>() / n;
            let cells = trials.iter().map(|t| t.exact_measure as f64).sum::<f64>() / n;
            out.push_str(&format!("{label},mean,{mode},{irr},{iar},{cells}\n"));
        }
    }
    out
}
