use std::process::{Command, Output};

fn csdml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csdml"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn single_run_reports_refined_doas() {
    let out = stdout(&csdml(&["single-run", "--doas", "2.37,30.82", "--snr", "20", "--grid", "2", "--seed", "3"]));
    let refined = out
        .lines()
        .find_map(|l| l.strip_prefix("refined_doas_deg: "))
        .unwrap();
    let v: Vec<f64> = refined.split(',').map(|s| s.parse().unwrap()).collect();
    assert!((v[0] - 2.37).abs() < 0.3 && (v[1] - 30.82).abs() < 0.3, "{out}");
    assert!(out.contains("coarse_doas_deg: 2.0000,30.0000"));
    assert!(out.contains("converged: true"));
}

#[test]
fn sweep_csv_is_reproducible() {
    let args = ["rmse-sweep", "--vary", "snr", "--values", "10,20", "--trials", "3", "--methods", "omp,csdml-omp", "--seed", "11"];
    let a = stdout(&csdml(&args));
    let b = stdout(&csdml(&args));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("sweep_var,sweep_value,method,rmse_deg,mean_time_s,failures,trials"));
    // 2 values × (2 methods + CRB + GLB)
    assert_eq!(lines.count(), 8);
    assert!(a.contains("snr,10,GLB,"));
}

#[test]
fn sweep_reads_config_file_and_writes_out() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    std::fs::write(
        &cfg,
        "# grid sweep\ndoa_intervals = -3:3, 27:33\nsweep = grid\nvalues = 2, 4\nmethods = sbl, csdml-sbl\ntrials = 2\n",
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let res = csdml(&["rmse-sweep", "--config", cfg.to_str().unwrap(), "--trials", "3", "--out", out.to_str().unwrap()]);
    assert!(stdout(&res).is_empty());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.contains("grid,4,csdml-sbl,"));
    assert!(csv.lines().filter(|l| l.contains(",sbl,")).all(|l| l.ends_with(",3")));
}

#[test]
fn bad_config_is_reported() {
    let res = csdml(&["rmse-sweep", "--methods", "lasso"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("unknown method"));
}

#[test]
fn crb_rows() {
    let out = stdout(&csdml(&["crb", "--snr", "10,20"]));
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "snr_db,snapshots,crb_rmse_deg");
    let v10: f64 = rows[1].rsplit(',').next().unwrap().parse().unwrap();
    let v20: f64 = rows[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!((v10 / v20 - 10f64.sqrt()).abs() < 1e-9);
}

#[test]
fn convexity_map_rows() {
    let out = stdout(&csdml(&[
        "convexity-map", "--doas", "0,30", "--covariance", "exact", "--half-width-bw", "0.2", "--step-bw", "0.1",
    ]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("theta1_deg,theta2_deg,lambda_min,in_exact,in_approx"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 25);
    // Centre cell is the truth and lies in both regions.
    assert!(rows[12].starts_with("0.000000,30.000000") && rows[12].ends_with(",1,1"), "{}", rows[12]);
}

#[test]
fn convexity_metrics_rows() {
    let out = stdout(&csdml(&["convexity-metrics", "--sensors", "8", "--trials", "2", "--covariance", "exact"]));
    assert!(out.starts_with("label,trial,mode,irr,iar,exact_cells\n"));
    assert!(out.contains("M=8;snr=10,mean,criterion,"));
    assert!(out.contains("M=8;snr=10,mean,half_beamwidth,"));
}

#[test]
fn timing_table_rows() {
    let out = stdout(&csdml(&["timing", "--vary", "grid", "--values", "2", "--trials", "2"]));
    assert!(out.starts_with("sweep_var,sweep_value,stage,mean_time_s,samples\n"));
    for stage in ["OMP", "SBL", "DML"] {
        assert!(out.contains(&format!("grid,2,{stage},")));
    }
}
