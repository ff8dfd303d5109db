//! `csdml` command-line driver. Angles are in degrees at this boundary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use csdml_core::array::{exact_covariance, sample_covariance, synthesize_snapshots};
use csdml_core::convexity::{approx_region, irr_iar_trials, scan_hessian, CovarianceSource};
use csdml_core::harness::{
    convexity_map_csv, convexity_metrics_csv, crb_rmse, run_sweep, timing_table,
};
use csdml_core::{
    csdml, ApproxMode, ArrayGeometry, CsdmlOptions, ExperimentConfig, GridSpec, NewtonConfig,
    RecoveryMethod, RegionScanSpec, SblOptions, SourceScenario,
};

#[derive(Parser)]
#[command(name = "csdml", version, about = "Off-grid DOA estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate DOAs from one synthetic data set.
    SingleRun(SingleRunArgs),
    /// Monte Carlo RMSE sweep, CSV out.
    RmseSweep(SweepArgs),
    /// Per-cell Hessian eigenvalue map around the true DOAs, CSV out.
    ConvexityMap(MapArgs),
    /// IRR/IAR over trials, SNRs and array sizes, CSV out.
    ConvexityMetrics(MetricsArgs),
    /// Cramér-Rao bound RMSE per SNR, CSV out.
    Crb(CrbArgs),
    /// Mean OMP, SBL and Newton stage times, CSV out.
    Timing(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Vary {
    Snr,
    Snapshots,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum CovArg {
    Exact,
    Sample,
}

impl From<CovArg> for CovarianceSource {
    fn from(c: CovArg) -> Self {
        match c {
            CovArg::Exact => CovarianceSource::Exact,
            CovArg::Sample => CovarianceSource::Sample,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Criterion,
    HalfBeamwidth,
}

impl From<ModeArg> for ApproxMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Criterion => ApproxMode::Criterion,
            ModeArg::HalfBeamwidth => ApproxMode::HalfBeamwidth,
        }
    }
}

#[derive(Args)]
struct SourceArgs {
    /// `ula(M)`, `ula_centered(M)` or comma-separated positions in wavelengths.
    #[arg(long, default_value = "ula(8)")]
    geometry: String,
    /// True DOAs, comma-separated degrees.
    #[arg(long, default_value = "2.37,30.82", allow_hyphen_values = true)]
    doas: String,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    snr: f64,
    #[arg(long, default_value_t = 200)]
    snapshots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SourceArgs {
    fn geometry(&self) -> Result<ArrayGeometry, String> {
        self.geometry.parse().map_err(|e| format!("{e}"))
    }

    fn doas_rad(&self) -> Result<Vec<f64>, String> {
        parse_degrees(&self.doas)
    }

    fn scenario(&self, snr: f64) -> Result<SourceScenario, String> {
        SourceScenario::equal_power(self.doas_rad()?, snr, self.snapshots).map_err(|e| e.to_string())
    }
}

fn parse_degrees(list: &str) -> Result<Vec<f64>, String> {
    let mut v = list
        .split(',')
        .map(|s| s.trim().parse::<f64>().map(f64::to_radians).map_err(|_| format!("bad angle '{s}'")))
        .collect::<Result<Vec<_>, _>>()?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn parse_numbers<T: std::str::FromStr>(list: &str) -> Result<Vec<T>, String> {
    list.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("bad value '{s}'")))
        .collect()
}

#[derive(Args)]
struct SingleRunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Grid interval in degrees; overrides --gamma.
    #[arg(long)]
    grid: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value = "omp")]
    method: String,
    /// Give M-SBL the true noise variance.
    #[arg(long)]
    known_noise: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Flat key=value file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    vary: Option<Vary>,
    /// Comma-separated sweep values.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[arg(long)]
    geometry: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    doas: Option<String>,
    /// Per-trial uniform DOA intervals, `lo:hi,lo:hi` in degrees.
    #[arg(long, allow_hyphen_values = true)]
    doa_intervals: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long)]
    snapshots: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    /// Comma-separated subset of omp, sbl, csdml-omp, csdml-sbl.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    known_noise: Option<String>,
    /// Fill the mean_time_s column.
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SweepArgs {
    fn config(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p).map_err(|e| e.to_string())?,
            None => ExperimentConfig::default(),
        };
        let vary = self.vary.map(|v| match v {
            Vary::Snr => "snr",
            Vary::Snapshots => "snapshots",
            Vary::Grid => "grid",
        });
        let overrides = [
            ("sweep", vary.map(str::to_string)),
            ("values", self.values.clone()),
            ("geometry", self.geometry.clone()),
            ("doas", self.doas.clone()),
            ("doa_intervals", self.doa_intervals.clone()),
            ("snr_db", self.snr.clone()),
            ("snapshots", self.snapshots.clone()),
            ("grid_interval_deg", self.grid.clone()),
            ("grid_gamma", self.gamma.clone()),
            ("methods", self.methods.clone()),
            ("trials", self.trials.clone()),
            ("seed", self.seed.clone()),
            ("known_noise", self.known_noise.clone()),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v).map_err(|e| e.to_string())?;
            }
        }
        if self.timing {
            cfg.timing = true;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "sample")]
    covariance: CovArg,
    #[arg(long, value_enum, default_value = "criterion")]
    mode: ModeArg,
    /// Scan half-width per axis, in beamwidths.
    #[arg(long, default_value_t = 1.0)]
    half_width_bw: f64,
    /// Scan step per axis, in beamwidths.
    #[arg(long, default_value_t = 0.025)]
    step_bw: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Comma-separated sensor counts; each uses a half-wavelength ULA.
    #[arg(long, default_value = "8")]
    sensors: String,
    #[arg(long, default_value = "-7.5,7.5", allow_hyphen_values = true)]
    doas: String,
    /// Comma-separated SNRs in dB.
    #[arg(long, default_value = "10", allow_hyphen_values = true)]
    snr: String,
    #[arg(long, default_value_t = 200)]
    snapshots: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sample")]
    covariance: CovArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CrbArgs {
    #[arg(long, default_value = "ula(8)")]
    geometry: String,
    #[arg(long, default_value = "2.37,30.82", allow_hyphen_values = true)]
    doas: String,
    /// Comma-separated SNRs in dB.
    #[arg(long, default_value = "0,5,10,15,20", allow_hyphen_values = true)]
    snr: String,
    #[arg(long, default_value_t = 200)]
    snapshots: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("writing {}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn degrees(v: &[f64]) -> String {
    v.iter().map(|t| format!("{:.4}", t.to_degrees())).collect::<Vec<_>>().join(",")
}

fn single_run(a: &SingleRunArgs) -> Result<(), String> {
    let geom = a.source.geometry()?;
    let scenario = a.source.scenario(a.source.snr)?;
    let x = synthesize_snapshots(&geom, &scenario, a.source.seed).map_err(|e| e.to_string())?;
    let method: RecoveryMethod = a.method.parse().map_err(|e| format!("{e}"))?;
    let opts = CsdmlOptions {
        method: Some(method),
        grid: a.grid.map_or(GridSpec::Gamma(a.gamma), GridSpec::IntervalDeg),
        newton: NewtonConfig::default(),
        sbl: SblOptions {
            noise_variance: a.known_noise.then(|| scenario.noise_power()),
            ..SblOptions::default()
        },
    };
    let (est, diag) = csdml(&x, &geom, scenario.num_sources(), &opts).map_err(|e| e.to_string())?;
    let text = format!(
        "method: {}\ngrid_interval_deg: {}\ntrue_doas_deg: {}\ncoarse_doas_deg: {}\nrefined_doas_deg: {}\nnewton_iterations: {}\nconverged: {}\nobjective: {:e}\ngradient_norm: {:e}\n",
        diag.method,
        diag.grid_interval_deg,
        degrees(scenario.doas()),
        degrees(&diag.coarse),
        degrees(&est),
        diag.newton.iterations,
        diag.newton.converged,
        diag.newton.objective,
        diag.newton.gradient_norm,
    );
    emit(&text, None)
}

fn rmse_sweep(a: &SweepArgs) -> Result<(), String> {
    let cfg = a.config()?;
    let res = run_sweep(&cfg).map_err(|e| e.to_string())?;
    emit(&res.to_csv(), cfg.output.as_deref())
}

fn timing(a: &SweepArgs) -> Result<(), String> {
    let cfg = a.config()?;
    let table = timing_table(&cfg).map_err(|e| e.to_string())?;
    emit(&table.to_csv(), cfg.output.as_deref())
}

fn convexity_map(a: &MapArgs) -> Result<(), String> {
    let geom = a.source.geometry()?;
    let scenario = a.source.scenario(a.source.snr)?;
    let cov = match a.covariance {
        CovArg::Exact => exact_covariance(&geom, &scenario),
        CovArg::Sample => synthesize_snapshots(&geom, &scenario, a.source.seed).map(|x| sample_covariance(&x)),
    }
    .map_err(|e| e.to_string())?;
    let mut spec = RegionScanSpec::around(&geom, scenario.doas()).map_err(|e| e.to_string())?;
    let bw = geom.half_power_beamwidth().map_err(|e| e.to_string())?;
    spec.half_width.fill(a.half_width_bw * bw);
    spec.step.fill(a.step_bw * bw);
    let scan = scan_hessian(&geom, &cov, &spec).map_err(|e| e.to_string())?;
    let approx = approx_region(&geom, &spec, a.mode.into()).map_err(|e| e.to_string())?;
    emit(&convexity_map_csv(&scan, &approx), a.out.as_deref())
}

fn convexity_metrics(a: &MetricsArgs) -> Result<(), String> {
    let sensors: Vec<usize> = parse_numbers(&a.sensors)?;
    let snrs: Vec<f64> = parse_numbers(&a.snr)?;
    let doas = parse_degrees(&a.doas)?;
    let modes = [ApproxMode::Criterion, ApproxMode::HalfBeamwidth];
    let mut out = String::new();
    for &m in &sensors {
        let geom = ArrayGeometry::ula(m).map_err(|e| e.to_string())?;
        for &snr in &snrs {
            let s = SourceScenario::equal_power(doas.clone(), snr, a.snapshots).map_err(|e| e.to_string())?;
            let trials = irr_iar_trials(&geom, &s, a.covariance.into(), &modes, a.trials, a.seed)
                .map_err(|e| e.to_string())?;
            let csv = convexity_metrics_csv(&format!("M={m};snr={snr}"), &trials);
            if out.is_empty() {
                out.push_str(&csv);
            } else {
                out.extend(csv.lines().skip(1).map(|l| format!("{l}\n")));
            }
        }
    }
    emit(&out, a.out.as_deref())
}

fn crb(a: &CrbArgs) -> Result<(), String> {
    let geom: ArrayGeometry = a.geometry.parse().map_err(|e| format!("{e}"))?;
    let doas = parse_degrees(&a.doas)?;
    let mut out = String::from("snr_db,snapshots,crb_rmse_deg\n");
    for snr in parse_numbers::<f64>(&a.snr)? {
        let s = SourceScenario::equal_power(doas.clone(), snr, a.snapshots).map_err(|e| e.to_string())?;
        let v = crb_rmse(&geom, &s).map_err(|e| e.to_string())?;
        out.push_str(&format!("{snr},{},{v}\n", a.snapshots));
    }
    emit(&out, a.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SingleRun(a) => single_run(a),
        Command::RmseSweep(a) => rmse_sweep(a),
        Command::ConvexityMap(a) => convexity_map(a),
        Command::ConvexityMetrics(a) => convexity_metrics(a),
        Command::Crb(a) => crb(a),
        Command::Timing(a) => timing(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
