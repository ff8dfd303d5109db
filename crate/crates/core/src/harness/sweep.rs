use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::array::{sample_covariance, synthesize_snapshots, ArrayGeometry, SourceScenario};
use crate::dml::{coarse_stage, refine_stage, CoarseStage, GridSpec};
use crate::error::{Error, Result};
use crate::recovery::{RecoveryMethod, SblOptions};

use super::config::{DoaSpec, ExperimentConfig, SweepVar};
use super::metrics::{crb_rmse, glb_fixed, glb_uniform, rmse};

/// Newton runs that stop at `max_iters` with a gradient norm above this
/// count as failures.
pub const FAILURE_GRADIENT_NORM: f64 = 1e-3;

pub const SWEEP_CSV_HEADER: &str = "sweep_var,sweep_value,method,rmse_deg,mean_time_s,failures,trials";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    /// Method name, or `CRB` / `GLB` for reference rows.
    pub method: String,
    pub rmse_deg: f64,
    /// `None` when timing is disabled and for reference rows.
    pub mean_time_s: Option<f64>,
    pub failures: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub sweep: SweepVar,
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn row(&self, sweep_value: f64, method: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.method == method)
    }

    /// RMSE of `method` at each sweep value, in row order.
    pub fn series(&self, method: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.sweep_value, r.rmse_deg))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let time = r.mean_time_s.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.sweep, r.sweep_value, r.method, r.rmse_deg, time, r.failures, r.trials
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Per-trial seed: `base_seed ⊕ trial`. The same seed drives the DOA draw
/// (on a separate ChaCha stream) and the snapshot noise.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed ^ trial as u64
}

/// DOAs in radians, ascending.
pub fn draw_doas(spec: &DoaSpec, seed: u64) -> Vec<f64> {
    let mut doas: Vec<f64> = match spec {
        DoaSpec::Fixed(v) => v.iter().map(|d| d.to_radians()).collect(),
        DoaSpec::Uniform(intervals) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            intervals
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi).to_radians())
                .collect()
        }
    };
    doas.sort_by(f64::total_cmp);
    doas
}

#[derive(Debug, Clone, Default)]
struct MethodOutcome {
    estimate: Option<Vec<f64>>,
    time: Duration,
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    truth: Vec<f64>,
    methods: Vec<MethodOutcome>,
    crb: Option<f64>,
}

/// Stage timings from one trial, `None` where a stage failed or was not
/// requested.
#[derive(Debug, Clone, Default)]
struct StageTimes {
    omp: Option<Duration>,
    sbl: Option<Duration>,
    newton: Vec<Duration>,
}

struct Trial {
    geom: ArrayGeometry,
    scenario: SourceScenario,
    x: crate::array::SnapshotMatrix,
}

fn setup_trial(cfg: &ExperimentConfig, snr_db: f64, snapshots: usize, trial: usize) -> Result<Trial> {
    let seed = trial_seed(cfg.base_seed, trial);
    let doas = draw_doas(&cfg.doas, seed);
    let scenario = SourceScenario::equal_power(doas, snr_db, snapshots)?;
    let x = synthesize_snapshots(&cfg.geometry, &scenario, seed)?;
    Ok(Trial {
        geom: cfg.geometry.clone(),
        scenario,
        x,
    })
}

fn sbl_options(cfg: &ExperimentConfig, scenario: &SourceScenario) -> SblOptions {
    SblOptions {
        noise_variance: cfg.known_noise.then(|| scenario.noise_power()),
        ..SblOptions::default()
    }
}

fn coarse_for(
    t: &Trial,
    cfg: &ExperimentConfig,
    grid: &GridSpec,
    method: RecoveryMethod,
) -> Result<CoarseStage> {
    let k = t.scenario.num_sources();
    let coarse = coarse_stage(&t.x, &t.geom, k, method, grid, &sbl_options(cfg, &t.scenario))?;
    if coarse.recovery.coarse_doas.len() < k {
        return Err(Error::InsufficientPeaks {
            found: coarse.recovery.coarse_doas.len(),
            expected: k,
        });
    }
    Ok(coarse)
}

fn run_trial(cfg: &ExperimentConfig, value: f64, trial: usize) -> Result<TrialOutcome> {
    let (snr, snapshots, grid) = cfg.point(value);
    let t = setup_trial(cfg, snr, snapshots, trial)?;
    let k = t.scenario.num_sources();
    let cov = sample_covariance(&t.x);

    let mut cache: Vec<(RecoveryMethod, Option<CoarseStage>)> = Vec::new();
    let mut methods = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let rm = m.recovery();
        let coarse = match cache.iter().find(|(r, _)| *r == rm) {
            Some((_, c)) => c.clone(),
            None => {
                let c = coarse_for(&t, cfg, &grid, rm).ok();
                cache.push((rm, c.clone()));
                c
            }
        };
        let Some(coarse) = coarse else {
            methods.push(MethodOutcome::default());
            continue;
        };
        if !m.refines() {
            methods.push(MethodOutcome {
                estimate: Some(coarse.recovery.coarse_doas.clone()),
                time: coarse.elapsed,
            });
            continue;
        }
        let refined = refine_stage(
            &t.geom,
            &cov,
            &coarse.recovery.coarse_doas,
            k,
            coarse.grid.interval(),
            &cfg.newton,
        );
        let outcome = match refined {
            Ok(r) if r.newton.converged || r.newton.gradient_norm <= FAILURE_GRADIENT_NORM => MethodOutcome {
                estimate: Some(r.estimate),
                time: coarse.elapsed + r.elapsed,
            },
            _ => MethodOutcome::default(),
        };
        methods.push(outcome);
    }
    Ok(TrialOutcome {
        truth: t.scenario.doas().to_vec(),
        methods,
        crb: crb_rmse(&t.geom, &t.scenario).ok(),
    })
}

/// Monte Carlo sweep. Every method sees the same snapshots in a given trial,
/// and `csdml-X` refines the coarse result of `X`. Trials run in parallel;
/// the result depends only on the config.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.values.len() * (cfg.methods.len() + 2));
    for &value in &cfg.values {
        let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| run_trial(cfg, value, trial))
            .collect::<Result<Vec<_>>>()?;

        for (i, &m) in cfg.methods.iter().enumerate() {
            let mut truths = Vec::new();
            let mut estimates = Vec::new();
            let mut time = Duration::ZERO;
            for o in &outcomes {
                if let Some(e) = &o.methods[i].estimate {
                    truths.push(o.truth.clone());
                    estimates.push(e.clone());
                    time += o.methods[i].time;
                }
            }
            let ok = truths.len();
            let rmse_deg = if ok > 0 { rmse(&truths, &estimates)? } else { f64::NAN };
            rows.push(ResultRow {
                sweep_value: value,
                method: m.to_string(),
                rmse_deg,
                mean_time_s: (cfg.timing && ok > 0).then(|| time.as_secs_f64() / ok as f64),
                failures: cfg.trials - ok,
                trials: cfg.trials,
            });
        }

        let crbs: Vec<f64> = outcomes.iter().filter_map(|o| o.crb).collect();
        let crb = if crbs.is_empty() {
            f64::NAN
        } else {
            (crbs.iter().map(|c| c * c).sum::<f64>() / crbs.len() as f64).sqrt()
        };
        rows.push(ResultRow {
            sweep_value: value,
            method: "CRB".into(),
            rmse_deg: crb,
            mean_time_s: None,
            failures: cfg.trials - crbs.len(),
            trials: cfg.trials,
        });

        let (_, _, grid) = cfg.point(value);
        let grid = grid.build(&cfg.geometry)?;
        let glb = match &cfg.doas {
            DoaSpec::Fixed(_) => glb_fixed(&outcomes[0].truth, &grid)?,
            DoaSpec::Uniform(_) => glb_uniform(grid.interval_deg()),
        };
        rows.push(ResultRow {
            sweep_value: value,
            method: "GLB".into(),
            rmse_deg: glb,
            mean_time_s: None,
            failures: 0,
            trials: cfg.trials,
        });
    }
    Ok(ExperimentResult { sweep: cfg.sweep, rows })
}

pub const TIMING_CSV_HEADER: &str = "sweep_var,sweep_value,stage,mean_time_s,samples";

/// Mean wall time of one pipeline stage at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub sweep_value: f64,
    /// `OMP`, `SBL` or `DML`.
    pub stage: &'static str,
    pub mean_time_s: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingTable {
    pub sweep: SweepVar,
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn mean(&self, sweep_value: f64, stage: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.stage == stage)
            .map(|r| r.mean_time_s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TIMING_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.sweep, r.sweep_value, r.stage, r.mean_time_s, r.samples
            ));
        }
        out
    }
}

fn stage_times(cfg: &ExperimentConfig, value: f64, trial: usize) -> Result<StageTimes> {
    let (snr, snapshots, grid) = cfg.point(value);
    let t = setup_trial(cfg, snr, snapshots, trial)?;
    let cov = sample_covariance(&t.x);
    let k = t.scenario.num_sources();
    let mut times = StageTimes::default();
    for rm in [RecoveryMethod::Omp, RecoveryMethod::Sbl] {
        let Ok(coarse) = coarse_for(&t, cfg, &grid, rm) else {
            continue;
        };
        match rm {
            RecoveryMethod::Omp => times.omp = Some(coarse.elapsed),
            RecoveryMethod::Sbl => times.sbl = Some(coarse.elapsed),
        }
        if let Ok(r) = refine_stage(
            &t.geom,
            &cov,
            &coarse.recovery.coarse_doas,
            k,
            coarse.grid.interval(),
            &cfg.newton,
        ) {
            times.newton.push(r.elapsed);
        }
    }
    Ok(times)
}

/// Mean per-trial time of the OMP, SBL and Newton (`DML`) stages. Trials
/// run one after another so that stages do not compete for cores.
pub fn timing_table(cfg: &ExperimentConfig) -> Result<TimingTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &value in &cfg.values {
        let mut omp = Vec::new();
        let mut sbl = Vec::new();
        let mut newton = Vec::new();
        for trial in 0..cfg.trials {
            let t = stage_times(cfg, value, trial)?;
            omp.extend(t.omp);
            sbl.extend(t.sbl);
            newton.extend(t.newton);
        }
        for (stage, samples) in [("OMP", omp), ("SBL", sbl), ("DML", newton)] {
            let n = samples.len();
            let total: Duration = samples.iter().sum();
            rows.push(TimingRow {
                sweep_value: value,
                stage,
                mean_time_s: if n > 0 { total.as_secs_f64() / n as f64 } else { f64::NAN },
                samples: n,
            });
        }
    }
    Ok(TimingTable { sweep: cfg.sweep, rows })
}
