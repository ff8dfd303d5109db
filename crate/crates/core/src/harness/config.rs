use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::array::ArrayGeometry;
use crate::dml::{GridSpec, NewtonConfig};
use crate::error::{Error, Result};
use crate::recovery::RecoveryMethod;

/// Estimators compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Omp,
    Sbl,
    CsdmlOmp,
    CsdmlSbl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Omp, Method::Sbl, Method::CsdmlOmp, Method::CsdmlSbl];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Omp => "omp",
            Method::Sbl => "sbl",
            Method::CsdmlOmp => "csdml-omp",
            Method::CsdmlSbl => "csdml-sbl",
        }
    }

    /// Coarse solver this method runs or reuses.
    pub fn recovery(self) -> RecoveryMethod {
        match self {
            Method::Omp | Method::CsdmlOmp => RecoveryMethod::Omp,
            Method::Sbl | Method::CsdmlSbl => RecoveryMethod::Sbl,
        }
    }

    pub fn refines(self) -> bool {
        matches!(self, Method::CsdmlOmp | Method::CsdmlSbl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVar {
    Snr,
    Snapshots,
    Grid,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::Snr => "snr",
            SweepVar::Snapshots => "snapshots",
            SweepVar::Grid => "grid",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "snr" => Ok(SweepVar::Snr),
            "snapshots" | "t" => Ok(SweepVar::Snapshots),
            "grid" | "r" => Ok(SweepVar::Grid),
            other => Err(Error::Config(format!("unknown sweep variable '{other}'"))),
        }
    }
}

/// Source directions, in degrees.
#[derive(Debug, Clone, PartialEq)]
pub enum DoaSpec {
    Fixed(Vec<f64>),
    /// One DOA per interval, redrawn uniformly every trial.
    Uniform(Vec<(f64, f64)>),
}

impl DoaSpec {
    pub fn num_sources(&self) -> usize {
        match self {
            DoaSpec::Fixed(v) => v.len(),
            DoaSpec::Uniform(v) => v.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DoaSpec::Fixed(v) => {
                if v.is_empty() {
                    return Err(Error::Config("no DOAs given".into()));
                }
                if v.iter().any(|d| !(d.abs() < 90.0)) {
                    return Err(Error::Config("DOAs must lie strictly inside ±90°".into()));
                }
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("DOAs must be distinct".into()));
                }
            }
            DoaSpec::Uniform(v) => {
                if v.is_empty() {
                    return Err(Error::Config("no DOA intervals given".into()));
                }
                let mut s = v.clone();
                s.sort_by(|a, b| a.0.total_cmp(&b.0));
                for &(lo, hi) in &s {
                    if !(lo < hi && lo > -90.0 && hi < 90.0) {
                        return Err(Error::Config(format!("bad DOA interval [{lo}, {hi}]")));
                    }
                }
                if s.windows(2).any(|w| w[1].0 <= w[0].1) {
                    return Err(Error::Config("DOA intervals overlap".into()));
                }
            }
        }
        Ok(())
    }
}

/// Everything a Monte Carlo sweep needs. Angles are in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: ArrayGeometry,
    pub doas: DoaSpec,
    pub snr_db: f64,
    pub snapshots: usize,
    pub grid: GridSpec,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub base_seed: u64,
    pub newton: NewtonConfig,
    /// Give M-SBL the true noise variance instead of estimating it.
    pub known_noise: bool,
    /// Fill `mean_time_s`; off by default so the CSV is reproducible.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: ArrayGeometry::ula(8).expect("valid ULA"),
            doas: DoaSpec::Fixed(vec![2.37, 30.82]),
            snr_db: 10.0,
            snapshots: 200,
            grid: GridSpec::IntervalDeg(2.0),
            sweep: SweepVar::Snr,
            values: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            methods: Method::ALL.to_vec(),
            trials: 100,
            base_seed: 0,
            newton: NewtonConfig::default(),
            known_noise: true,
            timing: false,
            output: None,
        }
    }
}

fn parse_list<T: FromStr>(value: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| Error::Config(format!("bad value '{s}' for {key}: {e}"))))
        .collect()
}

fn parse_one<T: FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for {key}")))
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean '{value}' for {key}"))),
    }
}

impl ExperimentConfig {
    /// Parses a flat `key = value` file on top of the defaults. Blank lines
    /// and `#` comments are ignored.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_kv(&std::fs::read_to_string(path)?)
    }

    /// Sets one key. Recognised keys: `geometry`, `doas`, `doa_intervals`
    /// (`lo:hi,lo:hi`), `snr_db`, `snapshots`, `grid_interval_deg`,
    /// `grid_gamma`, `sweep`, `values`, `methods`, `trials`, `seed`,
    /// `newton_tol`, `newton_max_iters`, `known_noise`, `timing`, `output`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "geometry" => self.geometry = value.parse()?,
            "doas" => self.doas = DoaSpec::Fixed(parse_list(value, key)?),
            "doa_intervals" => {
                let intervals = value
                    .split(',')
                    .map(|part| {
                        let (lo, hi) = part
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("interval '{part}' needs lo:hi")))?;
                        Ok((parse_one(lo, key)?, parse_one(hi, key)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.doas = DoaSpec::Uniform(intervals);
            }
            "snr_db" | "snr" => self.snr_db = parse_one(value, key)?,
            "snapshots" => self.snapshots = parse_one(value, key)?,
            "grid_interval_deg" | "grid" => self.grid = GridSpec::IntervalDeg(parse_one(value, key)?),
            "grid_gamma" | "gamma" => self.grid = GridSpec::Gamma(parse_one(value, key)?),
            "sweep" | "vary" => self.sweep = value.parse()?,
            "values" => self.values = parse_list(value, key)?,
            "methods" => self.methods = parse_list(value, key)?,
            "trials" => self.trials = parse_one(value, key)?,
            "seed" | "base_seed" => self.base_seed = parse_one(value, key)?,
            "newton_tol" => self.newton.tol = parse_one(value, key)?,
            "newton_max_iters" => self.newton.max_iters = parse_one(value, key)?,
            "known_noise" => self.known_noise = parse_bool(value, key)?,
            "timing" => self.timing = parse_bool(value, key)?,
            "output" | "out" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::Config("sweep values must not be empty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        self.doas.validate()?;
        if self.doas.num_sources() >= self.geometry.sensors() {
            return Err(Error::Config("need fewer sources than sensors".into()));
        }
        if self.snapshots < self.doas.num_sources() {
            return Err(Error::Config("need at least K snapshots".into()));
        }
        self.newton.validate()?;
        for &v in &self.values {
            match self.sweep {
                SweepVar::Snr if !v.is_finite() => {
                    return Err(Error::Config(format!("bad SNR {v}")));
                }
                SweepVar::Snapshots if !(v >= self.doas.num_sources() as f64 && v.fract() == 0.0) => {
                    return Err(Error::Config(format!("bad snapshot count {v}")));
                }
                SweepVar::Grid if !(v > 0.0 && v <= 30.0) => {
                    return Err(Error::Config(format!("bad grid interval {v}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// SNR, snapshot count and grid for one sweep value.
    pub fn point(&self, value: f64) -> (f64, usize, GridSpec) {
        match self.sweep {
            SweepVar::Snr => (value, self.snapshots, self.grid),
            SweepVar::Snapshots => (self.snr_db, value as usize, self.grid),
            SweepVar::Grid => (self.snr_db, self.snapshots, GridSpec::IntervalDeg(value)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_file() {
        let cfg = ExperimentConfig::from_kv(
            "# grid sweep\ngeometry = ula(10)\ndoa_intervals = -3:3, 27:33\nsweep = grid\nvalues = 1,2,3\nmethods = omp, csdml-sbl\ntrials = 7\nseed = 42\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry.sensors(), 10);
        assert_eq!(cfg.doas, DoaSpec::Uniform(vec![(-3.0, 3.0), (27.0, 33.0)]));
        assert_eq!(cfg.sweep, SweepVar::Grid);
        assert_eq!(cfg.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(cfg.methods, vec![Method::Omp, Method::CsdmlSbl]);
        assert_eq!((cfg.trials, cfg.base_seed), (7, 42));
        assert_eq!(cfg.point(3.0).2, GridSpec::IntervalDeg(3.0));
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ExperimentConfig::from_kv("trials = 0").is_err());
        assert!(ExperimentConfig::from_kv("values =").is_err());
        assert!(ExperimentConfig::from_kv("doa_intervals = -3:3, 2:10").is_err());
        assert!(ExperimentConfig::from_kv("colour = blue").is_err());
        assert!(ExperimentConfig::from_kv("just text").is_err());
        assert!(ExperimentConfig::from_kv("methods = omp, lasso").is_err());
        assert!(ExperimentConfig::from_kv("sweep = grid\nvalues = 0.5, 40").is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!(Method::CsdmlSbl.refines());
        assert_eq!(Method::CsdmlOmp.recovery(), RecoveryMethod::Omp);
    }
}
