//! Run configuration: defaults, a flat `key = value` file, then flags.

use std::fmt::Write;
use std::path::PathBuf;

use rqc_core::order::{Metric, EXHAUSTIVE_MAX_NODES};
use rqc_core::tensor::Precision;

use crate::error::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "RQC_CONFIG";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// log2 of the largest intermediate the order search may produce.
    pub max_size_log2: usize,
    pub n_candidates: usize,
    /// 0 uses every available thread.
    pub workers: usize,
    pub precision: Precision,
    pub batch_log2: usize,
    pub memory_limit: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Partial sums are checkpointed every `2^checkpoint_every_log2` slices.
    pub checkpoint_every_log2: u32,
    pub imbalance: f64,
    pub leaf_size: usize,
    pub reconfigure_size: usize,
    pub metric: Metric,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_size_log2: 28,
            n_candidates: 100,
            workers: 0,
            precision: Precision::Single,
            batch_log2: 13,
            memory_limit: 4 << 30,
            checkpoint_dir: None,
            checkpoint_every_log2: 4,
            imbalance: 0.1,
            leaf_size: 8,
            reconfigure_size: 10,
            metric: Metric::Flops,
        }
    }
}

pub const MAX_SIZE_RANGE: (usize, usize) = (1, 60);
pub const CANDIDATES_RANGE: (usize, usize) = (1, 100_000);
pub const WORKERS_RANGE: (usize, usize) = (0, 4096);
pub const BATCH_RANGE: (usize, usize) = (1, 30);
pub const LEAF_RANGE: (usize, usize) = (1, EXHAUSTIVE_MAX_NODES);
pub const RECONFIGURE_RANGE: (usize, usize) = (1, EXHAUSTIVE_MAX_NODES);
pub const CHECKPOINT_RANGE: (usize, usize) = (0, 62);

pub fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "flops" => Ok(Metric::Flops),
        "benchmark" => Ok(Metric::Benchmark),
        other => Err(format!(
            "unknown metric `{other}` (expected flops or benchmark)"
        )),
    }
}

fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Flops => "flops",
        Metric::Benchmark => "benchmark",
    }
}

fn in_range(key: &str, v: usize, (lo, hi): (usize, usize)) -> Result<(), String> {
    if (lo..=hi).contains(&v) {
        Ok(())
    } else {
        Err(format!("{key} = {v} is outside {lo}..={hi}"))
    }
}

/// Partial settings from one source; `None` leaves the lower layer alone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub max_size_log2: Option<usize>,
    pub n_candidates: Option<usize>,
    pub workers: Option<usize>,
    pub precision: Option<Precision>,
    pub batch_log2: Option<usize>,
    pub memory_limit: Option<u64>,
    pub checkpoint_dir: Option<PathBuf>,
    pub checkpoint_every_log2: Option<u32>,
    pub imbalance: Option<f64>,
    pub leaf_size: Option<usize>,
    pub reconfigure_size: Option<usize>,
    pub metric: Option<Metric>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        in_range("max_size_log2", self.max_size_log2, MAX_SIZE_RANGE)?;
        in_range("n_candidates", self.n_candidates, CANDIDATES_RANGE)?;
        in_range("workers", self.workers, WORKERS_RANGE)?;
        in_range("batch_log2", self.batch_log2, BATCH_RANGE)?;
        in_range("leaf_size", self.leaf_size, LEAF_RANGE)?;
        in_range("reconfigure_size", self.reconfigure_size, RECONFIGURE_RANGE)?;
        in_range(
            "checkpoint_every_log2",
            self.checkpoint_every_log2 as usize,
            CHECKPOINT_RANGE,
        )?;
        if !(0.0..=0.5).contains(&self.imbalance) {
            return Err(format!("imbalance = {} is outside 0..=0.5", self.imbalance));
        }
        if self.memory_limit == 0 {
            return Err("memory_limit must be positive".into());
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = &o.$f { self.$f = v.clone(); })* };
        }
        take!(
            seed,
            max_size_log2,
            n_candidates,
            workers,
            precision,
            batch_log2,
            memory_limit,
            checkpoint_every_log2,
            imbalance,
            leaf_size,
            reconfigure_size,
            metric
        );
        if o.checkpoint_dir.is_some() {
            self.checkpoint_dir = o.checkpoint_dir.clone();
        }
    }

    /// Every key in a fixed order; parses back to the same config.
    pub fn to_file(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "max_size_log2 = {}", self.max_size_log2);
        let _ = writeln!(s, "n_candidates = {}", self.n_candidates);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "precision = {}", self.precision);
        let _ = writeln!(s, "batch_log2 = {}", self.batch_log2);
        let _ = writeln!(s, "memory_limit = {}", self.memory_limit);
        let _ = writeln!(s, "imbalance = {}", self.imbalance);
        let _ = writeln!(s, "leaf_size = {}", self.leaf_size);
        let _ = writeln!(s, "reconfigure_size = {}", self.reconfigure_size);
        let _ = writeln!(s, "metric = {}", metric_name(self.metric));
        let _ = writeln!(s, "checkpoint_every_log2 = {}", self.checkpoint_every_log2);
        if let Some(d) = &self.checkpoint_dir {
            let _ = writeln!(s, "checkpoint_dir = {}", d.display());
        }
        s
    }
}

/// Parses a config file. `#` starts a comment; blank lines are ignored.
pub fn parse_config(text: &str) -> Result<Overrides, CliError> {
    let mut o = Overrides::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| CliError::format(format!("config line {}: {m}", i + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| err(format!("{key}: `{v}` is not a non-negative integer")))
        };
        match key {
            "seed" => o.seed = Some(num(value)?),
            "max_size_log2" => o.max_size_log2 = Some(num(value)? as usize),
            "n_candidates" => o.n_candidates = Some(num(value)? as usize),
            "workers" => o.workers = Some(num(value)? as usize),
            "batch_log2" => o.batch_log2 = Some(num(value)? as usize),
            "memory_limit" => o.memory_limit = Some(num(value)?),
            "precision" => o.precision = Some(value.parse().map_err(err)?),
            "metric" => o.metric = Some(parse_metric(value).map_err(err)?),
            "leaf_size" => o.leaf_size = Some(num(value)? as usize),
            "reconfigure_size" => o.reconfigure_size = Some(num(value)? as usize),
            "checkpoint_every_log2" => {
                o.checkpoint_every_log2 = Some(num(value)?.min(u32::MAX as u64) as u32)
            }
            "imbalance" => {
                o.imbalance = Some(
                    value
                        .parse()
                        .map_err(|_| err(format!("imbalance: `{value}` is not a number")))?,
                )
            }
            "checkpoint_dir" => o.checkpoint_dir = Some(PathBuf::from(value)),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(o)
}

/// Defaults, then the config file, then flags. File values outside their
/// range are format errors; flag values outside their range are usage
/// errors.
pub fn resolve(file: Option<&str>, flags: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(text) = file {
        cfg.apply(&parse_config(text)?);
        cfg.validate()
            .map_err(|m| CliError::format(format!("config: {m}")))?;
    }
    cfg.apply(flags);
    cfg.validate().map_err(CliError::usage)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Kind;

    #[test]
    fn file_round_trip() {
        let cfg = RunConfig {
            seed: 99,
            max_size_log2: 20,
            n_candidates: 7,
            workers: 3,
            precision: Precision::Mixed,
            batch_log2: 10,
            memory_limit: 123456,
            checkpoint_dir: Some(PathBuf::from("/tmp/ck")),
            checkpoint_every_log2: 2,
            imbalance: 0.25,
            leaf_size: 5,
            reconfigure_size: 7,
            metric: Metric::Benchmark,
        };
        let text = cfg.to_file();
        assert_eq!(resolve(Some(&text), &Overrides::default()).unwrap(), cfg);
        assert_eq!(
            resolve(Some(&text), &Overrides::default())
                .unwrap()
                .to_file(),
            text
        );
        let d = RunConfig::default();
        assert_eq!(
            resolve(Some(&d.to_file()), &Overrides::default()).unwrap(),
            d
        );
    }

    #[test]
    fn precedence() {
        let file = "seed = 5\nmax_size_log2 = 20 # bound\n\n# comment\n";
        let flags = Overrides {
            seed: Some(6),
            ..Default::default()
        };
        let cfg = resolve(Some(file), &flags).unwrap();
        assert_eq!(cfg.seed, 6);
        assert_eq!(cfg.max_size_log2, 20);
        assert_eq!(cfg.n_candidates, 100);
        assert_eq!(
            resolve(None, &Overrides::default()).unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn bad_input() {
        assert_eq!(parse_config("speed = 3").unwrap_err().kind, Kind::Format);
        assert_eq!(parse_config("seed 3").unwrap_err().kind, Kind::Format);
        assert_eq!(parse_config("seed = -1").unwrap_err().kind, Kind::Format);
        assert_eq!(
            parse_config("precision = double").unwrap_err().kind,
            Kind::Format
        );
        assert_eq!(
            resolve(Some("batch_log2 = 99"), &Overrides::default())
                .unwrap_err()
                .kind,
            Kind::Format
        );
        let flags = Overrides {
            n_candidates: Some(0),
            ..Default::default()
        };
        assert_eq!(resolve(None, &flags).unwrap_err().kind, Kind::Usage);
        assert_eq!(
            resolve(Some("leaf_size = 40"), &Overrides::default())
                .unwrap_err()
                .kind,
            Kind::Format
        );
        assert_eq!(
            resolve(Some("imbalance = 0.9"), &Overrides::default())
                .unwrap_err()
                .kind,
            Kind::Format
        );
        assert_eq!(
            parse_config("metric = fast").unwrap_err().kind,
            Kind::Format
        );
    }
}
