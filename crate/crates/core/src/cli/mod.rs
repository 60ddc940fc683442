//! Library side of the `tokmerge` command line: CSV ingestion, benchmark
//! sweeps, signal analysis and trace emission. The binary only parses
//! flags and maps errors to exit codes.

mod analyze;
mod bench;
mod ingest;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::seqcore::{LayerSchedule, Locality, MergeTrace, Metric, ScheduleMode};
use crate::series::Series;
use crate::toymodels::{ModelConfig, SequenceModel, TimestepTokenizer};

pub use analyze::{analyze, analyze_run, AnalysisReport, AnalyzeOptions, SignalSummary, VariateReport};
pub use bench::{bench, bench_run, BenchOptions, BenchPoint, BenchReport};
pub use ingest::{ingest_csv, ingest_reader};

/// Inclusive range `start:end:step` of merge counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RSweep {
    pub start: usize,
    pub end: usize,
    pub step: usize,
}

impl RSweep {
    pub fn single(r: usize) -> Self {
        RSweep {
            start: r,
            end: r,
            step: 1,
        }
    }

    pub fn values(&self) -> Vec<usize> {
        (self.start..=self.end).step_by(self.step).collect()
    }
}

impl FromStr for RSweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad r-sweep component '{p}' in '{s}'")))
        };
        let sweep = match parts.as_slice() {
            [a] => RSweep::single(num(a)?),
            [a, b] => RSweep {
                start: num(a)?,
                end: num(b)?,
                step: 1,
            },
            [a, b, c] => RSweep {
                start: num(a)?,
                end: num(b)?,
                step: num(c)?,
            },
            _ => return Err(Error::Config(format!("r-sweep '{s}' is not a:b:step"))),
        };
        if sweep.step == 0 || sweep.start > sweep.end {
            return Err(Error::Config(format!(
                "r-sweep '{s}' needs start <= end and step >= 1"
            )));
        }
        Ok(sweep)
    }
}

/// Command-line overrides applied to every layer of a config's schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScheduleOverrides {
    /// Switches every layer to dynamic merging with this threshold.
    pub tau: Option<f64>,
    pub k: Option<Locality>,
    pub q: Option<usize>,
    pub metric: Option<Metric>,
    pub seed: Option<u64>,
}

impl ScheduleOverrides {
    pub fn apply(&self, cfg: &ModelConfig) -> Result<ModelConfig> {
        let mut cfg = cfg.clone();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let touches_schedule =
            self.tau.is_some() || self.k.is_some() || self.q.is_some() || self.metric.is_some();
        if touches_schedule {
            let mut schedule = cfg.layer_schedules();
            for s in &mut schedule {
                if let Some(tau) = self.tau {
                    s.mode = ScheduleMode::Dynamic;
                    s.tau = tau;
                }
                if let Some(k) = self.k {
                    s.k = k;
                }
                if let Some(q) = self.q {
                    s.q = q;
                }
                if let Some(metric) = self.metric {
                    s.metric = metric;
                }
            }
            cfg.schedule = schedule;
        }
        cfg.validate_as_config()?;
        Ok(cfg)
    }
}

/// `k` given on the command line: a positive integer or `global`.
pub fn parse_locality(s: &str) -> Result<Locality> {
    if s.eq_ignore_ascii_case("global") {
        return Ok(Locality::Global);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(Locality::Band(k)),
        _ => Err(Error::Config(format!("k must be >= 1 or 'global', got '{s}'"))),
    }
}

/// Every layer merges a fixed `r`.
pub(crate) fn with_fixed_r(schedule: &[LayerSchedule], r: usize) -> Vec<LayerSchedule> {
    schedule
        .iter()
        .map(|s| LayerSchedule {
            mode: ScheduleMode::Fixed,
            r,
            ..*s
        })
        .collect()
}

/// The first `m` rows and `n` variates of `data`.
pub(crate) fn model_window(cfg: &ModelConfig, data: &Series, path: &Path) -> Result<Series> {
    data.window(0, cfg.m, cfg.n).map_err(|_| Error::Ingest {
        path: path.to_path_buf(),
        message: format!(
            "config needs {} rows x {} variates, data has {} x {}",
            cfg.m,
            cfg.n,
            data.len(),
            data.variates()
        ),
    })
}

/// Options of the `trace` subcommand.
#[derive(Clone, Debug)]
pub struct TraceOptions {
    pub config: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub overrides: ScheduleOverrides,
    /// Fixed `r` for every layer instead of the config's schedule.
    pub r: Option<usize>,
}

/// Runs the configured model once and returns its merge trace.
pub fn trace(cfg: &ModelConfig, data: &Series, data_path: &Path, r: Option<usize>) -> Result<MergeTrace> {
    let window = model_window(cfg, data, data_path)?;
    let x = TimestepTokenizer::new(cfg.n, cfg.d, cfg.seed).tokenize(&window)?;
    let model = SequenceModel::from_config(cfg)?;
    let mut schedule = cfg.layer_schedules();
    if let Some(r) = r {
        schedule = with_fixed_r(&schedule, r);
    }
    Ok(model.forward(&x, &schedule)?.trace)
}

/// `trace` subcommand: writes the merge trace JSON to `opts.out`.
pub fn trace_run(opts: &TraceOptions) -> Result<MergeTrace> {
    let cfg = opts.overrides.apply(&ModelConfig::from_path(&opts.config)?)?;
    let data = ingest_csv(&opts.data)?;
    let tr = trace(&cfg, &data, &opts.data, opts.r)?;
    write_file(&opts.out, &tr.to_json()?)?;
    Ok(tr)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// `dir/stem<suffix>` next to `path`.
pub(crate) fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        assert_eq!("0:8:2".parse::<RSweep>().unwrap().values(), vec![0, 2, 4, 6, 8]);
        assert_eq!("3".parse::<RSweep>().unwrap().values(), vec![3]);
        assert_eq!("1:3".parse::<RSweep>().unwrap().values(), vec![1, 2, 3]);
        assert!("4:2:1".parse::<RSweep>().is_err());
        assert!("0:4:0".parse::<RSweep>().is_err());
        assert!("a:b".parse::<RSweep>().is_err());
    }

    #[test]
    fn locality_flag() {
        assert_eq!(parse_locality("global").unwrap(), Locality::Global);
        assert_eq!(parse_locality("3").unwrap(), Locality::Band(3));
        assert!(parse_locality("0").is_err());
    }

    #[test]
    fn overrides_reach_every_layer() {
        let mut cfg = ModelConfig::new(3, 8, 8, 1, 16, 1, 4);
        cfg.schedule = vec![LayerSchedule::fixed(2, Locality::Global)];
        let o = ScheduleOverrides {
            tau: Some(0.5),
            k: Some(Locality::Band(1)),
            q: Some(3),
            metric: Some(Metric::L2),
            seed: Some(42),
        };
        let out = o.apply(&cfg).unwrap();
        assert_eq!(out.seed, 42);
        assert_eq!(out.schedule.len(), 3);
        for s in &out.schedule {
            assert_eq!(s.mode, ScheduleMode::Dynamic);
            assert_eq!(s.k, Locality::Band(1));
            assert_eq!((s.q, s.metric, s.tau), (3, Metric::L2, 0.5));
        }
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling(Path::new("out/report.json"), ".trace.json"),
            PathBuf::from("out/report.trace.json")
        );
    }
}
