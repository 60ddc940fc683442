use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::causal::unmerge;
use crate::error::Result;
use crate::seqcore::MergeTrace;
use crate::series::Series;
use crate::toymodels::{ModelConfig, SequenceModel, TimestepTokenizer};

use super::{ingest_csv, model_window, sibling, with_fixed_r, write_file, RSweep, ScheduleOverrides};

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub config: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub overrides: ScheduleOverrides,
    pub r_sweep: Option<RSweep>,
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    /// Fixed per-layer merge count, or `None` for the config's own schedule.
    pub r: Option<usize>,
    pub flops_total: u64,
    pub flops_ref: u64,
    pub speedup: f64,
    /// L2 distance between the unmerged output and the merge-free output
    /// of the same weights.
    #[serde(rename = "output_delta_L2")]
    pub output_delta_l2: f64,
    pub merge_overhead: u64,
    pub tokens_per_layer: Vec<usize>,
    /// Trace file name, relative to the report's directory.
    pub trace_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ModelConfig,
    pub input_tokens: usize,
    pub points: Vec<BenchPoint>,
}

/// Runs every sweep point against one set of weights. Returns the report
/// and the trace of each point, in sweep order. `report_path` only names
/// the trace files.
pub fn bench(
    cfg: &ModelConfig,
    data: &Series,
    data_path: &Path,
    sweep: Option<RSweep>,
    report_path: &Path,
) -> Result<(BenchReport, Vec<MergeTrace>)> {
    let window = model_window(cfg, data, data_path)?;
    let x = TimestepTokenizer::new(cfg.n, cfg.d, cfg.seed).tokenize(&window)?;
    let model = SequenceModel::from_config(cfg)?;
    let reference = model.forward_reference(&x)?;
    let base = cfg.layer_schedules();
    let rs: Vec<Option<usize>> = match sweep {
        Some(s) => s.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let results: Vec<Result<(BenchPoint, MergeTrace)>> = rs
        .par_iter()
        .map(|&r| {
            let schedule = match r {
                Some(r) => with_fixed_r(&base, r),
                None => base.clone(),
            };
            let out = model.forward(&x, &schedule)?;
            let restored = unmerge(&out.tokens)?;
            let delta = restored
                .as_slice()
                .iter()
                .zip(reference.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let suffix = match r {
                Some(r) => format!(".trace-r{r}.json"),
                None => ".trace.json".to_string(),
            };
            let trace_path = sibling(report_path, &suffix)
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            let point = BenchPoint {
                r,
                flops_total: out.ledger.total(),
                flops_ref: out.ledger.reference_total(),
                speedup: out.ledger.speedup(),
                output_delta_l2: delta,
                merge_overhead: out.ledger.merge_overhead_total(),
                tokens_per_layer: out.tokens_per_layer(),
                trace_path,
            };
            Ok((point, out.trace))
        })
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for res in results {
        let (p, t) = res?;
        points.push(p);
        traces.push(t);
    }
    Ok((
        BenchReport {
            config: cfg.clone(),
            input_tokens: x.len(),
            points,
        },
        traces,
    ))
}

/// `bench` subcommand: writes the JSON report to `opts.out` and one trace
/// file per sweep point beside it.
pub fn bench_run(opts: &BenchOptions) -> Result<BenchReport> {
    let cfg = opts.overrides.apply(&ModelConfig::from_path(&opts.config)?)?;
    if opts.overrides.tau.is_some() && opts.r_sweep.is_some() {
        return Err(crate::Error::Config(
            "--tau (dynamic merging) and --r-sweep (fixed r) are exclusive".into(),
        ));
    }
    let data = ingest_csv(&opts.data)?;
    let (report, traces) = bench(&cfg, &data, &opts.data, opts.r_sweep, &opts.out)?;
    for (p, t) in report.points.iter().zip(&traces) {
        write_file(&opts.out.with_file_name(&p.trace_path), &t.to_json()?)?;
    }
    write_file(&opts.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
