use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seqcore::{Locality, Metric};
use crate::series::Series;
use crate::signals::{describe, redundancy_profile, threshold_grid, SignalReport};
use crate::toymodels::TimestepTokenizer;

use super::{ingest_csv, sibling, write_file};

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub data: PathBuf,
    pub out: PathBuf,
    /// Gaussian low-pass width in samples.
    pub sigma: f64,
    pub k: Locality,
    pub metric: Metric,
    /// Dimension of the tokens used for the redundancy curve.
    pub token_dim: usize,
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

impl AnalyzeOptions {
    pub fn new(data: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        AnalyzeOptions {
            data: data.into(),
            out: out.into(),
            sigma: 2.0,
            k: Locality::Band(1),
            metric: Metric::Cosine,
            token_dim: 16,
            thresholds: threshold_grid(0.0, 1.0, 21),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariateReport {
    pub name: String,
    #[serde(flatten)]
    pub report: SignalReport,
}

/// Means across variates. THD averages only variates where it is defined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSummary {
    pub spectral_entropy: f64,
    pub thd: Option<f64>,
    pub lowpass_spectral_entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rows: usize,
    pub variates: Vec<VariateReport>,
    pub mean: SignalSummary,
}

impl AnalysisReport {
    /// Plot-ready redundancy curves: `variate,threshold,fraction`.
    pub fn redundancy_csv(&self) -> String {
        let mut s = String::from("variate,threshold,fraction\n");
        for v in &self.variates {
            for p in &v.report.redundancy_curve {
                let _ = writeln!(s, "{},{},{}", v.name, p.threshold, p.fraction);
            }
        }
        s
    }
}

/// Per-variate diagnostics plus their mean.
pub fn analyze(data: &Series, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let variates: Vec<VariateReport> = (0..data.variates())
        .into_par_iter()
        .map(|j| {
            let series = data.column(j);
            let mut report = describe(series, opts.sigma)?;
            let tokens = TimestepTokenizer::new(1, opts.token_dim, opts.seed)
                .tokenize(&Series::univariate(series.to_vec()))?;
            report.redundancy_curve =
                redundancy_profile(&tokens, &opts.thresholds, opts.k, opts.metric)?;
            Ok(VariateReport {
                name: data.names()[j].clone(),
                report,
            })
        })
        .collect::<Result<_>>()?;
    let n = variates.len() as f64;
    let thds: Vec<f64> = variates.iter().filter_map(|v| v.report.thd).collect();
    let mean = SignalSummary {
        spectral_entropy: variates.iter().map(|v| v.report.spectral_entropy).sum::<f64>() / n,
        thd: (!thds.is_empty()).then(|| thds.iter().sum::<f64>() / thds.len() as f64),
        lowpass_spectral_entropy: variates
            .iter()
            .map(|v| v.report.lowpass_spectral_entropy)
            .sum::<f64>()
            / n,
    };
    Ok(AnalysisReport {
        rows: data.len(),
        variates,
        mean,
    })
}

/// `analyze` subcommand: JSON report at `opts.out`, redundancy curves as
/// `<stem>.redundancy.csv` beside it.
pub fn analyze_run(opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let data = ingest_csv(&opts.data)?;
    let report = analyze(&data, opts)?;
    write_file(&opts.out, &serde_json::to_string_pretty(&report)?)?;
    write_file(&sibling(&opts.out, ".redundancy.csv"), &report.redundancy_csv())?;
    Ok(report)
}
