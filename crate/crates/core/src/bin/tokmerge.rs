use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tokmerge::cli::{
    analyze_run, bench_run, ingest_csv, parse_locality, trace_run, AnalyzeOptions, BenchOptions,
    RSweep, ScheduleOverrides, TraceOptions,
};
use tokmerge::{Error, Locality, Metric};

#[derive(Parser)]
#[command(name = "tokmerge", version, about = "Token merging benchmarks and signal diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Input series (CSV with header; first column is a timestamp or index).
    #[arg(long)]
    data: PathBuf,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Inclusive merge-count sweep `start:end:step`, applied to every layer.
    #[arg(long = "r-sweep")]
    r_sweep: Option<String>,
    /// Dynamic merging with this similarity threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Locality bound: a positive integer or `global`.
    #[arg(long)]
    k: Option<String>,
    /// Minimum number of tokens kept per layer.
    #[arg(long)]
    q: Option<usize>,
    /// cosine, l1 or l2.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep merge counts and report FLOPs, speed-up and output deltas.
    Bench(Common),
    /// Spectral entropy, THD and redundancy curves for every variate.
    Analyze {
        /// Input series (CSV with header)
        #[arg(long)]
        data: PathBuf,
        /// Report JSON; the redundancy CSV is written next to it
        #[arg(long)]
        out: PathBuf,
        /// Tokenizer seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Locality for the redundancy profile: a positive integer or `global`
        #[arg(long)]
        k: Option<String>,
        /// cosine, l1 or l2
        #[arg(long)]
        metric: Option<String>,
        /// Gaussian low-pass width in samples.
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
    },
    /// Write the merge trace of one forward pass.
    Trace(Common),
    /// Validate a CSV file and print its shape.
    IngestCheck {
        /// CSV file to check
        #[arg(long)]
        data: PathBuf,
    },
}

fn metric(s: Option<&str>) -> Result<Option<Metric>, Error> {
    s.map(|m| m.parse().map_err(|e: Error| Error::Config(e.to_string())))
        .transpose()
}

fn locality(s: Option<&str>) -> Result<Option<Locality>, Error> {
    s.map(parse_locality).transpose()
}

fn overrides(c: &Common) -> Result<ScheduleOverrides, Error> {
    Ok(ScheduleOverrides {
        tau: c.tau,
        k: locality(c.k.as_deref())?,
        q: c.q,
        metric: metric(c.metric.as_deref())?,
        seed: c.seed,
    })
}

fn sweep(c: &Common) -> Result<Option<RSweep>, Error> {
    c.r_sweep.as_deref().map(str::parse).transpose()
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Bench(c) => {
            let report = bench_run(&BenchOptions {
                overrides: overrides(&c)?,
                r_sweep: sweep(&c)?,
                config: c.config,
                data: c.data,
                out: c.out.clone(),
            })?;
            for p in &report.points {
                println!(
                    "r={:<6} speedup={:.4} flops={} delta_l2={:.6e}",
                    p.r.map_or("config".into(), |r| r.to_string()),
                    p.speedup,
                    p.flops_total,
                    p.output_delta_l2
                );
            }
            println!("report written to {}", c.out.display());
        }
        Command::Analyze {
            data,
            out,
            seed,
            k,
            metric: m,
            sigma,
        } => {
            let mut opts = AnalyzeOptions::new(data, out);
            opts.seed = seed;
            opts.sigma = sigma;
            if let Some(k) = locality(k.as_deref())? {
                opts.k = k;
            }
            if let Some(m) = metric(m.as_deref())? {
                opts.metric = m;
            }
            let report = analyze_run(&opts)?;
            for v in &report.variates {
                println!(
                    "{}: spectral_entropy={:.4} thd={}",
                    v.name,
                    v.report.spectral_entropy,
                    v.report.thd.map_or("n/a".into(), |t| format!("{t:.2}%"))
                );
            }
            println!("report written to {}", opts.out.display());
        }
        Command::Trace(c) => {
            let r = sweep(&c)?.map(|s| s.start);
            let tr = trace_run(&TraceOptions {
                overrides: overrides(&c)?,
                config: c.config,
                data: c.data,
                out: c.out.clone(),
                r,
            })?;
            println!(
                "{} -> {} tokens over {} layers, trace written to {}",
                tr.original_len(),
                tr.surviving_len(),
                tr.layers.len(),
                c.out.display()
            );
        }
        Command::IngestCheck { data } => {
            let s = ingest_csv(&data)?;
            println!("rows={} variates={} columns={:?}", s.len(), s.variates(), s.names());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": e.code(), "exit_code": e.exit_code(), "message": e.to_string()})
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
