use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tokmerge::cli::{
    analyze, analyze_run, bench, bench_run, ingest_csv, AnalyzeOptions, BenchOptions, RSweep,
    ScheduleOverrides,
};
use tokmerge::toymodels::{speedup_bound, ModelConfig};
use tokmerge::{Error, Series};

const SCHEMAS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/schemas");

fn schema(name: &str) -> jsonschema::Validator {
    let raw = std::fs::read_to_string(Path::new(SCHEMAS).join(name)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&raw).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &str) {
    let v = schema(schema_name);
    let doc: Value = serde_json::from_str(doc).unwrap();
    let errors: Vec<String> = v.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:#?}");
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn csv_of(columns: &[(&str, Vec<f64>)]) -> String {
    let mut s = String::from("time");
    for (n, _) in columns {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for i in 0..columns[0].1.len() {
        s.push_str(&i.to_string());
        for (_, c) in columns {
            s.push_str(&format!(",{}", c[i]));
        }
        s.push('\n');
    }
    s
}

fn sine(m: usize, bin: f64, amp: f64) -> Vec<f64> {
    (0..m)
        .map(|n| amp * (2.0 * std::f64::consts::PI * bin * n as f64 / m as f64).sin())
        .collect()
}

#[test]
fn ingest_accepts_well_formed_and_rejects_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.csv", "date,a,b\n2024-01-01,1,2\n2024-01-02,3,4\n2024-01-03,5,6.5\n");
    let s = ingest_csv(&ok).unwrap();
    assert_eq!((s.len(), s.variates()), (3, 2));
    assert_eq!(s.column(1), &[2.0, 4.0, 6.5]);
    assert_eq!(s.names(), &["a".to_string(), "b".to_string()]);

    let cases = [
        ("nan.csv", "t,a,b\n0,1,2\n1,NaN,4\n", "row 2, column 2"),
        ("text.csv", "t,a\n0,1\n1,abc\n", "non-numeric"),
        ("ragged.csv", "t,a,b\n0,1,2\n1,3\n", "row 2: 2 fields"),
        ("header.csv", "t,a,b\n", "no data rows"),
        ("empty.csv", "", "empty"),
        ("blank.csv", "t,a\n0,\n", "missing value"),
    ];
    for (name, body, needle) in cases {
        let p = write(dir.path(), name, body);
        let err = ingest_csv(&p).unwrap_err();
        assert!(matches!(err, Error::Ingest { .. }), "{name}: {err}");
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains(needle), "{name}: {err}");
    }
    let missing = ingest_csv(&dir.path().join("absent.csv")).unwrap_err();
    assert_eq!(missing.exit_code(), 3);
}

fn bench_fixture(dir: &Path, config: &str, m: usize) -> (PathBuf, PathBuf) {
    let data = write(
        dir,
        "data.csv",
        &csv_of(&[("x", (0..m).map(|i| (i as f64 / 7.0).sin() + 0.1 * (i as f64 / 3.0).cos()).collect())]),
    );
    (write(dir, "config.json", config), data)
}

#[test]
fn zero_sweep_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = bench_fixture(
        dir.path(),
        r#"{"L":2,"d":8,"h":16,"heads":2,"m":64,"n":1,"p":8,"schedule":[{"r":10}]}"#,
        64,
    );
    let out = dir.path().join("report.json");
    let report = bench_run(&BenchOptions {
        config,
        data,
        out: out.clone(),
        overrides: ScheduleOverrides::default(),
        r_sweep: Some("0".parse().unwrap()),
    })
    .unwrap();
    assert_eq!(report.points.len(), 1);
    let p = &report.points[0];
    assert_eq!(p.speedup, 1.0);
    assert_eq!(p.output_delta_l2, 0.0);
    assert_eq!(p.flops_total, p.flops_ref);
    assert_eq!(p.tokens_per_layer, vec![64, 64, 64]);
    assert_valid("bench_report.schema.json", &std::fs::read_to_string(&out).unwrap());
    let trace = std::fs::read_to_string(dir.path().join(&p.trace_path)).unwrap();
    assert_valid("merge_trace.schema.json", &trace);
}

#[test]
fn four_layer_halving_stays_under_the_bound() {
    let m = 256;
    let cfg = ModelConfig::from_json(
        r#"{"L":4,"d":8,"h":8,"heads":2,"m":256,"n":1,"p":8,
            "schedule":[{"r":128,"k":"global"},{"r":64,"k":"global"},
                        {"r":32,"k":"global"},{"r":16,"k":"global"}]}"#,
    )
    .unwrap();
    let data = Series::univariate((0..m).map(|i| (i as f64 / 9.0).sin()).collect());
    let (report, traces) = bench(&cfg, &data, Path::new("mem.csv"), None, Path::new("r.json")).unwrap();
    let p = &report.points[0];
    assert_eq!(p.tokens_per_layer, vec![256, 128, 64, 32, 16]);
    assert!(p.speedup > 1.0);
    assert!(p.speedup <= speedup_bound(4).unwrap());
    assert!(speedup_bound(4).unwrap() < 3.02);
    assert!(p.output_delta_l2 > 0.0);
    assert_eq!(traces[0].surviving_len(), 16);
}

#[test]
fn sweep_points_are_ordered_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = bench_fixture(
        dir.path(),
        r#"{"L":3,"d":8,"h":16,"heads":2,"m":64,"n":1,"p":8,"schedule":[{"k":1,"q":4}],"seed":5}"#,
        80,
    );
    let report = bench_run(&BenchOptions {
        config,
        data,
        out: dir.path().join("sweep.json"),
        overrides: ScheduleOverrides::default(),
        r_sweep: Some(RSweep { start: 0, end: 32, step: 4 }),
    })
    .unwrap();
    let rs: Vec<_> = report.points.iter().map(|p| p.r.unwrap()).collect();
    assert_eq!(rs, vec![0, 4, 8, 12, 16, 20, 24, 28, 32]);
    for w in report.points.windows(2) {
        assert!(w[1].flops_total <= w[0].flops_total);
    }
    for p in &report.points {
        assert!(dir.path().join(&p.trace_path).exists());
    }
}

#[test]
fn dynamic_overrides_and_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = bench_fixture(
        dir.path(),
        r#"{"L":2,"d":8,"h":16,"heads":2,"m":32,"n":1,"p":8}"#,
        32,
    );
    let overrides = ScheduleOverrides {
        tau: Some(0.9),
        k: Some(tokmerge::Locality::Band(2)),
        q: Some(4),
        ..Default::default()
    };
    let report = bench_run(&BenchOptions {
        config: config.clone(),
        data: data.clone(),
        out: dir.path().join("dyn.json"),
        overrides,
        r_sweep: None,
    })
    .unwrap();
    let s = &report.config.schedule;
    assert_eq!(s.len(), 2);
    assert!(s.iter().all(|l| l.tau == 0.9 && l.q == 4));
    let err = bench_run(&BenchOptions {
        config,
        data,
        out: dir.path().join("bad.json"),
        overrides,
        r_sweep: Some(RSweep::single(2)),
    })
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn analyze_orders_pure_and_noisy_sines() {
    let m = 256;
    let pure = sine(m, 8.0, 1.0);
    let mut state = 7u64;
    let noisy: Vec<f64> = pure
        .iter()
        .map(|v| {
            // Small LCG keeps the fixture free of extra dependencies.
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v + 0.5 * ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let opts = |name: &str, data: PathBuf| AnalyzeOptions::new(data, dir.path().join(name));
    let p = write(dir.path(), "pure.csv", &csv_of(&[("pure", pure.clone())]));
    let n = write(dir.path(), "noisy.csv", &csv_of(&[("noisy", noisy.clone())]));
    let rp = analyze_run(&opts("pure.json", p)).unwrap();
    let rn = analyze_run(&opts("noisy.json", n)).unwrap();
    assert_eq!(rp.variates[0].report.spectral_entropy, 0.0);
    assert_eq!(rp.variates[0].report.thd, Some(0.0));
    assert_eq!(rp.variates[0].report.fundamental_bin, Some(8));
    assert!(rn.variates[0].report.spectral_entropy > rp.variates[0].report.spectral_entropy);
    let json = std::fs::read_to_string(dir.path().join("pure.json")).unwrap();
    assert_valid("signal_report.schema.json", &json);
    let csv = std::fs::read_to_string(dir.path().join("pure.redundancy.csv")).unwrap();
    assert!(csv.starts_with("variate,threshold,fraction\n"));
    assert_eq!(csv.lines().count(), 1 + 21);

    let multi = Series::from_columns(
        vec!["pure".into(), "noisy".into()],
        vec![pure, noisy],
    )
    .unwrap();
    let rm = analyze(&multi, &AnalyzeOptions::new("unused", "unused")).unwrap();
    assert_eq!(rm.variates.len(), 2);
    let mean = (rm.variates[0].report.spectral_entropy + rm.variates[1].report.spectral_entropy) / 2.0;
    assert!((rm.mean.spectral_entropy - mean).abs() < 1e-15);
    let thd_mean = (rm.variates[0].report.thd.unwrap() + rm.variates[1].report.thd.unwrap()) / 2.0;
    assert!((rm.mean.thd.unwrap() - thd_mean).abs() < 1e-12);
    assert_valid("signal_report.schema.json", &serde_json::to_string(&rm).unwrap());
}

fn tokmerge_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_tokmerge"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr_json(out: &std::process::Output) -> Value {
    serde_json::from_slice(out.stderr.trim_ascii()).unwrap()
}

#[test]
fn binary_runs_every_subcommand_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = bench_fixture(
        dir.path(),
        r#"{"L":2,"d":8,"h":16,"heads":2,"m":48,"n":1,"p":8,"schedule":[{"r":6,"k":2}],"seed":3}"#,
        48,
    );
    let (c, d) = (config.to_str().unwrap(), data.to_str().unwrap());
    let out = dir.path().join("report.json");
    let report = || {
        let o = tokmerge_bin(&[
            "bench", "--config", c, "--data", d, "--out", out.to_str().unwrap(),
            "--r-sweep", "0:12:6", "--seed", "11",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(&out).unwrap()
    };
    let (a, b) = (report(), report());
    assert_eq!(a, b);
    assert_valid("bench_report.schema.json", std::str::from_utf8(&a).unwrap());

    let trace = dir.path().join("trace.json");
    let o = tokmerge_bin(&[
        "trace", "--config", c, "--data", d, "--out", trace.to_str().unwrap(), "--k", "1", "--q", "8",
    ]);
    assert!(o.status.success());
    let t = std::fs::read_to_string(&trace).unwrap();
    assert_valid("merge_trace.schema.json", &t);
    let parsed: Value = serde_json::from_str(&t).unwrap();
    assert_eq!(parsed["final_map"].as_array().unwrap().len(), 48);

    let an = dir.path().join("signals.json");
    let o = tokmerge_bin(&["analyze", "--data", d, "--out", an.to_str().unwrap(), "--sigma", "3"]);
    assert!(o.status.success());
    assert_valid("signal_report.schema.json", &std::fs::read_to_string(&an).unwrap());

    let o = tokmerge_bin(&["ingest-check", "--data", d]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("rows=48 variates=1"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (config, data) = bench_fixture(
        dir.path(),
        r#"{"L":1,"d":8,"h":16,"heads":2,"m":16,"n":1,"p":4}"#,
        16,
    );
    let (c, d) = (config.to_str().unwrap(), data.to_str().unwrap());
    let out = dir.path().join("o.json");
    let o = out.to_str().unwrap();

    let bad_cfg = write(dir.path(), "bad.json", r#"{"L":1,"d":7,"h":16,"heads":2,"m":16,"n":1,"p":4}"#);
    let unknown = write(dir.path(), "unknown.json", r#"{"L":1,"d":8,"h":16,"heads":2,"m":16,"n":1,"p":4,"x":1}"#);
    let ssm_k2 = write(
        dir.path(),
        "ssm.json",
        r#"{"L":1,"d":8,"h":16,"heads":2,"m":16,"n":1,"p":4,"merge_hook":"after-operator"}"#,
    );
    let bad_data = write(dir.path(), "bad.csv", "t,x\n0,1\n1,oops\n");
    let short = write(dir.path(), "short.csv", "t,x\n0,1\n1,2\n");
    let cases: Vec<(Vec<&str>, i32, &str)> = vec![
        (vec!["bench", "--config", bad_cfg.to_str().unwrap(), "--data", d, "--out", o], 2, "config"),
        (vec!["bench", "--config", unknown.to_str().unwrap(), "--data", d, "--out", o], 2, "config"),
        (vec!["bench", "--config", ssm_k2.to_str().unwrap(), "--data", d, "--out", o, "--k", "2"], 2, "config"),
        (vec!["bench", "--config", c, "--data", d, "--out", o, "--k", "0"], 2, "config"),
        (vec!["bench", "--config", c, "--data", d, "--out", o, "--r-sweep", "5:1"], 2, "config"),
        (vec!["bench", "--config", c, "--data", d, "--out", o, "--metric", "manhattan"], 2, "config"),
        (vec!["bench", "--config", c, "--data", d, "--out", o, "--tau", "1.5"], 2, "schedule"),
        (vec!["bench", "--config", c, "--data", bad_data.to_str().unwrap(), "--out", o], 3, "data"),
        (vec!["bench", "--config", c, "--data", short.to_str().unwrap(), "--out", o], 3, "data"),
        (vec!["ingest-check", "--data", bad_data.to_str().unwrap()], 3, "data"),
        (vec!["analyze", "--data", d, "--out", o, "--sigma=-1"], 4, "parameter"),
    ];
    for (args, code, tag) in cases {
        let out = tokmerge_bin(&args);
        assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let err = stderr_json(&out);
        assert_eq!(err["exit_code"], code);
        assert_eq!(err["error"], tag, "{args:?}");
        assert!(err["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
    let ok = tokmerge_bin(&["bench", "--config", c, "--data", d, "--out", o]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stderr.is_empty());
}
