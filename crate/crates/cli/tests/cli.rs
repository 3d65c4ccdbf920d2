use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use pcnet::io::{write_dataset_csv, NetworkDocument};
use pcnet::pipeline::{simulate_ar_garch, GarchParams, ROWS_PER_MONTH};
use pcnet::samplers::{sample, DistributionSpec};
use pcnet::{Dataset, PartialCorrelationMatrix, PrecisionMatrix};
use tempfile::TempDir;

fn pcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_network(dir: &Path, name: &str, p: usize, edges: &[(usize, usize, f64)]) -> std::path::PathBuf {
    let pc = PartialCorrelationMatrix::from_edges(p, edges).unwrap();
    let doc = NetworkDocument::from_partial_correlations(&pc, (1..=p).map(|j| format!("n{j}")).collect()).unwrap();
    let path = dir.join(name);
    fs::write(&path, doc.to_json_string().unwrap()).unwrap();
    path
}

fn write_data(dir: &Path, name: &str, data: &Dataset) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_dataset_csv(data, None, &mut buf).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

#[test]
fn simulate_smoke_and_determinism() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("m.json");
    fs::write(&manifest, r#"{"p": 10, "n": [200], "runs": 1, "topologies": ["scale-free"], "lambda_count": 12, "seed": 5}"#).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = pcnet(&["simulate", "--manifest", path_str(&manifest), "--out", path_str(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("metrics.csv")).unwrap());
    let mut rdr = csv::Reader::from_reader(csv_a.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[10].parse::<f64>().unwrap().is_finite());
        assert!(r[11].parse::<f64>().unwrap().is_finite());
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["manifest"]["alphas"][0], 0.5);
    assert_eq!(summary["manifest"]["rule"], "and");
}

#[test]
fn invalid_manifest_exits_2() {
    let dir = TempDir::new().unwrap();
    let manifest = dir.path().join("m.json");
    fs::write(&manifest, r#"{"runs": 0}"#).unwrap();
    let o = pcnet(&["simulate", "--manifest", path_str(&manifest), "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 2);
    fs::write(&manifest, "not json").unwrap();
    let o = pcnet(&["simulate", "--manifest", path_str(&manifest), "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 2);
    let o = pcnet(&["simulate", "--manifest", "/nonexistent/m.json", "--out", path_str(dir.path())]);
    assert_eq!(code(&o), 2);
}

#[test]
fn estimate_finds_a_positive_edge() {
    let dir = TempDir::new().unwrap();
    let theta = PrecisionMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -0.8, -0.8, 1.0])).unwrap();
    let data = sample(&theta, 300, &DistributionSpec::normal(1)).unwrap();
    let input = write_data(dir.path(), "x.csv", &data);
    let out = dir.path().join("net.json");
    let bic = dir.path().join("bic.csv");
    for mode in ["gaussian", "t"] {
        let o = pcnet(&[
            "estimate",
            "--data",
            path_str(&input),
            "--mode",
            mode,
            "--lambda-count",
            "20",
            "--out",
            path_str(&out),
            "--bic-csv",
            path_str(&bic),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let doc = NetworkDocument::from_json_reader(fs::File::open(&out).unwrap()).unwrap();
        assert_eq!(doc.p, 2);
        assert_eq!(doc.nodes, vec!["v1", "v2"]);
        assert_eq!(doc.edges.len(), 1);
        assert!(doc.edges[0].weight > 0.0);
        assert!(doc.lambda.is_some() && doc.bic.unwrap().is_finite());
        let table = fs::read_to_string(&bic).unwrap();
        assert_eq!(table.lines().count(), 21);
    }
}

#[test]
fn estimate_flag_contract() {
    let dir = TempDir::new().unwrap();
    let data = sample(&PrecisionMatrix::identity(3), 50, &DistributionSpec::normal(2)).unwrap();
    let input = write_data(dir.path(), "x.csv", &data);
    let out = dir.path().join("net.json");
    let run = |extra: &[&str]| {
        let mut args = vec!["estimate", "--data", path_str(&input), "--out", path_str(&out), "--lambda-count", "5"];
        args.extend_from_slice(extra);
        code(&pcnet(&args))
    };
    assert_eq!(run(&["--mode", "t", "--nu", "4"]), 0);
    assert_eq!(run(&["--mode", "gaussian"]), 0);
    assert_eq!(run(&["--mode", "gaussian", "--nu", "4"]), 2);
    assert_eq!(run(&["--mode", "t", "--nu", "2"]), 2);
    assert_eq!(run(&["--mode", "cauchy"]), 2);
    assert_eq!(run(&["--rule", "xor"]), 2);
    assert_eq!(run(&["--lambda-lo", "3", "--lambda-hi", "1"]), 2);
    let missing = pcnet(&["estimate", "--data", "/nonexistent.csv", "--out", path_str(&out)]);
    assert_eq!(code(&missing), 2);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,2\n3,x\n").unwrap();
    assert_eq!(code(&pcnet(&["estimate", "--data", path_str(&bad), "--out", path_str(&out)])), 2);
}

#[test]
fn estimate_failure_at_every_lambda_exits_3() {
    let dir = TempDir::new().unwrap();
    // constant columns leave a zero scatter matrix
    let data = Dataset::new(DMatrix::from_element(10, 3, 1.0)).unwrap();
    let input = write_data(dir.path(), "x.csv", &data);
    let o = pcnet(&["estimate", "--data", path_str(&input), "--lambda-count", "3", "--out", path_str(&dir.path().join("n.json"))]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn analyze_star_and_empty() {
    let dir = TempDir::new().unwrap();
    let star = write_network(dir.path(), "star.json", 5, &[(0, 1, 0.2), (0, 2, 0.2), (0, 3, 0.2), (0, 4, 0.2)]);
    let out = dir.path().join("star");
    assert_eq!(code(&pcnet(&["analyze", "--network", path_str(&star), "--out", path_str(&out)])), 0);
    let cent = read_csv(&out.join("centralities.csv"));
    assert_eq!(&cent[0][2], "4");
    assert_eq!(cent[0][4].parse::<f64>().unwrap(), 1.0);
    for r in &cent[1..] {
        assert!(r[3].parse::<f64>().unwrap() < cent[0][3].parse::<f64>().unwrap());
        assert!(r[4].parse::<f64>().unwrap() < 1.0);
    }
    let hist = read_csv(&out.join("degree_histogram.csv"));
    assert_eq!((&hist[1][1], &hist[4][1]), ("4", "1"));

    let empty = write_network(dir.path(), "empty.json", 4, &[]);
    let out = dir.path().join("empty");
    assert_eq!(code(&pcnet(&["analyze", "--network", path_str(&empty), "--out", path_str(&out)])), 0);
    let m = read_csv(&out.join("measures.csv"));
    assert!(m[0].iter().skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"p\": 2").unwrap();
    assert_eq!(code(&pcnet(&["analyze", "--network", path_str(&bad), "--out", path_str(&out)])), 2);
}

#[test]
fn estimate_then_analyze_matches_library() {
    let dir = TempDir::new().unwrap();
    let (truth, theta) = pcnet::netgen::generate(&pcnet::netgen::TopologySpec::new(
        pcnet::netgen::TopologyKind::Hub,
        10,
        3,
    ))
    .unwrap();
    assert!(!truth.is_empty());
    let data = sample(&theta, 300, &DistributionSpec::t(3.0, 4)).unwrap();
    let input = write_data(dir.path(), "x.csv", &data);
    let net = dir.path().join("net.json");
    assert_eq!(code(&pcnet(&["estimate", "--data", path_str(&input), "--lambda-count", "15", "--out", path_str(&net)])), 0);
    let out = dir.path().join("a");
    assert_eq!(code(&pcnet(&["analyze", "--network", path_str(&net), "--out", path_str(&out)])), 0);

    let grid = pcnet::selection::build_grid((-6.0f64).exp(), 2.0, 15).unwrap();
    let cfg = pcnet::em::EmConfig::default();
    let report = pcnet::selection::select(&data, &grid, &cfg).unwrap();
    let pc = report.state.precision(&cfg).partial_correlations();
    let m = pcnet::analytics::measures(&pc);
    let row = &read_csv(&out.join("measures.csv"))[0];
    assert_eq!(row[1].parse::<usize>().unwrap(), m.edge_count);
    assert_eq!(row[2].parse::<f64>().unwrap(), m.mean_degree);
    assert_eq!(row[5].parse::<f64>().unwrap(), m.mean_clustering);
    assert!((row[6].parse::<f64>().unwrap() - m.mean_strength).abs() < 1e-15);
}

fn shock_json(net: &Path, node: &str) -> (i32, serde_json::Value, String) {
    let o = pcnet(&["shock", "--network", path_str(net), "--node", node]);
    let v = serde_json::from_slice(&o.stdout).unwrap_or(serde_json::Value::Null);
    (code(&o), v, String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn shock_cases() {
    let dir = TempDir::new().unwrap();
    let zero = write_network(dir.path(), "zero.json", 3, &[]);
    let (c, v, _) = shock_json(&zero, "2");
    assert_eq!(c, 0);
    assert_eq!(v["total_impact"], 1.0);

    let pair = write_network(dir.path(), "pair.json", 2, &[(0, 1, 0.5)]);
    let (c, v, _) = shock_json(&pair, "n1");
    assert_eq!(c, 0);
    let s: Vec<f64> = serde_json::from_value(v["steady_state"].clone()).unwrap();
    assert!((s[0] - 4.0 / 3.0).abs() < 1e-12 && (s[1] - 2.0 / 3.0).abs() < 1e-12);

    let asym = write_network(dir.path(), "asym.json", 4, &[(0, 1, 0.4), (1, 2, 0.2), (2, 3, -0.3)]);
    let totals: Vec<f64> = (1..=4)
        .map(|j| shock_json(&asym, &j.to_string()).1["total_impact"].as_f64().unwrap())
        .collect();
    assert!(totals.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-6), "{totals:?}");

    let dense = write_network(dir.path(), "dense.json", 3, &[(0, 1, 0.9), (0, 2, 0.9), (1, 2, 0.9)]);
    let (c, _, err) = shock_json(&dense, "1");
    assert_eq!(c, 3);
    assert!(err.contains("1.8"), "{err}");

    let (c, _, _) = shock_json(&pair, "7");
    assert_eq!(c, 2);
}

fn synthetic_prices(dir: &Path, p: usize, rows: usize) -> std::path::PathBuf {
    let params = GarchParams {
        c: 0.0,
        phi: 0.05,
        omega: 0.02,
        a: 0.08,
        b: 0.9,
    };
    let returns: Vec<Vec<f64>> = (0..p)
        .map(|j| simulate_ar_garch(&params, rows - 1, 200, 100 + j as u64).unwrap())
        .collect();
    let mut text = String::from("date");
    for j in 0..p {
        text.push_str(&format!(",bank{j}"));
    }
    text.push('\n');
    let mut level = vec![50.0f64; p];
    for t in 0..rows {
        if t > 0 {
            for j in 0..p {
                level[j] *= (returns[j][t - 1] / 100.0).exp();
            }
        }
        text.push_str(&chrono_like_date(t));
        for v in &level {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    let path = dir.join("prices.csv");
    fs::write(&path, text).unwrap();
    path
}

/// Consecutive calendar days from 2018-01-01.
fn chrono_like_date(offset: usize) -> String {
    let days_in = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    let (mut year, mut month, mut day) = (2018, 0usize, 1usize);
    for _ in 0..offset {
        let leap = year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
        let len = if month == 1 && leap { 29 } else { days_in[month] };
        day += 1;
        if day > len {
            day = 1;
            month += 1;
            if month == 12 {
                month = 0;
                year += 1;
            }
        }
    }
    format!("{year:04}-{:02}-{day:02}", month + 1)
}

#[test]
fn pipeline_on_synthetic_panel() {
    let dir = TempDir::new().unwrap();
    let prices = synthetic_prices(dir.path(), 5, 36 * ROWS_PER_MONTH + 2);
    let run = |out: &Path| {
        let o = pcnet(&[
            "pipeline",
            "--prices",
            path_str(&prices),
            "--lambda-count",
            "8",
            "--lambda-lo",
            "0.01",
            "--lambda-hi",
            "1",
            "--out",
            path_str(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let strength = read_csv(&a.join("strength.csv"));
    assert_eq!(strength.len(), 25);
    assert!(strength.iter().all(|r| r[8].parse::<f64>().unwrap().is_finite()));
    assert_eq!(&strength[0][3], "2018-01-03");
    assert_eq!(fs::read(a.join("strength.csv")).unwrap(), fs::read(b.join("strength.csv")).unwrap());
    assert_eq!(fs::read(a.join("residuals.csv")).unwrap(), fs::read(b.join("residuals.csv")).unwrap());
    assert_eq!(read_csv(&a.join("residuals.csv")).len(), 36 * ROWS_PER_MONTH);
    assert_eq!(fs::read_dir(a.join("windows")).unwrap().count(), 25);
    let diag: serde_json::Value = serde_json::from_slice(&fs::read(a.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag.as_array().unwrap().len(), 5);
}

#[test]
fn pipeline_errors_name_the_stage() {
    let dir = TempDir::new().unwrap();
    let prices = synthetic_prices(dir.path(), 2, 100);
    let o = pcnet(&["pipeline", "--prices", path_str(&prices), "--out", path_str(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("garch[bank0]"));
}

#[test]
fn emitted_csvs_round_trip_through_readers() {
    let dir = TempDir::new().unwrap();
    let data = sample(&PrecisionMatrix::identity(3), 40, &DistributionSpec::normal(8)).unwrap();
    let input = write_data(dir.path(), "x.csv", &data);
    let (back, names) = pcnet::io::read_dataset_csv(fs::File::open(&input).unwrap()).unwrap();
    assert_eq!(back.matrix(), data.matrix());
    assert_eq!(names.len(), 3);
}
