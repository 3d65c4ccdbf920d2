use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use pcnet::analytics::{centralities_with, degree_histogram, measures_with, shock as propagate, StrengthMode};
use pcnet::em::EmConfig;
use pcnet::experiment::{run_experiment, ExperimentManifest};
use pcnet::io::{read_dataset_csv, NetworkDocument};
use pcnet::pipeline::{self, PipelineConfig, PriceTable};
use pcnet::selection::{select, LambdaGrid};
use pcnet::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn load_network(path: &Path) -> Result<NetworkDocument> {
    NetworkDocument::from_json_reader(File::open(path)?)
}

pub fn simulate(manifest: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let text = fs::read_to_string(manifest)?;
    let mut m = ExperimentManifest::from_json(&text)?;
    if let Some(s) = seed {
        m.seed = s;
    }
    let result = run_experiment(&m)?;
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("metrics.csv"))?;
    result.write_metrics_csv(&mut w)?;
    w.flush()?;
    write_json(&out.join("summary.json"), &result.summary())?;
    if result.failures() > 0 {
        eprintln!("{} of {} rows flagged as failed", result.failures(), result.rows.len());
    }
    Ok(())
}

pub fn estimate(data: &Path, config: &EmConfig, grid: &LambdaGrid, out: &Path, bic_csv: Option<&Path>) -> Result<()> {
    let (dataset, names) = read_dataset_csv(File::open(data)?)?;
    let report = select(&dataset, grid, config)?;
    let pc = report.state.precision(config).partial_correlations();
    let mut doc = NetworkDocument::from_partial_correlations(&pc, names)?;
    doc.lambda = Some(report.chosen_lambda());
    doc.bic = Some(report.chosen_bic());
    doc.bic_table = report.records.clone();
    write_json(out, &doc)?;
    if let Some(path) = bic_csv {
        let mut w = create(path)?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn node_names(doc: &NetworkDocument) -> Vec<String> {
    if doc.nodes.len() == doc.p {
        doc.nodes.clone()
    } else {
        (1..=doc.p).map(|j| j.to_string()).collect()
    }
}

pub fn analyze(network: &Path, mode: StrengthMode, out: &Path) -> Result<()> {
    let doc = load_network(network)?;
    let pc = doc.partial_correlations()?;
    let names = node_names(&doc);
    fs::create_dir_all(out)?;

    let m = measures_with(&pc, mode);
    let mut w = csv::Writer::from_writer(create(&out.join("measures.csv"))?);
    w.write_record([
        "nodes",
        "edges",
        "mean_degree",
        "mean_eccentricity",
        "mean_distance",
        "mean_clustering",
        "mean_strength",
    ])?;
    w.write_record([
        doc.p.to_string(),
        m.edge_count.to_string(),
        m.mean_degree.to_string(),
        m.mean_eccentricity.to_string(),
        m.mean_distance.to_string(),
        m.mean_clustering.to_string(),
        m.mean_strength.to_string(),
    ])?;
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(&out.join("centralities.csv"))?);
    w.write_record(["node", "name", "degree", "strength", "eigenvector"])?;
    for c in centralities_with(&pc, mode)? {
        w.write_record([
            (c.node + 1).to_string(),
            names[c.node].clone(),
            c.degree.to_string(),
            c.strength.to_string(),
            c.eigenvector.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(create(&out.join("degree_histogram.csv"))?);
    w.write_record(["degree", "count"])?;
    for (d, count) in degree_histogram(&pc).into_iter().enumerate() {
        w.write_record([d.to_string(), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn resolve_node(doc: &NetworkDocument, node: &str) -> Result<usize> {
    if let Some(j) = doc.nodes.iter().position(|n| n == node) {
        return Ok(j);
    }
    match node.parse::<usize>() {
        Ok(k) if (1..=doc.p).contains(&k) => Ok(k - 1),
        _ => Err(Error::Config(format!(
            "node '{node}' is neither a node name nor an index in 1..={}",
            doc.p
        ))),
    }
}

pub fn shock(network: &Path, node: &str, out: Option<&Path>) -> Result<()> {
    let doc = load_network(network)?;
    let pc = doc.partial_correlations()?;
    let j = resolve_node(&doc, node)?;
    let r = propagate(&pc, j)?;
    let value = serde_json::json!({
        "node": j + 1,
        "name": node_names(&doc)[j],
        "nodes": node_names(&doc),
        "initial": r.initial,
        "steady_state": r.steady_state,
        "total_impact": r.total_impact,
        "spectral_radius": r.spectral_radius,
        "abs_spectral_radius": r.abs_spectral_radius,
    });
    match out {
        Some(path) => write_json(path, &value),
        None => {
            println!("{}", serde_json::to_string_pretty(&value)?);
            Ok(())
        }
    }
}

pub fn pipeline(
    prices: &Path,
    em: EmConfig,
    grid: LambdaGrid,
    window: usize,
    step: usize,
    out: &Path,
) -> Result<()> {
    let table = PriceTable::from_csv_path(prices)?;
    let config = PipelineConfig { window, step, grid, em };
    let result = pipeline::run(&table, &config)?;
    fs::create_dir_all(out.join("windows"))?;

    let mut w = csv::Writer::from_writer(create(&out.join("residuals.csv"))?);
    let mut header = Vec::new();
    if result.dates.is_some() {
        header.push("date".to_string());
    }
    header.extend(result.names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in result.residuals.row_iter().enumerate() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(d) = &result.dates {
            rec.push(d[i].to_string());
        }
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    write_json(&out.join("diagnostics.json"), &result.diagnostics)?;

    let date = |i: usize| result.dates.as_ref().map(|d| d[i].to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(create(&out.join("strength.csv"))?);
    w.write_record([
        "window",
        "start_row",
        "end_row",
        "start_date",
        "end_date",
        "lambda",
        "bic",
        "edges",
        "mean_strength",
        "failure",
    ])?;
    for o in &result.windows {
        let b = o.bounds;
        let (lambda, bic, edges, strength, failure) = match &o.result {
            Ok(est) => {
                let mut doc = NetworkDocument::from_partial_correlations(&est.partial_correlations, result.names.clone())?;
                doc.lambda = Some(est.lambda);
                doc.bic = Some(est.bic);
                write_json(&out.join("windows").join(format!("window_{:04}.json", b.id + 1)), &doc)?;
                (
                    est.lambda.to_string(),
                    est.bic.to_string(),
                    est.measures.edge_count.to_string(),
                    est.measures.mean_strength.to_string(),
                    String::new(),
                )
            }
            Err(msg) => (String::new(), String::new(), String::new(), String::new(), msg.clone()),
        };
        w.write_record([
            (b.id + 1).to_string(),
            (b.start + 1).to_string(),
            b.end.to_string(),
            date(b.start),
            date(b.end - 1),
            lambda,
            bic,
            edges,
            strength,
            failure,
        ])?;
    }
    w.flush()?;
    Ok(())
}
