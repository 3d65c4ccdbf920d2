//! File formats: dense matrices, edge lists, datasets and network documents.
//!
//! Node indices in every external format are 1-based.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Dataset, EdgeSet, PartialCorrelationMatrix};
use crate::selection::CandidateRecord;

fn column_header(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("v{j}")).collect()
}

/// Dense CSV with a `v1..vp` header and one matrix row per line.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(column_header(m.ncols()))?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let (_, rows) = read_numeric_csv(input)?;
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub p: usize,
    /// Row-major.
    pub entries: Vec<f64>,
}

impl MatrixDocument {
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        Ok(Self {
            p: m.nrows(),
            entries: m.transpose().iter().copied().collect(),
        })
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.entries.len() != self.p * self.p {
            return Err(Error::Data(format!(
                "matrix document declares p = {} but has {} entries",
                self.p,
                self.entries.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.p, self.p, &self.entries))
    }
}

/// Header `j,k`, one 1-based pair per line.
pub fn write_edges_csv<W: Write>(edges: &EdgeSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "k"])?;
    for (j, k) in edges.iter() {
        w.write_record([(j + 1).to_string(), (k + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edges_csv<R: Read>(input: R, p: usize) -> Result<EdgeSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut edges = EdgeSet::empty(p);
    for (line, rec) in rdr.deserialize::<(usize, usize)>().enumerate() {
        let (j, k) = rec?;
        if j == 0 || k == 0 {
            return Err(Error::Data(format!("edge on line {} uses index 0; indices are 1-based", line + 2)));
        }
        edges
            .insert(j - 1, k - 1)
            .map_err(|e| Error::Data(format!("edge on line {}: {e}", line + 2)))?;
    }
    Ok(edges)
}

/// Edge list as a JSON array of 1-based `[j, k]` pairs.
pub fn edges_to_json(edges: &EdgeSet) -> serde_json::Value {
    serde_json::Value::Array(
        edges
            .iter()
            .map(|(j, k)| serde_json::json!([j + 1, k + 1]))
            .collect(),
    )
}

pub fn edges_from_json(value: &serde_json::Value, p: usize) -> Result<EdgeSet> {
    let pairs: Vec<(usize, usize)> = serde_json::from_value(value.clone())?;
    let mut edges = EdgeSet::empty(p);
    for (j, k) in pairs {
        if j == 0 || k == 0 {
            return Err(Error::Data("edge index 0; indices are 1-based".into()));
        }
        edges.insert(j - 1, k - 1).map_err(|e| Error::Data(e.to_string()))?;
    }
    Ok(edges)
}

/// Dataset CSV with a one-line header of column names.
pub fn write_dataset_csv<W: Write>(data: &Dataset, names: Option<&[String]>, out: W) -> Result<()> {
    let header = match names {
        Some(n) if n.len() == data.p() => n.to_vec(),
        Some(n) => {
            return Err(Error::Shape(format!("{} names for {} columns", n.len(), data.p())));
        }
        None => column_header(data.p()),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in data.matrix().row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headed numeric CSV into a dataset and its column names.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<(Dataset, Vec<String>)> {
    let (names, rows) = read_numeric_csv(input)?;
    let x = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
    Ok((Dataset::new(x)?, names))
}

fn read_numeric_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(Error::Data(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                rec.len(),
                names.len()
            )));
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, c)| {
                c.parse::<f64>()
                    .map_err(|_| Error::Data(format!("row {}, column {}: cannot parse {c:?}", i + 1, j + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Estimated network: node names, weighted 1-based edges, the chosen
/// penalty and its BIC, plus the per-penalty table when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub p: usize,
    pub nodes: Vec<String>,
    pub edges: Vec<NetworkEdge>,
    pub lambda: Option<f64>,
    pub bic: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bic_table: Vec<CandidateRecord>,
}

impl NetworkDocument {
    pub fn from_partial_correlations(pc: &PartialCorrelationMatrix, nodes: Vec<String>) -> Result<Self> {
        if nodes.len() != pc.dim() {
            return Err(Error::Shape(format!("{} node names for {} nodes", nodes.len(), pc.dim())));
        }
        Ok(Self {
            p: pc.dim(),
            nodes,
            edges: pc
                .weighted_edges()
                .into_iter()
                .map(|(i, j, weight)| NetworkEdge {
                    i: i + 1,
                    j: j + 1,
                    weight,
                })
                .collect(),
            lambda: None,
            bic: None,
            bic_table: Vec::new(),
        })
    }

    pub fn partial_correlations(&self) -> Result<PartialCorrelationMatrix> {
        if !self.nodes.is_empty() && self.nodes.len() != self.p {
            return Err(Error::Data(format!("{} node names for p = {}", self.nodes.len(), self.p)));
        }
        let mut seen = EdgeSet::empty(self.p);
        let mut triples = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.i == 0 || e.j == 0 || e.i > self.p || e.j > self.p {
                return Err(Error::Data(format!("edge ({}, {}) outside 1..={}", e.i, e.j, self.p)));
            }
            let fresh = seen
                .insert(e.i - 1, e.j - 1)
                .map_err(|err| Error::Data(format!("edge ({}, {}): {err}", e.i, e.j)))?;
            if !fresh {
                return Err(Error::Data(format!("duplicate edge ({}, {})", e.i, e.j)));
            }
            triples.push((e.i - 1, e.j - 1, e.weight));
        }
        PartialCorrelationMatrix::from_edges(self.p, &triples).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json_reader<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_csv_and_json_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -0.25, -0.25, 0.1 + 0.2]);
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("v1,v2\n"));
        assert_eq!(read_matrix_csv(buf.as_slice()).unwrap(), m);
        let doc = MatrixDocument::from_matrix(&m).unwrap();
        assert_eq!(doc.entries, vec![1.0, -0.25, -0.25, 0.1 + 0.2]);
        let back: MatrixDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
        assert!(MatrixDocument { p: 3, entries: vec![0.0; 4] }.to_matrix().is_err());
    }

    #[test]
    fn edge_formats_are_one_based() {
        let e = EdgeSet::from_pairs(4, [(0, 1), (2, 3)]).unwrap();
        let mut buf = Vec::new();
        write_edges_csv(&e, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "j,k\n1,2\n3,4\n");
        assert_eq!(read_edges_csv(buf.as_slice(), 4).unwrap(), e);
        assert!(read_edges_csv("j,k\n0,1\n".as_bytes(), 4).is_err());
        assert!(read_edges_csv("j,k\n2,2\n".as_bytes(), 4).is_err());
        let js = edges_to_json(&e);
        assert_eq!(js.to_string(), "[[1,2],[3,4]]");
        assert_eq!(edges_from_json(&js, 4).unwrap(), e);
    }

    #[test]
    fn dataset_round_trip_keeps_names() {
        let d = Dataset::new(DMatrix::from_row_slice(2, 2, &[1.5, 2.0, -3.0, 1e-17])).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_dataset_csv(&d, Some(&names), &mut buf).unwrap();
        let (back, n) = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(n, names);
        assert_eq!(back.matrix(), d.matrix());
        assert!(read_dataset_csv("a,b\n1,x\n2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn network_document_round_trip() {
        let pc = PartialCorrelationMatrix::from_edges(3, &[(0, 2, 0.4), (1, 2, -0.1)]).unwrap();
        let mut doc = NetworkDocument::from_partial_correlations(&pc, vec!["x".into(), "y".into(), "z".into()]).unwrap();
        doc.lambda = Some(0.1);
        doc.bic = Some(12.5);
        let text = doc.to_json_string().unwrap();
        let back = NetworkDocument::from_json_reader(text.as_bytes()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.partial_correlations().unwrap(), pc);
        assert_eq!(back.edges[0], NetworkEdge { i: 1, j: 3, weight: 0.4 });
    }

    #[test]
    fn malformed_networks_are_rejected() {
        let bad = r#"{"p":2,"nodes":["a","b"],"edges":[{"i":1,"j":3,"weight":0.1}],"lambda":null,"bic":null}"#;
        assert!(NetworkDocument::from_json_reader(bad.as_bytes()).unwrap().partial_correlations().is_err());
        let dup = r#"{"p":2,"nodes":[],"edges":[{"i":1,"j":2,"weight":0.1},{"i":2,"j":1,"weight":0.1}],"lambda":null,"bic":null}"#;
        assert!(NetworkDocument::from_json_reader(dup.as_bytes()).unwrap().partial_correlations().is_err());
        assert!(NetworkDocument::from_json_reader("{".as_bytes()).is_err());
    }
}
