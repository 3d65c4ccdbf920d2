//! Price tables and log-returns.

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Positive prices with optional dates. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    dates: Option<Vec<NaiveDate>>,
    names: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
}

impl PriceTable {
    pub fn new(dates: Option<Vec<NaiveDate>>, names: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Data("price table has no series".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Data(format!(
                    "row {} has {} cells, expected {}",
                    i + 1,
                    row.len(),
                    names.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::Data(format!(
                            "price at row {}, series {} is not positive: {v}",
                            i + 1,
                            names[j]
                        )));
                    }
                }
            }
        }
        if let Some(d) = &dates {
            if d.len() != rows.len() {
                return Err(Error::Data(format!("{} dates for {} rows", d.len(), rows.len())));
            }
            if let Some(i) = d.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::Data(format!(
                    "dates not strictly increasing at row {}: {} after {}",
                    i + 2,
                    d[i + 1],
                    d[i]
                )));
            }
        }
        Ok(Self { dates, names, rows })
    }

    /// Reads a CSV whose header names the series. A first column headed
    /// `date` holds ISO dates. Empty, `NA` and `NaN` cells are missing.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let dated = header.first().is_some_and(|h| h.eq_ignore_ascii_case("date"));
        let names: Vec<String> = header[usize::from(dated)..].to_vec();
        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut cells = rec.iter();
            if dated {
                let raw = cells.next().unwrap_or("");
                let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
                    .map_err(|e| Error::Data(format!("row {}: bad date {raw:?}: {e}", i + 1)))?;
                dates.push(d);
            }
            let row = cells
                .enumerate()
                .map(|(j, c)| parse_cell(c).map_err(|m| Error::Data(format!("row {}, column {}: {m}", i + 1, j + 1))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(dated.then_some(dates), names, rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn parse_cell(c: &str) -> std::result::Result<Option<f64>, String> {
    if c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    c.parse::<f64>().map(Some).map_err(|e| format!("{c:?}: {e}"))
}

/// Log-returns; row `t` is dated by the later of its two prices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTable {
    pub dates: Option<Vec<NaiveDate>>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl ReturnTable {
    /// Drops every row with a missing value.
    pub fn complete_rows(&self) -> ReturnTable {
        let keep: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.rows[i].iter().all(Option::is_some))
            .collect();
        ReturnTable {
            dates: self.dates.as_ref().map(|d| keep.iter().map(|&i| d[i]).collect()),
            names: self.names.clone(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Values of series `j`; `None` if any is missing.
    pub fn column(&self, j: usize) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

pub fn log_returns(prices: &PriceTable) -> Result<ReturnTable> {
    if prices.len() < 2 {
        return Err(Error::Data(format!(
            "log-returns need at least 2 price rows, got {}",
            prices.len()
        )));
    }
    let rows = prices
        .rows
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| match (a, b) {
                    (Some(a), Some(b)) => Some((b / a).ln()),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(ReturnTable {
        dates: prices.dates.as_ref().map(|d| d[1..].to_vec()),
        names: prices.names.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::E;

    fn table(rows: Vec<Vec<Option<f64>>>) -> PriceTable {
        let names = (0..rows[0].len()).map(|j| format!("s{j}")).collect();
        PriceTable::new(None, names, rows).unwrap()
    }

    #[test]
    fn unit_log_return() {
        let r = log_returns(&table(vec![vec![Some(1.0)], vec![Some(E)]])).unwrap();
        assert!((r.rows[0][0].unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_prices_give_zero() {
        let r = log_returns(&table(vec![vec![Some(3.0), Some(7.0)]; 5])).unwrap();
        assert!(r.rows.iter().flatten().all(|v| *v == Some(0.0)));
        assert_eq!(r.rows.len(), 4);
    }

    #[test]
    fn returns_telescope() {
        let mut p = 100.0;
        let mut rows = vec![vec![Some(p)]];
        let mut rng = crate::seeds::rng(12345);
        for _ in 0..500 {
            p *= (0.02 * (rng.random::<f64>() - 0.5)).exp();
            rows.push(vec![Some(p)]);
        }
        let t = table(rows);
        let r = log_returns(&t).unwrap();
        let total: f64 = r.rows.iter().map(|row| row[0].unwrap()).sum();
        let first = t.rows()[0][0].unwrap();
        let last = t.rows()[500][0].unwrap();
        assert!((total - (last / first).ln()).abs() < 1e-12);
    }

    #[test]
    fn missing_prices_propagate() {
        let r = log_returns(&table(vec![
            vec![Some(1.0), Some(1.0)],
            vec![None, Some(2.0)],
            vec![Some(2.0), Some(4.0)],
        ]))
        .unwrap();
        assert_eq!(r.rows[0][0], None);
        assert_eq!(r.rows[1][0], None);
        assert!(r.rows[1][1].is_some());
        assert_eq!(r.complete_rows().rows.len(), 0);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(log_returns(&table(vec![vec![Some(1.0)]])), Err(Error::Data(_))));
        assert!(PriceTable::new(None, vec!["a".into()], vec![vec![Some(-1.0)]]).is_err());
        let d = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        assert!(PriceTable::new(Some(vec![d, d]), vec!["a".into()], vec![vec![Some(1.0)]; 2]).is_err());
    }

    #[test]
    fn reads_dated_csv() {
        let csv = "date,A,B\n2020-01-02,1.0,2.0\n2020-01-03,NA,2.5\n2020-01-06,1.2,\n";
        let t = PriceTable::from_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(t.names(), ["A", "B"]);
        assert_eq!(t.dates().unwrap().len(), 3);
        assert_eq!(t.rows()[1][0], None);
        assert_eq!(t.rows()[2][1], None);
        let bad = "date,A\n2020-01-03,1\n2020-01-02,1\n";
        assert!(PriceTable::from_csv_reader(bad.as_bytes()).is_err());
    }
}
