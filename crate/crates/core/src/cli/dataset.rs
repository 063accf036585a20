//! CSV ingestion and the synthetic-sample writer.
//!
//! A dataset holds the contemporaneous series `y_t`, `x_t`, `q_t` (and
//! optionally the exogenous persistence shocks `w_t`) for `t = 0..n`. The
//! estimation sample pairs `y_t` with `x_{t-1}` and `q_{t-1}`, so the first
//! row only contributes lagged values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dgp::{Sample, SimulatedSample};
use crate::error::{Error, Result};
use crate::persistence::PersistenceData;

pub const MIN_ROWS: usize = 30;

/// Header names of the columns to use. Empty `x` or `w` lists select every
/// column named `x1, x2, ...` or `w1, w2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub date: Option<String>,
    pub y: String,
    pub x: Vec<String>,
    pub q: String,
    pub w: Vec<String>,
    pub intercept: bool,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            date: None,
            y: "y".into(),
            x: Vec::new(),
            q: "q".into(),
            w: Vec::new(),
            intercept: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDataset {
    pub dates: Vec<NaiveDate>,
    pub y_name: String,
    pub x_names: Vec<String>,
    pub q_name: String,
    pub w_names: Vec<String>,
    /// Raw series, `n + 1` rows each.
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub q: DVector<f64>,
    pub w: DMatrix<f64>,
    /// Aligned `(y_t, x_{t-1}, q_{t-1})`, `t = 1..n`.
    pub sample: Sample,
}

impl EmpiricalDataset {
    /// `w_t` for `t = 1..n`, if the dataset has shock columns.
    pub fn u_phi(&self) -> Option<DMatrix<f64>> {
        (self.w.ncols() > 0).then(|| self.w.rows(1, self.w.nrows() - 1).into_owned())
    }

    /// Regressor `i` with the shocks, for the persistence fit.
    pub fn persistence_data(&self, i: usize) -> Result<PersistenceData> {
        let u_phi = self.u_phi().ok_or(Error::MissingExogenousDraws)?;
        if i >= self.x.ncols() {
            return Err(Error::InvalidConfig(format!(
                "regressor index {i} but only {} regressors",
                self.x.ncols()
            )));
        }
        PersistenceData::new(self.x.column(i).into_owned(), u_phi)
    }
}

fn numbered(header: &[String], prefix: char) -> Vec<String> {
    let mut cols: Vec<(usize, String)> = header
        .iter()
        .filter_map(|h| {
            let rest = h.strip_prefix(prefix)?;
            let k: usize = rest.parse().ok()?;
            Some((k, h.clone()))
        })
        .collect();
    cols.sort();
    cols.into_iter().map(|(_, h)| h).collect()
}

/// Reads a comma-separated file with one header row. Lines starting with
/// `#` are skipped. Row numbers in errors count data rows from 1.
pub fn parse_dataset(path: &Path, mapping: &ColumnMapping) -> Result<EmpiricalDataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset_str(&text, mapping)
}

pub fn parse_dataset_str(text: &str, mapping: &ColumnMapping) -> Result<EmpiricalDataset> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let x_names = if mapping.x.is_empty() {
        numbered(&header, 'x')
    } else {
        mapping.x.clone()
    };
    if x_names.is_empty() {
        return Err(Error::MissingColumn(
            "no regressor columns (x1, x2, ...)".into(),
        ));
    }
    let w_names = if mapping.w.is_empty() {
        numbered(&header, 'w')
    } else {
        mapping.w.clone()
    };
    let date_idx = mapping.date.as_deref().map(index).transpose()?;
    let y_idx = index(&mapping.y)?;
    let q_idx = index(&mapping.q)?;
    let x_idx = x_names
        .iter()
        .map(|n| index(n))
        .collect::<Result<Vec<_>>>()?;
    let w_idx = w_names
        .iter()
        .map(|n| index(n))
        .collect::<Result<Vec<_>>>()?;

    let mut dates = Vec::new();
    let (mut ys, mut qs, mut xs, mut ws) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let num = |j: usize| -> Result<f64> {
            let col = header[j].clone();
            let raw = rec.get(j).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::ParseError {
                    row,
                    col,
                    reason: "missing value".into(),
                });
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(Error::ParseError {
                    row,
                    col,
                    reason: format!("non-finite value '{raw}'"),
                }),
                Err(_) => Err(Error::ParseError {
                    row,
                    col,
                    reason: format!("not a number: '{raw}'"),
                }),
            }
        };
        if let Some(j) = date_idx {
            let raw = rec.get(j).unwrap_or("");
            let d = NaiveDate::parse_from_str(raw, "%Y-%m-%d").map_err(|_| Error::ParseError {
                row,
                col: header[j].clone(),
                reason: format!("not an ISO-8601 date: '{raw}'"),
            })?;
            dates.push(d);
        }
        ys.push(num(y_idx)?);
        qs.push(num(q_idx)?);
        for &j in &x_idx {
            xs.push(num(j)?);
        }
        for &j in &w_idx {
            ws.push(num(j)?);
        }
    }
    let rows = ys.len();
    if rows < MIN_ROWS + 1 {
        return Err(Error::TooFewRows {
            got: rows.saturating_sub(1),
            needed: MIN_ROWS,
        });
    }
    let (p, d) = (x_idx.len(), w_idx.len());
    let y = DVector::from_vec(ys);
    let q = DVector::from_vec(qs);
    let x = DMatrix::from_row_slice(rows, p, &xs);
    let w = DMatrix::from_row_slice(rows, d, &ws);
    let n = rows - 1;
    let sample = Sample::new(
        y.rows(1, n).into_owned(),
        x.rows(0, n).into_owned(),
        q.rows(0, n).into_owned(),
        mapping.intercept,
    )?;
    Ok(EmpiricalDataset {
        dates,
        y_name: mapping.y.clone(),
        x_names,
        q_name: mapping.q.clone(),
        w_names,
        y,
        x,
        q,
        w,
        sample,
    })
}

/// Writes a simulated replication as a dataset: `date, y, x1.., q, w1..`
/// for `t = 0..n`, with `y_0 = 0` and `w_0 = 0` filling the first row.
/// `comments` become leading `# key=value` lines.
pub fn dataset_csv(sim: &SimulatedSample, comments: &[(&str, String)]) -> String {
    let n = sim.y.len();
    let p = sim.path.p();
    let d = sim.path.u_phi.ncols();
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let mut s = String::new();
    for (k, v) in comments {
        writeln!(s, "# {k}={v}").unwrap();
    }
    let mut cols = vec!["date".to_string(), "y".to_string()];
    cols.extend((1..=p).map(|i| format!("x{i}")));
    cols.push("q".into());
    cols.extend((1..=d).map(|i| format!("w{i}")));
    writeln!(s, "{}", cols.join(",")).unwrap();
    for t in 0..=n {
        let date = start + Days::new(t as u64);
        let y = if t == 0 { 0.0 } else { sim.y[t - 1] };
        let mut row = vec![date.format("%Y-%m-%d").to_string(), y.to_string()];
        row.extend((0..p).map(|i| sim.path.x[(t, i)].to_string()));
        row.push(sim.q[t].to_string());
        row.extend((0..d).map(|j| {
            if t == 0 {
                "0".to_string()
            } else {
                sim.path.u_phi[(t - 1, j)].to_string()
            }
        }));
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    s
}
