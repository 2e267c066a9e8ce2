//! Fitted-parameter files: `U.csv`, `W.csv`, `beta.csv` and `manifest.json`.
//!
//! - `U.csv`: header `label,0,..,K-1`, one row per node.
//! - `W.csv`: header `community,0,..,K-1`, one row per community.
//! - `beta.csv`: header `community,<category labels>`, one row per community.
//!
//! Values are written in the shortest form that parses back to the same
//! `f64` (exponent notation for very small or large magnitudes), so reading
//! the files reproduces the parameters exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;
use crate::model::{FitReport, Hyperparams, LatentParams};

pub const U_FILE: &str = "U.csv";
pub const W_FILE: &str = "W.csv";
pub const BETA_FILE: &str = "beta.csv";
pub const FIT_MANIFEST_FILE: &str = "manifest.json";

fn write_table(path: &Path, header: &[String], rows: Vec<(String, Vec<f64>)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(header).map_err(|e| Error::format(path, e))?;
    for (key, values) in rows {
        let mut record = vec![key];
        record.extend(values.iter().map(|v| format!("{v:?}")));
        w.write_record(&record)
            .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct Table {
    header: Vec<String>,
    rows: Vec<(String, Vec<f64>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(path, e))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let line = k + 2;
        let bad = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        if record.len() != header.len() + 1 {
            return Err(bad(format!(
                "expected {} fields, got {}",
                header.len() + 1,
                record.len()
            )));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("`{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((record[0].to_string(), values));
    }
    Ok(Table { header, rows })
}

fn community_header(first: &str, k: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((0..k).map(|c| c.to_string()))
        .collect()
}

fn matrix_rows(m: &Array2<f64>) -> Vec<(String, Vec<f64>)> {
    m.rows()
        .into_iter()
        .enumerate()
        .map(|(k, r)| (k.to_string(), r.to_vec()))
        .collect()
}

/// Writes `U.csv`, `W.csv` and `beta.csv` into `dir`.
pub fn write_params(
    params: &LatentParams,
    node_labels: &[String],
    category_labels: &[String],
    dir: &Path,
) -> Result<()> {
    if node_labels.len() != params.num_nodes() || category_labels.len() != params.num_categories() {
        return Err(Error::Validation(
            "labels do not match the parameter shapes".into(),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let k = params.num_communities();
    let u_rows = node_labels
        .iter()
        .zip(params.u.rows())
        .map(|(l, r)| (l.clone(), r.to_vec()))
        .collect();
    write_table(&dir.join(U_FILE), &community_header("label", k), u_rows)?;
    write_table(
        &dir.join(W_FILE),
        &community_header("community", k),
        matrix_rows(&params.w),
    )?;
    let beta_header: Vec<String> = std::iter::once("community".to_string())
        .chain(category_labels.iter().cloned())
        .collect();
    write_table(
        &dir.join(BETA_FILE),
        &beta_header,
        matrix_rows(&params.beta),
    )
}

fn to_matrix(rows: Vec<Vec<f64>>, ncols: usize) -> Array2<f64> {
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .expect("rows checked against header")
}

/// Reads parameters written by [`write_params`], ordering the rows of U by
/// the node indices of `hg`. Returns the parameters and the category labels.
pub fn read_params(dir: &Path, hg: &Hypergraph) -> Result<(LatentParams, Vec<String>)> {
    let u_path = dir.join(U_FILE);
    let u_table = read_table(&u_path)?;
    let k = u_table.header.len();
    let position: HashMap<&str, usize> = hg
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut u = Array2::from_elem((hg.num_nodes(), k), f64::NAN);
    for (label, values) in &u_table.rows {
        let &i = position
            .get(label.as_str())
            .ok_or_else(|| Error::format(&u_path, format!("unknown node `{label}`")))?;
        u.row_mut(i).assign(&ndarray::ArrayView1::from(values));
    }
    if let Some(i) = (0..hg.num_nodes()).find(|&i| u[[i, 0]].is_nan()) {
        return Err(Error::format(
            &u_path,
            format!("no row for node `{}`", hg.labels()[i]),
        ));
    }
    let w_path = dir.join(W_FILE);
    let w_table = read_table(&w_path)?;
    if w_table.header.len() != k || w_table.rows.len() != k {
        return Err(Error::format(&w_path, format!("expected a {k}x{k} matrix")));
    }
    let w = to_matrix(w_table.rows.into_iter().map(|r| r.1).collect(), k);
    let b_path = dir.join(BETA_FILE);
    let b_table = read_table(&b_path)?;
    if b_table.rows.len() != k {
        return Err(Error::format(&b_path, format!("expected {k} rows")));
    }
    let z = b_table.header.len();
    let beta = to_matrix(b_table.rows.into_iter().map(|r| r.1).collect(), z);
    let params = LatentParams::new(u, w, beta).map_err(|e| Error::format(dir, e))?;
    Ok((params, b_table.header))
}

/// Everything needed to replay a fit and inspect its convergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub hyperparams: Hyperparams,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_categories: usize,
    pub best_loglik: f64,
    pub best_restart: usize,
    pub per_restart_logliks: Vec<f64>,
    pub loglik_trace: Vec<f64>,
    /// The effective run configuration, when produced by the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl FitManifest {
    pub fn new(report: &FitReport, hp: &Hyperparams, hg: &Hypergraph) -> Self {
        FitManifest {
            hyperparams: hp.clone(),
            num_nodes: hg.num_nodes(),
            num_edges: hg.num_edges(),
            num_categories: report.params.num_categories(),
            best_loglik: report.best_loglik,
            best_restart: report.best_restart,
            per_restart_logliks: report.per_restart_logliks.clone(),
            loglik_trace: report.loglik_trace.clone(),
            config: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(self, path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
