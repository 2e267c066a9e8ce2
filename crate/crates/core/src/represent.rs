//! Node-by-node representations of a hypergraph and the embedding bundle
//! consumed by the visualization scripts.
//!
//! Bundle layout:
//! - `matrix.tsv`: `i<TAB>j<TAB>value` with `i < j` (dense node indices),
//!   one line per nonzero upper-triangle entry; absent for kind `attributes`.
//! - `attributes.csv`: dense one-hot rows, header `label,<category>...`;
//!   only for kind `attributes`.
//! - `nodes.csv`: `index,label,category,degree`.
//! - `manifest.json`: [`BundleManifest`].

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{AttributeMatrix, Hypergraph, KappaTable};
use crate::model::{edge_intensity, LatentParams};

pub const MATRIX_FILE: &str = "matrix.tsv";
pub const ATTRIBUTE_MATRIX_FILE: &str = "attributes.csv";
pub const NODES_FILE: &str = "nodes.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    /// Σ λ_e/κ_{|e|} over shared hyperedges, from fitted parameters.
    Learned,
    /// Σ A_e over shared hyperedges.
    Raw,
    /// Σ A_e/κ_{|e|} over shared hyperedges.
    SizeWeighted,
    /// One-hot node attributes.
    Attributes,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Learned => "learned",
            MatrixKind::Raw => "raw",
            MatrixKind::SizeWeighted => "size-weighted",
            MatrixKind::Attributes => "attributes",
        }
    }
}

impl std::str::FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(MatrixKind::Learned),
            "raw" => Ok(MatrixKind::Raw),
            "size-weighted" | "size_weighted" => Ok(MatrixKind::SizeWeighted),
            "attributes" => Ok(MatrixKind::Attributes),
            other => Err(Error::Config(format!("unknown matrix kind `{other}`"))),
        }
    }
}

/// Symmetric N×N matrix with zero diagonal, stored as its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePairMatrix {
    n: usize,
    kind: MatrixKind,
    entries: BTreeMap<(usize, usize), f64>,
}

impl NodePairMatrix {
    pub fn new(n: usize, kind: MatrixKind) -> Self {
        NodePairMatrix {
            n,
            kind,
            entries: BTreeMap::new(),
        }
    }

    fn add(&mut self, i: usize, j: usize, value: f64) {
        let key = if i < j { (i, j) } else { (j, i) };
        *self.entries.entry(key).or_insert(0.0) += value;
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    /// Stored (i, j, value) triples with i < j, in row-major order.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn num_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.upper_entries() {
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (i, j, v) in self.upper_entries() {
            // Shortest representation that parses back to `v`.
            writeln!(out, "{i}\t{j}\t{v:?}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, n: usize, kind: MatrixKind) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = NodePairMatrix::new(n, kind);
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad("expected `i<TAB>j<TAB>value`"));
            }
            let i: usize = fields[0].parse().map_err(|_| bad("bad row index"))?;
            let j: usize = fields[1].parse().map_err(|_| bad("bad column index"))?;
            let v: f64 = fields[2].parse().map_err(|_| bad("bad value"))?;
            if i >= j || j >= n {
                return Err(bad("indices must satisfy i < j < N"));
            }
            m.entries.insert((i, j), v);
        }
        Ok(m)
    }
}

fn accumulate<F>(hg: &Hypergraph, kind: MatrixKind, mut weight: F) -> Result<NodePairMatrix>
where
    F: FnMut(&crate::hypergraph::Hyperedge) -> Result<f64>,
{
    let mut m = NodePairMatrix::new(hg.num_nodes(), kind);
    for e in hg.edges() {
        let value = weight(e)?;
        let nodes = e.nodes();
        for (a, &i) in nodes.iter().enumerate() {
            for &j in &nodes[a + 1..] {
                m.add(i, j, value);
            }
        }
    }
    Ok(m)
}

/// ā_ij = Σ_{e ∋ i, j} λ_e/κ_{|e|} under the fitted parameters.
pub fn learned_representation(hg: &Hypergraph, params: &LatentParams) -> Result<NodePairMatrix> {
    if params.num_nodes() != hg.num_nodes() {
        return Err(Error::Validation(format!(
            "parameters cover {} nodes, hypergraph has {}",
            params.num_nodes(),
            hg.num_nodes()
        )));
    }
    let kappa = KappaTable::new(hg.num_nodes(), hg.max_size().max(2))?;
    accumulate(hg, MatrixKind::Learned, |e| {
        Ok(edge_intensity(e.nodes(), params) / kappa.get(e.size())?)
    })
}

/// Weighted one-mode projection: `Raw` sums A_e, `SizeWeighted` sums
/// A_e/κ_{|e|}.
pub fn projected_adjacency(hg: &Hypergraph, kind: MatrixKind) -> Result<NodePairMatrix> {
    match kind {
        MatrixKind::Raw => accumulate(hg, kind, |e| Ok(e.weight() as f64)),
        MatrixKind::SizeWeighted => {
            let kappa = KappaTable::new(hg.num_nodes(), hg.max_size().max(2))?;
            accumulate(hg, kind, |e| Ok(e.weight() as f64 / kappa.get(e.size())?))
        }
        other => Err(Error::Config(format!(
            "`{}` is not a projection kind",
            other.name()
        ))),
    }
}

/// Rows of U rescaled to sum to one and W divided by its largest entry.
pub fn viz_normalize(params: &LatentParams) -> (Array2<f64>, Array2<f64>) {
    let mut u = params.u.clone();
    for mut row in u.rows_mut() {
        let total = row.sum();
        if total > 0.0 {
            row /= total;
        }
    }
    let max = params.w.iter().copied().fold(0.0, f64::max);
    let w = if max > 0.0 {
        &params.w / max
    } else {
        params.w.clone()
    };
    (u, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub kind: MatrixKind,
    pub num_nodes: usize,
    pub num_categories: usize,
    /// Mean number of distinct hyperedges per node.
    pub avg_degree: f64,
    pub matrix_file: Option<String>,
    pub attribute_file: Option<String>,
    pub nodes_file: String,
}

/// The matrix to export; attributes are written densely.
#[derive(Debug, Clone, Copy)]
pub enum BundleData<'a> {
    Pairs(&'a NodePairMatrix),
    Attributes,
}

/// Writes an embedding bundle for `data` into `out_dir`.
pub fn export_embedding_bundle(
    data: BundleData<'_>,
    hg: &Hypergraph,
    x: Option<&AttributeMatrix>,
    out_dir: &Path,
) -> Result<BundleManifest> {
    if let Some(x) = x {
        if x.num_nodes() != hg.num_nodes() {
            return Err(Error::Validation(
                "attributes do not cover the hypergraph".into(),
            ));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (kind, matrix_file, attribute_file) = match data {
        BundleData::Pairs(m) => {
            if m.num_nodes() != hg.num_nodes() {
                return Err(Error::Validation(
                    "matrix size does not match the hypergraph".into(),
                ));
            }
            m.write(&out_dir.join(MATRIX_FILE))?;
            (m.kind(), Some(MATRIX_FILE.to_string()), None)
        }
        BundleData::Attributes => {
            let x =
                x.ok_or_else(|| Error::Config("attribute export requires attribute data".into()))?;
            write_one_hot(x, hg.labels(), &out_dir.join(ATTRIBUTE_MATRIX_FILE))?;
            (
                MatrixKind::Attributes,
                None,
                Some(ATTRIBUTE_MATRIX_FILE.to_string()),
            )
        }
    };
    write_nodes(hg, x, &out_dir.join(NODES_FILE))?;
    let manifest = BundleManifest {
        kind,
        num_nodes: hg.num_nodes(),
        num_categories: x.map_or(0, AttributeMatrix::num_categories),
        avg_degree: hg.mean_degree(),
        matrix_file,
        attribute_file,
        nodes_file: NODES_FILE.to_string(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e))
}

fn write_one_hot(x: &AttributeMatrix, labels: &[String], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend(x.labels().iter().cloned());
    w.write_record(&header)
        .map_err(|e| Error::format(path, e))?;
    let dense = x.one_hot();
    for (label, row) in labels.iter().zip(dense.rows()) {
        let mut record = vec![label.clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)
            .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_nodes(hg: &Hypergraph, x: Option<&AttributeMatrix>, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "label", "category", "degree"])
        .map_err(|e| Error::format(path, e))?;
    for (i, label) in hg.labels().iter().enumerate() {
        let category = x.map_or("", |x| x.category_label(i));
        let degree = hg.node_degree(i)?.to_string();
        w.write_record([i.to_string().as_str(), label, category, &degree])
            .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::kappa;
    use ndarray::array;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    fn mixed() -> Hypergraph {
        Hypergraph::from_edges(
            labels(6),
            vec![(vec![0, 1], 3), (vec![0, 1, 2], 2), (vec![2, 3, 4, 0], 1)],
        )
        .unwrap()
    }

    #[test]
    fn raw_and_size_weighted() {
        let hg = mixed();
        let raw = projected_adjacency(&hg, MatrixKind::Raw).unwrap();
        assert_eq!(raw.get(0, 1), 5.0);
        assert_eq!(raw.get(1, 0), 5.0);
        assert_eq!(raw.get(0, 2), 3.0);
        assert_eq!(raw.get(3, 4), 1.0);
        assert_eq!(raw.get(0, 5), 0.0);
        assert_eq!(raw.get(2, 2), 0.0);

        let sw = projected_adjacency(&hg, MatrixKind::SizeWeighted).unwrap();
        let (k3, k4) = (kappa(3, 6).unwrap(), kappa(4, 6).unwrap());
        assert_eq!(k3, 12.0);
        assert_eq!(k4, 36.0);
        assert!((sw.get(0, 1) - (3.0 + 2.0 / k3)).abs() < 1e-15);
        assert!((sw.get(0, 2) - (2.0 / k3 + 1.0 / k4)).abs() < 1e-15);
        assert!((sw.get(3, 4) - 1.0 / k4).abs() < 1e-15);

        let pairs = Hypergraph::from_edges(labels(3), vec![(vec![0, 1], 4)]).unwrap();
        assert_eq!(
            projected_adjacency(&pairs, MatrixKind::Raw)
                .unwrap()
                .to_dense(),
            projected_adjacency(&pairs, MatrixKind::SizeWeighted)
                .unwrap()
                .to_dense()
        );
        assert!(projected_adjacency(&hg, MatrixKind::Learned).is_err());
    }

    #[test]
    fn learned_single_community() {
        let hg = Hypergraph::from_edges(labels(4), vec![(vec![0, 1, 2], 1)]).unwrap();
        let p = LatentParams::new(
            array![[1.0], [2.0], [3.0], [4.0]],
            array![[0.5]],
            Array2::zeros((1, 0)),
        )
        .unwrap();
        let m = learned_representation(&hg, &p).unwrap();
        // λ = 0.5·(1·2 + 1·3 + 2·3) = 5.5, κ_3 = 3·C(2,1) = 6.
        assert!((m.get(0, 2) - 5.5 / 6.0).abs() < 1e-15);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.num_entries(), 3);
    }

    #[test]
    fn shared_support_across_kinds() {
        let hg = mixed();
        let p = LatentParams::new(
            Array2::from_elem((6, 2), 0.3),
            array![[1.0, 0.2], [0.2, 2.0]],
            Array2::zeros((2, 0)),
        )
        .unwrap();
        let keys = |m: &NodePairMatrix| {
            m.upper_entries()
                .map(|(i, j, _)| (i, j))
                .collect::<Vec<_>>()
        };
        let learned = keys(&learned_representation(&hg, &p).unwrap());
        assert_eq!(
            learned,
            keys(&projected_adjacency(&hg, MatrixKind::Raw).unwrap())
        );
        assert_eq!(
            learned,
            keys(&projected_adjacency(&hg, MatrixKind::SizeWeighted).unwrap())
        );
    }

    #[test]
    fn normalization() {
        let p = LatentParams::new(
            array![[1.0, 0.0], [0.2, 0.6], [3.0, 1.0]],
            array![[2.0, 2.0], [2.0, 2.0]],
            Array2::zeros((2, 0)),
        )
        .unwrap();
        let (u, w) = viz_normalize(&p);
        assert_eq!(u.row(0).to_vec(), vec![1.0, 0.0]);
        assert!(u.rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-12));
        assert_eq!(w, Array2::<f64>::ones((2, 2)));
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let hg = mixed();
        let x = AttributeMatrix::new(vec!["a".into(), "b".into()], vec![0, 1, 0, 1, 0, 1]).unwrap();
        let m = projected_adjacency(&hg, MatrixKind::SizeWeighted).unwrap();
        let manifest =
            export_embedding_bundle(BundleData::Pairs(&m), &hg, Some(&x), dir.path()).unwrap();
        assert_eq!(manifest.num_nodes, 6);
        assert_eq!(manifest.num_categories, 2);
        assert_eq!(manifest.avg_degree, hg.mean_degree());
        let back = NodePairMatrix::read(&dir.path().join(MATRIX_FILE), 6, MatrixKind::SizeWeighted)
            .unwrap();
        assert_eq!(back, m);

        let nodes = fs::read_to_string(dir.path().join(NODES_FILE)).unwrap();
        assert_eq!(nodes.lines().nth(1), Some("0,v0,a,3"));
        assert_eq!(nodes.lines().last(), Some("5,v5,b,0"));

        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let parsed: BundleManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, manifest);
        assert!(text.contains("\"size-weighted\""));
    }

    #[test]
    fn attribute_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let hg = mixed();
        let x = AttributeMatrix::new(vec!["a".into(), "b".into()], vec![0, 1, 0, 1, 0, 1]).unwrap();
        let manifest =
            export_embedding_bundle(BundleData::Attributes, &hg, Some(&x), dir.path()).unwrap();
        assert_eq!(manifest.kind, MatrixKind::Attributes);
        let text = fs::read_to_string(dir.path().join(ATTRIBUTE_MATRIX_FILE)).unwrap();
        assert_eq!(text.lines().next(), Some("label,a,b"));
        assert_eq!(text.lines().nth(2), Some("v1,0,1"));
        assert!(export_embedding_bundle(BundleData::Attributes, &hg, None, dir.path()).is_err());
    }

    #[test]
    fn empty_hypergraph_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let hg = Hypergraph::from_edges(labels(3), Vec::new()).unwrap();
        let m = projected_adjacency(&hg, MatrixKind::Raw).unwrap();
        let manifest =
            export_embedding_bundle(BundleData::Pairs(&m), &hg, None, dir.path()).unwrap();
        assert_eq!(manifest.avg_degree, 0.0);
        assert_eq!(
            fs::read_to_string(dir.path().join(MATRIX_FILE)).unwrap(),
            ""
        );
    }

    #[test]
    fn malformed_coordinates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        fs::write(&path, "0\t1\t2.5\n2\t1\t1\n").unwrap();
        let err = NodePairMatrix::read(&path, 3, MatrixKind::Raw).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }
}
