//! Hypergraph and node-attribute data model, text-file ingestion, and the
//! size normalization constants shared by the likelihood and the
//! representation matrices.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A hyperedge with its node indices in ascending order and its multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    nodes: Vec<usize>,
    weight: u64,
}

impl Hyperedge {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn weight(&self) -> u64 {
        self.weight
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

/// Weighted hypergraph with deduplicated hyperedges.
///
/// Node-sets are stored in canonical (sorted) form; repeated node-sets are
/// merged and their multiplicity accumulated into the hyperedge weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    labels: Vec<String>,
    edges: Vec<Hyperedge>,
    index: HashMap<Vec<usize>, usize>,
    incidence: Vec<Vec<usize>>,
    max_size: usize,
}

/// Input layout of a hyperedge file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeFormat {
    /// One hyperedge per line; repeated lines accumulate weight.
    Raw,
    /// Leading positive integer weight followed by node labels.
    Aggregated,
}

impl std::str::FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(EdgeFormat::Raw),
            "aggregated" => Ok(EdgeFormat::Aggregated),
            other => Err(Error::Config(format!("unknown edge format `{other}`"))),
        }
    }
}

impl Hypergraph {
    /// Builds a hypergraph over `labels.len()` nodes from (node-set, weight)
    /// pairs. Duplicate node indices inside a set collapse; identical sets
    /// merge with summed weights.
    pub fn from_edges<I>(labels: Vec<String>, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, u64)>,
    {
        let n = labels.len();
        let mut hg = Hypergraph {
            incidence: vec![Vec::new(); n],
            labels,
            edges: Vec::new(),
            index: HashMap::new(),
            max_size: 0,
        };
        for (nodes, weight) in edges {
            hg.push_edge(nodes, weight)?;
        }
        Ok(hg)
    }

    fn push_edge(&mut self, mut nodes: Vec<usize>, weight: u64) -> Result<()> {
        let n = self.labels.len();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() < 2 {
            return Err(Error::Validation(format!(
                "hyperedge {nodes:?} has fewer than 2 distinct nodes"
            )));
        }
        if let Some(&bad) = nodes.iter().find(|&&i| i >= n) {
            return Err(Error::Validation(format!(
                "node index {bad} out of range for {n} nodes"
            )));
        }
        if weight == 0 {
            return Err(Error::Validation(format!(
                "hyperedge {nodes:?} has zero weight"
            )));
        }
        match self.index.get(&nodes) {
            Some(&j) => self.edges[j].weight += weight,
            None => {
                let j = self.edges.len();
                for &i in &nodes {
                    self.incidence[i].push(j);
                }
                self.max_size = self.max_size.max(nodes.len());
                self.index.insert(nodes.clone(), j);
                self.edges.push(Hyperedge { nodes, weight });
            }
        }
        Ok(())
    }

    /// Re-indexes the nodes onto `labels`, which must contain every current
    /// label. Nodes absent from `self` become isolated.
    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        let position: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let map =
            self.labels
                .iter()
                .map(|l| {
                    position.get(l.as_str()).copied().ok_or_else(|| {
                        Error::Validation(format!("node `{l}` missing from label list"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        if labels.len() != position.len() {
            return Err(Error::Validation("duplicate node labels".into()));
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.nodes.iter().map(|&i| map[i]).collect(), e.weight))
            .collect();
        Hypergraph::from_edges(labels, edges)
    }

    /// Same node set, restricted to the given hyperedges (in the given order).
    pub fn edge_subset(&self, edge_ids: &[usize]) -> Self {
        let edges = edge_ids
            .iter()
            .map(|&j| (self.edges[j].nodes.clone(), self.edges[j].weight));
        Hypergraph::from_edges(self.labels.clone(), edges)
            .expect("subset of a valid hypergraph is valid")
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Largest hyperedge size, 0 for an empty hypergraph.
    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn edge(&self, j: usize) -> &Hyperedge {
        &self.edges[j]
    }

    /// Indices of the hyperedges containing node `i`.
    pub fn incident_edges(&self, i: usize) -> &[usize] {
        &self.incidence[i]
    }

    /// Looks up a node set (any order, no duplicates) in the stored edge set.
    pub fn find(&self, nodes: &[usize]) -> Option<usize> {
        let mut key = nodes.to_vec();
        key.sort_unstable();
        self.index.get(&key).copied()
    }

    pub fn contains(&self, nodes: &[usize]) -> bool {
        self.find(nodes).is_some()
    }

    /// Number of distinct stored hyperedges containing node `i`.
    pub fn node_degree(&self, i: usize) -> Result<usize> {
        self.incidence
            .get(i)
            .map(Vec::len)
            .ok_or_else(|| Error::Domain(format!("node index {i} out of range")))
    }

    pub fn mean_degree(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        let total: usize = self.incidence.iter().map(Vec::len).sum();
        total as f64 / self.labels.len() as f64
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// The [`sparsity_constant`] for this hypergraph. An empty hypergraph is
    /// treated as having maximum size 2.
    pub fn sparsity_constant(&self) -> f64 {
        let d = self.max_size.max(2);
        sparsity_constant(self.num_nodes().max(d), d).expect("valid range")
    }

    /// Writes the aggregated format: weight, then labels in index order.
    pub fn write_aggregated(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for e in &self.edges {
            let mut line = e.weight.to_string();
            for &i in &e.nodes {
                line.push(' ');
                line.push_str(&self.labels[i]);
            }
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Reads a hyperedge file. Labels are mapped to dense indices in order of
/// first appearance.
pub fn load_hypergraph(path: &Path, format: EdgeFormat) -> Result<Hypergraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hypergraph(&text, format, path)
}

pub(crate) fn parse_hypergraph(text: &str, format: EdgeFormat, path: &Path) -> Result<Hypergraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut tokens = line.split([' ', '\t']).filter(|t| !t.is_empty());
        let weight = match format {
            EdgeFormat::Raw => 1,
            EdgeFormat::Aggregated => {
                let tok = tokens.next().unwrap_or_default();
                let w: i64 = tok.parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("expected integer weight, found `{tok}`"),
                })?;
                if w <= 0 {
                    return Err(Error::Validation(format!(
                        "{}:{line_no}: hyperedge weight must be positive, found {w}",
                        path.display()
                    )));
                }
                w as u64
            }
        };
        let mut nodes: Vec<usize> = tokens
            .map(|tok| {
                *ids.entry(tok.to_string()).or_insert_with(|| {
                    labels.push(tok.to_string());
                    labels.len() - 1
                })
            })
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() < 2 {
            return Err(Error::Validation(format!(
                "{}:{line_no}: hyperedge needs at least 2 distinct nodes",
                path.display()
            )));
        }
        edges.push((nodes, weight));
    }
    Hypergraph::from_edges(labels, edges)
}

/// One categorical attribute per node, stored as category indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeMatrix {
    labels: Vec<String>,
    assignment: Vec<usize>,
}

impl AttributeMatrix {
    pub fn new(labels: Vec<String>, assignment: Vec<usize>) -> Result<Self> {
        if let Some(&z) = assignment.iter().find(|&&z| z >= labels.len()) {
            return Err(Error::Validation(format!(
                "category index {z} out of range for {} categories",
                labels.len()
            )));
        }
        Ok(AttributeMatrix { labels, assignment })
    }

    pub fn num_categories(&self) -> usize {
        self.labels.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn category(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn category_label(&self, i: usize) -> &str {
        &self.labels[self.assignment[i]]
    }

    /// Same assignment with categories indexed by `order`, which must be a
    /// permutation of the current category labels.
    pub fn with_category_order(&self, order: &[String]) -> Result<Self> {
        let mut sorted_a: Vec<&String> = order.iter().collect();
        let mut sorted_b: Vec<&String> = self.labels.iter().collect();
        sorted_a.sort();
        sorted_b.sort();
        if sorted_a != sorted_b {
            return Err(Error::Validation(format!(
                "category order {order:?} does not match {:?}",
                self.labels
            )));
        }
        let map: Vec<usize> = self
            .labels
            .iter()
            .map(|l| order.iter().position(|o| o == l).expect("checked"))
            .collect();
        AttributeMatrix::new(
            order.to_vec(),
            self.assignment.iter().map(|&z| map[z]).collect(),
        )
    }

    /// Dense N×Z indicator matrix x_iz.
    pub fn one_hot(&self) -> Array2<f64> {
        let mut x = Array2::zeros((self.assignment.len(), self.labels.len()));
        for (i, &z) in self.assignment.iter().enumerate() {
            x[[i, z]] = 1.0;
        }
        x
    }

    pub fn write(&self, node_labels: &[String], path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (label, &z) in node_labels.iter().zip(&self.assignment) {
            writeln!(out, "{label}\t{}", self.labels[z]).map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads `node<TAB>category` lines for every node of `hg`. Categories are
/// indexed in order of first appearance.
pub fn load_attributes(path: &Path, hg: &Hypergraph) -> Result<AttributeMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_attributes(&text, hg, path)
}

pub(crate) fn parse_attributes(
    text: &str,
    hg: &Hypergraph,
    path: &Path,
) -> Result<AttributeMatrix> {
    let node_ids: HashMap<&str, usize> = hg
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut cat_ids: HashMap<String, usize> = HashMap::new();
    let mut cat_labels = Vec::new();
    let mut assignment: Vec<Option<usize>> = vec![None; hg.num_nodes()];
    for (line_no, line) in content_lines(text) {
        let (node, cat) = match line.split_once('\t') {
            Some((n, c)) => (n.trim(), c.trim()),
            None => {
                let mut it = line.split_whitespace();
                match (it.next(), it.next(), it.next()) {
                    (Some(n), Some(c), None) => (n, c),
                    _ => {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line: line_no,
                            msg: "expected `node<TAB>category`".into(),
                        })
                    }
                }
            }
        };
        if node.is_empty() || cat.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: "empty node or category label".into(),
            });
        }
        let i = *node_ids.get(node).ok_or_else(|| {
            Error::Validation(format!(
                "{}:{line_no}: attribute given for unknown node `{node}`",
                path.display()
            ))
        })?;
        let z = *cat_ids.entry(cat.to_string()).or_insert_with(|| {
            cat_labels.push(cat.to_string());
            cat_labels.len() - 1
        });
        match assignment[i] {
            Some(prev) if prev != z => {
                return Err(Error::Validation(format!(
                "{}:{line_no}: node `{node}` listed with conflicting categories `{}` and `{cat}`",
                path.display(),
                cat_labels[prev]
            )))
            }
            _ => assignment[i] = Some(z),
        }
    }
    let assignment = assignment
        .into_iter()
        .enumerate()
        .map(|(i, z)| {
            z.ok_or_else(|| {
                Error::Validation(format!(
                    "{}: no attribute for node `{}`",
                    path.display(),
                    hg.labels()[i]
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AttributeMatrix::new(cat_labels, assignment)
}

/// Natural log of the binomial coefficient.
fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Binomial coefficient when it is exactly representable as an f64 integer.
fn exact_binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        // acc * (n - t) / (t + 1) is always an integer at every step.
        acc = acc.checked_mul((n - t) as u128)? / (t as u128 + 1);
    }
    (acc < (1u128 << 53)).then_some(acc)
}

fn check_size(s: usize, n: usize) -> Result<()> {
    if s < 2 || s > n {
        return Err(Error::Domain(format!(
            "hyperedge size {s} outside [2, {n}]"
        )));
    }
    Ok(())
}

/// κ_s = s(s−1)/2 · C(N−2, s−2), the Poisson-rate normalization for size `s`.
///
/// Returns `f64::INFINITY` when the value exceeds the f64 range.
pub fn kappa(s: usize, n: usize) -> Result<f64> {
    check_size(s, n)?;
    let pairs = (s * (s - 1) / 2) as f64;
    Ok(match exact_binomial(n - 2, s - 2) {
        Some(b) => pairs * b as f64,
        None => (pairs.ln() + ln_binomial(n - 2, s - 2)).exp(),
    })
}

/// C(N−2, s−2)/κ_s, evaluated without forming the (possibly overflowing)
/// binomial coefficient.
fn size_term(s: usize, n: usize) -> f64 {
    match exact_binomial(n - 2, s - 2) {
        Some(b) => b as f64 / kappa(s, n).expect("checked range"),
        None => {
            let ln_b = ln_binomial(n - 2, s - 2);
            let ln_kappa = ((s * (s - 1) / 2) as f64).ln() + ln_b;
            (ln_b - ln_kappa).exp()
        }
    }
}

/// C = Σ_{s=2}^{D} C(N−2, s−2)/κ_s.
pub fn sparsity_constant(n: usize, max_size: usize) -> Result<f64> {
    if max_size < 2 || max_size > n {
        return Err(Error::Domain(format!(
            "maximum hyperedge size {max_size} outside [2, {n}]"
        )));
    }
    // Smallest terms first, compensated.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for s in (2..=max_size).rev() {
        let term = size_term(s, n);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// κ_s for every size 2..=max_size of a fixed node count.
#[derive(Debug, Clone)]
pub struct KappaTable {
    n: usize,
    values: Vec<f64>,
}

impl KappaTable {
    pub fn new(n: usize, max_size: usize) -> Result<Self> {
        let values = (0..=max_size)
            .map(|s| if s < 2 { Ok(f64::NAN) } else { kappa(s, n) })
            .collect::<Result<Vec<_>>>()?;
        Ok(KappaTable { n, values })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn max_size(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn get(&self, s: usize) -> Result<f64> {
        if s < 2 || s > self.max_size() {
            return Err(Error::Domain(format!(
                "hyperedge size {s} outside [2, {}]",
                self.max_size()
            )));
        }
        Ok(self.values[s])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn parse(text: &str, format: EdgeFormat) -> Result<Hypergraph> {
        parse_hypergraph(text, format, &PathBuf::from("mem"))
    }

    #[test]
    fn raw_lines_merge() {
        let hg = parse("a b\na b\na b c\n", EdgeFormat::Raw).unwrap();
        assert_eq!(hg.num_nodes(), 3);
        assert_eq!(hg.num_edges(), 2);
        assert_eq!(hg.max_size(), 3);
        assert_eq!(hg.edge(hg.find(&[0, 1]).unwrap()).weight(), 2);
        assert_eq!(hg.edge(hg.find(&[2, 1, 0]).unwrap()).weight(), 1);
        assert_eq!(hg.node_degree(0).unwrap(), 2);
    }

    #[test]
    fn duplicate_labels_collapse_within_line() {
        let hg = parse("a a b", EdgeFormat::Raw).unwrap();
        assert_eq!(hg.edge(0).nodes(), &[0, 1]);
    }

    #[test]
    fn comments_blank_lines_and_tabs() {
        let hg = parse("# header\n\na\tb\n  \nb c\n", EdgeFormat::Raw).unwrap();
        assert_eq!(hg.num_edges(), 2);
        assert_eq!(hg.labels(), &["a", "b", "c"]);
    }

    #[test]
    fn size_one_rejected() {
        let err = parse("a b\na a\n", EdgeFormat::Raw).unwrap_err();
        assert!(
            matches!(err, Error::Validation(ref m) if m.contains(":2:")),
            "{err}"
        );
    }

    #[test]
    fn aggregated_weights() {
        let hg = parse("3 a b\n2 b a\n1 a b c\n", EdgeFormat::Aggregated).unwrap();
        assert_eq!(hg.edge(0).weight(), 5);
        assert_eq!(hg.total_weight(), 6);
        assert!(matches!(
            parse("0 a b", EdgeFormat::Aggregated),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse("-2 a b", EdgeFormat::Aggregated),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            parse("a b c", EdgeFormat::Aggregated),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn aggregated_output_reloads_identically() {
        let hg = parse("c a\nb d e\na c\nd e\ne b d\n", EdgeFormat::Raw).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.txt");
        hg.write_aggregated(&path).unwrap();
        let again = load_hypergraph(&path, EdgeFormat::Aggregated).unwrap();
        assert_eq!(hg, again);
    }

    #[test]
    fn attributes_errors() {
        let hg = parse("a b\nb c\n", EdgeFormat::Raw).unwrap();
        let p = PathBuf::from("attrs");
        let x = parse_attributes("a\tX\nb\tY\nc\tX\n", &hg, &p).unwrap();
        assert_eq!(x.labels(), &["X", "Y"]);
        assert_eq!(x.assignment(), &[0, 1, 0]);

        let single = parse_attributes("a\tX\nb\tX\nc\tX\n", &hg, &p).unwrap();
        assert_eq!(single.num_categories(), 1);
        assert_eq!(single.assignment(), &[0, 0, 0]);

        let missing = parse_attributes("a\tX\nb\tY\n", &hg, &p).unwrap_err();
        assert!(missing.to_string().contains("`c`"), "{missing}");
        let conflict = parse_attributes("a\tX\nb\tY\nc\tX\na\tY\n", &hg, &p).unwrap_err();
        assert!(conflict.to_string().contains("conflicting"));
        let unknown = parse_attributes("a\tX\nb\tY\nc\tX\nq\tX\n", &hg, &p).unwrap_err();
        assert!(unknown.to_string().contains("unknown node `q`"));
        // Repeating an identical pair is harmless.
        assert!(parse_attributes("a\tX\nb\tY\nc\tX\nc\tX\n", &hg, &p).is_ok());
    }

    #[test]
    fn kappa_values() {
        for n in 2..30 {
            assert_eq!(kappa(2, n).unwrap(), 1.0);
        }
        assert_eq!(kappa(3, 5).unwrap(), 9.0);
        assert_eq!(kappa(4, 6).unwrap(), 36.0);
        assert!(kappa(1, 5).is_err());
        assert!(kappa(6, 5).is_err());
        // Log-gamma path agrees with exact arithmetic near the switch-over.
        // C(998, 8) exceeds 2^53, so it goes through log-gamma.
        assert!(exact_binomial(998, 8).is_none());
        let b: u128 = (0..8u128).fold(1, |acc, t| acc * (998 - t) / (t + 1));
        let exact = 45.0 * b as f64;
        let via_logs = (45f64.ln() + ln_binomial(998, 8)).exp();
        assert!((exact - via_logs).abs() / exact < 1e-11);
        assert!((kappa(10, 1000).unwrap() - exact).abs() / exact < 1e-11);
    }

    #[test]
    fn sparsity_constant_examples() {
        assert_eq!(sparsity_constant(100, 2).unwrap(), 1.0);
        assert!((sparsity_constant(1000, 10).unwrap() - 1.8).abs() < 1e-12);
        assert!((sparsity_constant(50, 5).unwrap() - 1.6).abs() < 1e-12);
        assert!(sparsity_constant(10, 1).is_err());
        assert!(sparsity_constant(10, 11).is_err());
    }

    #[test]
    fn degree_out_of_range() {
        let hg = parse("a b", EdgeFormat::Raw).unwrap();
        assert!(matches!(hg.node_degree(2), Err(Error::Domain(_))));
    }

    #[test]
    fn isolated_node_has_zero_degree() {
        let hg = Hypergraph::from_edges(
            vec!["a".into(), "b".into(), "c".into()],
            vec![(vec![0, 1], 1)],
        )
        .unwrap();
        assert_eq!(hg.node_degree(2).unwrap(), 0);
    }
}
