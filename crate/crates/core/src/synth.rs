//! Planted two-community benchmark hypergraphs with model-drawn attributes.
//!
//! Node sets of each size are sampled by a Metropolis–Hastings chain whose
//! stationary law is proportional to the edge intensity λ_e under the planted
//! parameters.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{
    load_attributes, load_hypergraph, AttributeMatrix, EdgeFormat, Hypergraph,
};

pub const EDGES_FILE: &str = "edges.txt";
pub const ATTRIBUTES_FILE: &str = "attributes.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Planted benchmark settings. K = Z = 2 throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub n: usize,
    pub p_u: f64,
    pub w_in: f64,
    /// Largest hyperedge size D.
    pub max_size: usize,
    /// Target |E|/N; the number of draws is round(N · edges_per_node).
    pub edges_per_node: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n: 1000,
            p_u: 0.8,
            w_in: 10.0,
            max_size: 10,
            edges_per_node: 10.0,
            seed: 0,
        }
    }
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.p_u) {
            return Err(Error::Config(format!(
                "p_U must lie in [0.5, 1], got {}",
                self.p_u
            )));
        }
        if !(self.w_in > 0.0 && self.w_in.is_finite()) {
            return Err(Error::Config(format!(
                "w_in must be positive, got {}",
                self.w_in
            )));
        }
        if self.max_size < 2 {
            return Err(Error::Config(format!(
                "D must be at least 2, got {}",
                self.max_size
            )));
        }
        if self.n < self.max_size {
            return Err(Error::Config(format!(
                "N = {} is smaller than D = {}",
                self.n, self.max_size
            )));
        }
        if !(self.edges_per_node >= 0.0 && self.edges_per_node.is_finite()) {
            return Err(Error::Config(format!(
                "|E|/N must be a non-negative number, got {}",
                self.edges_per_node
            )));
        }
        Ok(())
    }

    pub fn num_draws(&self) -> usize {
        (self.n as f64 * self.edges_per_node).round() as usize
    }
}

/// Independent stream seeds derived from one master seed (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_PLANT: u64 = 1;
const STREAM_EDGES: u64 = 2;
const STREAM_ATTRS: u64 = 3;

/// Ground-truth (U, W, β). A random ⌈N/2⌉ of the nodes get [p_U, 1−p_U],
/// the others [1−p_U, p_U].
pub fn planted_parameters(cfg: &PlantedConfig) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    cfg.validate()?;
    let mut order: Vec<usize> = (0..cfg.n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.seed,
        STREAM_PLANT,
    )));
    let first = cfg.n.div_ceil(2);
    let mut u = Array2::zeros((cfg.n, 2));
    for (rank, &i) in order.iter().enumerate() {
        let major = if rank < first { 0 } else { 1 };
        u[[i, major]] = cfg.p_u;
        u[[i, 1 - major]] = 1.0 - cfg.p_u;
    }
    let mut w = Array2::ones((2, 2));
    w[[0, 0]] = cfg.w_in;
    w[[1, 1]] = cfg.w_in;
    Ok((u, w, Array2::eye(2)))
}

/// Metropolis–Hastings chain over node sets of one fixed size, targeting
/// P(e) ∝ λ_e. A proposal swaps one member for one non-member, both chosen
/// uniformly, so the proposal is symmetric.
pub struct SubsetSampler<'a> {
    u: &'a Array2<f64>,
    w: &'a Array2<f64>,
    // perm[..size] is the current set, perm[size..] its complement.
    perm: Vec<usize>,
    size: usize,
    sum: Array1<f64>,
    self_term: f64,
    rate: f64,
    rng: ChaCha8Rng,
}

impl<'a> SubsetSampler<'a> {
    pub fn new(u: &'a Array2<f64>, w: &'a Array2<f64>, size: usize, seed: u64) -> Result<Self> {
        let n = u.nrows();
        if size < 2 || size > n {
            return Err(Error::Domain(format!(
                "cannot sample sets of size {size} from {n} nodes"
            )));
        }
        if w.dim() != (u.ncols(), u.ncols()) {
            return Err(Error::Validation(
                "affinity matrix does not match memberships".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut sampler = SubsetSampler {
            u,
            w,
            perm,
            size,
            sum: Array1::zeros(u.ncols()),
            self_term: 0.0,
            rate: 0.0,
            rng,
        };
        for a in 0..size {
            let ui = u.row(sampler.perm[a]);
            sampler.sum += &ui;
            sampler.self_term += ui.dot(&w.dot(&ui));
        }
        sampler.rate = sampler.current_rate(&sampler.sum, sampler.self_term);
        Ok(sampler)
    }

    fn current_rate(&self, sum: &Array1<f64>, self_term: f64) -> f64 {
        (0.5 * (sum.dot(&self.w.dot(sum)) - self_term)).max(0.0)
    }

    /// One proposal; returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        let n = self.perm.len();
        if self.size == n {
            return false;
        }
        let a = self.rng.random_range(0..self.size);
        let b = self.rng.random_range(self.size..n);
        let (out, inn) = (self.u.row(self.perm[a]), self.u.row(self.perm[b]));
        let sum = &self.sum - &out + inn;
        let self_term = self.self_term - out.dot(&self.w.dot(&out)) + inn.dot(&self.w.dot(&inn));
        let rate = self.current_rate(&sum, self_term);
        let accept = rate >= self.rate || self.rng.random::<f64>() * self.rate < rate;
        if accept {
            self.perm.swap(a, b);
            self.sum = sum;
            self.self_term = self_term;
            self.rate = rate;
        }
        accept
    }

    pub fn advance(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// The current set, sorted.
    pub fn current(&self) -> Vec<usize> {
        let mut nodes = self.perm[..self.size].to_vec();
        nodes.sort_unstable();
        nodes
    }

    /// Burn-in of 10·N proposals, then `count` draws spaced N proposals apart.
    pub fn sample(mut self, count: usize) -> Vec<Vec<usize>> {
        let n = self.perm.len();
        self.advance(10 * n);
        (0..count)
            .map(|_| {
                self.advance(n);
                self.current()
            })
            .collect()
    }
}

/// Draws round(N · |E|/N) node sets, each of a size uniform on {2..D},
/// and aggregates repeated draws into weights.
pub fn sample_hypergraph(
    u: &Array2<f64>,
    w: &Array2<f64>,
    cfg: &PlantedConfig,
) -> Result<Hypergraph> {
    cfg.validate()?;
    if u.nrows() != cfg.n {
        return Err(Error::Validation(format!(
            "membership matrix has {} rows, config has N = {}",
            u.nrows(),
            cfg.n
        )));
    }
    let labels: Vec<String> = (0..cfg.n).map(|i| i.to_string()).collect();
    let draws = cfg.num_draws();
    if draws == 0 {
        log::warn!("|E|/N = {} yields no hyperedges", cfg.edges_per_node);
        return Hypergraph::from_edges(labels, Vec::new());
    }
    let base = derive_seed(cfg.seed, STREAM_EDGES);
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    let mut per_size = vec![0usize; cfg.max_size + 1];
    for _ in 0..draws {
        per_size[rng.random_range(2..=cfg.max_size)] += 1;
    }
    let chains: Vec<Vec<Vec<usize>>> = (2..=cfg.max_size)
        .into_par_iter()
        .map(|s| {
            if per_size[s] == 0 {
                return Ok(Vec::new());
            }
            let sampler = SubsetSampler::new(u, w, s, derive_seed(base, s as u64))?;
            Ok(sampler.sample(per_size[s]))
        })
        .collect::<Result<_>>()?;
    Hypergraph::from_edges(labels, chains.into_iter().flatten().map(|nodes| (nodes, 1)))
}

/// Each node's category drawn from π_i = u_i β / Σ_k u_ik.
pub fn sample_attributes(
    u: &Array2<f64>,
    beta: &Array2<f64>,
    seed: u64,
) -> Result<AttributeMatrix> {
    if beta.nrows() != u.ncols() {
        return Err(Error::Validation(
            "attribute mixing matrix does not match memberships".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = beta.ncols();
    let assignment = u
        .rows()
        .into_iter()
        .map(|ui| {
            let pi = ui.dot(beta) / ui.sum();
            let draw: f64 = rng.random();
            let mut acc = 0.0;
            for (c, &p) in pi.iter().enumerate() {
                acc += p;
                if draw < acc {
                    return c;
                }
            }
            // Rounding can leave acc slightly below 1.
            (0..z).rev().find(|&c| pi[c] > 0.0).unwrap_or(z - 1)
        })
        .collect();
    AttributeMatrix::new((0..z).map(|c| c.to_string()).collect(), assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub config: PlantedConfig,
    pub hg: Hypergraph,
    pub x: AttributeMatrix,
    pub u: Array2<f64>,
    pub w: Array2<f64>,
    pub beta: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruth {
    config: PlantedConfig,
    u: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, path: &Path) -> Result<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::format(path, "ragged matrix"));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::format(path, e))
}

pub fn generate_instance(cfg: &PlantedConfig) -> Result<PlantedInstance> {
    let (u, w, beta) = planted_parameters(cfg)?;
    let hg = sample_hypergraph(&u, &w, cfg)?;
    let x = sample_attributes(&u, &beta, derive_seed(cfg.seed, STREAM_ATTRS))?;
    Ok(PlantedInstance {
        config: cfg.clone(),
        hg,
        x,
        u,
        w,
        beta,
    })
}

impl PlantedInstance {
    /// Writes the aggregated edge list, the attribute file and the ground
    /// truth JSON into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.hg.write_aggregated(&dir.join(EDGES_FILE))?;
        self.x.write(self.hg.labels(), &dir.join(ATTRIBUTES_FILE))?;
        let truth = GroundTruth {
            config: self.config.clone(),
            u: to_rows(&self.u),
            w: to_rows(&self.w),
            beta: to_rows(&self.beta),
        };
        let path = dir.join(GROUND_TRUTH_FILE);
        let text = serde_json::to_string_pretty(&truth).map_err(|e| Error::format(&path, e))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(GROUND_TRUTH_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let truth: GroundTruth =
            serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
        let u = from_rows(truth.u, &path)?;
        let beta = from_rows(truth.beta, &path)?;
        let labels: Vec<String> = (0..u.nrows()).map(|i| i.to_string()).collect();
        let hg = load_hypergraph(&dir.join(EDGES_FILE), EdgeFormat::Aggregated)?
            .with_labels(labels)
            .map_err(|e| {
                Error::format(
                    &path,
                    format!("ground truth does not match the edge file: {e}"),
                )
            })?;
        let categories: Vec<String> = (0..beta.ncols()).map(|c| c.to_string()).collect();
        let x =
            load_attributes(&dir.join(ATTRIBUTES_FILE), &hg)?.with_category_order(&categories)?;
        Ok(PlantedInstance {
            config: truth.config,
            hg,
            x,
            u,
            w: from_rows(truth.w, &path)?,
            beta,
        })
    }
}

/// One-parameter sweeps around the default point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sweep {
    #[serde(rename = "pU")]
    PU,
    #[serde(rename = "win")]
    Win,
    #[serde(rename = "D")]
    D,
    #[serde(rename = "density")]
    Density,
}

impl std::str::FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pU" | "pu" => Ok(Sweep::PU),
            "win" => Ok(Sweep::Win),
            "D" | "d" => Ok(Sweep::D),
            "density" => Ok(Sweep::Density),
            other => Err(Error::Config(format!("unknown sweep `{other}`"))),
        }
    }
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::PU => "pU",
            Sweep::Win => "win",
            Sweep::D => "D",
            Sweep::Density => "density",
        }
    }

    pub fn values(self) -> Vec<f64> {
        let tenths = |lo: u32, hi: u32| (lo..=hi).map(|t| t as f64 / 10.0).collect::<Vec<_>>();
        match self {
            Sweep::PU => tenths(5, 10),
            Sweep::Win => {
                let mut v = tenths(1, 9);
                v.extend((1..=10).map(f64::from));
                v
            }
            Sweep::D => (2..=10).map(f64::from).collect(),
            Sweep::Density => (1..=10).map(|k| 2.0 * k as f64).collect(),
        }
    }

    /// The swept parameter of `cfg`, replaced by `value`.
    pub fn apply(self, cfg: &PlantedConfig, value: f64) -> PlantedConfig {
        let mut out = cfg.clone();
        match self {
            Sweep::PU => out.p_u = value,
            Sweep::Win => out.w_in = value,
            Sweep::D => out.max_size = value as usize,
            Sweep::Density => out.edges_per_node = value,
        }
        out
    }

    pub fn value_of(self, cfg: &PlantedConfig) -> f64 {
        match self {
            Sweep::PU => cfg.p_u,
            Sweep::Win => cfg.w_in,
            Sweep::D => cfg.max_size as f64,
            Sweep::Density => cfg.edges_per_node,
        }
    }
}
