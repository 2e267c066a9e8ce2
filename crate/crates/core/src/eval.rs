//! Hyperedge-prediction AUC with five-fold cross-validation, (K, γ) grid
//! search, and ground-truth membership recovery scores.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use itertools::Itertools;
use ndarray::{Array2, ArrayView1};
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{AttributeMatrix, Hypergraph};
use crate::model::{existence_prob, fit, Hyperparams, LatentParams};
use crate::synth::derive_seed;

pub const NUM_FOLDS: usize = 5;
/// Rejection draws allowed per negative sample.
pub const NEGATIVE_BUDGET: usize = 1_000_000;
/// Largest K accepted by [`membership_cosine_similarity`].
pub const MAX_COSINE_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// 1-based.
    pub id: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform random partition of the hyperedges into five folds whose sizes
/// differ by at most one.
pub fn make_folds(hg: &Hypergraph, seed: u64) -> Result<Vec<Fold>> {
    let m = hg.num_edges();
    if m < NUM_FOLDS {
        return Err(Error::Validation(format!(
            "cross-validation needs at least {NUM_FOLDS} hyperedges, got {m}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assigned = vec![0usize; m];
    for (pos, &j) in order.iter().enumerate() {
        assigned[j] = pos % NUM_FOLDS;
    }
    Ok((0..NUM_FOLDS)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..m).partition(|&j| assigned[j] == f);
            Fold {
                id: f + 1,
                train,
                test,
            }
        })
        .collect())
}

/// A uniform random node set of the same size as `positive`, not in
/// `test_set` and not already in `used`. The result is added to `used`.
pub fn negative_sample<R: rand::Rng>(
    positive: &[usize],
    n: usize,
    test_set: &HashSet<Vec<usize>>,
    used: &mut HashSet<Vec<usize>>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let s = positive.len();
    if s > n {
        return Err(Error::Domain(format!("cannot draw {s} of {n} nodes")));
    }
    for _ in 0..NEGATIVE_BUDGET {
        let mut nodes = index::sample(rng, n, s).into_vec();
        nodes.sort_unstable();
        if !test_set.contains(&nodes) && !used.contains(&nodes) {
            used.insert(nodes.clone());
            return Ok(nodes);
        }
    }
    Err(Error::Domain(format!(
        "no admissible negative of size {s} after {NEGATIVE_BUDGET} draws"
    )))
}

/// Fraction of (positive, negative) score pairs where the positive scores
/// strictly higher, ties counting one half.
pub fn auc_from_scores(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Validation("AUC of an empty pair list".into()));
    }
    let total: f64 = pairs
        .iter()
        .map(|&(pos, neg)| {
            if pos > neg {
                1.0
            } else if pos == neg {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / pairs.len() as f64)
}

/// AUC of the held-out hyperedges `test` (node sets) against one negative
/// each. `max_size` is the largest size the model is evaluated on.
pub fn auc_score<R: rand::Rng>(
    test: &[&[usize]],
    params: &LatentParams,
    n: usize,
    max_size: usize,
    rng: &mut R,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let test_set: HashSet<Vec<usize>> = test.iter().map(|e| e.to_vec()).collect();
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(test.len());
    for &e in test {
        let neg = negative_sample(e, n, &test_set, &mut used, rng)?;
        pairs.push((
            existence_prob(e, params, n, max_size)?,
            existence_prob(&neg, params, n, max_size)?,
        ));
    }
    auc_from_scores(&pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
}

fn fold_seeds(seed: u64, fold: &Fold) -> (u64, u64) {
    (
        derive_seed(seed, 2 * fold.id as u64),
        derive_seed(seed, 2 * fold.id as u64 + 1),
    )
}

/// Fits on each fold's training edges (attributes fully visible) and scores
/// its test edges. Fold `f` fits with a seed derived from `seed` and `f`, so
/// all candidates sharing `folds` and `seed` see the same restarts and
/// negatives.
pub fn cross_validate(
    hg: &Hypergraph,
    x: Option<&AttributeMatrix>,
    hp: &Hyperparams,
    folds: &[Fold],
    seed: u64,
) -> Result<CvResult> {
    hp.validate()?;
    let max_size = hg.max_size();
    let fold_aucs = folds
        .par_iter()
        .map(|fold| {
            let (fit_seed, neg_seed) = fold_seeds(seed, fold);
            let train = hg.edge_subset(&fold.train);
            let report = fit(&train, x, &hp.clone().with_seed(fit_seed))?;
            let test: Vec<&[usize]> = fold.test.iter().map(|&j| hg.edge(j).nodes()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(neg_seed);
            auc_score(&test, &report.params, hg.num_nodes(), max_size, &mut rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_auc = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
    Ok(CvResult {
        fold_aucs,
        mean_auc,
    })
}

/// Candidate hyperparameters for [`grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ks: Vec<usize>,
    pub gammas: Vec<f64>,
}

impl Grid {
    /// K ∈ {2..Z}, γ ∈ {0.1..0.9}; with `structure_only` the γ grid is {0}.
    pub fn standard(num_categories: usize, structure_only: bool) -> Self {
        let gammas = if structure_only {
            vec![0.0]
        } else {
            (1..=9).map(|t| t as f64 / 10.0).collect()
        };
        Grid {
            ks: (2..=num_categories).collect(),
            gammas,
        }
    }

    pub fn candidates(&self) -> Vec<(usize, f64)> {
        self.ks
            .iter()
            .flat_map(|&k| self.gammas.iter().map(move |&g| (k, g)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub k: usize,
    pub gamma: f64,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub candidates: Vec<CandidateResult>,
    pub selected_k: usize,
    pub selected_gamma: f64,
    pub seed: u64,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// One `K,gamma,fold,auc` row per candidate and fold.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("K,gamma,fold,auc\n");
        for c in &self.candidates {
            for (f, auc) in c.fold_aucs.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", c.k, c.gamma, f + 1, auc));
            }
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Cross-validates every candidate on one shared set of folds and selects
/// the highest mean AUC, preferring smaller K and then smaller γ on ties.
/// `hp.k` and `hp.gamma` are ignored.
pub fn grid_search(
    hg: &Hypergraph,
    x: Option<&AttributeMatrix>,
    hp: &Hyperparams,
    grid: &Grid,
    seed: u64,
) -> Result<EvalReport> {
    let mut cands = grid.candidates();
    if cands.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    cands.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cands.dedup();
    let folds = make_folds(hg, derive_seed(seed, 0))?;
    let candidates = cands
        .par_iter()
        .map(|&(k, gamma)| {
            let hp = Hyperparams {
                k,
                gamma,
                ..hp.clone()
            };
            let cv = cross_validate(hg, x, &hp, &folds, seed)?;
            Ok(CandidateResult {
                k,
                gamma,
                fold_aucs: cv.fold_aucs,
                mean_auc: cv.mean_auc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = &candidates[0];
    for c in &candidates[1..] {
        if c.mean_auc > best.mean_auc {
            best = c;
        }
    }
    Ok(EvalReport {
        selected_k: best.k,
        selected_gamma: best.gamma,
        candidates,
        seed,
    })
}

/// cos(a, b) evaluated as 1 − ½‖â − b̂‖², which rounds to exactly 1 for
/// parallel rows. Errors on a zero row.
fn row_cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::Domain("cosine similarity of a zero row".into()));
    }
    let dist2: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x / na - y / nb).powi(2))
        .sum();
    Ok((1.0 - 0.5 * dist2).clamp(-1.0, 1.0))
}

/// Mean per-node cosine between rows of `truth` and `inferred`, maximized
/// over all K! column permutations of `inferred`.
pub fn membership_cosine_similarity(truth: &Array2<f64>, inferred: &Array2<f64>) -> Result<f64> {
    if truth.dim() != inferred.dim() {
        return Err(Error::Validation(format!(
            "membership shapes differ: {:?} vs {:?}",
            truth.dim(),
            inferred.dim()
        )));
    }
    let (n, k) = truth.dim();
    if k > MAX_COSINE_K {
        return Err(Error::Domain(format!(
            "K = {k} exceeds {MAX_COSINE_K} for permutation search"
        )));
    }
    if n == 0 {
        return Err(Error::Validation("no nodes".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for perm in (0..k).permutations(k) {
        let permuted = inferred.select(ndarray::Axis(1), &perm);
        let mut total = 0.0;
        for i in 0..n {
            total += row_cosine(truth.row(i), permuted.row(i))?;
        }
        best = best.max(total / n as f64);
    }
    Ok(best)
}
