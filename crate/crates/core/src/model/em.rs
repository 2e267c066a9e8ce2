use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::likelihood::{edge_sums, intensity_from_sums, total_loglik, MIN_RATE};
use super::{FitReport, Hyperparams, LatentParams, MembershipRule};
use crate::error::{Error, Result};
use crate::hypergraph::{AttributeMatrix, Hypergraph};

/// Posterior quantities of one E-step.
///
/// The pair/community responsibilities ρ^(e)_{ijkq} = u_ik u_jq w_kq / (2λ_e)
/// are kept implicit: only λ_e and the per-edge membership sums are stored,
/// together with the parameters they were computed from.
#[derive(Debug, Clone)]
pub struct EmAuxiliary {
    u: Array2<f64>,
    w: Array2<f64>,
    /// λ_e per edge, floored at [`MIN_RATE`].
    rates: Vec<f64>,
    /// Σ_{i∈e} u_i per edge (|E|×K).
    edge_sums: Array2<f64>,
    /// Σ_{i∈e} u_ik u_iq per edge, flattened K×K.
    edge_self: Vec<Array2<f64>>,
    /// h_{i,z_i,k} for each node's own category (N×K).
    h: Option<Array2<f64>>,
}

impl EmAuxiliary {
    pub fn rate(&self, edge: usize) -> f64 {
        self.rates[edge]
    }

    /// h_{i,z_i,·} as an N×K matrix, if attributes were supplied.
    pub fn h(&self) -> Option<&Array2<f64>> {
        self.h.as_ref()
    }

    /// ρ^(e)_{ijkq} for nodes `i ≠ j` of edge `edge`.
    pub fn rho(&self, edge: usize, i: usize, j: usize, k: usize, q: usize) -> f64 {
        self.u[[i, k]] * self.u[[j, q]] * self.w[[k, q]] / (2.0 * self.rates[edge])
    }

    /// Σ over ordered node pairs and community pairs of ρ^(e); 1 up to
    /// rounding unless λ_e was floored.
    pub fn rho_total(&self, hg: &Hypergraph, edge: usize) -> f64 {
        let nodes = hg.edge(edge).nodes();
        let k = self.u.ncols();
        let mut total = 0.0;
        for &i in nodes {
            for &j in nodes {
                if i == j {
                    continue;
                }
                for a in 0..k {
                    for b in 0..k {
                        total += self.rho(edge, i, j, a, b);
                    }
                }
            }
        }
        total
    }
}

/// Computes ρ (implicitly) and h from the current parameters.
pub fn e_step(hg: &Hypergraph, x: Option<&AttributeMatrix>, params: &LatentParams) -> EmAuxiliary {
    let k = params.num_communities();
    let mut rates = Vec::with_capacity(hg.num_edges());
    let mut sums = Array2::zeros((hg.num_edges(), k));
    let mut selfs = Vec::with_capacity(hg.num_edges());
    for (j, e) in hg.edges().iter().enumerate() {
        let (sum, self_term) = edge_sums(e.nodes(), &params.u, &params.w);
        rates.push(intensity_from_sums(sum.view(), self_term, &params.w).max(MIN_RATE));
        let mut outer = Array2::zeros((k, k));
        for &i in e.nodes() {
            let ui = params.u.row(i);
            for a in 0..k {
                for b in 0..k {
                    outer[[a, b]] += ui[a] * ui[b];
                }
            }
        }
        selfs.push(outer);
        sums.row_mut(j).assign(&sum);
    }
    let h = x.map(|x| {
        let mut h = Array2::zeros((x.num_nodes(), k));
        for (i, &z) in x.assignment().iter().enumerate() {
            let mut row = &params.u.row(i) * &params.beta.column(z);
            let norm = row.sum();
            if norm > 0.0 {
                row /= norm;
            } else {
                row.fill(1.0 / k as f64);
            }
            h.row_mut(i).assign(&row);
        }
        h
    });
    EmAuxiliary {
        u: params.u.clone(),
        w: params.w.clone(),
        rates,
        edge_sums: sums,
        edge_self: selfs,
        h,
    }
}

/// Σ_{e∋i} A_e Σ_{j∈e∖i} Σ_q ρ^(e)_{ijkq} for every (i, k).
fn membership_numerator(hg: &Hypergraph, aux: &EmAuxiliary) -> Array2<f64> {
    let mut num = Array2::zeros(aux.u.dim());
    for (j, e) in hg.edges().iter().enumerate() {
        let scale = e.weight() as f64 / (2.0 * aux.rates[j]);
        let sum = aux.edge_sums.row(j);
        for &i in e.nodes() {
            let ui = aux.u.row(i);
            let others = &sum - &ui;
            let pull = aux.w.dot(&others);
            let mut row = num.row_mut(i);
            row.scaled_add(scale, &(&ui * &pull));
        }
    }
    num
}

/// Membership update. All rows are computed from the previous U (one
/// simultaneous block), with the penalty Σ_{j≠i} Σ_q u_jq w_kq taken as
/// Σ_q w_kq (S_q − u_iq), S = column sums of U.
///
/// The attribute part depends on `rule`; see [`MembershipRule`].
#[allow(clippy::too_many_arguments)]
pub fn update_membership(
    hg: &Hypergraph,
    x: Option<&AttributeMatrix>,
    params: &LatentParams,
    aux: &EmAuxiliary,
    gamma: f64,
    c: f64,
    floor: f64,
    rule: MembershipRule,
) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    let attr = match (gamma > 0.0, aux.h.as_ref(), x) {
        (false, _, _) => None,
        (true, Some(h), Some(_)) => Some(h),
        _ => return Err(Error::Config("gamma > 0 requires attribute data".into())),
    };
    let u = &params.u;
    let num = membership_numerator(hg, aux);
    let totals = u.sum_axis(Axis(0));
    let mut out = Array2::zeros(u.dim());
    for i in 0..u.nrows() {
        let others: Array1<f64> = &totals - &u.row(i);
        let mut denom = params.w.dot(&others) * (c * (1.0 - gamma));
        let mut attr_weight = 0.0;
        if attr.is_some() {
            match rule {
                MembershipRule::Standard => attr_weight = 2.0 * gamma,
                MembershipRule::Tangent => {
                    attr_weight = gamma;
                    denom += gamma / u.row(i).sum();
                }
            }
        }
        for k in 0..u.ncols() {
            let mut top = 2.0 * (1.0 - gamma) * num[[i, k]];
            if let Some(h) = attr {
                top += attr_weight * h[[i, k]];
            }
            let value = top / denom[k];
            out[[i, k]] = if value.is_finite() {
                value.max(floor)
            } else {
                floor
            };
        }
    }
    Ok(out)
}

/// Affinity update from the E-step responsibilities and the current
/// (already updated) memberships.
pub fn update_affinity(
    hg: &Hypergraph,
    params: &LatentParams,
    aux: &EmAuxiliary,
    c: f64,
    floor: f64,
) -> Array2<f64> {
    let k = params.num_communities();
    let mut num = Array2::zeros((k, k));
    for (j, e) in hg.edges().iter().enumerate() {
        let scale = e.weight() as f64 / (2.0 * aux.rates[j]);
        let sum = aux.edge_sums.row(j);
        let selfs = &aux.edge_self[j];
        for a in 0..k {
            for b in 0..k {
                num[[a, b]] += scale * (sum[a] * sum[b] - selfs[[a, b]]);
            }
        }
    }
    num *= &aux.w;
    let u = &params.u;
    let totals = u.sum_axis(Axis(0));
    let gram = u.t().dot(u);
    let mut out = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let pairs = totals[a] * totals[b] - gram[[a, b]];
            // Average the two triangles so W stays exactly symmetric.
            let top = num[[a, b]] + num[[b, a]];
            let value = top / (c * pairs);
            let v = if value.is_finite() {
                value.max(floor)
            } else {
                floor
            };
            out[[a, b]] = v;
            out[[b, a]] = v;
        }
    }
    out
}

/// β_kz ∝ Σ_{i: z_i = z} h_ik, floored then renormalized per row.
pub fn update_attribute_mixing(
    x: &AttributeMatrix,
    aux: &EmAuxiliary,
    floor: f64,
) -> Result<Array2<f64>> {
    let h = aux
        .h
        .as_ref()
        .ok_or_else(|| Error::Config("attribute mixing update requires attribute data".into()))?;
    let k = h.ncols();
    let z = x.num_categories();
    let mut beta = Array2::<f64>::zeros((k, z));
    for (i, &zi) in x.assignment().iter().enumerate() {
        for a in 0..k {
            beta[[a, zi]] += h[[i, a]];
        }
    }
    for mut row in beta.rows_mut() {
        let total = row.sum();
        if total > 0.0 && total.is_finite() {
            row /= total;
        } else {
            row.fill(1.0 / z as f64);
        }
        row.mapv_inplace(|v| v.max(floor));
        let total = row.sum();
        row /= total;
    }
    Ok(beta)
}

/// Uniform(0,1) initialization: U, then the upper triangle of W, then β.
fn random_init(n: usize, k: usize, z: usize, floor: f64, rng: &mut impl Rng) -> LatentParams {
    let u = Array2::from_shape_simple_fn((n, k), || rng.random::<f64>().max(floor));
    let mut w = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let v = rng.random::<f64>().max(floor);
            w[[a, b]] = v;
            w[[b, a]] = v;
        }
    }
    let mut beta = Array2::from_shape_simple_fn((k, z), || rng.random::<f64>().max(floor));
    for mut row in beta.rows_mut() {
        let total = row.sum();
        row /= total;
    }
    LatentParams { u, w, beta }
}

/// One restart's outcome.
#[derive(Debug, Clone)]
pub struct RestartResult {
    pub params: LatentParams,
    pub loglik: f64,
    pub trace: Vec<f64>,
}

/// Runs a single restart from the initialization drawn by `seed`.
pub fn fit_restart(
    hg: &Hypergraph,
    x: Option<&AttributeMatrix>,
    hp: &Hyperparams,
    seed: u64,
) -> Result<RestartResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = x.map_or(0, AttributeMatrix::num_categories);
    let mut params = random_init(hg.num_nodes(), hp.k, z, hp.floor, &mut rng);
    let c = hg.sparsity_constant();
    let use_attrs = hp.gamma > 0.0;
    let attrs = if use_attrs { x } else { None };

    let mut loglik = total_loglik(hg, x, &params, hp.gamma)?;
    let mut trace = vec![loglik];
    for _ in 0..hp.n_iter {
        let aux = e_step(hg, attrs, &params);
        params.u = update_membership(hg, attrs, &params, &aux, hp.gamma, c, hp.floor, hp.rule)?;
        params.w = update_affinity(hg, &params, &aux, c, hp.floor);
        if let Some(x) = attrs {
            params.beta = update_attribute_mixing(x, &aux, hp.floor)?;
        }
        let next = total_loglik(hg, x, &params, hp.gamma)?;
        trace.push(next);
        let gain = (next - loglik) / loglik.abs().max(f64::MIN_POSITIVE);
        loglik = next;
        if hp.early_stop.is_some_and(|tol| gain < tol) {
            break;
        }
    }
    Ok(RestartResult {
        params,
        loglik,
        trace,
    })
}

/// Fits the model with `hp.n_restarts` independent random initializations
/// (restart `r` is seeded with `hp.seed ^ r`) and keeps the one with the
/// highest final total log-likelihood, lowest index on ties.
pub fn fit(hg: &Hypergraph, x: Option<&AttributeMatrix>, hp: &Hyperparams) -> Result<FitReport> {
    hp.validate()?;
    if let Some(x) = x {
        if x.num_nodes() != hg.num_nodes() {
            return Err(Error::Validation(format!(
                "attribute data covers {} nodes, hypergraph has {}",
                x.num_nodes(),
                hg.num_nodes()
            )));
        }
    } else if hp.gamma > 0.0 {
        return Err(Error::Config("gamma > 0 requires attribute data".into()));
    }
    if hg.num_nodes() < 2 {
        return Err(Error::Validation(
            "hypergraph needs at least 2 nodes".into(),
        ));
    }
    let results = (0..hp.n_restarts)
        .into_par_iter()
        .map(|r| fit_restart(hg, x, hp, hp.seed ^ r as u64))
        .collect::<Result<Vec<_>>>()?;
    let per_restart_logliks: Vec<f64> = results.iter().map(|r| r.loglik).collect();
    let mut best = 0;
    for (r, &ll) in per_restart_logliks.iter().enumerate() {
        if ll > per_restart_logliks[best] {
            best = r;
        }
    }
    let winner = results.into_iter().nth(best).expect("at least one restart");
    Ok(FitReport {
        params: winner.params,
        best_loglik: winner.loglik,
        best_restart: best,
        per_restart_logliks,
        loglik_trace: winner.trace,
        seed: hp.seed,
    })
}
