use ndarray::{Array1, Array2, ArrayView1};

use super::LatentParams;
use crate::error::{Error, Result};
use crate::hypergraph::{kappa, AttributeMatrix, Hypergraph};

/// Lower bound on rates and probabilities inside logarithms.
pub const MIN_RATE: f64 = 1e-10;

fn check_dims(n: usize, params: &LatentParams) -> Result<()> {
    if params.num_nodes() != n {
        return Err(Error::Validation(format!(
            "membership matrix has {} rows for {n} nodes",
            params.num_nodes()
        )));
    }
    Ok(())
}

/// Returns (Σ_{i∈e} u_i, Σ_{i∈e} u_iᵀ W u_i).
pub(crate) fn edge_sums(nodes: &[usize], u: &Array2<f64>, w: &Array2<f64>) -> (Array1<f64>, f64) {
    let mut sum = Array1::zeros(u.ncols());
    let mut self_term = 0.0;
    for &i in nodes {
        let ui = u.row(i);
        sum += &ui;
        self_term += ui.dot(&w.dot(&ui));
    }
    (sum, self_term)
}

/// λ_e from the per-edge aggregates; clamped at zero against cancellation.
pub(crate) fn intensity_from_sums(sum: ArrayView1<f64>, self_term: f64, w: &Array2<f64>) -> f64 {
    (0.5 * (sum.dot(&w.dot(&sum)) - self_term)).max(0.0)
}

/// λ_e = ½ Σ_{i∈e} Σ_{j∈e, j≠i} u_iᵀ W u_j.
pub fn edge_intensity(nodes: &[usize], params: &LatentParams) -> f64 {
    let (sum, self_term) = edge_sums(nodes, &params.u, &params.w);
    intensity_from_sums(sum.view(), self_term, &params.w)
}

/// P(A_e > 0) = 1 − exp(−λ_e/κ_{|e|}) for a node set of size at most
/// `max_size` in a hypergraph of `n` nodes.
pub fn existence_prob(
    nodes: &[usize],
    params: &LatentParams,
    n: usize,
    max_size: usize,
) -> Result<f64> {
    let s = nodes.len();
    if s < 2 || s > max_size {
        return Err(Error::Domain(format!(
            "hyperedge size {s} outside the fitted range [2, {max_size}]"
        )));
    }
    let rate = edge_intensity(nodes, params) / kappa(s, n)?;
    Ok(-(-rate).exp_m1())
}

/// Σ_{i≠j} u_iᵀ W u_j via (Σ_i u_i)ᵀ W (Σ_i u_i) − Σ_i u_iᵀ W u_i.
pub(crate) fn pair_penalty(u: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let total = u.sum_axis(ndarray::Axis(0));
    let self_term: f64 = u.rows().into_iter().map(|ui| ui.dot(&w.dot(&ui))).sum();
    total.dot(&w.dot(&total)) - self_term
}

/// Structural log-likelihood Σ_e A_e log(2λ_e) − (C/2) Σ_{i≠j} u_iᵀ W u_j.
pub fn structural_loglik(hg: &Hypergraph, params: &LatentParams) -> Result<f64> {
    check_dims(hg.num_nodes(), params)?;
    let c = hg.sparsity_constant();
    let edge_term: f64 = hg
        .edges()
        .iter()
        .map(|e| {
            let rate = edge_intensity(e.nodes(), params).max(MIN_RATE);
            e.weight() as f64 * (2.0 * rate).ln()
        })
        .sum();
    Ok(edge_term - 0.5 * c * pair_penalty(&params.u, &params.w))
}

/// π_{i,z} for node `i`'s membership row.
pub(crate) fn category_prob(ui: ArrayView1<f64>, beta: &Array2<f64>, z: usize) -> f64 {
    let mass = ui.sum();
    ui.dot(&beta.column(z)) / mass
}

/// Attribute log-likelihood Σ_i log π_{i, z_i}.
pub fn attribute_loglik(x: &AttributeMatrix, params: &LatentParams) -> Result<f64> {
    check_dims(x.num_nodes(), params)?;
    if params.num_categories() != x.num_categories() {
        return Err(Error::Validation(format!(
            "attribute mixing matrix has {} categories, data has {}",
            params.num_categories(),
            x.num_categories()
        )));
    }
    Ok(x.assignment()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            category_prob(params.u.row(i), &params.beta, z)
                .max(MIN_RATE)
                .ln()
        })
        .sum())
}

/// (1−γ)·structural + γ·attribute. The attribute term is skipped at γ = 0.
pub fn total_loglik(
    hg: &Hypergraph,
    x: Option<&AttributeMatrix>,
    params: &LatentParams,
    gamma: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "gamma must lie in [0, 1), got {gamma}"
        )));
    }
    let structural = structural_loglik(hg, params)?;
    if gamma == 0.0 {
        return Ok(structural);
    }
    let x = x.ok_or_else(|| Error::Config("gamma > 0 requires attribute data".into()))?;
    Ok((1.0 - gamma) * structural + gamma * attribute_loglik(x, params)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn params(u: Array2<f64>, w: Array2<f64>, beta: Array2<f64>) -> LatentParams {
        LatentParams::new(u, w, beta).unwrap()
    }

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn intensity_single_community() {
        let p = params(Array2::ones((3, 1)), array![[2.0]], Array2::ones((1, 1)));
        assert_eq!(edge_intensity(&[0, 1, 2], &p), 6.0);
        assert_eq!(edge_intensity(&[2, 0, 1], &p), 6.0);
    }

    #[test]
    fn intensity_zero_affinity() {
        let p = params(
            array![[0.3, 0.4], [0.9, 0.1], [0.5, 0.5]],
            Array2::zeros((2, 2)),
            Array2::ones((2, 1)),
        );
        assert_eq!(edge_intensity(&[0, 1, 2], &p), 0.0);
    }

    #[test]
    fn existence_probability() {
        let mut p = params(Array2::ones((4, 1)), array![[0.0]], Array2::ones((1, 1)));
        assert_eq!(existence_prob(&[0, 1], &p, 4, 2).unwrap(), 0.0);
        p.w[[0, 0]] = std::f64::consts::LN_2;
        assert!((existence_prob(&[0, 1], &p, 4, 2).unwrap() - 0.5).abs() < 1e-15);
        let low = existence_prob(&[0, 1], &p, 4, 3).unwrap();
        p.w[[0, 0]] = 1.0;
        assert!(existence_prob(&[0, 1], &p, 4, 3).unwrap() > low);
        assert!(matches!(
            existence_prob(&[0, 1, 2], &p, 4, 2),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn structural_hand_value() {
        // 3 nodes, edge {0,1}, K=1, u=w=1, D=2 (C=1):
        // log(2·1) − ½·(3·2 ordered pairs) = ln 2 − 3.
        let hg = Hypergraph::from_edges(labels(3), vec![(vec![0, 1], 1)]).unwrap();
        let p = params(Array2::ones((3, 1)), array![[1.0]], Array2::ones((1, 1)));
        let got = structural_loglik(&hg, &p).unwrap();
        assert!((got - (2f64.ln() - 3.0)).abs() < 1e-14);
    }

    #[test]
    fn structural_empty_hypergraph() {
        let hg = Hypergraph::from_edges(labels(4), Vec::new()).unwrap();
        let p = params(Array2::ones((4, 1)), array![[0.5]], Array2::ones((1, 1)));
        // C = 1, 12 ordered pairs at 0.5 each.
        assert!((structural_loglik(&hg, &p).unwrap() + 3.0).abs() < 1e-14);
    }

    #[test]
    fn attribute_degenerate_cases() {
        let x = AttributeMatrix::new(vec!["a".into(), "b".into()], vec![0, 1, 1]).unwrap();
        let p = params(
            array![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
            Array2::eye(2),
            Array2::eye(2),
        );
        assert_eq!(attribute_loglik(&x, &p).unwrap(), 0.0);

        let beta = array![[0.25, 0.75]];
        let p1 = params(array![[3.0], [0.1], [7.0]], array![[1.0]], beta);
        let expected = 0.25f64.ln() + 2.0 * 0.75f64.ln();
        assert!((attribute_loglik(&x, &p1).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn total_requires_attributes_when_gamma_positive() {
        let hg = Hypergraph::from_edges(labels(3), vec![(vec![0, 1], 1)]).unwrap();
        let p = params(Array2::ones((3, 1)), array![[1.0]], Array2::ones((1, 1)));
        assert!(matches!(
            total_loglik(&hg, None, &p, 0.3),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            total_loglik(&hg, None, &p, 1.0),
            Err(Error::Config(_))
        ));
        assert_eq!(
            total_loglik(&hg, None, &p, 0.0).unwrap(),
            structural_loglik(&hg, &p).unwrap()
        );
    }
}
