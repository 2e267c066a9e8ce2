//! The attributed mixed-membership block model: parameters, likelihoods and
//! EM inference. Setting `gamma = 0` gives the structure-only model.

mod em;
mod likelihood;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use em::{
    e_step, fit, fit_restart, update_affinity, update_attribute_mixing, update_membership,
    EmAuxiliary, RestartResult,
};
pub use likelihood::{
    attribute_loglik, edge_intensity, existence_prob, structural_loglik, total_loglik, MIN_RATE,
};

/// Default lower bound applied to every parameter entry after an update.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// θ = (U, W, β).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentParams {
    /// N×K non-negative memberships.
    pub u: Array2<f64>,
    /// K×K symmetric non-negative affinities.
    pub w: Array2<f64>,
    /// K×Z row-stochastic community/category association. Has zero columns
    /// when the model is fitted without attributes.
    pub beta: Array2<f64>,
}

impl LatentParams {
    pub fn new(u: Array2<f64>, w: Array2<f64>, beta: Array2<f64>) -> Result<Self> {
        let k = u.ncols();
        if w.dim() != (k, k) {
            return Err(Error::Validation(format!(
                "affinity matrix is {:?}, expected {k}x{k}",
                w.dim()
            )));
        }
        if beta.nrows() != k {
            return Err(Error::Validation(format!(
                "attribute mixing matrix has {} rows, expected {k}",
                beta.nrows()
            )));
        }
        if u.iter()
            .chain(w.iter())
            .chain(beta.iter())
            .any(|&v| !v.is_finite() || v < 0.0)
        {
            return Err(Error::Validation(
                "parameters must be finite and non-negative".into(),
            ));
        }
        Ok(LatentParams { u, w, beta })
    }

    pub fn num_nodes(&self) -> usize {
        self.u.nrows()
    }

    pub fn num_communities(&self) -> usize {
        self.u.ncols()
    }

    pub fn num_categories(&self) -> usize {
        self.beta.ncols()
    }
}

/// How the attribute term enters the membership update.
///
/// `Standard` is the closed-form update
/// u_ik ← 2[(1−γ) a_ik + γ h_ik] / [C(1−γ) Σ_{j≠i} Σ_q u_jq w_kq],
/// with a_ik the edge responsibilities of node i for community k. It ignores
/// the −log Σ_k u_ik part of the attribute log-likelihood, so for γ > 0 a
/// cycle can decrease the total log-likelihood.
///
/// `Tangent` bounds −log Σ_k u_ik below by its tangent at the current U,
/// giving u_ik ← [2(1−γ) a_ik + γ h_ik] / [C(1−γ) Σ_{j≠i} Σ_q u_jq w_kq + γ/Σ_k u_ik].
/// Every cycle is then non-decreasing. Both rules coincide at γ = 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipRule {
    #[default]
    Standard,
    Tangent,
}

impl std::str::FromStr for MembershipRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tangent" => Ok(MembershipRule::Tangent),
            "standard" => Ok(MembershipRule::Standard),
            other => Err(Error::Config(format!("unknown membership rule `{other}`"))),
        }
    }
}

/// Settings for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub k: usize,
    pub gamma: f64,
    /// EM cycles per restart.
    pub n_iter: usize,
    /// Independent random initializations.
    pub n_restarts: usize,
    pub seed: u64,
    pub floor: f64,
    /// Stop a restart early once the relative log-likelihood gain of a cycle
    /// drops below this value. `None` runs exactly `n_iter` cycles.
    pub early_stop: Option<f64>,
    pub rule: MembershipRule,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            k: 2,
            gamma: 0.0,
            n_iter: 20,
            n_restarts: 10,
            seed: 0,
            floor: DEFAULT_FLOOR,
            early_stop: None,
            rule: MembershipRule::default(),
        }
    }
}

impl Hyperparams {
    pub fn new(k: usize, gamma: f64) -> Self {
        Hyperparams {
            k,
            gamma,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if self.n_restarts == 0 {
            return Err(Error::Config("at least one restart is required".into()));
        }
        if self.floor.is_nan() || self.floor <= 0.0 {
            return Err(Error::Config("parameter floor must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of [`fit`]: the winning restart plus per-restart diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: LatentParams,
    pub best_loglik: f64,
    pub best_restart: usize,
    /// Final total log-likelihood of every restart, in restart order.
    pub per_restart_logliks: Vec<f64>,
    /// Total log-likelihood of the winning restart at initialization and
    /// after each EM cycle.
    pub loglik_trace: Vec<f64>,
    pub seed: u64,
}
