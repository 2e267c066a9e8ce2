//! Run configuration shared by the command-line subcommands.
//!
//! A config file is flat TOML whose keys are the long flag names, e.g.
//!
//! ```toml
//! edges = "data/workplace.txt"
//! attrs = "data/workplace_attrs.txt"
//! k = 5
//! gamma = 0.9
//! seed = 1
//! k-grid = "2..5"
//! ```
//!
//! A flag given on the command line overrides the file, which overrides the
//! built-in default.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Grid;
use crate::hypergraph::EdgeFormat;
use crate::model::{Hyperparams, MembershipRule};
use crate::represent::MatrixKind;
use crate::synth::{PlantedConfig, Sweep};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Hyperedge file.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    /// Node attribute file (`node<TAB>category`).
    #[arg(long)]
    pub attrs: Option<PathBuf>,
    /// Hyperedge file layout: raw or aggregated [default: raw].
    #[arg(long)]
    pub format: Option<EdgeFormat>,
    /// Number of communities K [default: 2].
    #[arg(long)]
    pub k: Option<usize>,
    /// Attribute weight γ in [0, 1) [default: 0].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// EM cycles per restart [default: 20].
    #[arg(long)]
    pub n_iter: Option<usize>,
    /// Random restarts [default: 10].
    #[arg(long)]
    pub n_restarts: Option<usize>,
    /// Master seed; every other seed is derived from it [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lower bound applied to every parameter entry [default: 1e-10].
    #[arg(long)]
    pub floor: Option<f64>,
    /// Membership update: standard or tangent [default: standard].
    #[arg(long)]
    pub rule: Option<MembershipRule>,
    /// Stop a restart once the relative log-likelihood gain drops below this.
    #[arg(long)]
    pub early_stop: Option<f64>,
    /// K candidates, `a..b` or a comma list [default: 2..Z].
    #[arg(long)]
    pub k_grid: Option<String>,
    /// γ candidates, `a..b` in steps of 0.1 or a comma list [default: 0.1..0.9].
    #[arg(long)]
    pub gamma_grid: Option<String>,
    /// Select K only, with γ fixed at 0.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub structure_only: Option<bool>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory of fitted parameters (for `export --kind learned`).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Directory of generated instances (for `eval-synthetic`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Representation to export: learned, raw, size-weighted or attributes.
    #[arg(long)]
    pub kind: Option<MatrixKind>,
    /// Planted benchmark: number of nodes [default: 1000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Planted benchmark: membership purity p_U [default: 0.8].
    #[arg(long)]
    pub pu: Option<f64>,
    /// Planted benchmark: diagonal affinity w_in [default: 10].
    #[arg(long)]
    pub win: Option<f64>,
    /// Planted benchmark: largest hyperedge size D [default: 10].
    #[arg(long)]
    pub d: Option<usize>,
    /// Planted benchmark: hyperedges per node |E|/N [default: 10].
    #[arg(long)]
    pub density: Option<f64>,
    /// Planted benchmark: instances per parameter point [default: 10].
    #[arg(long)]
    pub instances: Option<usize>,
    /// Planted benchmark: sweep one parameter (pU, win, D or density).
    #[arg(long)]
    pub sweep: Option<Sweep>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(mut self, flags: &RunConfig) -> Self {
        overlay!(self, flags;
            edges, attrs, format, k, gamma, n_iter, n_restarts, seed, floor, rule,
            early_stop, k_grid, gamma_grid, structure_only, out, params, input, kind,
            n, pu, win, d, density, instances, sweep);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> EdgeFormat {
        self.format.unwrap_or(EdgeFormat::Raw)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn instances(&self) -> usize {
        self.instances.unwrap_or(10)
    }

    pub fn edges(&self) -> Result<&Path> {
        self.edges
            .as_deref()
            .ok_or_else(|| Error::Config("a hyperedge file is required (--edges)".into()))
    }

    pub fn hyperparams(&self) -> Hyperparams {
        let d = Hyperparams::default();
        Hyperparams {
            k: self.k.unwrap_or(d.k),
            gamma: self.gamma.unwrap_or(d.gamma),
            n_iter: self.n_iter.unwrap_or(d.n_iter),
            n_restarts: self.n_restarts.unwrap_or(d.n_restarts),
            seed: self.seed(),
            floor: self.floor.unwrap_or(d.floor),
            early_stop: self.early_stop,
            rule: self.rule.unwrap_or(d.rule),
        }
    }

    pub fn planted(&self) -> PlantedConfig {
        let d = PlantedConfig::default();
        PlantedConfig {
            n: self.n.unwrap_or(d.n),
            p_u: self.pu.unwrap_or(d.p_u),
            w_in: self.win.unwrap_or(d.w_in),
            max_size: self.d.unwrap_or(d.max_size),
            edges_per_node: self.density.unwrap_or(d.edges_per_node),
            seed: self.seed(),
        }
    }

    /// The selection grid for data with `num_categories` categories.
    pub fn grid(&self, num_categories: usize) -> Result<Grid> {
        let structure_only = self.structure_only.unwrap_or(false);
        let mut grid = Grid::standard(num_categories, structure_only);
        if let Some(text) = &self.k_grid {
            grid.ks = parse_int_grid(text)?;
        }
        if let Some(text) = &self.gamma_grid {
            if structure_only {
                return Err(Error::Config(
                    "--gamma-grid conflicts with --structure-only".into(),
                ));
            }
            grid.gammas = parse_gamma_grid(text)?;
        }
        if grid.ks.is_empty() || grid.gammas.is_empty() {
            return Err(Error::Config(format!(
                "empty grid (K candidates {:?}, γ candidates {:?})",
                grid.ks, grid.gammas
            )));
        }
        Ok(grid)
    }
}

/// `a..b` (inclusive) or `a,b,c`.
pub fn parse_int_grid(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse integer grid `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

/// `a..b` in steps of 0.1 (inclusive) or `a,b,c`.
pub fn parse_gamma_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse γ grid `{text}`"));
    if let Some((a, b)) = text.split_once("..") {
        let tenths = |s: &str| -> Result<i64> {
            let v: f64 = s.trim().parse().map_err(|_| bad())?;
            let t = (v * 10.0).round();
            if (v * 10.0 - t).abs() > 1e-9 {
                return Err(bad());
            }
            Ok(t as i64)
        };
        return Ok((tenths(a)?..=tenths(b)?).map(|t| t as f64 / 10.0).collect());
    }
    text.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}
