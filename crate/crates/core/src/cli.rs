//! The `hyperneo` command-line tool.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 on I/O
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{grid_search, membership_cosine_similarity};
use crate::hypergraph::{load_attributes, load_hypergraph, AttributeMatrix, Hypergraph};
use crate::io::{read_params, write_json, write_params, FitManifest, FIT_MANIFEST_FILE};
use crate::model::{fit, Hyperparams};
use crate::represent::{
    export_embedding_bundle, learned_representation, projected_adjacency, BundleData, MatrixKind,
};
use crate::synth::{derive_seed, generate_instance, PlantedInstance, Sweep, GROUND_TRUTH_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "hyperneo",
    version,
    about = "Community detection in attributed hypergraphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommandArgs {
    /// TOML file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub flags: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model; writes U.csv, W.csv, beta.csv and manifest.json.
    Fit(CommandArgs),
    /// Choose (K, γ) by five-fold cross-validated AUC.
    Select(CommandArgs),
    /// Generate planted benchmark instances.
    Generate(CommandArgs),
    /// Fit generated instances and score recovery against ground truth.
    EvalSynthetic(CommandArgs),
    /// Write an embedding bundle for a node-pair representation.
    Export(CommandArgs),
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(args: &CommandArgs) -> Result<RunConfig> {
    let base = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(base.overridden_by(&args.flags))
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(&resolve(&a)?),
        Command::Select(a) => cmd_select(&resolve(&a)?),
        Command::Generate(a) => cmd_generate(&resolve(&a)?),
        Command::EvalSynthetic(a) => cmd_eval_synthetic(&resolve(&a)?),
        Command::Export(a) => cmd_export(&resolve(&a)?),
    }
}

fn config_json(cfg: &RunConfig) -> Option<serde_json::Value> {
    serde_json::to_value(cfg).ok()
}

fn load_inputs(cfg: &RunConfig, need_attrs: bool) -> Result<(Hypergraph, Option<AttributeMatrix>)> {
    let hg = load_hypergraph(cfg.edges()?, cfg.format())?;
    let x = match &cfg.attrs {
        Some(path) => Some(load_attributes(path, &hg)?),
        None if need_attrs => {
            return Err(Error::Config(
                "this run needs an attribute file (--attrs)".into(),
            ))
        }
        None => None,
    };
    Ok((hg, x))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let hp = cfg.hyperparams();
    hp.validate()?;
    let (hg, x) = load_inputs(cfg, hp.gamma > 0.0)?;
    let report = fit(&hg, x.as_ref(), &hp)?;
    let out = cfg.out();
    let categories: Vec<String> = match (&x, hp.gamma > 0.0) {
        (Some(x), true) => x.labels().to_vec(),
        _ => Vec::new(),
    };
    write_params(&report.params, hg.labels(), &categories, &out)?;
    let mut manifest = FitManifest::new(&report, &hp, &hg);
    manifest.config = config_json(cfg);
    manifest.write(&out.join(FIT_MANIFEST_FILE))?;
    println!("log-likelihood: {}", report.best_loglik);
    Ok(())
}

pub fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let structure_only = cfg.structure_only.unwrap_or(false);
    let hp = Hyperparams {
        k: 2,
        gamma: 0.0,
        ..cfg.hyperparams()
    };
    hp.validate()?;
    let (hg, x) = load_inputs(cfg, !structure_only)?;
    let z = x.as_ref().map_or(0, AttributeMatrix::num_categories);
    if !structure_only && z < 2 {
        return Err(Error::Validation(format!(
            "model selection needs at least 2 attribute categories, found {z}"
        )));
    }
    let grid = cfg.grid(z)?;
    if let Some(&g) = grid.gammas.iter().find(|g| !(0.0..1.0).contains(*g)) {
        return Err(Error::Config(format!("γ candidate {g} outside [0, 1)")));
    }
    if grid.ks.contains(&0) {
        return Err(Error::Config("K candidates must be positive".into()));
    }
    let report = grid_search(&hg, x.as_ref(), &hp, &grid, cfg.seed())?;
    let out = cfg.out();
    create_dir(&out)?;
    report.write_json(&out.join("eval_report.json"))?;
    report.write_csv(&out.join("eval_report.csv"))?;
    write_json(cfg, &out.join("config.json"))?;
    println!(
        "candidates: {}\nselected: K={} gamma={}",
        report.candidates.len(),
        report.selected_k,
        report.selected_gamma
    );
    Ok(())
}

fn point_dir(sweep: Sweep, value: f64) -> String {
    format!("{}_{}", sweep.name(), value)
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let base = cfg.planted();
    base.validate()?;
    let count = cfg.instances();
    if count == 0 {
        log::warn!("--instances 0: nothing to generate");
        return Ok(());
    }
    let points: Vec<(Option<String>, _)> = match cfg.sweep {
        Some(sweep) => sweep
            .values()
            .into_iter()
            .map(|v| (Some(point_dir(sweep, v)), sweep.apply(&base, v)))
            .collect(),
        None => vec![(None, base.clone())],
    };
    for (_, p) in &points {
        p.validate()?;
    }
    let out = cfg.out();
    let jobs: Vec<(PathBuf, _)> = points
        .iter()
        .enumerate()
        .flat_map(|(pi, (sub, p))| {
            let dir = match sub {
                Some(s) => out.join(s),
                None => out.clone(),
            };
            let point_seed = derive_seed(base.seed, pi as u64);
            (0..count).map(move |r| {
                let mut c = p.clone();
                c.seed = derive_seed(point_seed, r as u64);
                (dir.join(format!("instance_{r:03}")), c)
            })
        })
        .collect();
    jobs.par_iter()
        .map(|(dir, c)| generate_instance(c)?.write(dir))
        .collect::<Result<Vec<()>>>()?;
    create_dir(&out)?;
    write_json(cfg, &out.join("config.json"))?;
    println!("instances written: {}", jobs.len());
    Ok(())
}

fn find_instances(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
    if dir.join(GROUND_TRUTH_FILE).is_file() {
        found.push(dir.to_path_buf());
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries.into_iter().filter(|p| p.is_dir()) {
        find_instances(&path, found)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct InstanceScore {
    instance: String,
    gamma: f64,
    n: usize,
    p_u: f64,
    w_in: f64,
    max_size: usize,
    edges_per_node: f64,
    cosine: f64,
}

pub fn cmd_eval_synthetic(cfg: &RunConfig) -> Result<()> {
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::Config("an instance directory is required (--input)".into()))?;
    let mut dirs = Vec::new();
    find_instances(&input, &mut dirs)?;
    if dirs.is_empty() {
        return Err(Error::Validation(format!(
            "no instances with {GROUND_TRUTH_FILE} under {}",
            input.display()
        )));
    }
    let gammas = match &cfg.gamma_grid {
        Some(text) => crate::config::parse_gamma_grid(text)?,
        None => vec![cfg.gamma.unwrap_or(0.0)],
    };
    let base = cfg.hyperparams();
    for &g in &gammas {
        Hyperparams {
            gamma: g,
            ..base.clone()
        }
        .validate()?;
    }
    let instances = dirs
        .iter()
        .map(|d| PlantedInstance::load(d))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..instances.len())
        .flat_map(|i| gammas.iter().map(move |&g| (i, g)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(i, gamma)| {
            let inst = &instances[i];
            let hp = Hyperparams {
                gamma,
                seed: derive_seed(base.seed, i as u64),
                ..base.clone()
            };
            let report = fit(&inst.hg, Some(&inst.x), &hp)?;
            let c = &inst.config;
            Ok(InstanceScore {
                instance: dirs[i]
                    .strip_prefix(&input)
                    .unwrap_or(&dirs[i])
                    .display()
                    .to_string(),
                gamma,
                n: c.n,
                p_u: c.p_u,
                w_in: c.w_in,
                max_size: c.max_size,
                edges_per_node: c.edges_per_node,
                cosine: membership_cosine_similarity(&inst.u, &report.params.u)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let out = cfg.out();
    create_dir(&out)?;
    write_csv(&out.join("cosine_instances.csv"), &scores)?;

    // Mean per (γ, parameter point), in first-seen order of points.
    let key = |s: &InstanceScore| {
        format!(
            "{},{},{},{},{}",
            s.n, s.p_u, s.w_in, s.max_size, s.edges_per_node
        )
    };
    let mut points: Vec<String> = Vec::new();
    let mut sums: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for s in &scores {
        let k = key(s);
        if !points.contains(&k) {
            points.push(k.clone());
        }
        let e = sums.entry((s.gamma.to_string(), k)).or_insert((0.0, 0));
        e.0 += s.cosine;
        e.1 += 1;
    }
    let mut summary =
        String::from("gamma,n,p_u,w_in,max_size,edges_per_node,instances,mean_cosine\n");
    for &g in &gammas {
        for p in &points {
            if let Some(&(sum, cnt)) = sums.get(&(g.to_string(), p.clone())) {
                summary.push_str(&format!("{g},{p},{cnt},{}\n", sum / cnt as f64));
            }
        }
    }
    write_text(&out.join("cosine_summary.csv"), &summary)?;

    if let Some(sweep) = cfg.sweep {
        let value_of = |s: &InstanceScore| match sweep {
            Sweep::PU => s.p_u,
            Sweep::Win => s.w_in,
            Sweep::D => s.max_size as f64,
            Sweep::Density => s.edges_per_node,
        };
        let mut values: Vec<f64> = scores.iter().map(value_of).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut table = format!(
            "gamma,{},mean\n",
            values
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        );
        for &g in &gammas {
            let cells: Vec<f64> = values
                .iter()
                .map(|&v| {
                    let hits: Vec<f64> = scores
                        .iter()
                        .filter(|s| s.gamma == g && value_of(s) == v)
                        .map(|s| s.cosine)
                        .collect();
                    hits.iter().sum::<f64>() / hits.len() as f64
                })
                .collect();
            let mean = cells.iter().sum::<f64>() / cells.len() as f64;
            let row: Vec<String> = cells.iter().map(f64::to_string).collect();
            table.push_str(&format!("{g},{},{mean}\n", row.join(",")));
        }
        write_text(&out.join(format!("sweep_{}.csv", sweep.name())), &table)?;
    }
    write_json(cfg, &out.join("config.json"))?;
    for &g in &gammas {
        let hits: Vec<f64> = scores
            .iter()
            .filter(|s| s.gamma == g)
            .map(|s| s.cosine)
            .collect();
        println!(
            "gamma={g} mean_cosine={}",
            hits.iter().sum::<f64>() / hits.len() as f64
        );
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn cmd_export(cfg: &RunConfig) -> Result<()> {
    let kind = cfg
        .kind
        .ok_or_else(|| Error::Config("a representation kind is required (--kind)".into()))?;
    let (hg, x) = load_inputs(cfg, kind == MatrixKind::Attributes)?;
    let out = cfg.out();
    let manifest = match kind {
        MatrixKind::Learned => {
            let dir = cfg.params.as_ref().ok_or_else(|| {
                Error::Config("--kind learned needs fitted parameters (--params)".into())
            })?;
            if !dir.join(crate::io::U_FILE).is_file() {
                return Err(Error::Validation(format!(
                    "no fitted parameters in {}",
                    dir.display()
                )));
            }
            let (params, _) = read_params(dir, &hg)?;
            let m = learned_representation(&hg, &params)?;
            export_embedding_bundle(BundleData::Pairs(&m), &hg, x.as_ref(), &out)?
        }
        MatrixKind::Raw | MatrixKind::SizeWeighted => {
            let m = projected_adjacency(&hg, kind)?;
            export_embedding_bundle(BundleData::Pairs(&m), &hg, x.as_ref(), &out)?
        }
        MatrixKind::Attributes => {
            export_embedding_bundle(BundleData::Attributes, &hg, x.as_ref(), &out)?
        }
    };
    println!(
        "exported {} bundle: {} nodes, avg degree {}",
        kind.name(),
        manifest.num_nodes,
        manifest.avg_degree
    );
    Ok(())
}
