use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn hyperneo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperneo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

struct Workplace {
    edges: String,
    attrs: String,
}

fn workplace() -> Workplace {
    Workplace {
        edges: data("workplace_edges.txt").display().to_string(),
        attrs: data("workplace_attrs.txt").display().to_string(),
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_writes_artifacts_and_is_reproducible() {
    let w = workplace();
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        hyperneo(&[
            "fit",
            "--edges",
            &w.edges,
            "--format",
            "aggregated",
            "--attrs",
            &w.attrs,
            "--k",
            "5",
            "--gamma",
            "0.9",
            "--seed",
            "1",
            "--n-restarts",
            "2",
            "--out",
            path(out),
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = run(&a);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("log-likelihood: "));
    assert_eq!(code(&run(&b)), 0);
    for f in ["U.csv", "W.csv", "beta.csv"] {
        let (x, y) = (
            fs::read_to_string(a.join(f)).unwrap(),
            fs::read_to_string(b.join(f)).unwrap(),
        );
        assert!(x == y, "{f} differs between identical runs");
    }
    let strip = |dir: &Path| {
        let mut m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        m.as_object_mut().unwrap().remove("config");
        m
    };
    assert_eq!(strip(&a), strip(&b));
    let beta = fs::read_to_string(a.join("beta.csv")).unwrap();
    assert_eq!(
        beta.lines().next(),
        Some("community,DISQ,DMCT,DSE,SFLE,SRH")
    );
    assert_eq!(beta.lines().count(), 6);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["hyperparams"]["k"], 5);
    assert_eq!(manifest["per_restart_logliks"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["config"]["gamma"], 0.9);
}

#[test]
fn fit_validation_and_io_errors() {
    let w = workplace();
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let ok = hyperneo(&[
        "fit",
        "--edges",
        &w.edges,
        "--format",
        "aggregated",
        "--gamma",
        "0",
        "--n-restarts",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(code(&ok), 0);
    let bad_gamma = hyperneo(&[
        "fit",
        "--edges",
        &w.edges,
        "--format",
        "aggregated",
        "--attrs",
        &w.attrs,
        "--gamma",
        "1.0",
        "--out",
        out,
    ]);
    assert_eq!(code(&bad_gamma), 1);
    let no_attrs = hyperneo(&[
        "fit",
        "--edges",
        &w.edges,
        "--format",
        "aggregated",
        "--gamma",
        "0.5",
        "--out",
        out,
    ]);
    assert_eq!(code(&no_attrs), 1);
    let missing = hyperneo(&["fit", "--edges", "/nonexistent/edges.txt", "--out", out]);
    assert_eq!(code(&missing), 2);
    assert_eq!(code(&hyperneo(&["fit", "--no-such-flag"])), 1);
    assert_eq!(code(&hyperneo(&["--help"])), 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let w = workplace();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "edges = {:?}\nformat = \"aggregated\"\nk = 3\ngamma = 0.4\nn-restarts = 1\nn-iter = 2\nout = {:?}\n",
            w.edges,
            dir.path().join("fit").display().to_string()
        ),
    )
    .unwrap();
    let out = hyperneo(&["fit", "--config", path(&cfg), "--gamma", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["hyperparams"]["k"], 3);
    assert_eq!(manifest["hyperparams"]["gamma"], 0.0);
    assert_eq!(manifest["hyperparams"]["n_iter"], 2);

    fs::write(&cfg, "bogus-key = 1\n").unwrap();
    assert_eq!(code(&hyperneo(&["fit", "--config", path(&cfg)])), 1);
    assert_eq!(
        code(&hyperneo(&["fit", "--config", "/nonexistent.toml"])),
        2
    );
}

#[test]
fn select_restricted_grid() {
    let w = workplace();
    let dir = tempfile::tempdir().unwrap();
    let out = hyperneo(&[
        "select",
        "--edges",
        &w.edges,
        "--format",
        "aggregated",
        "--attrs",
        &w.attrs,
        "--k-grid",
        "2..3",
        "--gamma-grid",
        "0.5",
        "--n-restarts",
        "1",
        "--n-iter",
        "5",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("candidates: 2"));
    assert!(stdout(&out).contains("selected: K="));
    let csv = fs::read_to_string(dir.path().join("eval_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
    assert!(dir.path().join("eval_report.json").is_file());

    let missing = hyperneo(&[
        "select",
        "--edges",
        &w.edges,
        "--format",
        "aggregated",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn generate_and_evaluate_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = hyperneo(&[
        "generate",
        "--n",
        "40",
        "--pu",
        "1.0",
        "--win",
        "10",
        "--d",
        "4",
        "--density",
        "3",
        "--instances",
        "2",
        "--seed",
        "5",
        "--out",
        path(&gen),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for r in ["instance_000", "instance_001"] {
        for f in ["edges.txt", "attributes.txt", "ground_truth.json"] {
            assert!(gen.join(r).join(f).is_file(), "{r}/{f}");
        }
    }

    let eval = dir.path().join("eval");
    let out = hyperneo(&[
        "eval-synthetic",
        "--input",
        path(&gen.join("instance_000")),
        "--gamma",
        "0.7",
        "--n-restarts",
        "2",
        "--out",
        path(&eval),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(eval.join("cosine_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("0.7,40,1,10,4,3,1,"));

    let empty = dir.path().join("none");
    let out = hyperneo(&["generate", "--instances", "0", "--out", path(&empty)]);
    assert_eq!(code(&out), 0);
    assert!(!empty.exists());

    let bad = hyperneo(&["generate", "--pu", "0.3", "--out", path(&empty)]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn generate_sweep_layout() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = hyperneo(&[
        "generate",
        "--n",
        "20",
        "--d",
        "3",
        "--density",
        "1",
        "--instances",
        "1",
        "--sweep",
        "pU",
        "--out",
        path(&gen),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mut points: Vec<String> = fs::read_dir(&gen)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("pU_"))
        .collect();
    points.sort();
    assert_eq!(
        points,
        ["pU_0.5", "pU_0.6", "pU_0.7", "pU_0.8", "pU_0.9", "pU_1"]
    );

    let eval = dir.path().join("eval");
    let out = hyperneo(&[
        "eval-synthetic",
        "--input",
        path(&gen),
        "--gamma-grid",
        "0.1,0.9",
        "--sweep",
        "pU",
        "--n-restarts",
        "1",
        "--n-iter",
        "3",
        "--out",
        path(&eval),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(eval.join("sweep_pU.csv")).unwrap();
    assert_eq!(
        table.lines().next(),
        Some("gamma,0.5,0.6,0.7,0.8,0.9,1,mean")
    );
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn export_kinds() {
    let w = workplace();
    let dir = tempfile::tempdir().unwrap();
    let fit_dir = dir.path().join("fit");
    let learned = dir.path().join("learned");
    let base = [
        "--edges",
        &w.edges,
        "--format",
        "aggregated",
        "--attrs",
        &w.attrs,
    ];

    let no_params = hyperneo(
        &[
            &["export", "--kind", "learned", "--out", path(&learned)],
            &base[..],
        ]
        .concat(),
    );
    assert_eq!(code(&no_params), 1);
    let empty_params = hyperneo(
        &[
            &[
                "export",
                "--kind",
                "learned",
                "--params",
                path(dir.path()),
                "--out",
                path(&learned),
            ],
            &base[..],
        ]
        .concat(),
    );
    assert_eq!(code(&empty_params), 1);

    let fit = hyperneo(
        &[
            &[
                "fit",
                "--k",
                "5",
                "--gamma",
                "0.9",
                "--n-restarts",
                "1",
                "--out",
                path(&fit_dir),
            ],
            &base[..],
        ]
        .concat(),
    );
    assert_eq!(code(&fit), 0);
    let out = hyperneo(
        &[
            &[
                "export",
                "--kind",
                "learned",
                "--params",
                path(&fit_dir),
                "--out",
                path(&learned),
            ],
            &base[..],
        ]
        .concat(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(learned.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["num_nodes"], 92);
    assert_eq!(manifest["num_categories"], 5);
    assert!((manifest["avg_degree"].as_f64().unwrap() - 17.7).abs() < 0.05);

    for kind in ["raw", "size-weighted", "attributes"] {
        let target = dir.path().join(kind);
        let out = hyperneo(
            &[
                &["export", "--kind", kind, "--out", path(&target)],
                &base[..],
            ]
            .concat(),
        );
        assert_eq!(code(&out), 0, "{kind}");
        assert!(target.join("manifest.json").is_file());
    }
    assert!(dir.path().join("attributes/attributes.csv").is_file());
    let bad_kind = hyperneo(
        &[
            &["export", "--kind", "umap", "--out", path(&learned)],
            &base[..],
        ]
        .concat(),
    );
    assert_eq!(code(&bad_kind), 1);
}
