use std::path::Path;
use std::process::{Command, Output};

fn psig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psig"))
        .args(args)
        .env_remove("PSIG_SEED")
        .output()
        .expect("run psig")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn row_values(text: &str, first: &str) -> Vec<f64> {
    text.lines()
        .find(|l| l.split_whitespace().next() == Some(first))
        .unwrap_or_else(|| panic!("no `{first}` row in:\n{text}"))
        .split(|c: char| c == '|' || c.is_whitespace())
        .filter_map(|t| t.parse().ok())
        .collect()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn attribute_quadratic_closed_form() {
    let o = psig(&["attribute", "--model", "quadratic3", "--density", "uniform"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let expected = [1.0, 1.0 / 3.0, 2.0 / 3.0];
    for (i, e) in expected.iter().enumerate() {
        let v = row_values(&text, &(i + 1).to_string())[1];
        assert!((v - e).abs() < 5e-3, "feature {}: {v}", i + 1);
    }
    let sum = row_values(&text, "sum")[0];
    assert!((sum - 2.0).abs() < 5e-3);
}

#[test]
fn variance_ratios_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("var.csv");
    let o = psig(&[
        "variance",
        "--model",
        "linear3,quadratic3,sigmoidal3",
        "--trials",
        "1000",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("Function") && text.contains("Var(IG)") && text.contains("Var(PS-IG)"));
    for m in ["linear3", "quadratic3", "sigmoidal3"] {
        let ratio = row_values(&text, m)[2];
        assert!((0.30..=0.37).contains(&ratio), "{m}: {ratio}");
    }
    let body = std::fs::read_to_string(&csv).unwrap();
    assert!(body.starts_with("# psig "));
    assert!(body.lines().next().unwrap().contains("seed=1"));
    assert_eq!(data_rows(&body).len(), 3000);
}

#[test]
fn convergence_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("conv.csv");
    let svg = dir.path().join("conv.svg");
    let o = psig(&[
        "convergence",
        "--model",
        "sigmoidal3",
        "--budgets",
        "10,100,1000,10000",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let body = std::fs::read_to_string(&csv).unwrap();
    let header = body.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "budget,mse_det,mse_mc,mc_baselines,mc_inner_steps");
    let rows = data_rows(&body);
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let det: f64 = r[1].parse().unwrap();
        let mc: f64 = r[2].parse().unwrap();
        assert!(det > 0.0 && mc > 0.0);
    }
    let plot = std::fs::read_to_string(&svg).unwrap();
    assert!(plot.starts_with("<svg"));
    assert_eq!(plot.matches("<polyline").count(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let json = dir.path().join(format!("{tag}.json"));
        let o = psig(&[
            "convergence",
            "--budgets",
            "10,100,1000",
            "--ground-truth-steps",
            "10000",
            "--seed",
            "42",
            "--csv",
            csv.to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
        (
            std::fs::read(&csv).unwrap(),
            std::fs::read(&json).unwrap(),
            o.stdout,
        )
    };
    assert_eq!(run("a"), run("b"));

    let mc = |seed: &str| {
        stdout(&psig(&[
            "attribute",
            "--estimator",
            "psig_mc",
            "--baselines",
            "200",
            "--seed",
            seed,
        ]))
    };
    assert_eq!(mc("5"), mc("5"));
    assert_ne!(mc("5"), mc("6"));
}

#[test]
fn exit_codes() {
    // validation errors
    for args in [
        &["attribute", "--model", "nope"][..],
        &["attribute", "--density", "beta:0.5,2"],
        &["attribute", "--input", "1,2"],
        &["attribute", "--steps", "ten"],
        &["variance", "--trials", "10"],
        &["convergence", "--budgets", "100,10,1000"],
        &["attribute", "--bogus"],
    ] {
        let o = psig(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {o:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert!(!err.trim().is_empty());
    }
    assert_eq!(psig(&["--help"]).status.code(), Some(0));
}

#[test]
fn failed_write_leaves_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("missing").join("out.json");
    let o = psig(&[
        "attribute",
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
    assert!(!csv.exists());
    assert!(o.stdout.is_empty());
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "# attribution run\nmodel = linear3\nestimator = ig\nsteps = 10\n",
    )
    .unwrap();
    let c = conf.to_str().unwrap();

    let from_file = stdout(&psig(&["attribute", "--config", c]));
    assert!(
        from_file.contains("model=linear3 estimator=ig weight=one steps=10"),
        "{from_file}"
    );
    let overridden = stdout(&psig(&["attribute", "--config", c, "--steps", "20"]));
    assert!(overridden.contains("steps=20"), "{overridden}");

    // the environment seed sits below both flags and the file
    let csv = dir.path().join("s.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_psig"))
        .args(["attribute", "--config", c, "--csv", csv.to_str().unwrap()])
        .env("PSIG_SEED", "77")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&csv).unwrap().contains("seed=77"));

    std::fs::write(&conf, "steps = 10\nsteps_typo = 3\n").unwrap();
    assert_eq!(psig(&["attribute", "--config", c]).status.code(), Some(1));
}

fn write_mlp(path: &Path) {
    std::fs::write(
        path,
        "name = tiny_mlp\nactivation = sigmoid\nlayers = 2,2,1\n\
         w0 = 1.0,-0.5,0.25,0.75\nb0 = 0,0.1\nw1 = 2.0,-1.0\nb1 = 0.5\n",
    )
    .unwrap();
}

#[test]
fn mlp_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mlp = dir.path().join("tiny.mlp");
    write_mlp(&mlp);
    let o = psig(&[
        "attribute",
        "--mlp",
        mlp.to_str().unwrap(),
        "--model",
        "tiny_mlp",
        "--estimator",
        "ig",
        "--steps",
        "20000",
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    // IG completeness: sum ≈ F(1,1) − F(0,0)
    let s = |z: f64| 1.0 / (1.0 + (-z).exp());
    let f = |x0: f64, x1: f64| 2.0 * s(x0 - 0.5 * x1) - s(0.25 * x0 + 0.75 * x1 + 0.1) + 0.5;
    let sum = row_values(&text, "sum")[0];
    assert!((sum - (f(1.0, 1.0) - f(0.0, 0.0))).abs() < 1e-3, "{sum}");
}

#[test]
fn residual_and_axioms_run() {
    let o = psig(&["residual", "--model", "quadratic3", "--steps", "1000"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("residual (by parts)"));
    let o = psig(&["axioms", "--density", "beta:2,2"]);
    assert!(o.status.success(), "{o:?}");
    assert!(!stdout(&o).contains("FAIL"));
}
