use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use circmodal::simulate::{draw, oracle_modes, two_branch_model};
use circmodal::{default_mesh, fit_multifunction, Bandwidths, Geometry, MeanShiftConfig};
use circmodal_cli::io::{read_multifunction, read_sample, write_multifunction, write_sample, FitHeader, Format};
use circmodal_cli::{evaluate, load_model};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_circmodal"));
    cmd.env("RUST_LOG", "info");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn model_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/two_branch.toml")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a simulated circ-lin sample and returns its path.
fn simulated(dir: &TempDir, n: usize, seed: u64) -> PathBuf {
    let path = dir.path().join(format!("sample_{n}_{seed}.txt"));
    let out = run(&[
        "simulate",
        "--model",
        p(&model_path()),
        "-n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--output",
        p(&path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    path
}

#[test]
fn fit_is_byte_identical_across_runs_and_worker_counts() {
    let dir = TempDir::new().unwrap();
    let input = simulated(&dir, 120, 5);
    let mut outputs = Vec::new();
    for workers in ["1", "1", "3"] {
        let out = run(&[
            "--workers",
            workers,
            "fit",
            "--input",
            p(&input),
            "--kappa",
            "20",
            "--h",
            "0.6",
            "--mesh",
            "24",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("# geometry=circ-lin n=120\n# bandwidths predictor=20 response=0.6\n# mesh=24\n"));
    assert!(text.contains("mesh_value\tmode_value\tdensity_value\titerations\n"));
}

#[test]
fn out_of_range_angles_are_wrapped_and_logged() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("wrap.txt");
    fs::write(
        &input,
        "# geometry=circ-lin n=4\n0.1\t1.0\n7.0\t1.5\n-0.2\t0.9\n0.3\t1.1\n",
    )
    .unwrap();
    let sample = read_sample(&input).unwrap();
    assert!((sample.predictors()[1] - (7.0 - std::f64::consts::TAU)).abs() < 1e-15);

    let out = run(&["fit", "--input", p(&input), "--kappa", "2", "--h", "0.5", "--mesh", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let log = stderr(&out);
    assert!(log.contains("wrapped 1 row"), "{log}");
    assert!(log.contains("line 3"), "{log}");
}

#[test]
fn malformed_field_names_its_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.txt");
    let mut text = String::from("# geometry=circ-lin n=20\n");
    for i in 0..20 {
        // Data row i sits on line i + 2; line 17 is row 15.
        if i == 15 {
            text.push_str("0.5\t1.2x\n");
        } else {
            text.push_str(&format!("{}\t{}\n", 0.1 * i as f64 - 1.0, 0.05 * i as f64));
        }
    }
    fs::write(&input, text).unwrap();
    let out = run(&["fit", "--input", p(&input), "--kappa", "5", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 17"), "{}", stderr(&out));
}

#[test]
fn header_problems_are_reported() {
    let dir = TempDir::new().unwrap();
    let degrees = dir.path().join("deg.txt");
    fs::write(&degrees, "# geometry=circ-lin n=1 units=degrees\n90\t1\n").unwrap();
    let out = run(&["fit", "--input", p(&degrees), "--kappa", "5", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("radians"));

    let count = dir.path().join("count.txt");
    fs::write(&count, "# geometry=circ-lin n=3\n0\t1\n").unwrap();
    let out = run(&["fit", "--input", p(&count), "--kappa", "5", "--h", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("n=3"));

    let input = simulated(&dir, 30, 1);
    let out = run(&[
        "fit",
        "--input",
        p(&input),
        "--geometry",
        "lin-circ",
        "--kappa",
        "5",
        "--h",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does not match"));
}

#[test]
fn usage_errors_exit_with_status_two() {
    let dir = TempDir::new().unwrap();
    let input = simulated(&dir, 30, 1);
    assert_eq!(
        run(&["fit", "--input", p(&input), "--kappa", "5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["fit", "--input", p(&input), "--kappa", "-1", "--h", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        run(&["select", "--input", p(&input), "--geometry", "torus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn select_single_cell_grid() {
    let dir = TempDir::new().unwrap();
    let input = simulated(&dir, 40, 2);
    let out = run(&["select", "--input", p(&input), "--grid-kappa", "10", "--grid-h", "0.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# selected predictor=10 response=0.5\n"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("10\t0.5\t"));
}

#[test]
fn bootstrap_requires_circ_lin_data() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("lc.txt");
    let sample = draw(&two_branch_model(Geometry::LinCirc, 2.0, 8.0).unwrap(), 30, 4).unwrap();
    write_sample(fs::File::create(&input).unwrap(), &sample).unwrap();
    let out = run(&["select", "--input", p(&input), "--method", "bootstrap"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("circ-lin data only") && msg.contains("lin-circ"), "{msg}");
}

/// The selected pair is the minimum of the emitted table under the
/// smoother-first tie rule, recomputed here from the table alone.
#[test]
fn cv_selection_matches_the_emitted_table() {
    let dir = TempDir::new().unwrap();
    let input = simulated(&dir, 60, 8);
    let out = run(&[
        "select",
        "--input",
        p(&input),
        "--grid-kappa",
        "2,5,10,20,40",
        "--grid-h",
        "0.2,0.35,0.6,1,1.6",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(f64, f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("predictor"))
        .map(|l| {
            let f: Vec<f64> = l.split('\t').map(|x| x.parse().unwrap()).collect();
            (f[0], f[1], f[2])
        })
        .collect();
    assert_eq!(rows.len(), 25);
    let mut best = rows[0];
    for &r in &rows[1..] {
        // Lower score wins; on ties the smaller κ, then the larger h.
        let better = r.2 < best.2 || (r.2 == best.2 && (r.0 < best.0 || (r.0 == best.0 && r.1 > best.1)));
        if better {
            best = r;
        }
    }
    let expected = format!("# selected predictor={} response={}\n", best.0, best.1);
    assert!(text.contains(&expected), "{text}");

    // Spot-check one emitted score against a direct library computation.
    let sample = read_sample(&input).unwrap();
    let bw = Bandwidths::new(rows[7].0, rows[7].1).unwrap();
    let direct = circmodal::bandwidth::modal_cv_score(&sample, bw, &MeanShiftConfig::default()).unwrap();
    assert_eq!(direct, rows[7].2);
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let a = simulated(&dir, 50, 11);
    let b = dir.path().join("again.txt");
    fs::copy(&a, &b).unwrap();
    let c = simulated(&dir, 50, 11);
    assert_eq!(fs::read(&b).unwrap(), fs::read(&c).unwrap());

    let model = load_model(&model_path()).unwrap();
    assert_eq!(read_sample(&c).unwrap(), draw(&model, 50, 11).unwrap());
}

#[test]
fn noiseless_model_emits_branch_values() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("flat.toml");
    fs::write(
        &model,
        r#"
geometry = "lin-circ"
predictor = { kind = "uniform_interval", lo = -1.0, hi = 2.0 }

[[branches]]
weight = 1.0
function = { kind = "polynomial", coefficients = [0.5, 0.25] }
noise = { kind = "none" }
"#,
    )
    .unwrap();
    let path = dir.path().join("s.txt");
    let out = run(&[
        "simulate",
        "--model",
        p(&model),
        "-n",
        "25",
        "--seed",
        "3",
        "--output",
        p(&path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let sample = read_sample(&path).unwrap();
    for (x, y) in sample.predictors().iter().zip(sample.responses()) {
        assert!((y - (0.5 + 0.25 * x)).abs() < 1e-15);
    }
}

#[test]
fn invalid_model_names_the_field() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("bad.toml");
    let text = fs::read_to_string(model_path())
        .unwrap()
        .replace("sd = 0.5", "sd = -0.5");
    fs::write(&model, text).unwrap();
    let out = run(&["simulate", "--model", p(&model), "-n", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("branches[0].noise"), "{}", stderr(&out));
}

#[test]
fn oracle_file_matches_direct_oracle_calls() {
    let dir = TempDir::new().unwrap();
    let sample_path = dir.path().join("s.txt");
    let oracle_path = dir.path().join("o.txt");
    let out = run(&[
        "simulate",
        "--model",
        p(&model_path()),
        "-n",
        "80",
        "--seed",
        "2",
        "--output",
        p(&sample_path),
        "--oracle",
        p(&oracle_path),
        "--mesh",
        "20",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let truth = read_multifunction(&oracle_path).unwrap();
    let model = load_model(&model_path()).unwrap();
    let mesh = default_mesh(&read_sample(&sample_path).unwrap(), 20).unwrap();
    assert_eq!(truth.mesh(), &mesh[..]);
    for (i, &x) in mesh.iter().enumerate() {
        assert_eq!(truth.modes(i), oracle_modes(&model, x, 4096).unwrap().values());
    }
}

fn write_table(path: &Path, mf: &circmodal::ModalMultifunction) {
    write_multifunction(
        fs::File::create(path).unwrap(),
        mf,
        &FitHeader::default(),
        Format::Table,
    )
    .unwrap();
}

fn evaluate_global(fitted: &Path, oracle: &Path) -> String {
    let out = run(&["evaluate", "--input", p(fitted), "--oracle", p(oracle)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix("# global_error="))
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .to_string()
}

fn branches(modes: &[f64]) -> Vec<circmodal::Branch> {
    modes
        .iter()
        .map(|&mode| circmodal::Branch {
            mode,
            density: 0.1,
            iterations: 0,
        })
        .collect()
}

#[test]
fn evaluate_against_itself_and_a_single_bad_point() {
    let dir = TempDir::new().unwrap();
    let mesh: Vec<f64> = (0..8).map(|i| i as f64 * 0.25).collect();
    let truth_sets: Vec<Vec<f64>> = (0..8)
        .map(|i| if i == 3 { vec![0.0, 3.0] } else { vec![i as f64] })
        .collect();
    let truth = circmodal::ModalMultifunction::from_parts(
        Geometry::CircLin,
        mesh.clone(),
        truth_sets.iter().map(|s| branches(s)).collect(),
    )
    .unwrap();
    let oracle = dir.path().join("oracle.txt");
    write_table(&oracle, &truth);
    assert_eq!(evaluate_global(&oracle, &oracle), "0");

    let mut fitted_sets = truth_sets.clone();
    fitted_sets[3] = vec![1.0];
    let fitted = circmodal::ModalMultifunction::from_parts(
        truth.geometry(),
        mesh,
        fitted_sets.iter().map(|s| branches(s)).collect(),
    )
    .unwrap();
    let fitted_path = dir.path().join("fitted.txt");
    write_table(&fitted_path, &fitted);
    assert_eq!(evaluate_global(&fitted_path, &oracle), (4.0 / 8.0).to_string());
}

#[test]
fn evaluate_reports_the_first_divergent_mesh_value() {
    let dir = TempDir::new().unwrap();
    let sets = || (0..4).map(|_| branches(&[0.0])).collect::<Vec<_>>();
    let a = circmodal::ModalMultifunction::from_parts(Geometry::CircLin, vec![0.0, 0.5, 1.0, 1.5], sets()).unwrap();
    let b = circmodal::ModalMultifunction::from_parts(Geometry::CircLin, vec![0.0, 0.5, 1.25, 1.5], sets()).unwrap();
    let (pa, pb) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    write_table(&pa, &a);
    write_table(&pb, &b);
    let out = run(&["evaluate", "--input", p(&pa), "--oracle", p(&pb)]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(
        msg.contains("mesh mismatch at point 2") && msg.contains("1.25"),
        "{msg}"
    );
}

#[test]
fn json_output_reads_back() {
    let dir = TempDir::new().unwrap();
    let input = simulated(&dir, 60, 4);
    let table = dir.path().join("fit.txt");
    let json = dir.path().join("fit.json");
    for (path, format) in [(&table, "table"), (&json, "json")] {
        let out = run(&[
            "fit",
            "--input",
            p(&input),
            "--kappa",
            "10",
            "--h",
            "0.7",
            "--mesh",
            "10",
            "--format",
            format,
            "--output",
            p(path),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(read_multifunction(&table).unwrap(), read_multifunction(&json).unwrap());
}

/// Larger samples give smaller errors on average (20 seeds, n = 100 vs 400).
#[test]
fn evaluation_error_shrinks_with_sample_size() {
    let model = load_model(&model_path()).unwrap();
    let cfg = MeanShiftConfig::default();
    let mean_error = |n: usize, bw: Bandwidths| {
        let mut total = 0.0;
        for seed in 0..20 {
            let sample = draw(&model, n, 500 + seed).unwrap();
            let mesh = default_mesh(&sample, 32).unwrap();
            let truth = circmodal::simulate::oracle_multifunction(&model, &mesh, 4096).unwrap();
            let fit = fit_multifunction(&sample, bw, &mesh, &cfg).unwrap();
            total += evaluate(&truth, &fit).unwrap().1.unwrap().value;
        }
        total / 20.0
    };
    let small = mean_error(100, Bandwidths::new(10.0, 0.6).unwrap());
    let large = mean_error(400, Bandwidths::new(20.0, 0.45).unwrap());
    assert!(large < small, "n=400 error {large} vs n=100 error {small}");
}
