//! End-to-end acceptance run. Builds the release binary, runs the shipped
//! experiment recipe at desk scale and scores every criterion, printing one
//! PASS/FAIL line each. Exits non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use l96_core::diagnostics::{
    compare_reports, spatial_dft, CompareOptions, Comparison, DiagnosticsReport,
};
use l96_core::estimation::{fit_parameterization, ols_fit, pacf};
use l96_core::io::{load_model, read_json};
use l96_core::l96::{initial_state, FullIntegrator, FullState};
use l96_core::linalg::cholesky_lower;
use l96_core::reduced::{Parameterization, ReducedIntegrator};
use l96_core::varx::{
    check_stability, companion_spectrum_general, CovarianceKind, NoiseRoot, VarxSpec,
};
use l96_core::{ModelConfig, RowMatrix, SampleSeries};
use l96_validation::{at_most, below, Scorecard};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SCALE: usize = 5;
const RECIPE_BUDGET_S: f64 = 30.0 * 60.0;

type Check = (bool, String);

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn build_cli(root: &Path) -> PathBuf {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let manifest = root.join("Cargo.toml");
    let status = Command::new(cargo)
        .args([
            "build",
            "--release",
            "-q",
            "-p",
            "l96-cli",
            "--manifest-path",
        ])
        .arg(&manifest)
        .status()
        .expect("cannot run cargo");
    assert!(status.success(), "release build of l96-cli failed");
    root.join("target/release/l96")
}

fn run(bin: &Path, args: &[&str]) {
    let out = Command::new(bin).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "l96 {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Runs {
    dir: PathBuf,
}

impl Runs {
    fn report(&self, name: &str) -> DiagnosticsReport {
        read_json(&self.dir.join("diag").join(name).join("report.json")).unwrap()
    }

    fn compare(&self, reference: &str, test: &str, acf_max_lag: Option<usize>) -> Comparison {
        compare_reports(
            &self.report(reference),
            &self.report(test),
            &CompareOptions { acf_max_lag },
        )
        .unwrap()
    }

    fn model(&self, name: &str) -> Parameterization {
        load_model(&self.dir.join(format!("{name}.json")))
            .unwrap()
            .model
    }
}

fn unimodal_fidelity(runs: &Runs) -> Vec<Check> {
    let c = runs.compare("uni", "uni_varx14_diag", Some(500));
    vec![
        at_most("mean_rel", c.mean_rel, 0.02),
        at_most("std_rel", c.std_rel, 0.05),
        below("pdf_l1", c.pdf_l1, 0.05),
        below("acf_max_dev(<=500)", c.acf_max_dev, 0.1),
    ]
}

fn baseline_ordering(runs: &Runs) -> Vec<Check> {
    let noise = runs.compare("uni", "uni_seed2", None).pdf_l1;
    let d = |name: &str| runs.compare("uni", name, None).pdf_l1;
    let (wn, ar1, wnd, varx) = (
        d("uni_wn"),
        d("uni_ar1"),
        d("uni_wnd"),
        d("uni_varx14_diag"),
    );
    vec![
        (wn > wnd, format!("d(WN) {wn:.4} > d(WND) {wnd:.4}")),
        (wnd > varx, format!("d(WND) {wnd:.4} > d(VARX14) {varx:.4}")),
        (
            (ar1 - wn).abs() <= noise,
            format!(
                "|d(AR1) {ar1:.4} - d(WN)| {:.4} <= two-seed noise {noise:.4}",
                (ar1 - wn).abs()
            ),
        ),
    ]
}

fn trimodal_modes(runs: &Runs) -> Vec<Check> {
    let dense = runs.compare("tri", "tri_varx30_dense", None);
    let diag = runs.compare("tri", "tri_varx30_diag", None);
    let mut checks = vec![
        (
            dense.modes_test == 3,
            format!(
                "VARX30 dense modes {} == 3 (reference {})",
                dense.modes_test, dense.modes_ref
            ),
        ),
        (
            diag.pdf_l1 > dense.pdf_l1,
            format!(
                "L1 diagonal {:.4} > L1 dense {:.4}",
                diag.pdf_l1, dense.pdf_l1
            ),
        ),
    ];
    for name in ["tri_wn", "tri_wnd", "tri_ar1"] {
        let modes = runs.report(name).modes;
        checks.push((modes != 3, format!("{name} modes {modes} != 3")));
    }
    checks
}

fn narmax_contrast(runs: &Runs) -> Vec<Check> {
    let mut checks = Vec::new();
    for name in ["tri_narmax1201", "tri_narmax1110"] {
        let c = runs.compare("tri", name, None);
        checks.push(at_most(&format!("{name} mean_rel"), c.mean_rel, 0.1));
        checks.push(at_most(&format!("{name} std_rel"), c.std_rel, 0.1));
        checks.push((
            c.modes_test != 3,
            format!("{name} modes {} != 3", c.modes_test),
        ));
        checks.push((
            c.wave_peak_test != c.wave_peak_ref,
            format!(
                "{name} peak wavenumber {} != reference {}",
                c.wave_peak_test, c.wave_peak_ref
            ),
        ));
    }
    checks
}

fn stability(runs: &Runs) -> Vec<Check> {
    let mut checks = Vec::new();
    for name in [
        "uni_ar1",
        "uni_varx14_diag",
        "tri_ar1",
        "tri_varx30_diag",
        "tri_varx30_dense",
    ] {
        let Parameterization::Varx(model) = runs.model(name) else {
            checks.push((false, format!("{name} is not a VARX model")));
            continue;
        };
        let closed = check_stability(&model).unwrap();
        let general = companion_spectrum_general(&model).unwrap();
        let gap = closed
            .moduli
            .iter()
            .zip(&general.moduli)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        checks.push(below(
            &format!("{name} spectral radius"),
            general.spectral_radius(),
            1.0,
        ));
        checks.push(at_most(
            &format!("{name} closed form vs eigensolver"),
            gap,
            1e-10,
        ));
    }
    checks
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn recovery_fixture(n: usize, k: usize) -> SampleSeries {
    let (a0, a_p, d, sigma) = (0.1, 0.9, 0.05, 0.2);
    let noise = normals(2 * n * k, 1);
    let mut x = RowMatrix::zeros(n, k);
    let mut b = RowMatrix::zeros(n, k);
    let (mut xs, mut bs) = (vec![0.0; k], vec![1.0; k]);
    for t in 0..n {
        for j in 0..k {
            let e = &noise[2 * (t * k + j)..];
            xs[j] = 0.95 * xs[j] + 1.25 * e[0];
            bs[j] = a0 + a_p * bs[j] + d * xs[j] + sigma * e[1];
        }
        x.row_mut(t).copy_from_slice(&xs);
        b.row_mut(t).copy_from_slice(&bs);
    }
    SampleSeries::new(x, b, 0.01, [0; 32]).unwrap()
}

fn regression_pacf(s: &[f64], lag: usize) -> f64 {
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    let mut padded = vec![0.0; lag];
    padded.extend(s.iter().map(|v| v - mean));
    padded.extend(std::iter::repeat_n(0.0, lag));
    let rows = padded.len() - lag;
    let z = DMatrix::from_fn(rows, lag, |t, j| padded[t + lag - 1 - j]);
    let y = DVector::from_fn(rows, |t, _| padded[t + lag]);
    ols_fit(&z, &y).unwrap()[lag - 1]
}

fn estimator_correctness() -> Vec<Check> {
    let mut checks = Vec::new();
    let series = recovery_fixture(100_000, 4);
    let fit =
        fit_parameterization(&series, &VarxSpec::varx(1, CovarianceKind::DiagonalIso, 4)).unwrap();
    let m = &fit.model;
    let NoiseRoot::Diagonal { sigma } = m.noise else {
        unreachable!()
    };
    let worst = [(m.a0, 0.1), (m.a_p, 0.9), (m.d, 0.05), (sigma, 0.2)]
        .iter()
        .map(|(got, want)| ((got - want) / want).abs())
        .fold(0.0, f64::max);
    checks.push(at_most("VARX recovery relative error", worst, 0.01));

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = DMatrix::from_fn(24, 24, |_, _| rng.random_range(-1.0..1.0));
    let spd = &a * a.transpose() + DMatrix::identity(24, 24);
    let l = cholesky_lower(&spd).unwrap();
    let err = (&l * l.transpose() - &spd).abs().max() / spd.abs().max();
    checks.push(at_most("Cholesky reconstruction", err, 1e-10));

    let e = normals(3_000, 3);
    let mut s = vec![0.0; e.len()];
    for t in 2..e.len() {
        s[t] = 0.6 * s[t - 1] - 0.3 * s[t - 2] + e[t];
    }
    let dl = pacf(&s, 30).unwrap();
    let gap = (1..=30)
        .map(|lag| (dl[lag - 1] - regression_pacf(&s, lag)).abs())
        .fold(0.0, f64::max);
    checks.push(at_most("Durbin-Levinson vs regression PACF", gap, 1e-6));

    let (mut dft_gap, mut parseval_gap) = (0.0f64, 0.0f64);
    for k in [18, 32] {
        let row = normals(k, k as u64);
        let fast = spatial_dft(&row);
        for (m, u) in fast.iter().enumerate() {
            let direct: Complex64 = row
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    v * Complex64::from_polar(
                        1.0,
                        -2.0 * std::f64::consts::PI * (m * j) as f64 / k as f64,
                    )
                })
                .sum();
            dft_gap = dft_gap.max((u - direct).norm());
        }
        let energy: f64 = row.iter().map(|v| v * v).sum();
        let spectral: f64 = fast.iter().map(|u| u.norm_sqr()).sum::<f64>() / k as f64;
        parseval_gap = parseval_gap.max((spectral - energy).abs() / energy);
    }
    checks.push(at_most("fast vs direct DFT", dft_gap, 1e-10));
    checks.push(at_most("Parseval relative gap", parseval_gap, 1e-8));
    checks
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn spun_up(config: &ModelConfig, seed: u64) -> FullState {
    let mut state = initial_state(config, seed);
    let mut it = FullIntegrator::new(config).unwrap();
    for i in 0..20_000 {
        it.step(&mut state, i).unwrap();
    }
    state
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn integrator_correctness() -> Vec<Check> {
    let mut checks = Vec::new();
    let uni = ModelConfig::unimodal();
    let start = spun_up(&uni, 3);
    let full_at = |dt: f64| {
        let mut s = start.clone();
        let mut it = FullIntegrator::new(&uni).unwrap();
        for _ in 0..(1.0 / dt).round() as usize {
            it.step_with(&mut s, dt);
        }
        s
    };
    let exact = full_at(1e-5);
    let errors: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
        .iter()
        .map(|&dt| {
            let s = full_at(dt);
            max_diff(&s.x, &exact.x).max(max_diff(&s.y, &exact.y))
        })
        .collect();
    for p in orders(&errors) {
        checks.push((
            (p - 2.0).abs() <= 0.2,
            format!("full order {p:.3} in 2 +/- 0.2"),
        ));
    }

    let tri = ModelConfig::trimodal();
    let x0 = spun_up(&tri, 5).x;
    let forcing: Vec<f64> = normals(tri.k, 9);
    let reduced_at = |dt: f64| {
        let mut c = tri.clone();
        c.dt_reduced = dt;
        let mut it = ReducedIntegrator::new(&c);
        let mut x = x0.clone();
        for n in 0..(1.0 / dt).round() as u64 {
            it.step(&mut x, &forcing, n).unwrap();
        }
        x
    };
    let exact = reduced_at(1e-5);
    let errors: Vec<f64> = [2e-3, 1e-3, 5e-4]
        .iter()
        .map(|&dt| max_diff(&reduced_at(dt), &exact))
        .collect();
    for p in orders(&errors) {
        checks.push((
            (p - 2.0).abs() <= 0.2,
            format!("reduced order {p:.3} in 2 +/- 0.2"),
        ));
    }

    let shift = 7;
    let mut a = start.rotated(shift, uni.j);
    let mut b = start.clone();
    let mut it = FullIntegrator::new(&uni).unwrap();
    for i in 0..100 {
        it.step(&mut a, i).unwrap();
        it.step(&mut b, i).unwrap();
    }
    let b = b.rotated(shift, uni.j);
    checks.push(at_most(
        "full stepper rotation gap",
        max_diff(&a.x, &b.x).max(max_diff(&a.y, &b.y)),
        1e-10,
    ));

    let rot = |v: &[f64]| {
        let mut r = v.to_vec();
        r.rotate_right(shift);
        r
    };
    let mut it = ReducedIntegrator::new(&tri);
    let (mut a, mut b, fr) = (rot(&x0), x0.clone(), rot(&forcing));
    for n in 0..100 {
        it.step(&mut a, &fr, n).unwrap();
        it.step(&mut b, &forcing, n).unwrap();
    }
    checks.push(at_most(
        "reduced stepper rotation gap",
        max_diff(&a, &rot(&b)),
        1e-10,
    ));
    checks
}

fn reproducibility(bin: &Path, work: &Path, recipe: &RecipeRun) -> Vec<Check> {
    let p = |name: &str| work.join(name).to_str().unwrap().to_string();
    for name in ["g1.l96s", "g2.l96s"] {
        run(
            bin,
            &[
                "generate",
                "--preset",
                "trimodal",
                "--seed",
                "9",
                "--scale",
                "1000",
                "-o",
                &p(name),
            ],
        );
    }
    run(
        bin,
        &[
            "fit",
            &p("g1.l96s"),
            "-o",
            &p("m.json"),
            "varx",
            "--p",
            "3",
            "--cov",
            "dense",
        ],
    );
    for name in ["s1.l96r", "s2.l96r"] {
        run(
            bin,
            &[
                "simulate",
                "--model",
                &p("m.json"),
                "--reference",
                &p("g1.l96s"),
                "--seed",
                "4",
                "-o",
                &p(name),
            ],
        );
    }
    let same =
        |a: &str, b: &str| fs::read(work.join(a)).unwrap() == fs::read(work.join(b)).unwrap();
    vec![
        (
            same("g1.l96s", "g2.l96s"),
            "repeated generate is byte-identical".into(),
        ),
        (
            same("s1.l96r", "s2.l96r"),
            "repeated simulate is byte-identical".into(),
        ),
        (
            recipe.complete,
            format!(
                "recipe produced all outputs (gate exit status {})",
                recipe.status
            ),
        ),
        below("recipe wall time [s]", recipe.seconds, RECIPE_BUDGET_S),
    ]
}

struct RecipeRun {
    status: i32,
    seconds: f64,
    complete: bool,
}

const REDUCED_RUNS: [&str; 13] = [
    "uni_unresolved",
    "uni_wn",
    "uni_ar1",
    "uni_wnd",
    "uni_varx14_diag",
    "tri_unresolved",
    "tri_wn",
    "tri_ar1",
    "tri_wnd",
    "tri_varx30_diag",
    "tri_varx30_dense",
    "tri_narmax1201",
    "tri_narmax1110",
];

fn run_recipe(root: &Path, bin: &Path, out: &Path) -> RecipeRun {
    let started = Instant::now();
    let result = Command::new("bash")
        .arg(root.join("scripts/reproduce.sh"))
        .args(["--scale", &SCALE.to_string(), "--out"])
        .arg(out)
        .env("L96", bin)
        .output()
        .expect("cannot run the recipe");
    let seconds = started.elapsed().as_secs_f64();
    let status = result.status.code().unwrap_or(-1);
    if !matches!(status, 0 | 1) {
        eprintln!("{}", String::from_utf8_lossy(&result.stderr));
    }
    let complete = REDUCED_RUNS
        .iter()
        .all(|n| out.join("compare").join(format!("{n}.json")).exists());
    RecipeRun {
        status,
        seconds,
        complete,
    }
}

fn main() -> ExitCode {
    let root = workspace_root();
    let bin = build_cli(&root);
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("runs");
    let recipe = run_recipe(&root, &bin, &out);
    println!(
        "recipe at --scale {SCALE}: {:.0} s, exit status {}",
        recipe.seconds, recipe.status
    );
    let runs = Runs { dir: out.clone() };

    let mut card = Scorecard::default();
    let show = |card: &mut Scorecard, id: u32, title: &str, checks: Vec<Check>| {
        println!("{}", card.record(id, title, checks).line());
    };
    if recipe.complete {
        // Second unimodal reference: the sampling-noise yardstick of criterion 2.
        let s2 = out.join("uni_seed2.l96s");
        let s2 = s2.to_str().unwrap();
        let range = out.join("diag/uni/report.json");
        run(
            &bin,
            &[
                "generate",
                "--preset",
                "unimodal",
                "--seed",
                "2",
                "--scale",
                &SCALE.to_string(),
                "-o",
                s2,
            ],
        );
        let diag = out.join("diag/uni_seed2");
        run(
            &bin,
            &[
                "diagnose",
                s2,
                "--out-dir",
                diag.to_str().unwrap(),
                "--range-from",
                range.to_str().unwrap(),
            ],
        );

        show(
            &mut card,
            1,
            "unimodal fidelity of VARX(14) diagonal",
            unimodal_fidelity(&runs),
        );
        show(
            &mut card,
            2,
            "baseline ordering of PDF distances",
            baseline_ordering(&runs),
        );
        show(
            &mut card,
            3,
            "trimodal mode recovery with VARX(30)",
            trimodal_modes(&runs),
        );
        show(
            &mut card,
            4,
            "NARMAX contrast with preset coefficients",
            narmax_contrast(&runs),
        );
        show(&mut card, 5, "stability of fitted models", stability(&runs));
    } else {
        for (id, title) in [
            (1, "unimodal fidelity"),
            (2, "baseline ordering"),
            (3, "trimodal modes"),
            (4, "NARMAX contrast"),
            (5, "stability"),
        ] {
            show(
                &mut card,
                id,
                title,
                vec![(false, "recipe did not complete".into())],
            );
        }
    }
    show(
        &mut card,
        6,
        "estimator correctness",
        estimator_correctness(),
    );
    show(
        &mut card,
        7,
        "integrator correctness",
        integrator_correctness(),
    );
    show(
        &mut card,
        8,
        "reproducibility",
        reproducibility(&bin, work.path(), &recipe),
    );

    let failed = card.failed();
    if failed.is_empty() {
        println!("all {} criteria pass", card.verdicts().len());
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
