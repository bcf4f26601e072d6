use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use l96_core::diagnostics::{
    acf_matrix, build_report, compare_reports, pacf_pooled, CompareOptions, DiagnosticsReport,
    ReportOptions, Thresholds, DEFAULT_BINS, DEFAULT_MAX_LAG,
};
use l96_core::estimation::fit_parameterization;
use l96_core::io::{
    load_data, load_model, read_json, save_data, write_csv, write_json, FileKind, ModelFile,
};
use l96_core::l96::simulate_full;
use l96_core::narmax::{fit_narmax, NarmaxFitOptions, NarmaxModel, NarmaxVariant};
use l96_core::reduced::{simulate_reduced, Parameterization, ReducedTrajectory, WarmStart};
use l96_core::varx::{CovarianceKind, LagMode, VarxSpec};
use l96_core::{Error, ModelConfig, Result, SampleSeries};

use crate::{
    CompareArgs, CovArg, DiagnoseArgs, FitArgs, GenerateArgs, ModelArg, Outcome, SimulateArgs,
};

/// `<path>.json`, next to the data file it describes.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesSidecar {
    config: ModelConfig,
    config_hash: String,
    seed: u64,
    scale: usize,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    divergence: Option<String>,
    wall_time_s: f64,
}

fn resolve_config(a: &GenerateArgs) -> Result<ModelConfig> {
    let mut config = match (&a.preset, &a.config) {
        (Some(name), _) => ModelConfig::preset(name)?,
        (None, Some(path)) => ModelConfig::parse(&fs::read_to_string(path)?)?,
        (None, None) => {
            // Overrides alone must then spell out every field.
            let text: String = a.overrides.iter().map(|kv| format!("{kv}\n")).collect();
            return ModelConfig::parse(&text)?.scaled(a.scale);
        }
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    config.scaled(a.scale)
}

pub fn generate(a: &GenerateArgs) -> Result<Outcome> {
    let config = resolve_config(a)?;
    let started = Instant::now();
    let result = simulate_full(&config, a.seed);
    let mut sidecar = SeriesSidecar {
        config_hash: config.hash_hex(),
        config: config.clone(),
        seed: a.seed,
        scale: a.scale,
        status: "ok".into(),
        divergence: None,
        wall_time_s: 0.0,
    };
    let series = match result {
        Ok(s) => s,
        Err(e) => {
            sidecar.status = "diverged".into();
            sidecar.divergence = Some(e.to_string());
            sidecar.wall_time_s = started.elapsed().as_secs_f64();
            write_json(&sidecar_path(&a.output), &sidecar)?;
            return Err(e);
        }
    };
    save_data(&a.output, FileKind::Series, &series)?;
    if let Some(csv) = &a.csv {
        write_csv(File::create(csv)?, &series)?;
    }
    sidecar.wall_time_s = started.elapsed().as_secs_f64();
    write_json(&sidecar_path(&a.output), &sidecar)?;
    println!(
        "{}: {} samples of K = {} ({}), {:.1} s",
        a.output.display(),
        series.len(),
        series.width(),
        config.name,
        sidecar.wall_time_s
    );
    Ok(Outcome::Ok)
}

fn series_config(path: &Path, series: &SampleSeries) -> Result<ModelConfig> {
    let side = sidecar_path(path);
    let sidecar: SeriesSidecar = read_json(&side).map_err(|e| {
        Error::Data(format!(
            "cannot read configuration sidecar {}: {e}",
            side.display()
        ))
    })?;
    if sidecar.config.hash() != series.config_id {
        return Err(Error::Data(format!(
            "{} does not describe {}",
            side.display(),
            path.display()
        )));
    }
    Ok(sidecar.config)
}

fn cov_kind(c: CovArg) -> CovarianceKind {
    match c {
        CovArg::Diag => CovarianceKind::DiagonalIso,
        CovArg::Dense => CovarianceKind::Dense,
    }
}

fn varx_spec(model: &ModelArg, k: usize) -> Option<VarxSpec> {
    let with_cov = |spec: VarxSpec, cov: CovArg| VarxSpec {
        covariance_kind: cov_kind(cov),
        ..spec
    };
    match *model {
        ModelArg::Wn { cov } => Some(with_cov(VarxSpec::white_noise(k), cov)),
        ModelArg::Ar1 { cov } => Some(with_cov(VarxSpec::multi_ar1(k), cov)),
        ModelArg::Wnd { cov } => Some(with_cov(VarxSpec::white_noise_drift(k), cov)),
        ModelArg::Varx { p, cov, all_lags } => Some(VarxSpec {
            lag_mode: if all_lags {
                LagMode::All
            } else {
                LagMode::Single
            },
            ..VarxSpec::varx(p, cov_kind(cov), k)
        }),
        _ => None,
    }
}

pub fn fit(a: &FitArgs) -> Result<Outcome> {
    let (_, series) = load_data(&a.series)?;
    let config = series_config(&a.series, &series)?;
    let source = hex_id(&series.config_id);
    let b_stats = |series: &SampleSeries| -> Result<serde_json::Value> {
        let lag = a.pacf_lag.min(series.len().saturating_sub(1));
        Ok(json!({ "acf": acf_matrix(&series.b, lag)?, "pacf": pacf_pooled(&series.b, lag)? }))
    };
    let file = if let Some(spec) = varx_spec(&a.model, series.width()) {
        let fit = fit_parameterization(&series, &spec)?;
        let mut file = ModelFile::new(Parameterization::Varx(fit.model), source);
        file.summary = json!({
            "label": spec.label(),
            "regressors": fit.regressors,
            "coefficients": fit.coefficients,
            "residuals": fit.residuals,
            "b": b_stats(&series)?,
        });
        file.stability = fit.stability;
        file
    } else {
        match &a.model {
            ModelArg::Unresolved => ModelFile::new(Parameterization::Unresolved, source),
            ModelArg::Narmax {
                variant,
                preset_params,
            } => {
                let variant = NarmaxVariant::parse(variant)?;
                let (model, summary) = if *preset_params {
                    (
                        NarmaxModel::preset(variant),
                        json!({ "label": variant.label(), "source": "preset" }),
                    )
                } else {
                    let fit = fit_narmax(
                        &series,
                        variant,
                        config.forcing,
                        &NarmaxFitOptions::default(),
                    )?;
                    let summary = json!({
                        "label": variant.label(),
                        "source": "conditional least squares",
                        "iterations": fit.iterations,
                        "rows": fit.rows,
                        "b": b_stats(&series)?,
                    });
                    (fit.model, summary)
                };
                let mut file = ModelFile::new(Parameterization::Narmax(model), source);
                file.summary = summary;
                file
            }
            _ => unreachable!("VARX family handled above"),
        }
    };
    let file = ModelFile {
        config: Some(config),
        ..file
    };
    if let Some(s) = &file.stability {
        if !s.stable {
            eprintln!(
                "WARNING: {} is unstable (companion spectral radius {:.6} >= 1)",
                file.model.label(),
                s.spectral_radius()
            );
        }
    }
    write_json(&a.output, &file)?;
    println!(
        "{}: {} model written",
        a.output.display(),
        file.model.label()
    );
    Ok(Outcome::Ok)
}

fn hex_id(bytes: &[u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct TrajectorySidecar<'a> {
    seed: u64,
    model_id: &'a str,
    model_label: &'a str,
    generator: &'a str,
    stable: Option<bool>,
    steps: usize,
    warm_start: &'a str,
    warnings: &'a [String],
    wall_time_s: f64,
}

/// `dir/stem.<seed>.ext` for ensemble member `seed`.
fn member_path(base: &Path, seed: u64) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{seed}"),
    };
    base.with_file_name(name)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("L96_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            Error::Config(format!("L96_THREADS must be a positive integer, got {v:?}"))
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let file = load_model(&a.model)?;
    let config = file.config.clone().ok_or_else(|| {
        Error::Data(format!(
            "{} carries no model configuration",
            a.model.display()
        ))
    })?;
    let init = match &a.reference {
        Some(path) if !a.zero_history => {
            let (_, reference) = load_data(path)?;
            if reference.width() != config.k {
                return Err(Error::Data(format!(
                    "reference has K = {}, model expects {}",
                    reference.width(),
                    config.k
                )));
            }
            WarmStart::from_reference(&reference, &file.model)?
        }
        _ => WarmStart::zeros(config.k, &file.model),
    };
    let warm = if a.zero_history { "zero" } else { "reference" };
    let n_steps = a.n_steps.unwrap_or(config.n_samples);
    let stable = file.model.stable()?;
    let run = |seed: u64, out: &Path| -> Result<()> {
        let started = Instant::now();
        let traj = simulate_reduced(&config, &file.model, &init, seed, n_steps)?;
        write_trajectory(out, &traj)?;
        for w in &traj.warnings {
            eprintln!("WARNING: {w}");
        }
        let meta = TrajectorySidecar {
            seed,
            model_id: &traj.model_id,
            model_label: &traj.model_label,
            generator: &traj.generator,
            stable,
            steps: traj.len(),
            warm_start: warm,
            warnings: &traj.warnings,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        write_json(&sidecar_path(out), &meta)
    };
    match a.ensemble {
        None => run(a.seed, &a.output)?,
        Some(m) => {
            let pool = thread_pool()?;
            let results: Vec<Result<()>> = pool.install(|| {
                (0..m as u64)
                    .into_par_iter()
                    .map(|i| run(a.seed + i, &member_path(&a.output, a.seed + i)))
                    .collect()
            });
            results.into_iter().collect::<Result<Vec<()>>>()?;
        }
    }
    println!(
        "{}: {n_steps} steps of {}",
        a.output.display(),
        file.model.label()
    );
    Ok(Outcome::Ok)
}

fn write_trajectory(path: &Path, traj: &ReducedTrajectory) -> Result<()> {
    save_data(path, FileKind::Trajectory, &traj.to_series()?)
}

fn write_rows<I: IntoIterator<Item = String>>(path: &Path, header: &str, rows: I) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn diagnose(a: &DiagnoseArgs) -> Result<Outcome> {
    let (_, series) = load_data(&a.input)?;
    let mut opts = ReportOptions {
        n_bins: a.bins,
        max_lag: a.max_lag,
        pacf_lag: a.pacf,
        range: None,
    };
    if let Some(path) = &a.range_from {
        let r: DiagnosticsReport = read_json(path)?;
        let edges = &r.pdf.edges;
        opts.range = Some((edges[0], edges[edges.len() - 1]));
        if a.bins == DEFAULT_BINS {
            opts.n_bins = edges.len() - 1;
        }
        if a.max_lag == DEFAULT_MAX_LAG {
            opts.max_lag = r.max_lag();
        }
    }
    let report = build_report(&series.x, Some(&series.b), &opts)?;
    fs::create_dir_all(&a.out_dir)?;
    let dir = &a.out_dir;
    write_json(&dir.join("report.json"), &report)?;
    let pdf = &report.pdf;
    write_rows(
        &dir.join("pdf.csv"),
        "bin_lo,bin_hi,center,density",
        (0..pdf.densities.len()).map(|i| {
            format!(
                "{},{},{},{}",
                pdf.edges[i],
                pdf.edges[i + 1],
                0.5 * (pdf.edges[i] + pdf.edges[i + 1]),
                pdf.densities[i]
            )
        }),
    )?;
    write_rows(
        &dir.join("acf.csv"),
        "lag,acf",
        report
            .acf
            .iter()
            .enumerate()
            .map(|(l, v)| format!("{l},{v}")),
    )?;
    let l = report.max_lag() as i64;
    write_rows(
        &dir.join("ccf.csv"),
        "lag,ccf",
        report
            .ccf
            .iter()
            .enumerate()
            .map(|(i, v)| format!("{},{v}", i as i64 - l)),
    )?;
    write_rows(
        &dir.join("waves.csv"),
        "m,wave_mean,wave_var",
        (0..report.wave_mean.len())
            .map(|m| format!("{m},{},{}", report.wave_mean[m], report.wave_var[m])),
    )?;
    if let Some(p) = &report.pacf {
        write_rows(
            &dir.join("pacf.csv"),
            "lag,pacf",
            p.iter().enumerate().map(|(i, v)| format!("{},{v}", i + 1)),
        )?;
    }
    println!(
        "{}: N = {}, K = {}, mean {:.4}, std {:.4}, {} mode(s), peak wavenumber {}",
        a.input.display(),
        report.n,
        report.k,
        report.mean,
        report.std,
        report.modes,
        report.peak_wavenumber()
    );
    Ok(Outcome::Ok)
}

pub fn compare(a: &CompareArgs) -> Result<Outcome> {
    let reference: DiagnosticsReport = read_json(&a.reference)?;
    let test: DiagnosticsReport = read_json(&a.test)?;
    let thresholds = match &a.thresholds {
        Some(p) => Some(Thresholds::parse(&fs::read_to_string(p)?)?),
        None => None,
    };
    let opts = CompareOptions {
        acf_max_lag: a
            .acf_max_lag
            .or(thresholds.as_ref().and_then(|t| t.acf_max_lag)),
    };
    let c = compare_reports(&reference, &test, &opts)?;
    let text = serde_json::to_string_pretty(&c)?;
    println!("{text}");
    if let Some(out) = &a.output {
        write_json(out, &c)?;
    }
    let Some(t) = thresholds else {
        return Ok(Outcome::Ok);
    };
    let checks = t.check(&c);
    for ch in &checks {
        eprintln!(
            "{} {}: {:.6} (limit {})",
            if ch.pass { "PASS" } else { "FAIL" },
            ch.name,
            ch.value,
            ch.limit
        );
    }
    Ok(if checks.iter().all(|c| c.pass) {
        Outcome::Ok
    } else {
        Outcome::AssertionFailed
    })
}
