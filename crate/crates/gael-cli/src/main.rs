//! Command-line front end: builds the scenario models, runs paired
//! trajectory ensembles, and emits CSV/JSON results under a run directory
//! named by the config hash.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical-validity
//! failure (positivity certificate, unstable drift, diverged solver).

use gael_cli::{config, output, scenarios};

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use gael::hilbert::{expect, pauli_x, pauli_y, pauli_z, SpaceLayout};
use gael::metrics::{average_distance, current_histogram, postselect};
use gael::moments::{CMat, CVec};
use gael::sde::{
    filter_reduced, mean_state, run_ensemble, simulate, IntegrationConfig, ModelTag,
    StateProjector, TrajectoryRecord,
};
use gael::GaelError;

use config::{Config, ConfigError};
use output::RunDir;
use scenarios::{full_model, reduced_models, FullModel, ReducedModels, ScenarioParams};

#[derive(Parser)]
#[command(name = "gael", about = "Gaussian adiabatic elimination of monitored bosonic transducers", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set scenario.nbar=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Scenario: qnd, parity, jc, or twoosc.
    #[arg(long)]
    scenario: Option<String>,
    /// Thermal occupation of the transducer bath.
    #[arg(long)]
    nbar: Option<f64>,
    /// Dispersive coupling chi (in units of kappa).
    #[arg(long)]
    chi: Option<f64>,
    /// Exchange/oscillator coupling g (in units of kappa).
    #[arg(long)]
    g: Option<f64>,
    /// Interaction/measurement phase phi.
    #[arg(long)]
    phi: Option<f64>,
    /// Number of trajectories.
    #[arg(long)]
    ntraj: Option<usize>,
    /// Measurement time T_m (in units of 1/kappa).
    #[arg(long)]
    tmax: Option<f64>,
    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Base output directory (default `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit a python plotting script into the run directory.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Eliminate the transducer and print the effective model + certificate.
    Eliminate(CommonOpts),
    /// Run an ensemble of one model and emit observable/current CSVs.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Which model to integrate: full, gae, or doe.
        #[arg(long, default_value = "gae")]
        model: String,
    },
    /// Run paired full/reduced ensembles and emit trace-distance CSVs.
    Compare(CommonOpts),
    /// Run the two-qubit parity protocol: histogram + postselection CSVs.
    Parity(CommonOpts),
    /// Grid over one config key, running `compare` at each point.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Config key to sweep, e.g. `scenario.phi`.
        #[arg(long)]
        key: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
}

enum CliError {
    Config(ConfigError),
    Numerics(GaelError),
    Io(std::io::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<GaelError> for CliError {
    fn from(e: GaelError) -> Self {
        match e {
            GaelError::Io(io) => Self::Io(io),
            other => Self::Numerics(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Numerics(e)) => {
            eprintln!("numerical validity failure: {e}");
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!("io error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn build_config(opts: &CommonOpts, default_scenario: Option<&str>) -> Result<Config, ConfigError> {
    let mut cfg = match &opts.config {
        Some(path) => Config::from_file(path)?,
        None => Config::new(),
    };
    if let Some(s) = default_scenario {
        if !cfg.contains("scenario.name") {
            cfg.set("scenario.name", s);
        }
    }
    if let Some(v) = &opts.scenario {
        cfg.set("scenario.name", v);
    }
    if let Some(v) = opts.nbar {
        cfg.set("scenario.nbar", v);
    }
    if let Some(v) = opts.chi {
        cfg.set("scenario.chi", v);
    }
    if let Some(v) = opts.g {
        cfg.set("scenario.g", v);
    }
    if let Some(v) = opts.phi {
        cfg.set("scenario.phi", v);
    }
    if let Some(v) = opts.ntraj {
        cfg.set("numerics.ntraj", v);
    }
    if let Some(v) = opts.tmax {
        cfg.set("scenario.tm", v);
    }
    if let Some(v) = opts.dt {
        cfg.set("numerics.dt", v);
    }
    if let Some(v) = opts.seed {
        cfg.set("numerics.seed", v);
    }
    if let Some(v) = &opts.out {
        cfg.set("output.dir", v.display().to_string());
    }
    if opts.plot {
        cfg.set("output.plot_script", "true");
    }
    for pair in &opts.overrides {
        cfg.set_override(pair)?;
    }
    Ok(cfg)
}

fn workers() -> usize {
    std::env::var("GAEL_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn run_dir(cfg: &Config) -> Result<RunDir, CliError> {
    let base = PathBuf::from(cfg.str_or("output.dir", "runs"));
    Ok(RunDir::create(&base, cfg)?)
}

fn finish_run(
    dir: &mut RunDir,
    cfg: &Config,
    summary: serde_json::Value,
) -> Result<(), CliError> {
    if cfg.bool_or("output.plot_script", false)? {
        dir.write_text("plot.py", output::plot_script())?;
    }
    let manifest = output::manifest_json(cfg, summary, dir.files());
    dir.write_text("manifest.json", &manifest)?;
    println!("results written to {}", dir.path.display());
    Ok(())
}

fn integration(p: &ScenarioParams) -> IntegrationConfig {
    IntegrationConfig { dt: p.dt, t_max: p.tm, seed: p.seed, store_every: p.store_every }
}

fn certificate_json(reduced: &ReducedModels) -> serde_json::Value {
    let c = &reduced.sme.certificate;
    serde_json::json!({
        "min_eig_p": c.min_eig_p,
        "min_eig_pprime": c.min_eig_pprime,
        "norm_p": c.norm_p,
        "pass": c.pass,
        "lyapunov_residual": reduced.moments.lyapunov_residual(),
        "riccati_residual": reduced.moments.riccati_residual(),
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eliminate(opts) => {
            let cfg = build_config(&opts, None)?;
            let p = ScenarioParams::from_config(&cfg)?;
            let reduced = reduced_models(&p)?;
            let report = reduced.sme.report();
            println!("{report}");
            println!(
                "lyapunov residual {:.3e}, riccati residual {:.3e}",
                reduced.moments.lyapunov_residual(),
                reduced.moments.riccati_residual()
            );
            if cfg.contains("output.dir") {
                let mut dir = run_dir(&cfg)?;
                dir.write_text("report.txt", &report)?;
                finish_run(&mut dir, &cfg, certificate_json(&reduced))?;
            }
            Ok(())
        }
        Command::Simulate { common, model } => cmd_simulate(&common, &model),
        Command::Compare(opts) => {
            let cfg = build_config(&opts, None)?;
            let p = ScenarioParams::from_config(&cfg)?;
            let mut dir = run_dir(&cfg)?;
            let summary = compare_once(&p, &mut dir, true)?;
            finish_run(&mut dir, &cfg, summary)
        }
        Command::Parity(opts) => cmd_parity(&opts),
        Command::Sweep { common, key, values } => cmd_sweep(&common, &key, &values),
    }
}

/// Runs the paired full/GAE(/DOE) ensemble and writes distance CSVs into
/// `dir` (when `emit` is set). Returns the summary for the manifest.
fn compare_once(
    p: &ScenarioParams,
    dir: &mut RunDir,
    emit: bool,
) -> Result<serde_json::Value, CliError> {
    let t0 = Instant::now();
    let reduced = reduced_models(p)?;
    let full = full_model(p)?;
    let ic = integration(p);
    let with_doe = reduced.doe.is_some();

    let results = run_paired_ensemble(p, &reduced, &full, &ic)?;
    let gae_pairs: Vec<_> = results.iter().map(|(f, g, _)| (f, g)).collect();
    let gae_series = average_distance(&gae_pairs)?;
    let doe_series = if with_doe {
        let doe_pairs: Vec<_> =
            results.iter().map(|(f, _, d)| (f, d.as_ref().expect("doe record"))).collect();
        Some(average_distance(&doe_pairs)?)
    } else {
        None
    };

    if emit {
        dir.write_text("distance_gae.csv", &output::distance_csv(&gae_series))?;
        if let Some(s) = &doe_series {
            dir.write_text("distance_doe.csv", &output::distance_csv(s))?;
        }
    }
    let runtime = t0.elapsed().as_secs_f64();
    println!(
        "{}: dbar_gae = {:.4} +- {:.4}{} ({} trajectories, {:.1} s)",
        p.name,
        gae_series.time_avg,
        gae_series.time_avg_stderr,
        doe_series
            .as_ref()
            .map(|s| format!(", dbar_doe = {:.4} +- {:.4}", s.time_avg, s.time_avg_stderr))
            .unwrap_or_default(),
        p.ntraj,
        runtime
    );
    let mut summary = serde_json::json!({
        "scenario": p.name,
        "dbar_gae": gae_series.time_avg,
        "dbar_gae_stderr": gae_series.time_avg_stderr,
        "ntraj": p.ntraj,
        "runtime_seconds": runtime,
        "certificate": certificate_json(&reduced),
    });
    if let Some(s) = &doe_series {
        summary["dbar_doe"] = serde_json::json!(s.time_avg);
        summary["dbar_doe_stderr"] = serde_json::json!(s.time_avg_stderr);
    }
    Ok(summary)
}

type PairedRecord = (TrajectoryRecord, TrajectoryRecord, Option<TrajectoryRecord>);

fn run_paired_ensemble(
    p: &ScenarioParams,
    reduced: &ReducedModels,
    full: &FullModel,
    ic: &IntegrationConfig,
) -> Result<Vec<PairedRecord>, CliError> {
    let project = StateProjector { layout: &full.layout, keep: &full.keep };
    let results: Vec<Result<PairedRecord, GaelError>> =
        run_ensemble(p.ntraj, workers(), |k| {
            let full_rec =
                simulate(&full.gen, &full.rho0, ic, ModelTag::Full, k as u64, Some(project))?;
            let gae_rec = filter_reduced(&reduced.gae, &reduced.rho0, &full_rec, ModelTag::Gae)?;
            let doe_rec = match &reduced.doe {
                Some(doe) => {
                    Some(filter_reduced(doe, &reduced.rho0, &full_rec, ModelTag::Doe)?)
                }
                None => None,
            };
            Ok((full_rec, gae_rec, doe_rec))
        });
    Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
}

fn cmd_simulate(opts: &CommonOpts, model: &str) -> Result<(), CliError> {
    let mut cfg = build_config(opts, None)?;
    cfg.set("simulate.model", model);
    let p = ScenarioParams::from_config(&cfg)?;
    let ic = integration(&p);
    let t0 = Instant::now();

    let records: Vec<TrajectoryRecord> = match model {
        "full" => {
            let full = full_model(&p)?;
            let project = StateProjector { layout: &full.layout, keep: &full.keep };
            let res: Vec<Result<TrajectoryRecord, GaelError>> =
                run_ensemble(p.ntraj, workers(), |k| {
                    simulate(&full.gen, &full.rho0, &ic, ModelTag::Full, k as u64, Some(project))
                });
            res.into_iter().collect::<Result<Vec<_>, _>>()?
        }
        "gae" | "doe" => {
            let reduced = reduced_models(&p)?;
            let (gen, tag) = if model == "gae" {
                (&reduced.gae, ModelTag::Gae)
            } else {
                let Some(doe) = &reduced.doe else {
                    return Err(ConfigError {
                        source: "config".to_string(),
                        line: 0,
                        msg: format!("scenario `{}` has no DOE baseline", p.name),
                    }
                    .into());
                };
                (doe, ModelTag::Doe)
            };
            let res: Vec<Result<TrajectoryRecord, GaelError>> =
                run_ensemble(p.ntraj, workers(), |k| {
                    simulate(gen, &reduced.rho0, &ic, tag, k as u64, None)
                });
            res.into_iter().collect::<Result<Vec<_>, _>>()?
        }
        other => {
            return Err(ConfigError {
                source: "config".to_string(),
                line: 0,
                msg: format!("unknown model `{other}`; expected full, gae, or doe"),
            }
            .into())
        }
    };

    let mut dir = run_dir(&cfg)?;
    dir.write_text("observables.csv", &observables_csv(&p, &records))?;
    let mut currents = String::from("trajectory,integrated_current\n");
    for r in &records {
        currents.push_str(&format!(
            "{},{:.16e}\n",
            r.traj_index,
            r.integrated_current(0, p.tm)
        ));
    }
    dir.write_text("currents.csv", &currents)?;
    let summary = serde_json::json!({
        "scenario": p.name,
        "model": model,
        "ntraj": p.ntraj,
        "runtime_seconds": t0.elapsed().as_secs_f64(),
    });
    finish_run(&mut dir, &cfg, summary)
}

/// Ensemble-mean observables at the stored times: Pauli expectations for a
/// qubit system, computational-basis + Bell populations for two qubits.
fn observables_csv(p: &ScenarioParams, records: &[TrajectoryRecord]) -> String {
    let times = &records[0].times;
    let d = p.system_dim();
    let (header, ops): (&str, Vec<CMat>) = if d == 2 {
        ("time,sx,sy,sz", vec![pauli_x(), pauli_y(), pauli_z()])
    } else {
        let basis = |k: usize| {
            let mut v = CVec::zeros(4);
            v[k] = Complex64::ONE;
            gael::hilbert::pure_state(&v)
        };
        let mut psi = CVec::zeros(4);
        psi[1] = Complex64::from(1.0 / 2f64.sqrt());
        psi[2] = Complex64::from(1.0 / 2f64.sqrt());
        ("time,p00,p11,p_psi_plus", vec![basis(0), basis(3), gael::hilbert::pure_state(&psi)])
    };
    let mut out = String::from(header);
    out.push('\n');
    for (ti, &t) in times.iter().enumerate() {
        let states: Vec<&CMat> = records.iter().map(|r| &r.states[ti]).collect();
        let mean = mean_state(&states);
        out.push_str(&format!("{t:.16e}"));
        for op in &ops {
            out.push_str(&format!(",{:.16e}", expect(op, &mean).re));
        }
        out.push('\n');
    }
    out
}

fn cmd_parity(opts: &CommonOpts) -> Result<(), CliError> {
    let cfg = build_config(opts, Some("parity"))?;
    let p = ScenarioParams::from_config(&cfg)?;
    if p.name != "parity" {
        return Err(ConfigError {
            source: "config".to_string(),
            line: 0,
            msg: format!("the parity protocol requires scenario `parity`, found `{}`", p.name),
        }
        .into());
    }
    let t0 = Instant::now();
    let reduced = reduced_models(&p)?;
    let ic = integration(&p);
    let res: Vec<Result<TrajectoryRecord, GaelError>> = run_ensemble(p.ntraj, workers(), |k| {
        simulate(&reduced.gae, &reduced.rho0, &ic, ModelTag::Gae, k as u64, None)
    });
    let records = res.into_iter().collect::<Result<Vec<_>, _>>()?;

    let hist = current_histogram(&records, 0, p.tm, None);
    let layout = SpaceLayout::new(vec![2, 2]);
    let thresholds = cfg
        .f64_list("parity.nu")?
        .unwrap_or_else(|| (1..=15).map(|k| 2.5 * k as f64).collect());
    let mut rows = Vec::new();
    for &nu in &thresholds {
        match postselect(&records, 0, p.tm, nu, Some((&layout, &[0]))) {
            Ok(r) => rows.push((nu, r.success_probability, r.log_neg.unwrap())),
            Err(GaelError::EmptySelection { .. }) => rows.push((nu, 0.0, 0.0)),
            Err(e) => return Err(e.into()),
        }
    }

    let mut dir = run_dir(&cfg)?;
    dir.write_text("histogram.csv", &output::histogram_csv(&hist))?;
    dir.write_text("postselect.csv", &output::postselect_csv(&rows))?;
    dir.write_text("observables.csv", &observables_csv(&p, &records))?;
    println!(
        "parity: {} histogram peaks; success probability {:.3} and E_N {:.3} at nu = {}",
        hist.peak_count(),
        rows[0].1,
        rows[0].2,
        rows[0].0
    );
    let summary = serde_json::json!({
        "scenario": "parity",
        "ntraj": p.ntraj,
        "histogram_peaks": hist.peak_count(),
        "thresholds": thresholds,
        "runtime_seconds": t0.elapsed().as_secs_f64(),
        "certificate": certificate_json(&reduced),
    });
    finish_run(&mut dir, &cfg, summary)
}

fn cmd_sweep(opts: &CommonOpts, key: &str, values: &str) -> Result<(), CliError> {
    let cfg = build_config(opts, None)?;
    let parsed: Vec<f64> = values
        .split(',')
        .map(|tok| tok.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ConfigError {
            source: "command line".to_string(),
            line: 0,
            msg: format!("--values must be a comma-separated number list, found `{values}`"),
        })?;
    if parsed.is_empty() {
        return Err(ConfigError {
            source: "command line".to_string(),
            line: 0,
            msg: "--values is empty".to_string(),
        }
        .into());
    }

    let mut dir = run_dir(&cfg)?;
    let mut rows: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    let mut summaries = Vec::new();
    let mut with_doe = false;
    for &v in &parsed {
        let mut point_cfg = cfg.clone();
        point_cfg.set(key, v);
        let p = ScenarioParams::from_config(&point_cfg)?;
        let summary = compare_once(&p, &mut dir, false)?;
        let mut cells =
            vec![(summary["dbar_gae"].as_f64().unwrap(), summary["dbar_gae_stderr"].as_f64().unwrap())];
        if let Some(doe) = summary["dbar_doe"].as_f64() {
            with_doe = true;
            cells.push((doe, summary["dbar_doe_stderr"].as_f64().unwrap()));
        }
        rows.push((v, cells));
        summaries.push(serde_json::json!({"value": v, "result": summary}));
    }
    let models: Vec<&str> = if with_doe { vec!["gae", "doe"] } else { vec!["gae"] };
    dir.write_text("sweep.csv", &output::sweep_csv(key, &models, &rows))?;
    let summary = serde_json::json!({ "sweep_key": key, "points": summaries });
    finish_run(&mut dir, &cfg, summary)
}
