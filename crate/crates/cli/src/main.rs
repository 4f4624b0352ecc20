//! Command-line front end for the hinfgp toolkit.
//!
//! Subcommands: `sample`, `regress`, `excursion`, `validate`,
//! `demo-resonance`, and `rerun`. Every run writes a JSON manifest listing
//! the resolved arguments and emitted files; `rerun` replays a manifest and
//! reproduces its outputs byte-identically. Exit codes: 0 success, 2 usage
//! error, 3 numerical failure.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use hinfgp::excursion::{excursion_bound, ExcursionQuery};
use hinfgp::kernels::{ComplexKernel, KernelSpec, SequenceSpec};
use hinfgp::montecarlo::{mc_gain_statistics, GainStatistics};
use hinfgp::regression::{
    confidence_ellipsoid, fit_hyperparameters, Dataset, KernelFamily, RegressionModel,
};
use hinfgp::sampling::{sample_spec, FrequencyGrid};
use hinfgp::sysid::run_experiment;

#[derive(Parser)]
#[command(name = "hinfgp", version, about = "Gaussian process models of stable transfer functions: sampling, regression, and gain-excursion certificates")]
struct Cli {
    /// Cap the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw process realizations onto a frequency grid and dump them as CSV.
    Sample(SampleArgs),
    /// Fit kernel hyperparameters to a dataset and emit posterior curves.
    Regress(RegressArgs),
    /// Evaluate the gain-excursion bound over a gamma grid.
    Excursion(ExcursionArgs),
    /// Monte Carlo estimates of upcrossing counts and excursion probabilities.
    Validate(ValidateArgs),
    /// Run the built-in resonant-plant identification experiment.
    DemoResonance(DemoResonanceArgs),
    /// Replay a run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Kernel specification JSON file.
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform grid size over [-pi, pi).
    #[arg(long, default_value_t = 1024)]
    grid_points: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegressArgs {
    /// Dataset CSV (header re_z,im_z,re_y,im_y).
    #[arg(long)]
    data: PathBuf,
    /// Observation noise variance sigma_n^2.
    #[arg(long)]
    noise_var: f64,
    /// Hyperparameter family: "resonance" (5 parameters) or "geometric".
    #[arg(long, default_value = "resonance")]
    family: String,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Prediction grid size over (0, pi).
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    /// Confidence scaling for the magnitude/phase bands.
    #[arg(long, default_value_t = 3.0)]
    eta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExcursionArgs {
    #[arg(long)]
    kernel: PathBuf,
    /// Gamma grid as start:end:step (inclusive ends).
    #[arg(long)]
    gamma_grid: String,
    #[arg(long, default_value_t = hinfgp::excursion::DEFAULT_N_OMEGA)]
    n_omega: usize,
    #[arg(long, default_value_t = hinfgp::excursion::DEFAULT_N_THETA)]
    n_theta: usize,
    /// Append Monte Carlo columns using this many realizations.
    #[arg(long)]
    validate: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    gamma_grid: String,
    /// Realization count.
    #[arg(short = 'N', long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DemoResonanceArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the plug-in observation-noise estimate.
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 3.0)]
    eta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest JSON written by a previous run.
    #[arg(long)]
    manifest: PathBuf,
    /// Redirect outputs to a different path.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    fn numeric(err: impl std::fmt::Display) -> Self {
        CliError::Numeric(err.to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    subcommand: String,
    /// Resolved argument vector; `rerun` replays exactly these.
    argv: Vec<String>,
    seed: u64,
    wall_time_seconds: f64,
    outputs: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // A pool may already exist when invoked recursively; that is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let start = Instant::now();
    match command {
        Command::Sample(args) => cmd_sample(args, start),
        Command::Regress(args) => cmd_regress(args, start),
        Command::Excursion(args) => cmd_excursion(args, start),
        Command::Validate(args) => cmd_validate(args, start),
        Command::DemoResonance(args) => cmd_demo_resonance(args, start),
        Command::Rerun(args) => cmd_rerun(args),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Numeric(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Numeric(format!("cannot write {}: {e}", path.display())))
}

fn load_kernel_spec(path: &Path) -> Result<KernelSpec, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("invalid kernel spec {}: {e}", path.display())))
}

fn build_kernel(spec: &KernelSpec, path: &Path) -> Result<Arc<dyn ComplexKernel>, CliError> {
    spec.build()
        .map_err(|e| CliError::usage(format!("invalid kernel spec {}: {e}", path.display())))
}

/// Parses "start:end:step" into an inclusive grid.
fn parse_gamma_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::usage(format!(
            "gamma grid '{text}' must have the form start:end:step"
        )));
    }
    let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let nums = nums.map_err(|e| CliError::usage(format!("gamma grid '{text}': {e}")))?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start || start <= 0.0 {
        return Err(CliError::usage(format!(
            "gamma grid '{text}' needs 0 < start <= end and step > 0"
        )));
    }
    let mut grid = Vec::new();
    let mut i = 0usize;
    loop {
        let v = start + step * i as f64;
        if v > end + 1e-9 * step {
            break;
        }
        grid.push(v);
        i += 1;
    }
    Ok(grid)
}

/// A series-form sequence equivalent to the kernel spec, when one exists.
/// Sums of series parts fold into one explicit coefficient list.
fn spec_to_sequence(spec: &KernelSpec) -> Result<SequenceSpec, CliError> {
    match spec {
        KernelSpec::Geometric { alpha } => {
            SequenceSpec::geometric(*alpha).map_err(|e| CliError::usage(e.to_string()))
        }
        KernelSpec::Stationary { sequence } => Ok(sequence.clone()),
        KernelSpec::Sum { parts } => {
            let mut combined: Vec<f64> = Vec::new();
            for part in parts {
                let sub = spec_to_sequence(&part.kernel)?;
                let coeffs = sub.coefficients();
                if combined.len() < coeffs.len() {
                    combined.resize(coeffs.len(), 0.0);
                }
                for (acc, c) in combined.iter_mut().zip(&coeffs) {
                    *acc += part.weight * c;
                }
            }
            SequenceSpec::explicit(combined).map_err(|e| CliError::usage(e.to_string()))
        }
        KernelSpec::Cozine { .. } => Err(CliError::usage(
            "Monte Carlo validation needs a series-form kernel (geometric, stationary, or sums of those)",
        )),
    }
}

fn manifest_path_for(out: &Path, dir_output: bool) -> PathBuf {
    if dir_output {
        out.join("manifest.json")
    } else {
        out.with_extension("manifest.json")
    }
}

fn write_manifest(
    subcommand: &str,
    argv: Vec<String>,
    seed: u64,
    outputs: Vec<String>,
    start: Instant,
    path: &Path,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        tool: "hinfgp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        argv,
        seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Numeric(format!("manifest serialization: {e}")))?;
    write_file(path, &text)
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Posterior CSV rows on a frequency grid. Full-circle phase uncertainty is
/// encoded as the interval [-pi, pi].
fn posterior_csv(model: &RegressionModel, omegas: &[f64], eta: f64) -> Result<String, CliError> {
    let mut out = String::from("omega,re_mean,im_mean,sigma,mag_lo,mag_hi,phase_lo,phase_hi\n");
    for &omega in omegas {
        let p = model
            .predict_strict(Complex64::from_polar(1.0, omega))
            .map_err(CliError::numeric)?;
        let e = confidence_ellipsoid(&p, eta);
        let (phase_lo, phase_hi) = e.phase.unwrap_or((-PI, PI));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(omega),
            fmt(p.mean.re),
            fmt(p.mean.im),
            fmt(p.hermitian_variance.sqrt()),
            fmt(e.magnitude_lo),
            fmt(e.magnitude_hi),
            fmt(phase_lo),
            fmt(phase_hi),
        ));
    }
    Ok(out)
}

fn family_by_name(name: &str) -> Result<(KernelFamily, Vec<f64>), CliError> {
    // Family plus fallback parameters used when the dataset is empty.
    match name {
        "resonance" => Ok((
            KernelFamily::resonance_mixture(),
            vec![1.0, 0.5, 1.0, PI / 2.0, 0.5],
        )),
        "geometric" => Ok((KernelFamily::geometric(), vec![0.5])),
        other => Err(CliError::usage(format!(
            "unknown family '{other}' (expected 'resonance' or 'geometric')"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_sample(args: SampleArgs, start: Instant) -> Result<(), CliError> {
    if args.count == 0 || args.grid_points == 0 {
        return Err(CliError::usage("count and grid-points must be positive"));
    }
    let spec = load_kernel_spec(&args.kernel)?;
    build_kernel(&spec, &args.kernel)?;
    let grid = FrequencyGrid::uniform_full(args.grid_points);
    let realizations =
        sample_spec(&spec, &grid, args.seed, args.count).map_err(CliError::numeric)?;
    let mut outputs = Vec::new();
    for r in &realizations {
        let mut csv = String::from("omega,re_f,im_f,gain\n");
        for (omega, v) in r.grid.values().iter().zip(&r.values) {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt(*omega),
                fmt(v.re),
                fmt(v.im),
                fmt(v.norm())
            ));
        }
        let path = args.out.join(format!("realization_{:03}.csv", r.index));
        write_file(&path, &csv)?;
        outputs.push(path_str(&path));
    }
    let argv = vec![
        "sample".into(),
        "--kernel".into(),
        path_str(&args.kernel),
        "--count".into(),
        args.count.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--grid-points".into(),
        args.grid_points.to_string(),
        "--out".into(),
        path_str(&args.out),
    ];
    write_manifest(
        "sample",
        argv,
        args.seed,
        outputs,
        start,
        &manifest_path_for(&args.out, true),
    )
}

fn cmd_regress(args: RegressArgs, start: Instant) -> Result<(), CliError> {
    if args.noise_var < 0.0 {
        return Err(CliError::usage("noise variance must be nonnegative"));
    }
    let (family, fallback_theta) = family_by_name(&args.family)?;
    let text = read_to_string(&args.data)?;
    let data = Dataset::from_csv(&text, args.noise_var)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.data.display())))?;

    let (spec, theta, lml) = if data.is_empty() {
        eprintln!(
            "warning: {} holds no observations; emitting prior curves",
            args.data.display()
        );
        let spec = family
            .build_spec(&fallback_theta)
            .map_err(CliError::numeric)?;
        (spec, fallback_theta.clone(), None)
    } else {
        let fit = fit_hyperparameters(&family, &data, args.restarts, args.seed)
            .map_err(CliError::numeric)?;
        (fit.spec, fit.theta, Some(fit.lml))
    };
    let kernel = spec.build().map_err(CliError::numeric)?;
    let model = RegressionModel::new(kernel, data).map_err(CliError::numeric)?;
    let omegas: Vec<f64> = (0..args.grid_points)
        .map(|i| (i as f64 + 0.5) * PI / args.grid_points as f64)
        .collect();
    let posterior = posterior_csv(&model, &omegas, args.eta)?;
    let posterior_path = args.out.join("posterior.csv");
    write_file(&posterior_path, &posterior)?;

    let model_json = serde_json::json!({
        "family": family.name,
        "theta": theta,
        "lml": lml,
        "kernel": spec,
        "noise_variance": args.noise_var,
    });
    let model_path = args.out.join("model.json");
    write_file(&model_path, &serde_json::to_string_pretty(&model_json).unwrap())?;

    let argv = vec![
        "regress".into(),
        "--data".into(),
        path_str(&args.data),
        "--noise-var".into(),
        args.noise_var.to_string(),
        "--family".into(),
        args.family.clone(),
        "--restarts".into(),
        args.restarts.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--grid-points".into(),
        args.grid_points.to_string(),
        "--eta".into(),
        args.eta.to_string(),
        "--out".into(),
        path_str(&args.out),
    ];
    write_manifest(
        "regress",
        argv,
        args.seed,
        vec![path_str(&posterior_path), path_str(&model_path)],
        start,
        &manifest_path_for(&args.out, true),
    )
}

fn cmd_excursion(args: ExcursionArgs, start: Instant) -> Result<(), CliError> {
    let spec = load_kernel_spec(&args.kernel)?;
    let kernel = build_kernel(&spec, &args.kernel)?;
    let gammas = parse_gamma_grid(&args.gamma_grid)?;
    let mc: Option<GainStatistics> = match args.validate {
        Some(n) => {
            if n < 100 {
                return Err(CliError::usage("--validate needs at least 100 realizations"));
            }
            let sequence = spec_to_sequence(&spec)?;
            Some(mc_gain_statistics(&sequence, &gammas, n, args.seed, 4096))
        }
        None => None,
    };

    let mut csv = String::from("gamma,expected_upcrossings,start_violation,bound");
    if mc.is_some() {
        csv.push_str(",mc_upcrossings,mc_upcrossings_se,mc_excursion_probability,mc_excursion_se");
    }
    csv.push('\n');
    for (i, &gamma) in gammas.iter().enumerate() {
        let mut query = ExcursionQuery::new(kernel.clone(), gamma);
        query.n_omega = args.n_omega;
        query.n_theta = args.n_theta;
        let report = excursion_bound(&query).map_err(CliError::numeric)?;
        csv.push_str(&format!(
            "{},{},{},{}",
            fmt(gamma),
            fmt(report.expected_upcrossings),
            fmt(report.start_violation),
            fmt(report.bound)
        ));
        if let Some(stats) = &mc {
            let u = &stats.upcrossings[i];
            let p = &stats.excursion_probability[i];
            csv.push_str(&format!(
                ",{},{},{},{}",
                fmt(u.estimate),
                fmt(u.standard_error),
                fmt(p.estimate),
                fmt(p.standard_error)
            ));
        }
        csv.push('\n');
    }
    write_file(&args.out, &csv)?;

    let mut argv = vec![
        "excursion".into(),
        "--kernel".into(),
        path_str(&args.kernel),
        "--gamma-grid".into(),
        args.gamma_grid.clone(),
        "--n-omega".into(),
        args.n_omega.to_string(),
        "--n-theta".into(),
        args.n_theta.to_string(),
    ];
    if let Some(n) = args.validate {
        argv.push("--validate".into());
        argv.push(n.to_string());
    }
    argv.extend([
        "--seed".into(),
        args.seed.to_string(),
        "--out".into(),
        path_str(&args.out),
    ]);
    write_manifest(
        "excursion",
        argv,
        args.seed,
        vec![path_str(&args.out)],
        start,
        &manifest_path_for(&args.out, false),
    )
}

fn cmd_validate(args: ValidateArgs, start: Instant) -> Result<(), CliError> {
    let spec = load_kernel_spec(&args.kernel)?;
    build_kernel(&spec, &args.kernel)?;
    let gammas = parse_gamma_grid(&args.gamma_grid)?;
    if args.samples < 100 {
        return Err(CliError::usage("-N needs at least 100 realizations"));
    }
    let sequence = spec_to_sequence(&spec)?;
    let stats = mc_gain_statistics(&sequence, &gammas, args.samples, args.seed, 4096);
    let mut csv = String::from(
        "gamma,mc_upcrossings,mc_upcrossings_se,mc_excursion_probability,mc_excursion_se,samples,seed\n",
    );
    for (i, &gamma) in gammas.iter().enumerate() {
        let u = &stats.upcrossings[i];
        let p = &stats.excursion_probability[i];
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(gamma),
            fmt(u.estimate),
            fmt(u.standard_error),
            fmt(p.estimate),
            fmt(p.standard_error),
            args.samples,
            args.seed
        ));
    }
    write_file(&args.out, &csv)?;
    let argv = vec![
        "validate".into(),
        "--kernel".into(),
        path_str(&args.kernel),
        "--gamma-grid".into(),
        args.gamma_grid.clone(),
        "-N".into(),
        args.samples.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--out".into(),
        path_str(&args.out),
    ];
    write_manifest(
        "validate",
        argv,
        args.seed,
        vec![path_str(&args.out)],
        start,
        &manifest_path_for(&args.out, false),
    )
}

fn cmd_demo_resonance(args: DemoResonanceArgs, start: Instant) -> Result<(), CliError> {
    let experiment = run_experiment(args.seed, args.noise_var).map_err(CliError::numeric)?;

    let etfe_path = args.out.join("etfe.csv");
    write_file(&etfe_path, &experiment.dataset.to_csv())?;

    let mut truth = String::from("omega,re_g,im_g\n");
    for &(omega, g) in &experiment.truth_grid {
        truth.push_str(&format!("{},{},{}\n", fmt(omega), fmt(g.re), fmt(g.im)));
    }
    let truth_path = args.out.join("truth.csv");
    write_file(&truth_path, &truth)?;

    let family = KernelFamily::resonance_mixture();
    let fit = fit_hyperparameters(&family, &experiment.dataset, args.restarts, args.seed)
        .map_err(CliError::numeric)?;
    let kernel = fit.spec.build().map_err(CliError::numeric)?;
    let model =
        RegressionModel::new(kernel, experiment.dataset.clone()).map_err(CliError::numeric)?;
    let omegas: Vec<f64> = experiment.truth_grid.iter().map(|&(w, _)| w).collect();
    let posterior = posterior_csv(&model, &omegas, args.eta)?;
    let posterior_path = args.out.join("posterior.csv");
    write_file(&posterior_path, &posterior)?;

    let model_json = serde_json::json!({
        "family": family.name,
        "theta": fit.theta,
        "lml": fit.lml,
        "kernel": fit.spec,
        "noise_variance": experiment.dataset.noise_variance(),
        "estimated_noise": experiment.estimated_noise,
    });
    let model_path = args.out.join("model.json");
    write_file(&model_path, &serde_json::to_string_pretty(&model_json).unwrap())?;

    let mut argv = vec![
        "demo-resonance".into(),
        "--seed".into(),
        args.seed.to_string(),
    ];
    if let Some(nv) = args.noise_var {
        argv.push("--noise-var".into());
        argv.push(nv.to_string());
    }
    argv.extend([
        "--restarts".into(),
        args.restarts.to_string(),
        "--eta".into(),
        args.eta.to_string(),
        "--out".into(),
        path_str(&args.out),
    ]);
    write_manifest(
        "demo-resonance",
        argv,
        args.seed,
        vec![
            path_str(&etfe_path),
            path_str(&truth_path),
            path_str(&posterior_path),
            path_str(&model_path),
        ],
        start,
        &manifest_path_for(&args.out, true),
    )
}

fn cmd_rerun(args: RerunArgs) -> Result<(), CliError> {
    let text = read_to_string(&args.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| {
        CliError::usage(format!("invalid manifest {}: {e}", args.manifest.display()))
    })?;
    let mut argv = manifest.argv.clone();
    if let Some(out) = &args.out {
        let pos = argv
            .iter()
            .position(|a| a == "--out")
            .ok_or_else(|| CliError::usage("manifest argv has no --out to override"))?;
        if pos + 1 >= argv.len() {
            return Err(CliError::usage("manifest argv ends after --out"));
        }
        argv[pos + 1] = path_str(out);
    }
    let mut full = vec!["hinfgp".to_string()];
    full.extend(argv);
    let cli = Cli::try_parse_from(&full)
        .map_err(|e| CliError::usage(format!("manifest argv does not parse: {e}")))?;
    dispatch(cli.command)
}
