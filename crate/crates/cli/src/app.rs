//! The `sgpca` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use sgpca::init::InitConfig;
use sgpca::simgen::{
    evaluate_loadings, gen_data, setting_preset, spiked_spec, Preset, SpikedModelSpec,
};
use sgpca::theory::{
    iteration_thresholds, lemma1_bounds, resolved_thresholds, theorem1_rate, SparsityModel,
};
use sgpca::tuning::{rank_heuristic, ResampleInit, DEFAULT_RANK_MARGIN};
use sgpca::{
    fit_with_diagonal_init, tune_and_fit, Centering, CovOperator, DataMatrix, DeflationMode,
    PCEstimate, SolverConfig, ThresholdSchedule, TuningGrid, TuningOptions,
};

use crate::error::{CliError, CliResult};
use crate::io::{
    component_names, fmt_f64, loading_matrix, read_groups_for, read_matrix, write_groups,
    write_lines, write_matrix, write_results, GroupAssignment, ResultSet,
};
use crate::manifest::RunManifest;
use crate::svg::emit_diagnostic_svg;

#[derive(Debug, Parser)]
#[command(
    name = "sgpca",
    version,
    about = "Sparse group PCA: simulate, fit, tune, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw data from a preset or custom spiked covariance model.
    Simulate(SimulateArgs),
    /// Fit components with explicit thresholds.
    Fit(FitArgs),
    /// Select thresholds by subsampling, then fit.
    Tune(TuneArgs),
    /// Compare estimated loadings with true loadings.
    Eval(EvalArgs),
    /// Threshold levels, cardinality bounds and rate terms of a sparsity model.
    Theory(TheoryArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CenteringArg {
    Center,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DeflationArg {
    Covariance,
    Data,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ResampleInitArg {
    PerResample,
    FullData,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Named setting: 1a, 1b, 1c, 2i, 2ii or 3.
    #[arg(long, conflicts_with_all = ["groups_count", "group_size", "spikes"])]
    preset: Option<String>,
    /// Number of groups (custom model).
    #[arg(long = "G")]
    groups_count: Option<usize>,
    /// Group size (custom model).
    #[arg(long = "T")]
    group_size: Option<usize>,
    /// Spike strengths, strictly decreasing (custom model).
    #[arg(long, value_delimiter = ',')]
    spikes: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Fraction of groups active per spike (custom model).
    #[arg(long, default_value_t = 0.01)]
    active_frac: f64,
    /// Fraction of coordinates active inside an active group (custom model).
    #[arg(long, default_value_t = 0.8)]
    within_frac: f64,
    /// Sample size; defaults to the preset's.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Group-screen constant of the initializer.
    #[arg(long, default_value_t = 3.0)]
    pi: f64,
    /// Coordinate-screen constant of the initializer.
    #[arg(long, default_value_t = 3.0)]
    omega: f64,
    #[arg(long, value_enum, default_value_t = CenteringArg::Center)]
    centering: CenteringArg,
    #[arg(long, value_enum, default_value_t = DeflationArg::Covariance)]
    deflation: DeflationArg,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Data matrix CSV, samples in rows.
    #[arg(long)]
    input: PathBuf,
    /// Group assignment (CSV column_index,group_id or JSON).
    #[arg(long)]
    groups: PathBuf,
    /// The data CSV starts with a header row.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Group thresholds, one per component or one for all.
    #[arg(long, value_delimiter = ',', required = true)]
    eta: Vec<f64>,
    /// Entry thresholds, one per component or one for all.
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<f64>,
    #[arg(long = "J", default_value_t = 1)]
    components: usize,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    etas: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    taus: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Subsamples per component.
    #[arg(long = "B", default_value_t = 20)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "J", default_value_t = 1)]
    components: usize,
    #[arg(long, value_enum, default_value_t = ResampleInitArg::PerResample)]
    resample_init: ResampleInitArg,
    /// Margin of the peaked-curve test used for the rank estimate.
    #[arg(long, default_value_t = DEFAULT_RANK_MARGIN)]
    margin: f64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Estimated loadings CSV (header row, one column per component).
    #[arg(long)]
    estimates: PathBuf,
    /// True loadings CSV in the same layout.
    #[arg(long)]
    truth: PathBuf,
    /// Output CSV.
    #[arg(long, default_value = "eval.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long)]
    r: f64,
    #[arg(long = "mG")]
    m_groups: f64,
    /// Within-group envelope constants m_(g), g = 1, 2, ...; defaults to mG.
    #[arg(long = "mg", value_delimiter = ',')]
    m_within: Option<Vec<f64>>,
    #[arg(long = "lambda2")]
    lambda_sq: f64,
    #[arg(long = "G")]
    num_groups: f64,
    #[arg(long = "T")]
    group_size: f64,
    #[arg(long)]
    n: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Number of oracle groups; defaults to the cardinality bound.
    #[arg(long)]
    card_groups: Option<usize>,
    /// Also write the table to this CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the command line and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    configure_threads();
    let argv: Vec<String> = argv
        .iter()
        .map(|s| s.to_string_lossy().into_owned())
        .collect();
    match run(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// `SGPCA_THREADS` caps the worker pool. Outputs do not depend on it.
fn configure_threads() {
    if let Some(n) = std::env::var("SGPCA_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if the pool already exists, e.g. on a second in-process call.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run(command: Command, argv: &[String]) -> CliResult<()> {
    match command {
        Command::Simulate(a) => simulate(a, argv),
        Command::Fit(a) => fit_cmd(a, argv),
        Command::Tune(a) => tune_cmd(a, argv),
        Command::Eval(a) => eval_cmd(a, argv),
        Command::Theory(a) => theory_cmd(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn simulate(a: SimulateArgs, argv: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("simulate", argv);
    let (spec, default_n): (SpikedModelSpec, Option<usize>) = match &a.preset {
        Some(name) => {
            let preset: Preset = name.parse().map_err(|e| usage(format!("--preset: {e}")))?;
            let (spec, n) =
                setting_preset(preset, a.seed).map_err(|e| CliError::core("--preset", e))?;
            manifest.param("preset", preset.tag());
            (spec, Some(n))
        }
        None => {
            let (Some(g), Some(t), Some(spikes)) =
                (a.groups_count, a.group_size, a.spikes.as_ref())
            else {
                return Err(usage(
                    "simulate needs --preset, or all of --G, --T and --spikes",
                ));
            };
            let spec = spiked_spec(g, t, spikes, a.sigma2, a.active_frac, a.within_frac, a.seed)
                .map_err(|e| CliError::core("custom model", e))?;
            manifest.param("G", g);
            manifest.param("T", t);
            manifest.param("spikes", spikes);
            manifest.param("active_frac", a.active_frac);
            manifest.param("within_frac", a.within_frac);
            (spec, None)
        }
    };
    let n =
        a.n.or(default_n)
            .ok_or_else(|| usage("--n is required for a custom model"))?;
    manifest.param("sigma2", spec.sigma_sq);
    manifest.param("n", n);
    manifest.seed = Some(a.seed);

    let data = gen_data(&spec, n, a.seed).map_err(|e| CliError::core("--n", e))?;
    ensure_dir(&a.out)?;
    write_matrix(&a.out.join("X.csv"), None, &data.values().to_owned())?;
    let labels = (0..spec.partition.num_groups())
        .map(|g| format!("g{g}"))
        .collect();
    write_groups(
        &a.out.join("groups.csv"),
        &GroupAssignment {
            partition: spec.partition.clone(),
            labels,
        },
    )?;
    let truths: Vec<Array1<f64>> = spec.spikes.iter().map(|s| s.loading.clone()).collect();
    write_matrix(
        &a.out.join("truth_loadings.csv"),
        Some(&component_names(truths.len())),
        &loading_matrix(&truths),
    )?;
    manifest.note("spike_eigenvalues", spec.spike_eigenvalues());
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    manifest.write(&a.out.join("manifest.json"))
}

fn solver_options(
    s: &SolverArgs,
    components: usize,
) -> CliResult<(SolverConfig, InitConfig, Centering, DeflationMode)> {
    let solver = SolverConfig {
        tol: s.tol,
        max_iter: s.max_iter,
        components,
    };
    solver
        .validate()
        .map_err(|e| usage(format!("solver settings: {e}")))?;
    let init = InitConfig::new(s.pi, s.omega).map_err(|e| usage(format!("--pi/--omega: {e}")))?;
    let centering = match s.centering {
        CenteringArg::Center => Centering::Center,
        CenteringArg::None => Centering::None,
    };
    let deflation = match s.deflation {
        DeflationArg::Covariance => DeflationMode::Covariance,
        DeflationArg::Data => DeflationMode::Data,
    };
    Ok((solver, init, centering, deflation))
}

fn record_solver(manifest: &mut RunManifest, s: &SolverArgs) {
    manifest.param("tol", s.tol);
    manifest.param("max_iter", s.max_iter);
    manifest.param("pi", s.pi);
    manifest.param("omega", s.omega);
    manifest.param("centering", format!("{:?}", s.centering).to_lowercase());
    manifest.param("deflation", format!("{:?}", s.deflation).to_lowercase());
}

fn load_inputs(
    a: &InputArgs,
    manifest: &mut RunManifest,
) -> CliResult<(DataMatrix, GroupAssignment)> {
    let table = read_matrix(&a.input, a.header)?;
    let p = table.ncols();
    let data = table.into_data(&a.input)?;
    let groups = read_groups_for(&a.groups, p)?;
    manifest.input(&a.input)?;
    manifest.input(&a.groups)?;
    manifest.param("input", a.input.display().to_string());
    manifest.param("groups", a.groups.display().to_string());
    manifest.param("header", a.header);
    Ok((data, groups))
}

/// Projections of the (centered, if requested) data onto each loading.
fn scores(data: &DataMatrix, estimates: &[PCEstimate], centering: Centering) -> Array2<f64> {
    let mut x = data.values().to_owned();
    if centering == Centering::Center {
        x -= &data.column_means();
    }
    let mut out = Array2::zeros((data.n(), estimates.len()));
    for (j, est) in estimates.iter().enumerate() {
        out.column_mut(j).assign(&x.dot(&est.loading));
    }
    out
}

fn per_component(values: &[f64], j: usize, flag: &str) -> CliResult<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; j]),
        k if k == j => Ok(values.to_vec()),
        k => Err(usage(format!("{flag}: got {k} values for {j} components"))),
    }
}

fn fit_cmd(a: FitArgs, argv: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("fit", argv);
    let (solver, init, centering, deflation) = solver_options(&a.solver, a.components)?;
    let etas = per_component(&a.eta, a.components, "--eta")?;
    let taus = per_component(&a.tau, a.components, "--tau")?;
    let schedule = ThresholdSchedule::new(etas.iter().copied().zip(taus.iter().copied()).collect())
        .map_err(|e| usage(format!("--eta/--tau: {e}")))?;
    let (data, groups) = load_inputs(&a.input, &mut manifest)?;
    manifest.param("J", a.components);
    manifest.param("eta", &etas);
    manifest.param("tau", &taus);
    record_solver(&mut manifest, &a.solver);

    let op = CovOperator::from_data(&data, centering).with_deflation_mode(deflation);
    let estimates = fit_with_diagonal_init(&op, &groups.partition, &schedule, &init, &solver)
        .map_err(|e| CliError::core(a.input.input.display().to_string(), e))?;
    let set = ResultSet {
        estimates: &estimates,
        reports: &[],
        groups: &groups,
        scores: scores(&data, &estimates, centering),
    };
    manifest.note(
        "converged",
        estimates.iter().map(|e| e.converged).collect::<Vec<_>>(),
    );
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    write_results(&set, &manifest, &a.out)?;
    Ok(())
}

fn tune_cmd(a: TuneArgs, argv: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("tune", argv);
    let (solver, init, centering, deflation) = solver_options(&a.solver, a.components)?;
    if a.components == 0 {
        return Err(usage("--J must be at least 1"));
    }
    let grid = TuningGrid::new(a.etas.clone(), a.taus.clone(), a.rho, a.resamples, a.seed)
        .map_err(|e| usage(format!("grid: {e}")))?;
    if !(a.margin >= 0.0) {
        return Err(usage("--margin must be nonnegative"));
    }
    let (data, groups) = load_inputs(&a.input, &mut manifest)?;
    manifest.param("J", a.components);
    manifest.param("etas", &a.etas);
    manifest.param("taus", &a.taus);
    manifest.param("rho", a.rho);
    manifest.param("B", a.resamples);
    manifest.param("margin", a.margin);
    manifest.param(
        "resample_init",
        match a.resample_init {
            ResampleInitArg::PerResample => "per-resample",
            ResampleInitArg::FullData => "full-data",
        },
    );
    manifest.seed = Some(a.seed);
    record_solver(&mut manifest, &a.solver);

    let opts = TuningOptions {
        solver,
        init,
        centering,
        deflation,
        resample_init: match a.resample_init {
            ResampleInitArg::PerResample => ResampleInit::PerResample,
            ResampleInitArg::FullData => ResampleInit::FullData,
        },
    };
    let (estimates, reports) =
        tune_and_fit(&data, &groups.partition, a.components, &grid, &opts)
            .map_err(|e| CliError::core(a.input.input.display().to_string(), e))?;

    ensure_dir(&a.out)?;
    for report in &reports {
        let path = a
            .out
            .join(format!("alignment_pc{}.svg", report.component + 1));
        emit_diagnostic_svg(report, &path)?;
    }
    manifest.note("rank_estimate", rank_heuristic(&reports, a.margin));
    manifest.note(
        "selected",
        reports
            .iter()
            .map(|r| {
                let row = r.selected_row();
                serde_json::json!({
                    "eta": row.eta,
                    "tau": row.tau,
                    "applied_eta": r.applied_eta,
                    "applied_tau": r.applied_tau,
                    "rescale": r.rescale,
                })
            })
            .collect::<Vec<_>>(),
    );
    let set = ResultSet {
        estimates: &estimates,
        reports: &reports,
        groups: &groups,
        scores: scores(&data, &estimates, centering),
    };
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    write_results(&set, &manifest, &a.out)?;
    Ok(())
}

fn eval_cmd(a: EvalArgs, argv: &[String]) -> CliResult<()> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("eval", argv);
    let est = read_matrix(&a.estimates, true)?;
    let truth = read_matrix(&a.truth, true)?;
    if est.nrows() != truth.nrows() {
        return Err(CliError::Data {
            path: a.estimates.clone(),
            message: format!("{} rows but the truth has {}", est.nrows(), truth.nrows()),
        });
    }
    manifest.input(&a.estimates)?;
    manifest.input(&a.truth)?;
    let res = evaluate_loadings(&est.columns(), &truth.columns())
        .map_err(|e| CliError::core(a.estimates.display().to_string(), e))?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_lines(&a.out, |w| {
        writeln!(w, "component,alignment,type1,type2,distance")?;
        for j in 0..res.alignment.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                j + 1,
                fmt_f64(res.alignment[j]),
                fmt_f64(res.type1_per_component[j]),
                fmt_f64(res.type2_per_component[j]),
                fmt_f64(res.distance[j])
            )?;
        }
        let k = res.alignment.len().max(1) as f64;
        writeln!(
            w,
            "all,{},{},{},{}",
            fmt_f64(res.alignment.iter().sum::<f64>() / k),
            fmt_f64(res.type1),
            fmt_f64(res.type2),
            fmt_f64(res.distance.iter().sum::<f64>() / k)
        )
    })?;
    manifest.wall_time_secs = start.elapsed().as_secs_f64();
    let mpath = a.out.with_extension("manifest.json");
    manifest.write(&mpath)
}

fn theory_cmd(a: TheoryArgs) -> CliResult<()> {
    let mut model = SparsityModel::new(
        a.r,
        a.m_groups,
        a.lambda_sq,
        a.num_groups,
        a.group_size,
        a.n,
    )
    .map_err(|e| usage(format!("model: {e}")))?;
    model.alpha = a.alpha;
    model.beta = a.beta;
    model.eta = a.eta;
    model.tau = a.tau;
    model.card_groups = a.card_groups;
    if let Some(m) = &a.m_within {
        model.m_within = m.clone();
    }
    model.validate().map_err(|e| usage(format!("model: {e}")))?;
    let table = theory_table(&model).map_err(|e| CliError::core("theory", e))?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{:<16} value", "quantity");
    for (k, v) in &table {
        let _ = writeln!(stdout, "{k:<16} {v:.10}");
    }
    if let Some(path) = &a.out {
        write_lines(path, |w| {
            writeln!(w, "quantity,value")?;
            for (k, v) in &table {
                writeln!(w, "{k},{}", fmt_f64(*v))?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Rows of the `theory` table in display order.
pub fn theory_table(model: &SparsityModel) -> sgpca::Result<Vec<(&'static str, f64)>> {
    let (alpha_n, beta_n, card) = resolved_thresholds(model)?;
    let (eta_n, tau_n) = iteration_thresholds(model, alpha_n, beta_n);
    let (bound_g, bound_s) = lemma1_bounds(model, alpha_n, beta_n, card)?;
    let rate = theorem1_rate(model)?;
    Ok(vec![
        ("alpha_n", alpha_n),
        ("beta_n", beta_n),
        ("eta_n", eta_n),
        ("tau_n", tau_n),
        ("card_groups", card as f64),
        ("bound_groups", bound_g),
        ("bound_support", bound_s),
        ("rate_group", rate.group),
        ("rate_entry", rate.entry),
        ("rate_parametric", rate.parametric),
        ("rate_total", rate.total()),
    ])
}
