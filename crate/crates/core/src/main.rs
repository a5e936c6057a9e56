use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use opanel::estimator::{Estimator, FitConfig, ProfileScope};
use opanel::inference::{baseline_band, infer, select_model};
use opanel::io::{
    emit_fit, emit_selection, emit_simulation, ingest_csv, parse_cutpoints, parse_grid, FitReport, FitRunConfig,
    IngestOptions, RunMetadata, ScenarioFile, SelectionOutput, SimulationOutput,
};
use opanel::model::CutPointMode;
use opanel::poisson::{Convention, CutPoints};
use opanel::simulation::{run_study, target_names, StudyConfig};
use opanel::spline::KnotPlacement;
use opanel::{Error, Result};

#[derive(Parser)]
#[command(name = "opanel", version, about = "Semiparametric regression for ordinal panel count data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a long-format CSV and write estimates, SEs and the baseline band.
    Fit(FitArgs),
    /// Run a replicate simulation study from a scenario file.
    Simulate(SimulateArgs),
    /// Scan a grid of knot counts and spline orders by AIC and BIC.
    Select(SelectArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Long-format CSV: subject_id, visit_time, response, covariates...
    #[arg(long)]
    data: PathBuf,
    /// Number of response levels (default: largest response).
    #[arg(long)]
    levels: Option<u32>,
    /// Recode responses above this level to it.
    #[arg(long)]
    merge_above: Option<u32>,
    /// End of follow-up (default: last visit time).
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct ModelArgs {
    /// Known integer cut points, comma separated.
    #[arg(long, conflicts_with = "estimate_cutpoints")]
    cutpoints: Option<String>,
    /// Estimate cut points with the continuous Poisson pseudo-likelihood.
    #[arg(long)]
    estimate_cutpoints: bool,
    #[arg(long, value_enum, default_value_t = ConventionArg::Shifted)]
    convention: ConventionArg,
    #[arg(long, value_enum, default_value_t = PlacementArg::Quantile)]
    knots: PlacementArg,
    /// Absolute and relative objective tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// `c` in the difference step `c / sqrt(n)`.
    #[arg(long, default_value_t = 3.0)]
    h_constant: f64,
    /// Profile only the spline coefficients in the covariance step.
    #[arg(long)]
    profile_spline_only: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Shifted,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Quantile,
    Equal,
}

impl ModelArgs {
    fn config(&self, interior: usize, order: usize) -> Result<FitConfig> {
        let mode = match (&self.cutpoints, self.estimate_cutpoints) {
            (Some(c), false) => CutPointMode::Known(CutPoints::integer(&parse_cutpoints(c)?)?),
            (None, true) => CutPointMode::Estimated,
            _ => return Err(Error::Config("pass either --cutpoints or --estimate-cutpoints".into())),
        };
        let mut cfg = FitConfig::new(mode).with_spline(interior, order);
        cfg.convention = match self.convention {
            ConventionArg::Shifted => Convention::Shifted,
            ConventionArg::Literal => Convention::Literal,
        };
        cfg.placement = match self.knots {
            PlacementArg::Quantile => KnotPlacement::Quantile,
            PlacementArg::Equal => KnotPlacement::Equal,
        };
        cfg.abs_tol = self.tol;
        cfg.rel_tol = self.tol;
        cfg.max_iter = self.max_iter;
        cfg.h_constant = self.h_constant;
        if self.profile_spline_only {
            cfg.profile_scope = ProfileScope::SplineOnly;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Interior knots.
    #[arg(long, default_value_t = 2)]
    mn: usize,
    /// Spline order.
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Points in the baseline grid.
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
    #[arg(long)]
    out: PathBuf,
    /// Recorded in the outputs; fitting itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat key-value scenario file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate cut points instead of using the generating values.
    #[arg(long)]
    estimate_cutpoints: bool,
    #[arg(long)]
    mn: Option<usize>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    h_constant: f64,
    /// Skip standard errors.
    #[arg(long)]
    no_inference: bool,
    #[arg(long, default_value_t = 101)]
    curve_points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Interior knot counts, `a:b` or `a,b,c`.
    #[arg(long, default_value = "1:5")]
    mn_grid: String,
    /// Spline orders, `a:b` or `a,b,c`.
    #[arg(long, default_value = "1:3")]
    degree_grid: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn ingest(args: &DataArgs) -> Result<opanel::io::Ingested> {
    let opts = IngestOptions { levels: args.levels, merge_above: args.merge_above, tau: args.tau };
    ingest_csv(&args.data, &opts)
}

fn run_fit(args: FitArgs) -> Result<()> {
    let ingested = ingest(&args.data)?;
    let data = &ingested.data;
    let cfg = args.model.config(args.mn, args.degree)?;
    let run = FitRunConfig {
        data: args.data.data.display().to_string(),
        ingest_levels: args.data.levels,
        merge_above: args.data.merge_above,
        tau: args.data.tau,
        grid_points: args.grid_points,
        fit: cfg.clone(),
    };
    let meta = RunMetadata::new("fit", args.seed, &run)?;
    let est = Estimator::new(data, cfg)?;
    let fit = est.fit()?;
    if !fit.converged {
        eprintln!("warning: optimizer stopped without converging ({:?})", fit.termination);
    }
    let (inference, inference_error) = match infer(&est, &fit) {
        Ok(inf) => (Some(inf), None),
        Err(e) => {
            eprintln!("warning: standard errors unavailable: {e}");
            (None, Some(e.to_string()))
        }
    };
    let band = match &inference {
        Some(inf) => baseline_band(&fit, &inf.spline, args.grid_points)?,
        None => baseline_band(&fit, &zero_variance(&fit), args.grid_points)?
            .into_iter()
            .map(|mut b| {
                b.se = f64::NAN;
                b.lower = f64::NAN;
                b.upper = f64::NAN;
                b
            })
            .collect(),
    };
    let report = FitReport {
        metadata: meta,
        covariates: ingested.covariate_names.clone(),
        n_subjects: data.n_subjects(),
        n_obs: data.n_obs(),
        levels: data.levels(),
        tau: data.tau(),
        fit,
        inference,
        inference_error,
    };
    emit_fit(&args.out, &report, &band)?;
    println!("{}", summary_line(&report));
    Ok(())
}

fn zero_variance(fit: &opanel::estimator::FitResult) -> opanel::inference::SplineCoefVariance {
    let l = fit.alpha.len();
    opanel::inference::SplineCoefVariance { alpha_var: vec![0.0; l], alpha_tilde_cov: vec![vec![0.0; l]; l], condition: f64::NAN }
}

fn summary_line(r: &FitReport) -> String {
    let mut s = format!("loglik {:.4}  converged {}  iterations {}\n", r.fit.loglik, r.fit.converged, r.fit.iterations);
    for (j, name) in r.covariates.iter().enumerate() {
        let se = r.inference.as_ref().map_or(f64::NAN, |i| i.coefficients[j].se);
        let p = r.inference.as_ref().map_or(f64::NAN, |i| i.coefficients[j].p_value);
        s.push_str(&format!("{name:>16} {:>10.4} se {:>8.4} p {:.4}\n", r.fit.beta[j], se, p));
    }
    if let Some(c) = &r.fit.cutpoints {
        s.push_str(&format!("cut points {c:?}\n"));
    }
    s.trim_end().to_string()
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let file = ScenarioFile::load(&args.scenario)?;
    let mut scenario = file.scenario()?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let estimate = args.estimate_cutpoints || file.estimate_cutpoints.unwrap_or(false);
    let mode = if estimate { CutPointMode::Estimated } else { CutPointMode::Known(scenario.cut_points()?) };
    let mut fit = FitConfig::new(mode)
        .with_spline(args.mn.or(file.interior_knots).unwrap_or(2), args.degree.or(file.order).unwrap_or(3));
    fit.h_constant = args.h_constant;
    fit.validate()?;
    let cfg = StudyConfig { n: args.n, replicates: args.reps, fit, inference: !args.no_inference, curve_points: args.curve_points };
    #[derive(serde::Serialize)]
    struct Echo<'a> {
        scenario: &'a opanel::simulation::SimScenario,
        study: &'a StudyConfig,
    }
    let meta = RunMetadata::new("simulate", scenario.seed, &Echo { scenario: &scenario, study: &cfg })?;
    let summary = run_study(&scenario, &cfg)?;
    let names = target_names(scenario.beta.len());
    println!(
        "{}: n = {}, {} replicates, {} used, {} not converged, {} failed",
        summary.scenario, summary.n, summary.replicates, summary.used, summary.non_converged, summary.failed
    );
    println!("{:>12} {:>9} {:>9} {:>8} {:>8} {:>6}", "target", "true", "bias", "sd", "se", "cp%");
    for t in &summary.targets {
        println!("{:>12} {:>9.3} {:>9.4} {:>8.4} {:>8.4} {:>6.1}", t.name, t.truth, t.bias, t.sd, t.se, t.cp);
    }
    emit_simulation(&args.out, &SimulationOutput { metadata: meta, scenario, summary }, &names)
}

fn run_select(args: SelectArgs) -> Result<()> {
    let ingested = ingest(&args.data)?;
    let knots = parse_grid(&args.mn_grid)?;
    let orders = parse_grid(&args.degree_grid)?;
    let grid: Vec<(usize, usize)> = knots.iter().flat_map(|&m| orders.iter().map(move |&l| (m, l))).collect();
    let base = args.model.config(knots[0], orders[0])?;
    #[derive(serde::Serialize)]
    struct Echo<'a> {
        data: String,
        grid: &'a [(usize, usize)],
        fit: &'a FitConfig,
    }
    let meta = RunMetadata::new(
        "select",
        args.seed,
        &Echo { data: args.data.data.display().to_string(), grid: &grid, fit: &base },
    )?;
    let report = select_model(&ingested.data, &base, &grid)?;
    for (i, c) in report.cells.iter().enumerate() {
        let mark = match (i == report.best_aic, i == report.best_bic) {
            (true, true) => " <- AIC, BIC",
            (true, false) => " <- AIC",
            (false, true) => " <- BIC",
            _ => "",
        };
        match &c.criteria {
            Some(ic) => println!(
                "m_n {:>2} order {:>2}  aic {:>12.3}  bic {:>12.3}  converged {}{mark}",
                c.interior_knots, c.order, ic.aic, ic.bic, c.converged
            ),
            None => println!("m_n {:>2} order {:>2}  failed: {}", c.interior_knots, c.order, c.error.as_deref().unwrap_or("")),
        }
    }
    emit_selection(&args.out, &SelectionOutput { metadata: meta, report })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Select(a) => run_select(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
