//! `copulaqr`: simulation studies, fitting and prediction for copula-based
//! conditional quantile regression.

mod data;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use copulaqr::cqr::{cv_prediction_error_with, fit_estimator, EstimatorConfig, QuantileEstimator};
use copulaqr::paircop::{BandwidthChoice, PairFamily, DEFAULT_FRACTIONS};
use copulaqr::simlab::{
    dette_demo, format_sig6, gen_dgp, run_experiment_timed, CensoringLevel, DgpSpec, DgpTag, EstimatorSpec,
    ExperimentConfig,
};
use copulaqr::stats::Probability;
use copulaqr::survival::{CensoringKind, ObservedSample};
use copulaqr::vine::{CopulaMode, VineConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use data::{read_points, read_sample, sample_csv};

#[derive(Parser)]
#[command(name = "copulaqr", version, about = "Copula-based conditional quantile regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo study on a simulated design; writes a table and a JSON sidecar.
    Simulate(SimulateArgs),
    /// Fits an estimator on a data file and saves it as JSON.
    Fit(FitArgs),
    /// Predicts conditional quantiles from a saved model or a data file.
    Predict(PredictArgs),
    /// Leave-one-out prediction error (x10) per quantile level and estimator.
    Pe(PeArgs),
    /// Quadratic toy model: Gaussian parametric vs nonparametric copula fit.
    DetteDemo(DetteArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Quantile level in (0,1); repeatable.
    #[arg(long = "tau", value_parser = parse_tau)]
    taus: Vec<f64>,
    /// Copula mode: SP, P or NP; repeatable where several estimators are compared.
    #[arg(long = "mode", value_parser = parse_mode)]
    modes: Vec<CopulaMode>,
    /// Censoring model: km, cox, cox-breslow or none.
    #[arg(long = "censoring-model", value_parser = parse_censoring_model)]
    censoring_model: Option<CensoringKind>,
    /// Comma-separated candidate pair-copula families, e.g. gaussian,clayton,gumbel180.
    #[arg(long, value_delimiter = ',', value_parser = parse_family)]
    families: Option<Vec<PairFamily>>,
    /// Seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// JSON file with default settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Design: A, B, C, D, M2 or DETTE.
    #[arg(long, value_parser = parse_dgp)]
    dgp: Option<DgpTag>,
    #[arg(long)]
    n: Option<usize>,
    /// Censoring proportion: 0, 0.3 or 0.5.
    #[arg(long, value_parser = parse_level)]
    censoring: Option<CensoringLevel>,
    /// Number of replications.
    #[arg(long = "B")]
    replications: Option<usize>,
    /// Add the Cox-model reference estimator (reference only).
    #[arg(long)]
    cox_ref: bool,
    /// Also write the first replication's data set as y,delta,x1..xd.
    #[arg(long)]
    export_data: bool,
    /// Record wall-clock runtimes in the sidecar.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Input CSV with header y,delta,x1..xd.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Model written by `fit`.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    model: Option<PathBuf>,
    /// Input CSV to fit on before predicting.
    #[arg(long)]
    data: Option<PathBuf>,
    /// CSV with columns x1..xd; defaults to the training rows.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Predict whole quantile curves (default levels 0.05, 0.10, ..., 0.95).
    #[arg(long)]
    curve: bool,
}

#[derive(Args)]
struct PeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct DetteArgs {
    #[command(flatten)]
    common: Common,
}

fn parse_tau(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t < 1.0 => Ok(t),
        _ => Err(format!("quantile level must lie strictly between 0 and 1, got {s}")),
    }
}

fn parse_mode(s: &str) -> Result<CopulaMode, String> {
    s.parse().map_err(|e: copulaqr::Error| e.to_string())
}

fn parse_censoring_model(s: &str) -> Result<CensoringKind, String> {
    s.parse().map_err(|e: copulaqr::Error| e.to_string())
}

fn parse_family(s: &str) -> Result<PairFamily, String> {
    s.parse().map_err(|e: copulaqr::Error| e.to_string())
}

fn parse_dgp(s: &str) -> Result<DgpTag, String> {
    s.parse().map_err(|e: copulaqr::Error| e.to_string())
}

fn parse_level(s: &str) -> Result<CensoringLevel, String> {
    let p: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    CensoringLevel::from_fraction(p).map_err(|_| format!("censoring must be 0, 0.3 or 0.5, got {s}"))
}

/// Settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dgp: Option<String>,
    n: Option<usize>,
    censoring: Option<f64>,
    tau: Option<Vec<f64>>,
    mode: Option<Vec<String>>,
    censoring_model: Option<String>,
    #[serde(rename = "B")]
    replications: Option<usize>,
    seed: Option<u64>,
    families: Option<Vec<String>>,
    cox_ref: Option<bool>,
}

/// Effective settings, echoed into sidecars.
#[derive(Debug, Clone, Serialize)]
struct Settings {
    taus: Vec<f64>,
    modes: Vec<CopulaMode>,
    censoring_model: CensoringKind,
    families: Vec<PairFamily>,
    seed: u64,
}

enum Failure {
    Config(String),
    Invalid(String),
    Fit(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Invalid(_) => 3,
            Self::Fit(_) => 4,
            Self::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Invalid(m) | Self::Fit(m) | Self::Io(m) => m,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn fit_err(e: impl std::fmt::Display) -> Failure {
    Failure::Fit(e.to_string())
}

fn load_file_config(path: &Option<PathBuf>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("--config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("--config {}: {e}", path.display())))
}

fn resolve<T, E: std::fmt::Display>(
    flag: Option<T>,
    file: Option<&str>,
    what: &str,
    parse: impl Fn(&str) -> Result<T, E>,
) -> CliResult<Option<T>> {
    match (flag, file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(s)) => parse(s).map(Some).map_err(|e| config_err(format!("config {what}: {e}"))),
        (None, None) => Ok(None),
    }
}

fn settings(common: &Common, file: &FileConfig, default_taus: &[f64]) -> CliResult<Settings> {
    let mut taus = if !common.taus.is_empty() {
        common.taus.clone()
    } else if let Some(t) = &file.tau {
        for s in t {
            parse_tau(&s.to_string()).map_err(|e| config_err(format!("config tau: {e}")))?;
        }
        t.clone()
    } else {
        default_taus.to_vec()
    };
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let modes = if !common.modes.is_empty() {
        common.modes.clone()
    } else if let Some(m) = &file.mode {
        m.iter()
            .map(|s| parse_mode(s).map_err(|e| config_err(format!("config mode: {e}"))))
            .collect::<CliResult<_>>()?
    } else {
        vec![CopulaMode::SemiParametric]
    };
    let censoring_model = resolve(
        common.censoring_model,
        file.censoring_model.as_deref(),
        "censoring_model",
        parse_censoring_model,
    )?
    .unwrap_or(CensoringKind::KaplanMeier);
    let families = match (&common.families, &file.families) {
        (Some(f), _) => f.clone(),
        (None, Some(f)) => f
            .iter()
            .map(|s| parse_family(s).map_err(|e| config_err(format!("config families: {e}"))))
            .collect::<CliResult<_>>()?,
        (None, None) => PairFamily::default_candidates(),
    };
    if families.is_empty() {
        return Err(config_err("--families: empty candidate list"));
    }
    Ok(Settings {
        taus,
        modes,
        censoring_model,
        families,
        seed: common.seed.or(file.seed).unwrap_or(0),
    })
}

fn vine_config(s: &Settings) -> VineConfig {
    let mut vine = VineConfig {
        families: s.families.clone(),
        ..VineConfig::default()
    };
    vine.smoother.bandwidth = BandwidthChoice::NearestNeighbor {
        fractions: DEFAULT_FRACTIONS.to_vec(),
        folds: 5,
        seed: s.seed,
    };
    vine
}

fn estimator_configs(s: &Settings) -> Vec<EstimatorConfig> {
    s.modes
        .iter()
        .map(|&mode| EstimatorConfig {
            mode,
            censoring: s.censoring_model,
            vine: vine_config(s),
        })
        .collect()
}

fn probabilities(taus: &[f64]) -> CliResult<Vec<Probability>> {
    taus.iter()
        .map(|&t| Probability::level(t).map_err(config_err))
        .collect()
}

fn write_artifact(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let file = load_file_config(&args.common.config)?;
    let s = settings(&args.common, &file, &[0.1, 0.3, 0.5, 0.7])?;
    let dgp = resolve(args.dgp, file.dgp.as_deref(), "dgp", parse_dgp)?
        .ok_or_else(|| config_err("--dgp is required"))?;
    let n = args.n.or(file.n).ok_or_else(|| config_err("--n is required"))?;
    let level = match (args.censoring, file.censoring) {
        (Some(l), _) => l,
        (None, Some(p)) => CensoringLevel::from_fraction(p).map_err(|e| config_err(format!("config censoring: {e}")))?,
        (None, None) => CensoringLevel::None,
    };
    let replications = args.replications.or(file.replications).unwrap_or(100);
    if replications == 0 {
        return Err(config_err("--B must be at least 1"));
    }
    let cox_ref = args.cox_ref || file.cox_ref.unwrap_or(false);
    let spec = DgpSpec::new(dgp, n, level).map_err(|e| config_err(format!("--censoring: {e}")))?;
    let mut estimators: Vec<EstimatorSpec> = estimator_configs(&s).into_iter().map(EstimatorSpec::Copula).collect();
    if cox_ref {
        estimators.push(EstimatorSpec::CoxReference);
    }
    let config = ExperimentConfig::new(spec, probabilities(&s.taus)?, estimators, replications, s.seed);
    let (result, timings) = run_experiment_timed(&config).map_err(config_err)?;

    let stem = format!("sim_{dgp}_n{n}_c{}", (level.fraction() * 100.0).round());
    let exclusions: Vec<_> = result
        .exclusions()
        .into_iter()
        .map(|(estimator, replication, error)| json!({"estimator": estimator, "replication": replication, "error": error}))
        .collect();
    let mut sidecar = json!({
        "command": "simulate",
        "seed": s.seed,
        "config": {
            "dgp": dgp.to_string(),
            "n": n,
            "censoring": level.fraction(),
            "B": replications,
            "cox_ref": cox_ref,
            "settings": &s,
        },
        "valid": result.valid,
        "exclusions": exclusions,
        "result": &result,
    });
    if args.timings {
        sidecar["timings"] = serde_json::to_value(&timings).expect("serializable");
    }
    write_artifact(&args.common.out.join(format!("{stem}.csv")), &result.to_csv())?;
    write_artifact(&args.common.out.join(format!("{stem}.json")), &to_json(&sidecar))?;
    if args.export_data {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(1);
        let data = gen_dgp(&spec, &mut rng).map_err(config_err)?;
        write_artifact(&args.common.out.join(format!("{stem}_data.csv")), &sample_csv(&data.sample))?;
    }
    if !result.valid {
        return Err(Failure::Invalid(format!(
            "more than 2% of replications were excluded: {} exclusions",
            result.exclusions().len()
        )));
    }
    Ok(())
}

fn load_sample(path: &Path) -> CliResult<ObservedSample> {
    read_sample(path).map_err(config_err)
}

fn single_config(s: &Settings) -> CliResult<EstimatorConfig> {
    match estimator_configs(s).as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(config_err("--mode: exactly one mode is expected for this command")),
    }
}

fn cmd_fit(args: &FitArgs) -> CliResult<()> {
    let file = load_file_config(&args.common.config)?;
    let s = settings(&args.common, &file, &[])?;
    let config = single_config(&s)?;
    let sample = load_sample(&args.data)?;
    let est = fit_estimator(&sample, &config).map_err(fit_err)?;
    write_artifact(&args.common.out.join("model.json"), &to_json(&est))?;
    let description = json!({
        "seed": s.seed,
        "settings": &s,
        "rows": sample.len(),
        "events": sample.events(),
        "copula": est.vine().describe(),
    });
    write_artifact(&args.common.out.join("model_description.json"), &to_json(&description))
}

/// Default levels of a predicted curve.
fn curve_levels() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

fn cmd_predict(args: &PredictArgs) -> CliResult<()> {
    let file = load_file_config(&args.common.config)?;
    let default_taus = if args.curve { curve_levels() } else { vec![0.5] };
    let s = settings(&args.common, &file, &default_taus)?;
    let est: QuantileEstimator = match (&args.model, &args.data) {
        (Some(model), _) => {
            let text = fs::read_to_string(model).map_err(|e| config_err(format!("--model {}: {e}", model.display())))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("--model {}: {e}", model.display())))?
        }
        (None, Some(data)) => fit_estimator(&load_sample(data)?, &single_config(&s)?).map_err(fit_err)?,
        (None, None) => return Err(config_err("one of --model or --data is required")),
    };
    let d = est.sample().dim();
    let points = match &args.points {
        Some(path) => read_points(path, d).map_err(config_err)?,
        None => est.sample().rows().to_vec(),
    };
    let taus = probabilities(&s.taus)?;
    let mut out = String::from("point");
    for j in 1..=d {
        out.push_str(&format!(",x{j}"));
    }
    out.push_str(",tau,estimate\n");
    for (k, x) in points.iter().enumerate() {
        let values = if args.curve {
            est.predict_curve(x, &taus).map_err(fit_err)?.values
        } else {
            taus.iter().map(|&t| est.predict(x, t)).collect::<Result<_, _>>().map_err(fit_err)?
        };
        for (tau, v) in taus.iter().zip(values) {
            out.push_str(&k.to_string());
            for xj in x {
                out.push_str(&format!(",{xj}"));
            }
            out.push_str(&format!(",{},{v}\n", tau.value()));
        }
    }
    write_artifact(&args.common.out.join("predictions.csv"), &out)
}

fn cmd_pe(args: &PeArgs) -> CliResult<()> {
    let file = load_file_config(&args.common.config)?;
    let s = settings(&args.common, &file, &[0.1, 0.3, 0.5, 0.7])?;
    let sample = load_sample(&args.data)?;
    let configs = estimator_configs(&s);
    let taus = probabilities(&s.taus)?;
    let mut table = vec![vec![0.0; configs.len()]; taus.len()];
    for (c, config) in configs.iter().enumerate() {
        let template = fit_estimator(&sample, config).map_err(fit_err)?;
        for (j, &tau) in taus.iter().enumerate() {
            let pe = cv_prediction_error_with(&sample, tau, |reduced, x| template.refit_on(reduced)?.predict(x, tau))
                .map_err(fit_err)?;
            table[j][c] = 10.0 * pe;
        }
    }
    let mut out = String::from("tau");
    for config in &configs {
        out.push_str(&format!(",{}-{}", config.mode, config.censoring));
    }
    out.push('\n');
    for (j, tau) in taus.iter().enumerate() {
        out.push_str(&format_sig6(tau.value()));
        for v in &table[j] {
            out.push(',');
            out.push_str(&format_sig6(*v));
        }
        out.push('\n');
    }
    write_artifact(&args.common.out.join("pe.csv"), &out)
}

fn cmd_dette_demo(args: &DetteArgs) -> CliResult<()> {
    let file = load_file_config(&args.common.config)?;
    let s = settings(&args.common, &file, &[0.5])?;
    let demo = dette_demo(s.seed, &vine_config(&s)).map_err(fit_err)?;
    write_artifact(&args.common.out.join("dette_demo.csv"), &demo.to_csv())?;
    let summary = json!({
        "seed": s.seed,
        "n": copulaqr::simlab::DETTE_N,
        "tau": 0.5,
        "mse_parametric": demo.mse_parametric(),
        "mse_nonparametric": demo.mse_nonparametric(),
    });
    write_artifact(&args.common.out.join("dette_demo.json"), &to_json(&summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Pe(a) => cmd_pe(a),
        Command::DetteDemo(a) => cmd_dette_demo(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
