//! `shellcast`: generate, ingest, train, evaluate and report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shellcast_core::dataset::read_features;
use shellcast_core::experiment::{
    cross_validate, default_grid, folds_seed, grid_search, grid_seed, parse_grid, run_experiment,
    stratified_kfold, CvResult, ExperimentConfig, ExperimentReport, GridResult, ModelResult,
    DEFAULT_FOLDS,
};
use shellcast_core::ingest::{self, EstuaryConfig, RawPaths};
use shellcast_core::model::ModelParams;
use shellcast_core::synth::{self, SyntheticEstuarySpec};
use shellcast_core::{par, seed, Classifier, EstuaryDataset, FittedModel, ModelKind, ModelSpec};

#[derive(Parser, Debug)]
#[command(name = "shellcast", version, about = "Next-Monday closure forecasting for shellfish production areas")]
struct Cli {
    /// Master seed for every random stage (synth defaults to the spec's own seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel stages; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate raw CSVs for a synthetic estuary with a planted closure rule.
    Synth {
        /// Synthetic estuary spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "synth_out")]
        out: PathBuf,
    },
    /// Aggregate raw CSVs into a weekly per-estuary dataset.
    Ingest(IngestArgs),
    /// Cross-validate one model configuration.
    Cv {
        #[command(flatten)]
        data: DataArgs,
        /// Hyperparameters as JSON text or a path to a JSON file.
        #[arg(long, default_value = "{}")]
        params: String,
        #[arg(long, default_value = "cv.json")]
        out: PathBuf,
    },
    /// Cross-validate every cell of a hyperparameter grid.
    Gridsearch {
        #[command(flatten)]
        data: DataArgs,
        /// Grid as JSON text or a path: an array of parameter objects, or an
        /// object of value lists. Defaults to the model's standard grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value = "grid.json")]
        out: PathBuf,
    },
    /// Fit a model on a whole dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "bagnet")]
        model: ModelKind,
        #[arg(long, default_value = "{}")]
        params: String,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Score a feature table with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Feature CSV; key columns and a `label` column are ignored.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Build the comparison report from saved results or an experiment config.
    Report {
        /// Directory of `cv` / `gridsearch` JSON outputs.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        results: Option<PathBuf>,
        /// Experiment config: datasets and model roster, run end to end.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Estuary config (stations, zones).
    #[arg(long)]
    config: PathBuf,
    /// Directory holding the four raw CSVs; defaults to the config's directory.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    status: Option<PathBuf>,
    #[arg(long)]
    upwelling: Option<PathBuf>,
    #[arg(long, default_value = "dataset")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "bagnet")]
    model: ModelKind,
    /// Number of folds.
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    k: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(shellcast_core::Error),
}

impl From<shellcast_core::Error> for Failure {
    fn from(e: shellcast_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) if e.is_data_error() => 2,
            Failure::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type Outcome = Result<(), Failure>;

fn json_arg(text: &str) -> Result<serde_json::Value, Failure> {
    let trimmed = text.trim_start();
    let body = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        text.to_string()
    } else {
        let p = Path::new(text);
        std::fs::read_to_string(p).map_err(|e| shellcast_core::Error::io(p, e))?
    };
    serde_json::from_str(&body).map_err(|e| Failure::Core(shellcast_core::Error::Config(format!("bad JSON argument: {e}"))))
}

fn params_arg(text: &str) -> Result<ModelParams, Failure> {
    let v = json_arg(text)?;
    Ok(ModelParams::from_json(&v.to_string())?)
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| shellcast_core::Error::io(dir, e))?;
    }
    let mut s = serde_json::to_string_pretty(v).map_err(shellcast_core::Error::from)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| shellcast_core::Error::io(path, e))?;
    Ok(())
}

fn synth_cmd(spec: &Path, out: &Path, master: u64) -> Outcome {
    let mut spec = SyntheticEstuarySpec::load(spec)?;
    spec.seed = master;
    let gen = synth::generate(&spec)?;
    gen.write(out)?;
    let th = gen.rule.thresholds;
    println!(
        "{}: {} weeks, {} zones, closure fraction {:.4} (target {}), tau_hi {:.3}, tau_lo {:.3}",
        spec.estuary.name,
        spec.weeks,
        spec.estuary.zones.len(),
        gen.rule.closure_fraction,
        spec.closure_target,
        th.tau_hi,
        th.tau_lo
    );
    Ok(())
}

fn ingest_cmd(a: &IngestArgs) -> Outcome {
    let cfg = EstuaryConfig::load(&a.config)?;
    let base = a
        .raw
        .clone()
        .unwrap_or_else(|| a.config.parent().map(Path::to_path_buf).unwrap_or_default());
    let mut paths = RawPaths::in_dir(&base);
    if let Some(p) = &a.profiles {
        paths.profiles = p.clone();
    }
    if let Some(p) = &a.surface {
        paths.surface = p.clone();
    }
    if let Some(p) = &a.status {
        paths.status = p.clone();
    }
    if let Some(p) = &a.upwelling {
        paths.upwelling = p.clone();
    }
    let out = ingest::ingest(&cfg, &paths)?;
    let path = ingest::write_output(&out, &a.out)?;
    println!(
        "{}: {} samples ({} closures) from {} candidates, {} dropped -> {}",
        cfg.name,
        out.dataset.len(),
        out.dataset.positives(),
        out.n_candidates,
        out.drops.len(),
        path.display()
    );
    Ok(())
}

/// Seeds match cell 0 of an experiment run on a single estuary.
fn cv_seeds(master: u64, kind: ModelKind) -> (u64, u64) {
    (folds_seed(master, 0), grid_seed(master, 0, kind))
}

fn cv_cmd(d: &DataArgs, params: &str, out: &Path, master: u64) -> Outcome {
    let data = EstuaryDataset::read_csv(&d.dataset)?;
    let spec = ModelSpec::new(d.model, params_arg(params)?)?;
    let (fs, gs) = cv_seeds(master, d.model);
    let folds = stratified_kfold(&data.labels, d.k, fs)?;
    let cv = cross_validate(&data, &spec, &folds, seed::derive(gs, &[0]))?;
    write_json(out, &cv)?;
    let one = ExperimentReport::from_results(master, vec![ModelResult::from_cv(cv)])?;
    print!("{}", one.render());
    Ok(())
}

fn gridsearch_cmd(d: &DataArgs, grid: Option<&str>, out: &Path, master: u64) -> Outcome {
    let data = EstuaryDataset::read_csv(&d.dataset)?;
    let cells = match grid {
        Some(g) => parse_grid(&json_arg(g)?)?,
        None => default_grid(d.model),
    };
    let (fs, gs) = cv_seeds(master, d.model);
    let folds = stratified_kfold(&data.labels, d.k, fs)?;
    let g = grid_search(&data, d.model, &cells, &folds, gs)?;
    write_json(out, &g)?;
    println!("best cell {} of {}: {}", g.best, g.cells.len(), g.best_cv().params.to_json());
    let one = ExperimentReport::from_results(master, vec![ModelResult::from_grid(g)])?;
    print!("{}", one.render());
    Ok(())
}

fn train_cmd(dataset: &Path, kind: ModelKind, params: &str, out: &Path, master: u64) -> Outcome {
    let data = EstuaryDataset::read_csv(dataset)?;
    let spec = ModelSpec::new(kind, params_arg(params)?)?;
    let model = spec.fit(&data.features, &data.labels, master)?;
    model.save(out)?;
    println!("{kind} trained on {} samples -> {}", data.len(), out.display());
    Ok(())
}

fn predict_cmd(model: &Path, input: &Path, out: &Path) -> Outcome {
    let model = FittedModel::load(model)?;
    let (_, x) = read_features(input)?;
    let preds = model.predict_scored(&x)?;
    let mut s = String::from("row_id,probability,prediction\n");
    for (i, p) in preds.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", p.probability, p.label);
    }
    std::fs::write(out, s).map_err(|e| shellcast_core::Error::io(out, e))?;
    println!("{} predictions -> {}", preds.len(), out.display());
    Ok(())
}

fn load_results(dir: &Path) -> Result<Vec<ModelResult>, Failure> {
    let rd = std::fs::read_dir(dir).map_err(|e| shellcast_core::Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = rd
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let s = std::fs::read_to_string(&f).map_err(|e| shellcast_core::Error::io(&f, e))?;
        if let Ok(g) = serde_json::from_str::<GridResult>(&s) {
            out.push(ModelResult::from_grid(g));
        } else if let Ok(cv) = serde_json::from_str::<CvResult>(&s) {
            out.push(ModelResult::from_cv(cv));
        }
    }
    Ok(out)
}

fn report_cmd(results: Option<&Path>, config: Option<&Path>, out: &Path, master: u64) -> Outcome {
    let report = match (results, config) {
        (Some(dir), _) => ExperimentReport::from_results(master, load_results(dir)?)?,
        (None, Some(cfg)) => {
            let cfg = ExperimentConfig::load(cfg)?;
            run_experiment(&cfg.load_datasets()?, &cfg.roster()?, master, cfg.folds)?
        }
        (None, None) => return Err(Failure::Usage("report needs --results or --config".into())),
    };
    report.write(out)?;
    print!("{}", report.render());
    Ok(())
}

/// `--seed` if given, else the seed stored in the input spec or config,
/// else 0.
fn resolve_seed(cli: &Cli) -> Result<u64, Failure> {
    Ok(match (&cli.command, cli.seed) {
        (_, Some(s)) => s,
        (Command::Synth { spec, .. }, None) => SyntheticEstuarySpec::load(spec)?.seed,
        (Command::Report { config: Some(c), .. }, None) => ExperimentConfig::load(c)?.seed,
        _ => 0,
    })
}

fn run(cli: Cli) -> Outcome {
    let master = resolve_seed(&cli)?;
    println!("seed: {master}");
    match &cli.command {
        Command::Synth { spec, out } => synth_cmd(spec, out, master),
        Command::Ingest(a) => ingest_cmd(a),
        Command::Cv { data, params, out } => cv_cmd(data, params, out, master),
        Command::Gridsearch { data, grid, out } => gridsearch_cmd(data, grid.as_deref(), out, master),
        Command::Train { dataset, model, params, out } => train_cmd(dataset, *model, params, out, master),
        Command::Predict { model, input, out } => predict_cmd(model, input, out),
        Command::Report { results, config, out } => report_cmd(results.as_deref(), config.as_deref(), out, master),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("ERROR 1: {first}");
            eprintln!("{}", e.render().to_string().lines().skip(1).collect::<Vec<_>>().join("\n"));
            return ExitCode::from(1);
        }
    };
    let jobs = (cli.jobs > 0).then_some(cli.jobs);
    match par::with_jobs(jobs, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ERROR {}: {f}", f.code());
            ExitCode::from(f.code())
        }
    }
}
