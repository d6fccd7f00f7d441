use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xai_harmony::attribution::{shapley_marginal_with, shapley_retrain_with, summarize_background, MarginalOptions, RetrainOptions};
use xai_harmony::data::split;
use xai_harmony::models::train_full;
use xai_harmony::perturbation::{sweep_with, SweepOptions};
use xai_harmony::runner::{
    emit_reports, fetch_census, resolve_dataset, run_matrix, run_sample_size, ExperimentConfig, FetchManifest,
    FetchOptions, ResultTable,
};
use xai_harmony::{seed, Backend, Error, Result};

/// Compare Shapley attributions with perturbation sensitivity.
#[derive(Parser)]
#[command(name = "xai-harmony", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the dataset × model × metric matrix and write reports.
    Run(Overrides),
    /// Repeat the pipeline on subsamples of increasing size.
    SweepSize {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
    },
    /// Export the perturbation sweep of one model as CSV.
    Perturb {
        #[command(flatten)]
        overrides: Overrides,
        /// Output CSV (stdout when omitted).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Export the attribution matrix of one model as CSV.
    Attr {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Dataset management.
    Datasets {
        #[command(subcommand)]
        command: DatasetsCommand,
    },
}

#[derive(Subcommand)]
enum DatasetsCommand {
    /// Download the census files, verify checksums and prepare a CSV.
    Fetch {
        #[arg(long, default_value = "data/downloads")]
        dir: PathBuf,
        /// Checksum manifest (the bundled one when omitted).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Accept files without a pinned checksum.
        #[arg(long)]
        allow_unpinned: bool,
        /// Read the raw files from this directory instead of downloading.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

/// Flags override the matching keys of the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replicate count.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// retrain, marginal or auto.
    #[arg(long)]
    backend: Option<String>,
    /// start:stop:step or a comma list.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_delimiter = ',')]
    metric: Vec<String>,
    /// weighted, macro, micro or binary.
    #[arg(long)]
    average: Option<String>,
    #[arg(long, value_delimiter = ',')]
    dataset: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    model: Vec<String>,
    #[arg(long)]
    sample_budget: Option<usize>,
    #[arg(long)]
    census_csv: Option<PathBuf>,
}

impl Overrides {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut table = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<toml::Table>(&text).map_err(|e| Error::Config(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        let mut set = |key: &str, v: toml::Value| {
            table.insert(key.into(), v);
        };
        let int = |v: u64| {
            i64::try_from(v)
                .map(toml::Value::Integer)
                .map_err(|_| Error::Config(format!("{v} is too large")))
        };
        let strings = |v: &[String]| toml::Value::Array(v.iter().cloned().map(toml::Value::String).collect());
        let path = |p: &PathBuf| toml::Value::String(p.display().to_string());
        if let Some(v) = self.seed {
            set("seed", int(v)?);
        }
        if let Some(v) = self.seeds {
            set("seeds", int(v as u64)?);
        }
        if let Some(v) = &self.out {
            set("out", path(v));
        }
        if let Some(v) = self.jobs {
            set("jobs", int(v as u64)?);
        }
        if let Some(v) = &self.backend {
            set("backend", toml::Value::String(v.clone()));
        }
        if let Some(v) = &self.grid {
            set("grid", toml::Value::String(v.clone()));
        }
        if !self.metric.is_empty() {
            set("metrics", strings(&self.metric));
        }
        if let Some(v) = &self.average {
            set("average", toml::Value::String(v.clone()));
        }
        if !self.dataset.is_empty() {
            set("datasets", strings(&self.dataset));
        }
        if !self.model.is_empty() {
            set("models", strings(&self.model));
        }
        if let Some(v) = self.sample_budget {
            set("sample_budget", int(v as u64)?);
        }
        if let Some(v) = &self.census_csv {
            set("census_csv", path(v));
        }
        ExperimentConfig::from_table(table)
    }
}

fn finish_run(table: ResultTable, out: &PathBuf) -> Result<ExitCode> {
    let rendered = emit_reports(&table, out)?;
    eprintln!(
        "{} cells, {} skipped; reports in {} (manifest {})",
        table.cells.len(),
        table.skips.len(),
        out.display(),
        &rendered.manifest_sha256[..12]
    );
    for s in &table.skips {
        eprintln!("skipped seed {} {} {} {}: {}", s.seed, s.dataset, s.model, s.metric, s.reason);
    }
    Ok(if table.has_skips() { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

/// Split, seeds and model of the first dataset and model in `cfg`.
fn single(cfg: &ExperimentConfig) -> Result<(xai_harmony::DataSplit, xai_harmony::ModelKind, u64)> {
    if cfg.datasets.len() != 1 || cfg.models.len() != 1 {
        return Err(Error::Config("select exactly one dataset and one model".into()));
    }
    let (ds, _) = resolve_dataset(&cfg.datasets[0], cfg, 0)?;
    let data_seed = seed::derive(cfg.seed, &[seed::tag(ds.name())]);
    let s = split(&ds, cfg.test_fraction, data_seed)?;
    let kind = cfg.model_kinds()?.remove(0);
    let model_seed = seed::derive(data_seed, &[seed::tag(kind.name())]);
    Ok((s, kind, model_seed))
}

fn write_output(file: &Option<PathBuf>, text: &str) -> Result<()> {
    match file {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(o) => {
            let cfg = o.config()?;
            let table = run_matrix(&cfg)?;
            finish_run(table, &cfg.out)
        }
        Command::SweepSize { overrides, sizes } => {
            let cfg = overrides.config()?;
            let sizes = if sizes.is_empty() { cfg.sample_sizes.clone() } else { sizes };
            let table = run_sample_size(&cfg, &sizes)?;
            finish_run(table, &cfg.out)
        }
        Command::Perturb { overrides, file } => {
            let cfg = overrides.config()?;
            let metrics = cfg.metric_kinds()?;
            if metrics.len() != 1 {
                return Err(Error::Config("select exactly one metric".into()));
            }
            let (s, kind, model_seed) = single(&cfg)?;
            let model = train_full(&kind, &s.train, model_seed)?;
            let opts = SweepOptions {
                metric: metrics[0],
                seed: model_seed,
                categorical_mode: cfg.categorical_mode,
                model_name: kind.name().to_string(),
                deadline: None,
            };
            let result = sweep_with(&model, &s.test, &cfg.perturbation_grid()?, &opts)?;
            write_output(&file, &result.to_csv_string()?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Attr { overrides, file } => {
            let cfg = overrides.config()?;
            let (s, kind, model_seed) = single(&cfg)?;
            let attr = match cfg.backend.resolve(s.train.n_columns(), cfg.exact_cap) {
                Backend::RetrainExact => {
                    let opts = RetrainOptions {
                        seed: model_seed,
                        policy: cfg.class_policy,
                        max_features: cfg.exact_cap.max(s.train.n_columns()),
                        deadline: None,
                    };
                    shapley_retrain_with(&kind, &s, &opts)?
                }
                Backend::MarginalSampling => {
                    let model = train_full(&kind, &s.train, model_seed)?;
                    let bg_seed = seed::derive(model_seed, &[seed::tag("background")]);
                    let background = summarize_background(&s.train, cfg.background_k, bg_seed)?;
                    let opts = MarginalOptions {
                        sample_budget: cfg.sample_budget,
                        seed: model_seed,
                        policy: cfg.class_policy,
                        model_name: kind.name().to_string(),
                        deadline: None,
                    };
                    shapley_marginal_with(&model, &s.with_test_limit(cfg.max_explain_rows).test, &background, &opts)?
                }
            };
            write_output(&file, &attr.to_csv_string()?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Datasets {
            command:
                DatasetsCommand::Fetch {
                    dir,
                    manifest,
                    allow_unpinned,
                    from,
                },
        } => {
            let manifest = match manifest {
                Some(p) => FetchManifest::load(p)?,
                None => FetchManifest::bundled(),
            };
            let opts = FetchOptions {
                dir: dir.clone(),
                manifest,
                allow_unpinned,
                source_dir: from,
            };
            let (prepared, digests) = fetch_census(&opts)?;
            for (name, digest) in digests {
                println!("{name} sha256 {digest}");
            }
            println!(
                "census: {} rows kept, {} dropped for missing fields; wrote {}",
                prepared.rows,
                prepared.dropped,
                dir.join("census.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
