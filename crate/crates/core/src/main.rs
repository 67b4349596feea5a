use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cocreate::config::{Mode, PipelineConfig, ENDPOINT_ENV};
use cocreate::format::sig6;
use cocreate::ingest::{load_fixture, write_fixture, DEFAULT_CATEGORIES};
use cocreate::metrics::{read_metrics_csv, write_metrics_csv};
use cocreate::pipeline::{live_source, metrics_from_networks, run_pipeline, write_regressions, FixtureSource, RevisionSource};

#[derive(Parser)]
#[command(name = "cocreate", version, about = "Co-creation network analysis of wiki revision histories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a config file.
    Run(ConfigArgs),
    /// Measure saved network snapshots and write metrics.csv.
    Metrics {
        /// Directory holding `*.tsv` edge lists (searched recursively).
        #[arg(long)]
        networks: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long = "min_nodes", alias = "min-nodes", default_value_t = 4)]
        min_nodes: usize,
        /// Comma-separated category labels.
        #[arg(long)]
        categories: Option<String>,
    },
    /// Fit the size and age regression tables from a metrics.csv.
    Regress {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long = "output_dir", alias = "output-dir")]
        output_dir: PathBuf,
        #[arg(long)]
        categories: Option<String>,
    },
    /// Fixture corpus utilities.
    #[command(subcommand)]
    Fixtures(FixturesCommand),
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once per process
enum FixturesCommand {
    /// Check that every `*.jsonl` file in a directory parses.
    Validate { dir: PathBuf },
    /// Download the configured articles into `fixture_dir`.
    Fetch(ConfigArgs),
}

/// Config file plus overrides; flags carry the config key names.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// `category: title`; may repeat.
    #[arg(long)]
    article: Vec<String>,
    #[arg(long)]
    categories: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "fixture_dir", alias = "fixture-dir")]
    fixture_dir: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long = "threshold_hours", alias = "threshold-hours")]
    threshold_hours: Option<String>,
    #[arg(long = "window_days", alias = "window-days")]
    window_days: Option<String>,
    #[arg(long = "prune_fraction", alias = "prune-fraction")]
    prune_fraction: Option<String>,
    #[arg(long = "active_fraction", alias = "active-fraction")]
    active_fraction: Option<String>,
    #[arg(long = "min_nodes", alias = "min-nodes")]
    min_nodes: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long = "range_start", alias = "range-start")]
    range_start: Option<String>,
    #[arg(long = "output_dir", alias = "output-dir")]
    output_dir: Option<String>,
    #[arg(long = "stopword_path", alias = "stopword-path")]
    stopword_path: Option<String>,
    #[arg(long = "content_mode", alias = "content-mode")]
    content_mode: Option<String>,
    #[arg(long = "exclude_editors", alias = "exclude-editors")]
    exclude_editors: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long = "request_delay_ms", alias = "request-delay-ms")]
    request_delay_ms: Option<String>,
    #[arg(long = "page_limit", alias = "page-limit")]
    page_limit: Option<String>,
    #[arg(long = "robustness_threshold_hours", alias = "robustness-threshold-hours")]
    robustness_threshold_hours: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::from_file(&self.config)?;
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            config.set("endpoint", &endpoint)?;
        }
        let overrides = [
            ("categories", &self.categories),
            ("mode", &self.mode),
            ("fixture_dir", &self.fixture_dir),
            ("endpoint", &self.endpoint),
            ("threshold_hours", &self.threshold_hours),
            ("window_days", &self.window_days),
            ("prune_fraction", &self.prune_fraction),
            ("active_fraction", &self.active_fraction),
            ("min_nodes", &self.min_nodes),
            ("horizon", &self.horizon),
            ("range_start", &self.range_start),
            ("output_dir", &self.output_dir),
            ("stopword_path", &self.stopword_path),
            ("content_mode", &self.content_mode),
            ("exclude_editors", &self.exclude_editors),
            ("workers", &self.workers),
            ("request_delay_ms", &self.request_delay_ms),
            ("page_limit", &self.page_limit),
            ("robustness_threshold_hours", &self.robustness_threshold_hours),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        for a in &self.article {
            config.set("article", a)?;
        }
        Ok(config.validate()?)
    }
}

fn category_list(arg: &Option<String>) -> Vec<String> {
    match arg {
        Some(list) => list.split(',').map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()).collect(),
        None => DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
    }
}

fn run(args: &ConfigArgs) -> Result<ExitCode> {
    let config = args.load()?;
    let out = config.output_dir().to_path_buf();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let report = run_pipeline(&config)?;
    println!(
        "articles: {}/{} succeeded; windows: {} total, {} built, {} inactive; snapshots: {}; rows analyzed: {}",
        report.articles_succeeded,
        report.articles_configured,
        report.windows_total,
        report.windows_built,
        report.windows_filtered,
        report.snapshots.len(),
        report.rows.len()
    );
    for (title, err) in &report.failures {
        eprintln!("skipped `{title}`: {err}");
    }
    if let Some(rob) = &report.robustness {
        let (mut agree, mut total) = (0, 0);
        for a in &rob.agreement {
            for v in a.agrees().into_iter().flatten() {
                total += 1;
                agree += v as usize;
            }
        }
        println!(
            "robustness rerun at {} h: {} rows; coefficient signs agree {agree}/{total}",
            sig6(rob.threshold_hours),
            rob.run.rows.len()
        );
    }
    println!("outputs written to {}", out.display());
    Ok(if report.articles_succeeded == 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn validate_fixtures(dir: &PathBuf) -> Result<ExitCode> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .jsonl fixtures in {}", dir.display());
    }
    let mut bad = 0;
    for f in &files {
        match load_fixture(f) {
            Ok(records) => {
                let editors: std::collections::BTreeSet<_> = records.iter().map(|r| &r.editor).collect();
                println!("ok\t{}\t{} revisions\t{} editors", f.display(), records.len(), editors.len());
            }
            Err(e) => {
                bad += 1;
                println!("error\t{}\t{e}", f.display());
            }
        }
    }
    Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn fetch_fixtures(args: &ConfigArgs) -> Result<ExitCode> {
    let mut config = args.load()?;
    config.mode = Mode::Live;
    let dir = config.fixture_dir.clone().context("`fixture_dir` must be set")?;
    fs::create_dir_all(&dir)?;
    let source = live_source(&config)?;
    let names = FixtureSource { dir: dir.clone() };
    let mut failed = 0;
    for article in &config.articles {
        match source.revisions(article) {
            Ok(records) => {
                let path = names.path_for(article);
                fs::write(&path, write_fixture(&records))?;
                println!("{}\t{} revisions", path.display(), records.len());
            }
            Err(e) => {
                failed += 1;
                eprintln!("`{}`: {e}", article.title);
            }
        }
    }
    Ok(if failed == config.articles.len() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args),
        Command::Metrics {
            networks,
            output,
            min_nodes,
            categories,
        } => {
            let (rows, too_small) = metrics_from_networks(networks, &category_list(categories), *min_nodes)?;
            let file = fs::File::create(output).with_context(|| format!("creating {}", output.display()))?;
            write_metrics_csv(file, &rows)?;
            println!("{} rows written, {} snapshots below {min_nodes} nodes", rows.len(), too_small);
            Ok(ExitCode::SUCCESS)
        }
        Command::Regress {
            metrics,
            output_dir,
            categories,
        } => {
            let file = fs::File::open(metrics).with_context(|| format!("opening {}", metrics.display()))?;
            let rows = read_metrics_csv(file, &category_list(categories)).map_err(anyhow::Error::msg)?;
            let (size, age) = write_regressions(output_dir, &rows)?;
            let fitted = size.iter().chain(&age).filter(|e| e.outcome.is_ok()).count();
            println!("{fitted}/{} regressions fitted from {} rows", size.len() + age.len(), rows.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures(FixturesCommand::Validate { dir }) => validate_fixtures(dir),
        Command::Fixtures(FixturesCommand::Fetch(args)) => fetch_fixtures(args),
    }
}
