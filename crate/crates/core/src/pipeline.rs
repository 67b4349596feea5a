//! End-to-end run: ingest, weight, window, prune, filter, measure, regress.
//!
//! Articles are processed on a bounded worker pool. Each worker returns its
//! article's snapshots; all files are written afterwards by the calling thread in
//! a fixed order, so the output directory depends only on inputs and config.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use thiserror::Error;

use crate::ati::AtiParams;
use crate::config::{ConfigError, ContentMode, Mode, PipelineConfig};
use crate::format::{sig6, timestamp};
use crate::graph::{
    artifact_age_months, build_network, detect_onset, filter_active_windows, giant_component, partition_windows,
    parse_edge_list, prune_graph, write_edge_list, GraphError, NetworkSnapshot, Window,
};
use crate::ingest::{load_fixture, ArticleRef, FetchOptions, IngestError, MediaWikiClient, RevisionRecord};
use crate::metrics::{summarize_network, write_metrics_csv, MetricsError, MetricsRow, Summary};
use crate::regression::{regression_table, write_regression_csv, Predictor, TableEntry};
use crate::topic::{extract_sections, SectionSet, Stopwords, TopicError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fetch(Arc<IngestError>),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Revisions of one article, or the shared fetch error.
type History = Result<Vec<RevisionRecord>, Arc<IngestError>>;

/// Where an article's revisions come from.
pub trait RevisionSource: Sync {
    fn revisions(&self, article: &ArticleRef) -> Result<Vec<RevisionRecord>, IngestError>;
}

/// Reads `<dir>/<slug>.jsonl` per article.
#[derive(Debug, Clone)]
pub struct FixtureSource {
    pub dir: PathBuf,
}

impl FixtureSource {
    pub fn path_for(&self, article: &ArticleRef) -> PathBuf {
        self.dir.join(format!("{}.jsonl", article.slug()))
    }
}

impl RevisionSource for FixtureSource {
    fn revisions(&self, article: &ArticleRef) -> Result<Vec<RevisionRecord>, IngestError> {
        load_fixture(&self.path_for(article))
    }
}

/// Fetches from a MediaWiki endpoint over `[start, end)`.
#[derive(Debug, Clone)]
pub struct LiveSource {
    pub client: MediaWikiClient,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl RevisionSource for LiveSource {
    fn revisions(&self, article: &ArticleRef) -> Result<Vec<RevisionRecord>, IngestError> {
        self.client.fetch(article, self.start, self.end)
    }
}

pub fn live_source(config: &PipelineConfig) -> Result<LiveSource, IngestError> {
    let options = FetchOptions {
        page_limit: config.page_limit,
        request_delay: Duration::from_millis(config.request_delay_ms),
        include_content: config.content_mode != ContentMode::Markers,
        ..FetchOptions::default()
    };
    Ok(LiveSource {
        client: MediaWikiClient::new(&config.endpoint, options)?,
        start: config.range_start,
        end: config.horizon(),
    })
}

/// Everything derived from one article.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleAnalysis {
    pub article: ArticleRef,
    pub revision_count: usize,
    pub onset: DateTime<Utc>,
    pub windows: usize,
    /// Windows whose pruned graph had at least one edge.
    pub windows_built: usize,
    /// Non-empty windows dropped by the activity filter.
    pub windows_filtered: usize,
    /// Active snapshots, in window order.
    pub snapshots: Vec<NetworkSnapshot>,
}

fn markers_up_to(history: &[RevisionRecord], end: DateTime<Utc>) -> SectionSet {
    SectionSet::new(
        history
            .iter()
            .take_while(|r| r.timestamp < end)
            .filter_map(|r| r.section_marker.clone()),
    )
}

/// Section set of an article as of one window.
///
/// Uses the headings of the latest revision in the window whose content has any;
/// failing that, the latest such revision before the window; failing that (or in
/// marker mode), every section marker seen up to the window end.
pub fn window_sections(history: &[RevisionRecord], window: &Window, mode: ContentMode) -> SectionSet {
    if mode != ContentMode::Markers {
        let upto_end = history.iter().take_while(|r| r.timestamp < window.end);
        let latest = upto_end
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .filter_map(|r| r.content.as_deref().map(|c| (r.revision_id, extract_sections(c))))
            .find(|(_, s)| !s.is_empty());
        if let Some((rev_id, mut sections)) = latest {
            sections.source_revision_id = Some(rev_id);
            return sections;
        }
    }
    markers_up_to(history, window.end)
}

/// Runs the per-article network construction for an already sorted history.
pub fn analyze_article(
    article: &ArticleRef,
    mut history: Vec<RevisionRecord>,
    config: &PipelineConfig,
    threshold_hours: f64,
    stopwords: &Stopwords,
) -> Result<ArticleAnalysis, PipelineError> {
    let params = AtiParams::new(threshold_hours).map_err(|e| ConfigError::InvalidValue {
        key: "threshold_hours".into(),
        message: e.to_string(),
    })?;
    history.retain(|r| !config.exclude_editors.contains(&r.editor));
    if config.content_mode == ContentMode::Markers {
        history.iter_mut().for_each(|r| r.content = None);
    }
    let horizon = config.horizon();
    history.retain(|r| r.timestamp < horizon);

    let onset = detect_onset(&history, &params)?;
    let windows = partition_windows(onset, horizon, config.window_days)?;

    let mut snapshots = Vec::new();
    let mut windows_built = 0;
    for window in &windows {
        let revs: Vec<RevisionRecord> = history.iter().filter(|r| window.contains(r.timestamp)).cloned().collect();
        if revs.is_empty() {
            continue;
        }
        let sections = window_sections(&history, window, config.content_mode);
        let graph = build_network(&revs, &sections, stopwords, &params);
        let pruned = prune_graph(&graph, config.prune_fraction)?;
        if pruned.is_empty() {
            continue;
        }
        windows_built += 1;
        let (gcc, retention) = giant_component(&pruned)?;
        snapshots.push(NetworkSnapshot {
            article: article.clone(),
            window: *window,
            graph: gcc,
            age_months: artifact_age_months(onset, window.start)?,
            edge_retention: retention,
            pre_prune_edge_count: graph.edge_count(),
            first_revision: revs.first().expect("non-empty").timestamp,
            last_revision: revs.last().expect("non-empty").timestamp,
        });
    }
    let active = filter_active_windows(snapshots, config.active_fraction)?;
    Ok(ArticleAnalysis {
        article: article.clone(),
        revision_count: history.len(),
        onset,
        windows: windows.len(),
        windows_built,
        windows_filtered: windows_built - active.len(),
        snapshots: active,
    })
}

#[derive(Debug)]
pub struct ArticleOutcome {
    pub article: ArticleRef,
    pub result: Result<ArticleAnalysis, PipelineError>,
}

/// Sign comparison of one fitted coefficient between two runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignAgreement {
    pub predictor: Predictor,
    pub model: String,
    pub category: String,
    pub primary: [Option<f64>; 2],
    pub alternate: [Option<f64>; 2],
}

impl SignAgreement {
    /// Agreement of β1 and β2; `None` when either fit is missing.
    pub fn agrees(&self) -> [Option<bool>; 2] {
        [0, 1].map(|k| match (self.primary[k], self.alternate[k]) {
            (Some(a), Some(b)) => Some(a.signum() == b.signum()),
            _ => None,
        })
    }
}

#[derive(Debug)]
pub struct RobustnessReport {
    pub threshold_hours: f64,
    pub output_dir: PathBuf,
    pub run: Box<RunReport>,
    pub agreement: Vec<SignAgreement>,
}

#[derive(Debug)]
pub struct RunReport {
    pub threshold_hours: f64,
    pub articles_configured: usize,
    pub articles_succeeded: usize,
    pub failures: Vec<(String, String)>,
    pub windows_total: usize,
    pub windows_built: usize,
    pub windows_filtered: usize,
    pub snapshots: Vec<NetworkSnapshot>,
    pub rows: Vec<MetricsRow>,
    pub rows_too_small: usize,
    pub size_table: Vec<TableEntry>,
    pub age_table: Vec<TableEntry>,
    pub robustness: Option<RobustnessReport>,
}

impl RunReport {
    pub fn retention_flagged(&self) -> usize {
        self.snapshots.iter().filter(|s| s.retention_flagged()).count()
    }
}

/// Table-I style per-category aggregate.
pub fn emit_summary<W: Write>(out: W, snapshots: &[NetworkSnapshot]) -> csv::Result<()> {
    #[derive(Default)]
    struct Agg {
        topics: BTreeSet<String>,
        networks: usize,
        min_start: Option<DateTime<Utc>>,
        max_end: Option<DateTime<Utc>>,
        min_nodes: usize,
        max_nodes: usize,
    }
    let mut by_cat: BTreeMap<String, Agg> = BTreeMap::new();
    for s in snapshots {
        let agg = by_cat.entry(s.article.category.as_str().to_string()).or_insert_with(|| Agg {
            min_nodes: usize::MAX,
            ..Agg::default()
        });
        agg.topics.insert(s.article.title.clone());
        agg.networks += 1;
        agg.min_start = Some(agg.min_start.map_or(s.first_revision, |t| t.min(s.first_revision)));
        agg.max_end = Some(agg.max_end.map_or(s.last_revision, |t| t.max(s.last_revision)));
        agg.min_nodes = agg.min_nodes.min(s.node_count());
        agg.max_nodes = agg.max_nodes.max(s.node_count());
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["category", "topics", "networks", "min_start", "max_end", "min_nodes", "max_nodes"])?;
    for (cat, agg) in by_cat {
        w.write_record([
            cat,
            agg.topics.len().to_string(),
            agg.networks.to_string(),
            agg.min_start.map(timestamp).unwrap_or_default(),
            agg.max_end.map(timestamp).unwrap_or_default(),
            agg.min_nodes.to_string(),
            agg.max_nodes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn load_stopwords(config: &PipelineConfig) -> Result<Stopwords, PipelineError> {
    Ok(match &config.stopword_path {
        Some(p) => Stopwords::from_file(p)?,
        None => Stopwords::embedded(),
    })
}

fn build_pool(config: &PipelineConfig) -> Result<rayon::ThreadPool, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| PipelineError::Pool(e.to_string()))
}

/// Runs the full pipeline and writes every output file.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    if config.articles.is_empty() {
        return Err(ConfigError::NoArticles.into());
    }
    let source: Arc<dyn RevisionSource + Send> = match config.mode {
        Mode::Fixture => Arc::new(FixtureSource {
            dir: config.fixture_dir.clone().ok_or(ConfigError::MissingFixtureDir)?,
        }),
        Mode::Live => Arc::new(live_source(config)?),
    };
    run_with_source(config, source.as_ref())
}

/// Same as [`run_pipeline`] with an explicit revision source.
pub fn run_with_source(config: &PipelineConfig, source: &dyn RevisionSource) -> Result<RunReport, PipelineError> {
    if config.articles.is_empty() {
        return Err(ConfigError::NoArticles.into());
    }
    let stopwords = load_stopwords(config)?;
    let pool = build_pool(config)?;

    // revisions are fetched once and reused by the robustness rerun
    let histories: Vec<(ArticleRef, History)> = pool.install(|| {
        config
            .articles
            .par_iter()
            .map(|a| {
                log::info!("loading revisions for `{}`", a.title);
                (a.clone(), source.revisions(a).map_err(Arc::new))
            })
            .collect()
    });

    let mut report = run_analysis(config, &histories, config.threshold_hours, config.output_dir(), &stopwords, &pool)?;

    if let Some(alt) = config.robustness_threshold_hours {
        let dir = config.output_dir().join(format!("robustness_{}h", sig6(alt)));
        let alt_report = run_analysis(config, &histories, alt, &dir, &stopwords, &pool)?;
        let agreement = sign_agreement(&report, &alt_report);
        write_sign_agreement(&config.output_dir().join("sign_agreement.csv"), &agreement)?;
        report.robustness = Some(RobustnessReport {
            threshold_hours: alt,
            output_dir: dir,
            run: Box::new(alt_report),
            agreement,
        });
    }
    write_run_report(config, &report)?;
    Ok(report)
}

fn run_analysis(
    config: &PipelineConfig,
    histories: &[(ArticleRef, History)],
    threshold_hours: f64,
    out_dir: &Path,
    stopwords: &Stopwords,
    pool: &rayon::ThreadPool,
) -> Result<RunReport, PipelineError> {
    let outcomes: Vec<ArticleOutcome> = pool.install(|| {
        histories
            .par_iter()
            .map(|(article, history)| {
                let result = match history {
                    Ok(h) => analyze_article(article, h.clone(), config, threshold_hours, stopwords),
                    Err(e) => Err(PipelineError::Fetch(Arc::clone(e))),
                };
                ArticleOutcome {
                    article: article.clone(),
                    result,
                }
            })
            .collect()
    });

    let mut report = RunReport {
        threshold_hours,
        articles_configured: outcomes.len(),
        articles_succeeded: 0,
        failures: Vec::new(),
        windows_total: 0,
        windows_built: 0,
        windows_filtered: 0,
        snapshots: Vec::new(),
        rows: Vec::new(),
        rows_too_small: 0,
        size_table: Vec::new(),
        age_table: Vec::new(),
        robustness: None,
    };
    for outcome in outcomes {
        match outcome.result {
            Ok(a) => {
                report.articles_succeeded += 1;
                report.windows_total += a.windows;
                report.windows_built += a.windows_built;
                report.windows_filtered += a.windows_filtered;
                report.snapshots.extend(a.snapshots);
            }
            Err(e) => {
                log::warn!("article `{}` skipped: {e}", outcome.article.title);
                report.failures.push((outcome.article.title.clone(), e.to_string()));
            }
        }
    }
    report
        .snapshots
        .sort_by(|a, b| (&a.article, a.window.index).cmp(&(&b.article, b.window.index)));

    for s in &report.snapshots {
        match summarize_network(s, config.min_nodes)? {
            Summary::Analyzed(row) => report.rows.push(row),
            Summary::TooSmall { .. } => report.rows_too_small += 1,
        }
    }
    let categories: Vec<String> = report.rows.iter().map(|r| r.category().to_string()).collect();
    report.size_table = regression_table(&report.rows, Predictor::TeamSize, &categories);
    report.age_table = regression_table(&report.rows, Predictor::ArtifactAge, &categories);

    write_outputs(out_dir, &report)?;
    Ok(report)
}

fn create_file(path: &Path) -> Result<fs::File, PipelineError> {
    fs::File::create(path).map_err(io_err(path))
}

/// Relative path of a snapshot's edge list inside `networks/`.
pub fn network_file_name(s: &NetworkSnapshot) -> PathBuf {
    PathBuf::from(s.article.category.as_str()).join(format!("{}__w{:03}.tsv", s.article.slug(), s.window.index))
}

fn write_outputs(dir: &Path, report: &RunReport) -> Result<(), PipelineError> {
    let networks = dir.join("networks");
    if networks.exists() {
        fs::remove_dir_all(&networks).map_err(io_err(&networks))?;
    }
    fs::create_dir_all(&networks).map_err(io_err(&networks))?;
    for s in &report.snapshots {
        let path = networks.join(network_file_name(s));
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, write_edge_list(s)).map_err(io_err(&path))?;
    }
    write_metrics_csv(create_file(&dir.join("metrics.csv"))?, &report.rows)?;
    write_regression_csv(create_file(&dir.join("regressions_size.csv"))?, &report.size_table)?;
    write_regression_csv(create_file(&dir.join("regressions_age.csv"))?, &report.age_table)?;
    emit_summary(create_file(&dir.join("summary.csv"))?, &report.snapshots)?;
    Ok(())
}

/// Compares β1/β2 signs cell by cell between two runs.
pub fn sign_agreement(primary: &RunReport, alternate: &RunReport) -> Vec<SignAgreement> {
    let index = |tables: [&Vec<TableEntry>; 2]| {
        let mut m = BTreeMap::new();
        for e in tables.into_iter().flatten() {
            let betas = match &e.outcome {
                Ok(r) => [Some(r.coefficients[1]), Some(r.coefficients[2])],
                Err(_) => [None, None],
            };
            m.insert(e.spec.clone(), betas);
        }
        m
    };
    let a = index([&primary.size_table, &primary.age_table]);
    let b = index([&alternate.size_table, &alternate.age_table]);
    let specs: BTreeSet<_> = a.keys().chain(b.keys()).cloned().collect();
    specs
        .into_iter()
        .map(|spec| SignAgreement {
            predictor: spec.predictor,
            model: spec.model_name(),
            category: spec.category.clone(),
            primary: a.get(&spec).copied().unwrap_or([None, None]),
            alternate: b.get(&spec).copied().unwrap_or([None, None]),
        })
        .collect()
}

fn write_sign_agreement(path: &Path, rows: &[SignAgreement]) -> Result<(), PipelineError> {
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    let flag = |v: Option<bool>| match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "n/a",
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create_file(path)?);
    w.write_record([
        "predictor",
        "model",
        "category",
        "beta1_primary",
        "beta1_alternate",
        "beta1_agree",
        "beta2_primary",
        "beta2_alternate",
        "beta2_agree",
    ])?;
    for r in rows {
        let agree = r.agrees();
        w.write_record([
            r.predictor.name(),
            &r.model,
            &r.category,
            &opt(r.primary[0]),
            &opt(r.alternate[0]),
            flag(agree[0]),
            &opt(r.primary[1]),
            &opt(r.alternate[1]),
            flag(agree[1]),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn report_lines(report: &RunReport) -> Vec<String> {
    let mut lines = vec![
        format!("threshold_hours={}", sig6(report.threshold_hours)),
        format!("articles_configured={}", report.articles_configured),
        format!("articles_succeeded={}", report.articles_succeeded),
        format!("articles_failed={}", report.failures.len()),
        format!("windows_total={}", report.windows_total),
        format!("windows_built={}", report.windows_built),
        format!("windows_filtered_inactive={}", report.windows_filtered),
        format!("snapshots_kept={}", report.snapshots.len()),
        format!("rows_analyzed={}", report.rows.len()),
        format!("rows_below_min_nodes={}", report.rows_too_small),
        format!("retention_below_floor={}", report.retention_flagged()),
        format!(
            "regressions_fitted={}",
            report.size_table.iter().chain(&report.age_table).filter(|e| e.outcome.is_ok()).count()
        ),
    ];
    for (title, err) in &report.failures {
        lines.push(format!("failed\t{title}\t{err}"));
    }
    lines
}

fn write_run_report(config: &PipelineConfig, report: &RunReport) -> Result<(), PipelineError> {
    let mut lines: Vec<String> = config.describe().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
    lines.extend(report_lines(report));
    if let Some(rob) = &report.robustness {
        lines.push(format!("robustness_threshold_hours={}", sig6(rob.threshold_hours)));
        lines.extend(report_lines(&rob.run).into_iter().map(|l| format!("robustness.{l}")));
        let (mut agree, mut total) = (0, 0);
        for a in &rob.agreement {
            for v in a.agrees().into_iter().flatten() {
                total += 1;
                agree += v as usize;
            }
        }
        lines.push(format!("sign_agreement={agree}/{total}"));
    }
    let path = config.output_dir().join("run_report.txt");
    fs::write(&path, lines.join("\n") + "\n").map_err(io_err(&path))
}

/// Collects `*.tsv` edge lists below `dir`, sorted by path.
pub fn find_network_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).map_err(io_err(&d))? {
            let path = entry.map_err(io_err(&d))?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == "tsv") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Re-measures saved snapshots. Returns the analyzed rows (ordered by article and
/// window) and the number of snapshots below `min_nodes`.
pub fn metrics_from_networks(
    dir: &Path,
    categories: &[String],
    min_nodes: usize,
) -> Result<(Vec<MetricsRow>, usize), PipelineError> {
    let mut snapshots = Vec::new();
    for path in find_network_files(dir)? {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        snapshots.push(parse_edge_list(&text, categories)?);
    }
    snapshots.sort_by(|a, b| (&a.article, a.window.index).cmp(&(&b.article, b.window.index)));
    let mut rows = Vec::new();
    let mut too_small = 0;
    for s in &snapshots {
        match summarize_network(s, min_nodes)? {
            Summary::Analyzed(row) => rows.push(row),
            Summary::TooSmall { .. } => too_small += 1,
        }
    }
    Ok((rows, too_small))
}

/// Writes both regression tables for `rows` into `dir`.
pub fn write_regressions(dir: &Path, rows: &[MetricsRow]) -> Result<(Vec<TableEntry>, Vec<TableEntry>), PipelineError> {
    let categories: Vec<String> = rows.iter().map(|r| r.category().to_string()).collect();
    let size = regression_table(rows, Predictor::TeamSize, &categories);
    let age = regression_table(rows, Predictor::ArtifactAge, &categories);
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_regression_csv(create_file(&dir.join("regressions_size.csv"))?, &size)?;
    write_regression_csv(create_file(&dir.join("regressions_age.csv"))?, &age)?;
    Ok((size, age))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Category, EditorId};
    use chrono::{Duration, TimeZone};

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap()
    }

    fn rev(id: u64, who: &str, hours: i64, content: Option<&str>) -> RevisionRecord {
        RevisionRecord::new(
            id,
            EditorId::new(who).unwrap(),
            t0() + Duration::hours(hours),
            "",
            content.map(str::to_string),
        )
    }

    #[test]
    fn sections_prefer_latest_content_in_window() {
        let history = vec![
            rev(1, "A", 0, Some("== Old ==")),
            rev(2, "B", 10, None),
            rev(3, "A", 20, Some("== New ==\n== Other ==")),
            rev(4, "B", 30, Some("no headings")),
        ];
        let window = Window {
            index: 0,
            start: t0(),
            end: t0() + Duration::hours(40),
            partial: false,
        };
        let s = window_sections(&history, &window, ContentMode::Full);
        assert_eq!(s.len(), 2);
        assert_eq!(s.source_revision_id, Some(3));

        let early = Window {
            end: t0() + Duration::hours(15),
            ..window
        };
        assert_eq!(window_sections(&history, &early, ContentMode::Full).source_revision_id, Some(1));
    }

    #[test]
    fn marker_mode_uses_comment_markers() {
        let mut history = vec![rev(1, "A", 0, Some("== Ignored =="))];
        history.push(RevisionRecord::new(2, EditorId::new("B").unwrap(), t0(), "/* Intro */", None));
        let window = Window {
            index: 0,
            start: t0(),
            end: t0() + Duration::hours(1),
            partial: false,
        };
        let s = window_sections(&history, &window, ContentMode::Markers);
        assert_eq!(s.sections.iter().collect::<Vec<_>>(), vec!["Intro"]);
    }

    #[test]
    fn summary_aggregates_by_category() {
        let mk = |cat: &str, title: &str, nodes: usize, idx: usize| {
            let names: Vec<String> = (0..nodes).map(|k| format!("e{k}")).collect();
            let edges = (1..nodes).map(|k| crate::graph::Edge::new(
                EditorId::new(&names[0]).unwrap(),
                EditorId::new(&names[k]).unwrap(),
                1,
                1.0,
            ).unwrap());
            NetworkSnapshot {
                article: ArticleRef::new(title, Category::parse(cat).unwrap()).unwrap(),
                window: Window { index: idx, start: t0(), end: t0() + Duration::days(1), partial: false },
                graph: crate::graph::WeightedGraph::from_edges(edges).unwrap(),
                age_months: 0,
                edge_retention: 1.0,
                pre_prune_edge_count: nodes,
                first_revision: t0() + Duration::hours(idx as i64),
                last_revision: t0() + Duration::hours(10 + idx as i64),
            }
        };
        let mut buf = Vec::new();
        emit_summary(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "category,topics,networks,min_start,max_end,min_nodes,max_nodes\n");

        let snaps = vec![mk("tech", "X", 4, 0), mk("tech", "X", 7, 1), mk("tech", "Y", 9, 0), mk("politics", "Z", 5, 2)];
        let mut buf = Vec::new();
        emit_summary(&mut buf, &snaps).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "politics,1,1,2019-01-01T02:00:00Z,2019-01-01T12:00:00Z,5,5");
        assert_eq!(lines[2], "tech,2,3,2019-01-01T00:00:00Z,2019-01-01T11:00:00Z,4,9");
    }
}
