//! Pipeline configuration: a flat `key = value` file plus per-key overrides.
//!
//! ```text
//! # lines starting with '#' are comments
//! mode = fixture
//! fixture_dir = fixtures
//! horizon = 2024-01-01T00:00:00Z
//! output_dir = out
//! article = politics: Brexit
//! article = tech: ChatGPT
//! ```
//!
//! `article` may repeat; every other key is set once (later values win).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use thiserror::Error;

use crate::ati::DEFAULT_THRESHOLD_HOURS;
use crate::graph::{DEFAULT_ACTIVE_FRACTION, DEFAULT_PRUNE_FRACTION, DEFAULT_WINDOW_DAYS};
use crate::ingest::{parse_timestamp, ArticleRef, Category, EditorId, DEFAULT_CATEGORIES};

pub const DEFAULT_ENDPOINT: &str = "https://en.wikipedia.org/w/api.php";
/// Environment variable that overrides the configured API endpoint.
pub const ENDPOINT_ENV: &str = "COCREATE_ENDPOINT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("no articles configured")]
    NoArticles,
    #[error("`horizon` must be set")]
    MissingHorizon,
    #[error("`fixture_dir` must be set in fixture mode")]
    MissingFixtureDir,
    #[error("`output_dir` must be set")]
    MissingOutputDir,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Live,
    Fixture,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "live" => Ok(Mode::Live),
            "fixture" => Ok(Mode::Fixture),
            other => Err(format!("expected `live` or `fixture`, got `{other}`")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Fixture => "fixture",
        })
    }
}

/// What the `content` field of a revision holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentMode {
    /// Full post-edit wikitext of the article.
    Full,
    /// Only the text the edit touched.
    Region,
    /// Ignore content; allocate topics from comment markers alone.
    Markers,
}

impl FromStr for ContentMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "full" => Ok(ContentMode::Full),
            "region" => Ok(ContentMode::Region),
            "markers" => Ok(ContentMode::Markers),
            other => Err(format!("expected `full`, `region` or `markers`, got `{other}`")),
        }
    }
}

impl fmt::Display for ContentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentMode::Full => "full",
            ContentMode::Region => "region",
            ContentMode::Markers => "markers",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub articles: Vec<ArticleRef>,
    pub categories: Vec<String>,
    pub mode: Mode,
    pub fixture_dir: Option<PathBuf>,
    pub endpoint: String,
    pub threshold_hours: f64,
    pub window_days: f64,
    pub prune_fraction: f64,
    pub active_fraction: f64,
    pub min_nodes: usize,
    pub horizon: Option<DateTime<Utc>>,
    /// Earliest revision fetched in live mode.
    pub range_start: DateTime<Utc>,
    pub output_dir: Option<PathBuf>,
    pub stopword_path: Option<PathBuf>,
    pub content_mode: ContentMode,
    pub exclude_editors: Vec<EditorId>,
    /// Worker threads; `None` means one per logical CPU.
    pub workers: Option<usize>,
    pub request_delay_ms: u64,
    pub page_limit: u32,
    /// When set, the pipeline is repeated with this threshold for comparison.
    pub robustness_threshold_hours: Option<f64>,
    // article lines are validated against categories at the end
    pending_articles: Vec<(String, String)>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            articles: Vec::new(),
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            mode: Mode::Fixture,
            fixture_dir: None,
            endpoint: DEFAULT_ENDPOINT.to_string(),
            threshold_hours: DEFAULT_THRESHOLD_HOURS,
            window_days: DEFAULT_WINDOW_DAYS,
            prune_fraction: DEFAULT_PRUNE_FRACTION,
            active_fraction: DEFAULT_ACTIVE_FRACTION,
            min_nodes: 4,
            horizon: None,
            range_start: DateTime::parse_from_rfc3339("2001-01-01T00:00:00Z")
                .expect("valid literal")
                .with_timezone(&Utc),
            output_dir: None,
            stopword_path: None,
            content_mode: ContentMode::Full,
            exclude_editors: Vec::new(),
            workers: None,
            request_delay_ms: 200,
            page_limit: 500,
            robustness_threshold_hours: None,
            pending_articles: Vec::new(),
        }
    }
}

fn invalid(key: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        message: message.to_string(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| invalid(key, e))
}

/// Accepts RFC 3339 instants or bare `YYYY-MM-DD` dates (midnight UTC).
pub fn parse_instant(key: &str, value: &str) -> Result<DateTime<Utc>, ConfigError> {
    let value = value.trim();
    if let Ok(t) = parse_timestamp(value) {
        return Ok(t);
    }
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc())
        .map_err(|e| invalid(key, format!("`{value}`: {e}")))
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::parse_text(&text)?;
        // relative paths in the file resolve against the file's directory
        if let Some(base) = path.parent() {
            for p in [&mut config.fixture_dir, &mut config.output_dir, &mut config.stopword_path]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(config)
    }

    /// Parses config text without validating it.
    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: idx + 1 })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Sets one field by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "article" => {
                let (cat, title) = value
                    .split_once(':')
                    .ok_or_else(|| invalid(key, "expected `category: title`"))?;
                self.pending_articles.push((cat.trim().to_string(), title.trim().to_string()));
            }
            "categories" => self.categories = parse_list(value).into_iter().map(|c| c.to_lowercase()).collect(),
            "mode" => self.mode = value.parse().map_err(|e: String| invalid(key, e))?,
            "fixture_dir" => self.fixture_dir = Some(PathBuf::from(value)),
            "endpoint" => self.endpoint = value.to_string(),
            "threshold_hours" => self.threshold_hours = parse_num(key, value)?,
            "window_days" => self.window_days = parse_num(key, value)?,
            "prune_fraction" => self.prune_fraction = parse_num(key, value)?,
            "active_fraction" => self.active_fraction = parse_num(key, value)?,
            "min_nodes" => self.min_nodes = parse_num(key, value)?,
            "horizon" => self.horizon = Some(parse_instant(key, value)?),
            "range_start" => self.range_start = parse_instant(key, value)?,
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "stopword_path" => self.stopword_path = Some(PathBuf::from(value)),
            "content_mode" => self.content_mode = value.parse().map_err(|e: String| invalid(key, e))?,
            "exclude_editors" => {
                for name in parse_list(value) {
                    self.exclude_editors.push(EditorId::new(&name).map_err(|e| invalid(key, e))?);
                }
            }
            "workers" => {
                let n: usize = parse_num(key, value)?;
                self.workers = (n > 0).then_some(n);
            }
            "request_delay_ms" => self.request_delay_ms = parse_num(key, value)?,
            "page_limit" => self.page_limit = parse_num(key, value)?,
            "robustness_threshold_hours" => {
                self.robustness_threshold_hours = if value.is_empty() || value == "none" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Resolves pending article lines and checks every invariant.
    pub fn validate(mut self) -> Result<Self, ConfigError> {
        for (cat, title) in std::mem::take(&mut self.pending_articles) {
            let category = Category::new(&cat, &self.categories).map_err(|e| invalid("article", e))?;
            let article = ArticleRef::new(&title, category).map_err(|e| invalid("article", e))?;
            if !self.articles.contains(&article) {
                self.articles.push(article);
            }
        }
        if self.articles.is_empty() {
            return Err(ConfigError::NoArticles);
        }
        if !(self.threshold_hours.is_finite() && self.threshold_hours > 0.0) {
            return Err(invalid("threshold_hours", "must be positive"));
        }
        if let Some(h) = self.robustness_threshold_hours {
            if !(h.is_finite() && h > 0.0) {
                return Err(invalid("robustness_threshold_hours", "must be positive"));
            }
        }
        if !(self.window_days.is_finite() && self.window_days > 0.0) {
            return Err(invalid("window_days", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.prune_fraction) {
            return Err(invalid("prune_fraction", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.active_fraction) {
            return Err(invalid("active_fraction", "must lie in [0, 1)"));
        }
        if self.min_nodes < 2 {
            return Err(invalid("min_nodes", "must be at least 2"));
        }
        if self.page_limit == 0 {
            return Err(invalid("page_limit", "must be positive"));
        }
        let horizon = self.horizon.ok_or(ConfigError::MissingHorizon)?;
        if self.range_start >= horizon {
            return Err(invalid("range_start", "must precede horizon"));
        }
        if self.mode == Mode::Fixture && self.fixture_dir.is_none() {
            return Err(ConfigError::MissingFixtureDir);
        }
        if self.output_dir.is_none() {
            return Err(ConfigError::MissingOutputDir);
        }
        Ok(self)
    }

    pub fn horizon(&self) -> DateTime<Utc> {
        self.horizon.expect("validated config has a horizon")
    }

    pub fn output_dir(&self) -> &Path {
        self.output_dir.as_deref().expect("validated config has an output dir")
    }

    /// Settings echoed into the run report, one `key=value` per entry.
    pub fn describe(&self) -> Vec<(String, String)> {
        use crate::format::{sig6, timestamp};
        vec![
            ("mode".into(), self.mode.to_string()),
            ("content_mode".into(), self.content_mode.to_string()),
            ("endpoint".into(), self.endpoint.clone()),
            ("window_days".into(), sig6(self.window_days)),
            ("prune_fraction".into(), sig6(self.prune_fraction)),
            ("active_fraction".into(), sig6(self.active_fraction)),
            ("active_filter_basis".into(), "post_prune_gcc_nodes".into()),
            ("min_nodes".into(), self.min_nodes.to_string()),
            ("horizon".into(), timestamp(self.horizon())),
            ("exclude_editors".into(), self.exclude_editors.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(",")),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "
# sample
mode = fixture
fixture_dir = fx
horizon = 2024-01-01
output_dir = out
article = politics: Brexit
article = tech : Rust (programming language)
threshold_hours = 24
exclude_editors = ClueBot NG, AnomieBOT
";

    #[test]
    fn parses_and_validates() {
        let c = PipelineConfig::parse_text(SAMPLE).unwrap().validate().unwrap();
        assert_eq!(c.articles.len(), 2);
        assert_eq!(c.articles[1].title, "Rust (programming language)");
        assert_eq!(c.threshold_hours, 24.0);
        assert_eq!(c.prune_fraction, 0.30);
        assert_eq!(c.exclude_editors.len(), 2);
        assert_eq!(c.horizon().to_rfc3339(), "2024-01-01T00:00:00+00:00");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(PipelineConfig::parse_text("nonsense"), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(PipelineConfig::parse_text("color = red"), Err(ConfigError::UnknownKey(_))));
        assert!(PipelineConfig::parse_text("threshold_hours = soon").is_err());

        let no_articles = SAMPLE.lines().filter(|l| !l.starts_with("article")).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            PipelineConfig::parse_text(&no_articles).unwrap().validate(),
            Err(ConfigError::NoArticles)
        ));

        let mut c = PipelineConfig::parse_text(SAMPLE).unwrap();
        c.set("prune_fraction", "1.0").unwrap();
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::parse_text(SAMPLE).unwrap();
        c.set("article", "sports: Football").unwrap();
        assert!(c.validate().is_err());

        let mut c = PipelineConfig::parse_text(SAMPLE).unwrap();
        c.set("min_nodes", "1").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn custom_categories() {
        let mut c = PipelineConfig::parse_text(SAMPLE).unwrap();
        c.set("categories", "politics, tech, sports").unwrap();
        c.set("article", "sports: Football").unwrap();
        assert_eq!(c.validate().unwrap().articles.len(), 3);
    }
}
