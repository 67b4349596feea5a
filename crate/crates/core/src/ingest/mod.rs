//! Revision history acquisition.
//!
//! Revisions come either from a live MediaWiki endpoint ([`mediawiki`]) or from
//! line-delimited JSON fixture files ([`load_fixture`]). Both routes produce the
//! same thing: a list of [`RevisionRecord`]s sorted by `(timestamp, revision_id)`.

pub mod mediawiki;

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{DateTime, SubsecRound, Utc};
use serde::Deserialize;
use thiserror::Error;

pub use mediawiki::{fetch_revisions, FetchOptions, MediaWikiClient, RateLimiter};

/// Category labels used when none are configured.
pub const DEFAULT_CATEGORIES: [&str; 5] = ["politics", "conflicts", "disasters", "tech", "entertainment"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("article title must not be empty")]
    EmptyTitle,
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("editor id must not be empty")]
    EmptyEditor,
    #[error("invalid range: start {start} is not before end {end}")]
    InvalidRange { start: DateTime<Utc>, end: DateTime<Utc> },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    MalformedLine { path: String, line: usize, message: String },
    #[error("duplicate revision id {0}")]
    DuplicateRevision(u64),
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}")]
    Endpoint { status: u16 },
    #[error("malformed payload: field `{field}`{}: {message}", revision_suffix(*.revision_id))]
    Parse {
        field: String,
        revision_id: Option<u64>,
        message: String,
    },
    #[error("page `{0}` does not exist")]
    MissingPage(String),
    #[error("API error {code}: {info}")]
    Api { code: String, info: String },
}

fn revision_suffix(revision_id: Option<u64>) -> String {
    match revision_id {
        Some(id) => format!(" (revision {id})"),
        None => String::new(),
    }
}

impl IngestError {
    /// Transport failures may succeed on retry; everything else is final.
    pub fn is_retryable(&self) -> bool {
        matches!(self, IngestError::Transport { .. })
    }
}

/// Topic category of an article. Labels are lowercase and come from the configured set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Category(String);

impl Category {
    pub fn new(label: &str, allowed: &[String]) -> Result<Self, IngestError> {
        let label = label.trim().to_lowercase();
        if allowed.iter().any(|a| a.eq_ignore_ascii_case(&label)) {
            Ok(Category(label))
        } else {
            Err(IngestError::UnknownCategory(label))
        }
    }

    /// Builds a category against the default label set.
    pub fn parse(label: &str) -> Result<Self, IngestError> {
        let allowed: Vec<String> = DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect();
        Self::new(label, &allowed)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArticleRef {
    pub title: String,
    pub category: Category,
}

impl ArticleRef {
    pub fn new(title: &str, category: Category) -> Result<Self, IngestError> {
        let title = title.trim();
        if title.is_empty() {
            return Err(IngestError::EmptyTitle);
        }
        Ok(ArticleRef {
            title: title.to_string(),
            category,
        })
    }

    /// File-system friendly form of the title, used for fixture and output file names.
    pub fn slug(&self) -> String {
        self.title
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
            .collect()
    }
}

/// Registered username or anonymous IP. Compared byte-for-byte after trimming.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EditorId(String);

impl EditorId {
    pub fn new(id: &str) -> Result<Self, IngestError> {
        let id = id.trim();
        if id.is_empty() {
            return Err(IngestError::EmptyEditor);
        }
        Ok(EditorId(id.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EditorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One edit event.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionRecord {
    pub revision_id: u64,
    pub editor: EditorId,
    pub timestamp: DateTime<Utc>,
    pub comment: String,
    pub section_marker: Option<String>,
    pub content: Option<String>,
}

impl RevisionRecord {
    pub fn new(
        revision_id: u64,
        editor: EditorId,
        timestamp: DateTime<Utc>,
        comment: impl Into<String>,
        content: Option<String>,
    ) -> Self {
        let comment = comment.into();
        RevisionRecord {
            revision_id,
            editor,
            timestamp: timestamp.trunc_subsecs(0),
            section_marker: parse_section_marker(&comment),
            comment,
            content,
        }
    }

    /// Total order used everywhere revisions are sequenced.
    pub fn sort_key(&self) -> (DateTime<Utc>, u64) {
        (self.timestamp, self.revision_id)
    }
}

/// Sorts ascending by `(timestamp, revision_id)`.
pub fn sort_revisions(records: &mut [RevisionRecord]) {
    records.sort_by_key(|r| r.sort_key());
}

/// Extracts the section name from a MediaWiki edit comment of the form `/* Name */ ...`.
pub fn parse_section_marker(comment: &str) -> Option<String> {
    let rest = comment.strip_prefix("/*")?;
    let end = rest.find("*/")?;
    let name = rest[..end].trim();
    if name.is_empty() {
        None
    } else {
        Some(name.to_string())
    }
}

/// Parses an ISO-8601 UTC timestamp, truncated to whole seconds.
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, chrono::ParseError> {
    DateTime::parse_from_rfc3339(raw.trim()).map(|t| t.with_timezone(&Utc).trunc_subsecs(0))
}

#[derive(Deserialize)]
struct FixtureLine {
    rev_id: i64,
    user: String,
    timestamp: String,
    comment: String,
    #[serde(default)]
    content: Option<String>,
}

/// Loads a line-delimited JSON fixture. Blank lines are ignored.
pub fn load_fixture(path: &Path) -> Result<Vec<RevisionRecord>, IngestError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: display.clone(),
        source,
    })?;
    parse_fixture(&text, &display)
}

/// Parses fixture text; `origin` is only used in error messages.
pub fn parse_fixture(text: &str, origin: &str) -> Result<Vec<RevisionRecord>, IngestError> {
    let malformed = |line: usize, message: String| IngestError::MalformedLine {
        path: origin.to_string(),
        line,
        message,
    };

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parsed: FixtureLine = serde_json::from_str(raw).map_err(|e| malformed(line_no, e.to_string()))?;
        if parsed.rev_id <= 0 {
            return Err(malformed(line_no, format!("rev_id must be positive, got {}", parsed.rev_id)));
        }
        let rev_id = parsed.rev_id as u64;
        let editor = EditorId::new(&parsed.user).map_err(|e| malformed(line_no, e.to_string()))?;
        let timestamp = parse_timestamp(&parsed.timestamp)
            .map_err(|e| malformed(line_no, format!("timestamp `{}`: {e}", parsed.timestamp)))?;
        if !seen.insert(rev_id) {
            return Err(IngestError::DuplicateRevision(rev_id));
        }
        records.push(RevisionRecord::new(rev_id, editor, timestamp, parsed.comment, parsed.content));
    }
    sort_revisions(&mut records);
    Ok(records)
}

/// Serializes records back into the fixture line format.
pub fn write_fixture(records: &[RevisionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = serde_json::json!({
            "rev_id": r.revision_id,
            "user": r.editor.as_str(),
            "timestamp": r.timestamp.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            "comment": r.comment,
            "content": r.content,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn section_marker_convention() {
        assert_eq!(parse_section_marker("/* History */ fixed typo").as_deref(), Some("History"));
        assert_eq!(parse_section_marker(""), None);
        assert_eq!(parse_section_marker("reverted vandalism"), None);
        assert_eq!(parse_section_marker("/*  */ blank"), None);
        assert_eq!(parse_section_marker("/* unterminated"), None);
        assert_eq!(parse_section_marker(" /* Leading */"), None);
    }

    proptest! {
        #[test]
        fn marker_requires_comment_opener(c in ".*") {
            prop_assume!(!c.starts_with("/*"));
            prop_assert!(parse_section_marker(&c).is_none());
        }
    }

    #[test]
    fn empty_fixture_is_empty() {
        assert!(parse_fixture("", "mem").unwrap().is_empty());
        assert!(parse_fixture("\n\n", "mem").unwrap().is_empty());
    }

    #[test]
    fn fixture_lines_are_sorted() {
        let text = r#"{"rev_id": 3, "user": "B", "timestamp": "2020-01-02T00:00:00Z", "comment": "", "content": null}
{"rev_id": 1, "user": "A", "timestamp": "2020-01-01T00:00:00Z", "comment": "/* Intro */ x", "content": null}
{"rev_id": 2, "user": "C", "timestamp": "2020-01-02T00:00:00Z", "comment": "y", "content": "== Intro =="}
"#;
        let recs = parse_fixture(text, "mem").unwrap();
        let ids: Vec<u64> = recs.iter().map(|r| r.revision_id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(recs[0].section_marker.as_deref(), Some("Intro"));
        assert_eq!(recs[1].content.as_deref(), Some("== Intro =="));
    }

    #[test]
    fn duplicate_revision_rejected() {
        let text = r#"{"rev_id": 42, "user": "A", "timestamp": "2020-01-01T00:00:00Z", "comment": ""}
{"rev_id": 42, "user": "B", "timestamp": "2020-01-02T00:00:00Z", "comment": ""}"#;
        assert!(matches!(parse_fixture(text, "mem"), Err(IngestError::DuplicateRevision(42))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"rev_id\": 1, \"user\": \"A\", \"timestamp\": \"2020-01-01T00:00:00Z\", \"comment\": \"\"}\n{oops";
        match parse_fixture(text, "f.jsonl") {
            Err(IngestError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let bad_ts = r#"{"rev_id": 1, "user": "A", "timestamp": "not-a-date", "comment": ""}"#;
        assert!(matches!(parse_fixture(bad_ts, "f"), Err(IngestError::MalformedLine { line: 1, .. })));
        let blank_user = r#"{"rev_id": 1, "user": "  ", "timestamp": "2020-01-01T00:00:00Z", "comment": ""}"#;
        assert!(parse_fixture(blank_user, "f").is_err());
    }

    #[test]
    fn missing_fixture_file() {
        let err = load_fixture(Path::new("/nonexistent/dir/x.jsonl")).unwrap_err();
        assert!(matches!(err, IngestError::Io { .. }));
    }

    #[test]
    fn editor_ids_trim() {
        assert_eq!(EditorId::new(" 10.0.0.1 ").unwrap(), EditorId::new("10.0.0.1").unwrap());
        assert!(EditorId::new("").is_err());
    }

    #[test]
    fn article_validation() {
        assert!(ArticleRef::new("  ", Category::parse("tech").unwrap()).is_err());
        assert!(Category::parse("sports").is_err());
        let a = ArticleRef::new("COVID-19 pandemic/Timeline", Category::parse("Disasters").unwrap()).unwrap();
        assert_eq!(a.category.as_str(), "disasters");
        assert_eq!(a.slug(), "COVID-19_pandemic_Timeline");
    }

    #[test]
    fn fixture_round_trip() {
        let text = r#"{"rev_id": 7, "user": "A b", "timestamp": "2021-03-04T05:06:07Z", "comment": "/* X */ y", "content": "t"}
{"rev_id": 9, "user": "C", "timestamp": "2021-03-05T05:06:07Z", "comment": "", "content": null}
"#;
        let recs = parse_fixture(text, "mem").unwrap();
        assert_eq!(parse_fixture(&write_fixture(&recs), "mem").unwrap(), recs);
    }
}
