//! Content dimension of a collaboration tie.
//!
//! An article's sections are read from its wikitext headings. Each revision is
//! allocated to sections either through the `/* Section */` comment marker or, when
//! that is missing, by keyword overlap between the revision text and section names.
//! The content weight of a pair is the number of sections both editors touched,
//! divided by the article's section count.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::ingest::{EditorId, RevisionRecord};

const EMBEDDED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("article has no sections; content weight is undefined")]
    DegenerateArticle,
    #[error("cannot read stopword file {path}: {source}")]
    Stopwords {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The built-in English function-word list.
    pub fn embedded() -> Self {
        Self::parse(EMBEDDED_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.trim())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.to_lowercase())
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, TopicError> {
        fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|source| TopicError::Stopwords {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn empty() -> Self {
        Stopwords(HashSet::new())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stopwords(iter.into_iter().map(|s| s.as_ref().to_lowercase()).collect())
    }
}

/// Lowercase alphabetic tokens with stopwords removed.
pub type TokenList = Vec<String>;

/// Splits on whitespace and punctuation, lowercases, then drops stopwords and any
/// token that is not purely `[a-z]+`.
pub fn preprocess_text(text: &str, stopwords: &Stopwords) -> TokenList {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .filter(|t| t.bytes().all(|b| b.is_ascii_lowercase()))
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Section names of one article snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SectionSet {
    pub sections: BTreeSet<String>,
    /// Revision whose text defined the set, if it came from a single snapshot.
    pub source_revision_id: Option<u64>,
}

impl SectionSet {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SectionSet {
            sections: names.into_iter().map(Into::into).collect(),
            source_revision_id: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    /// Case-insensitive lookup returning the stored spelling.
    pub fn find(&self, name: &str) -> Option<&String> {
        let wanted = name.trim().to_lowercase();
        self.sections.iter().find(|s| s.to_lowercase() == wanted)
    }
}

/// Sections a single editor worked on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicSet {
    pub editor: EditorId,
    pub topics: BTreeSet<String>,
}

/// Collects `== Name ==` style headings (levels 2 through 6).
pub fn extract_sections(wikitext: &str) -> SectionSet {
    let mut sections = BTreeSet::new();
    for line in wikitext.lines() {
        if let Some(name) = heading_name(line) {
            sections.insert(name.to_string());
        }
    }
    SectionSet {
        sections,
        source_revision_id: None,
    }
}

fn heading_name(line: &str) -> Option<&str> {
    let line = line.trim();
    let leading = line.bytes().take_while(|&b| b == b'=').count();
    let trailing = line.bytes().rev().take_while(|&b| b == b'=').count();
    if !(2..=6).contains(&leading) || leading != trailing || line.len() <= leading + trailing {
        return None;
    }
    let name = line[leading..line.len() - trailing].trim();
    (!name.is_empty()).then_some(name)
}

/// Sections a revision is considered to have worked on.
pub fn allocate_topics(rev: &RevisionRecord, sections: &SectionSet, stopwords: &Stopwords) -> BTreeSet<String> {
    if let Some(marker) = &rev.section_marker {
        if let Some(name) = sections.find(marker) {
            return BTreeSet::from([name.clone()]);
        }
    }
    let Some(content) = &rev.content else {
        return BTreeSet::new();
    };
    let words: HashSet<String> = preprocess_text(content, stopwords).into_iter().collect();
    sections
        .sections
        .iter()
        .filter(|name| {
            let keys: HashSet<String> = preprocess_text(name, stopwords).into_iter().collect();
            keys.intersection(&words).count() >= 1
        })
        .cloned()
        .collect()
}

/// Union of per-revision allocations for every editor in `revisions`.
pub fn accumulate_topics(
    revisions: &[RevisionRecord],
    sections: &SectionSet,
    stopwords: &Stopwords,
) -> BTreeMap<EditorId, BTreeSet<String>> {
    let mut out: BTreeMap<EditorId, BTreeSet<String>> = BTreeMap::new();
    for rev in revisions {
        let topics = allocate_topics(rev, sections, stopwords);
        out.entry(rev.editor.clone()).or_default().extend(topics);
    }
    out
}

/// `|topics_i ∩ topics_j| / section_count`.
pub fn content_weight(
    topics_i: &BTreeSet<String>,
    topics_j: &BTreeSet<String>,
    section_count: usize,
) -> Result<f64, TopicError> {
    if section_count == 0 {
        return Err(TopicError::DegenerateArticle);
    }
    let shared = topics_i.intersection(topics_j).count();
    Ok(shared as f64 / section_count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn rev(comment: &str, content: Option<&str>) -> RevisionRecord {
        RevisionRecord::new(
            1,
            EditorId::new("A").unwrap(),
            chrono::Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            comment,
            content.map(str::to_string),
        )
    }

    #[test]
    fn preprocess_examples() {
        let the: Stopwords = ["the"].into_iter().collect();
        assert_eq!(preprocess_text("The Cat sat 123!", &the), vec!["cat", "sat"]);
        assert!(preprocess_text("", &the).is_empty());
        assert_eq!(
            preprocess_text("Hong-Kong 2019 protests", &Stopwords::empty()),
            vec!["hong", "kong", "protests"]
        );
        assert!(preprocess_text("abc123 café", &Stopwords::empty()).is_empty());
    }

    #[test]
    fn embedded_stopwords_are_loaded() {
        let sw = Stopwords::embedded();
        assert!(sw.len() >= 100);
        assert!(sw.contains("the") && sw.contains("which"));
    }

    #[test]
    fn section_extraction() {
        let s = extract_sections("== History ==\ntext\n=== Early life ===");
        assert_eq!(s.sections, set(&["History", "Early life"]));
        assert!(extract_sections("no headings here").is_empty());
        assert_eq!(extract_sections("==A==\n==A==").sections, set(&["A"]));
        // level-1 and unbalanced headings are not sections
        assert!(extract_sections("= Top =\n== Odd ===\n====").is_empty());
        assert_eq!(extract_sections("====== Deep ======").sections, set(&["Deep"]));
    }

    #[test]
    fn marker_allocation_wins() {
        let sections = SectionSet::new(["History", "Impact"]);
        let r = rev("/* history */ tidy", Some("impact impact"));
        assert_eq!(allocate_topics(&r, &sections, &Stopwords::embedded()), set(&["History"]));
    }

    #[test]
    fn keyword_allocation() {
        let sections = SectionSet::new(["Impact", "Response"]);
        let r = rev("copyedit", Some("the impact on the economy"));
        assert_eq!(allocate_topics(&r, &sections, &Stopwords::embedded()), set(&["Impact"]));
        // unknown marker falls through to keywords
        let r = rev("/* Gone */", Some("response"));
        assert_eq!(allocate_topics(&r, &sections, &Stopwords::embedded()), set(&["Response"]));
        assert!(allocate_topics(&rev("", None), &sections, &Stopwords::embedded()).is_empty());
    }

    #[test]
    fn content_weight_examples() {
        assert_eq!(content_weight(&set(&[]), &set(&["a"]), 4).unwrap(), 0.0);
        assert_eq!(
            content_weight(&set(&["history", "impact"]), &set(&["impact", "response"]), 4).unwrap(),
            0.25
        );
        let all = set(&["a", "b", "c", "d"]);
        assert_eq!(content_weight(&all, &all, 4).unwrap(), 1.0);
        assert!(matches!(content_weight(&all, &all, 0), Err(TopicError::DegenerateArticle)));
    }

    fn subset_strategy() -> impl Strategy<Value = (BTreeSet<String>, BTreeSet<String>, usize)> {
        (1usize..8).prop_flat_map(|n| {
            let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
            let pick = proptest::sample::subsequence(names.clone(), 0..=n);
            (pick.clone(), pick, Just(n))
        })
        .prop_map(|(a, b, n)| (a.into_iter().collect(), b.into_iter().collect(), n))
    }

    proptest! {
        #[test]
        fn content_weight_symmetric_and_bounded((a, b, n) in subset_strategy()) {
            let ab = content_weight(&a, &b, n).unwrap();
            let ba = content_weight(&b, &a, n).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab == 1.0, a.len() == n && b.len() == n);
        }

        #[test]
        fn preprocess_idempotent(text in "[ -~]{0,80}") {
            let sw = Stopwords::embedded();
            let once = preprocess_text(&text, &sw);
            let twice = preprocess_text(&once.join(" "), &sw);
            prop_assert_eq!(&once, &twice);
            for t in &once {
                prop_assert!(t.bytes().all(|b| b.is_ascii_lowercase()) && !t.is_empty());
            }
        }

        #[test]
        fn allocation_is_subset(content in "[a-zA-Z ]{0,60}", marker in "[a-zA-Z]{0,6}") {
            let sections = SectionSet::new(["Early life", "Career", "Legacy"]);
            let r = rev(&format!("/* {marker} */"), Some(&content));
            let topics = allocate_topics(&r, &sections, &Stopwords::embedded());
            prop_assert!(topics.is_subset(&sections.sections));
        }
    }
}
