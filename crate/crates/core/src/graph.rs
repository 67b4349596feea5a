//! Per-window collaboration networks.
//!
//! An article's history is cut into fixed-length windows starting at the
//! collaboration onset. Each window yields a weighted editor graph whose edge
//! weight is the product of the temporal (ATI) and content weights. Graphs are
//! then pruned, reduced to their giant component, and filtered for activity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

use crate::ati::{ati_weight, build_pair_timeline, AtiParams};
use crate::format::{sig6, timestamp};
use crate::ingest::{parse_timestamp, ArticleRef, Category, EditorId, RevisionRecord};
use crate::metrics::SimpleGraph;
use crate::topic::{accumulate_topics, content_weight, SectionSet, Stopwords};

pub const DEFAULT_WINDOW_DAYS: f64 = 182.625;
pub const DEFAULT_PRUNE_FRACTION: f64 = 0.30;
pub const DEFAULT_ACTIVE_FRACTION: f64 = 0.15;
pub const DAYS_PER_MONTH: f64 = 30.4375;
/// Lower end of the GCC/pruned edge ratio seen in practice; smaller ratios are flagged.
pub const RETENTION_FLOOR: f64 = 0.5;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no two distinct editors ever edit within the interaction threshold")]
    NoCollaboration,
    #[error("empty time range: onset {onset} is not before horizon {horizon}")]
    EmptyRange { onset: DateTime<Utc>, horizon: DateTime<Utc> },
    #[error("window length must be positive, got {0} days")]
    InvalidWindow(f64),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("window start {window_start} precedes onset {onset}")]
    NegativeAge {
        onset: DateTime<Utc>,
        window_start: DateTime<Utc>,
    },
    #[error("fraction must lie in [0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("invalid edge: {0}")]
    InvalidEdge(String),
    #[error("edge list line {line}: {message}")]
    EdgeListFormat { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub index: usize,
    pub start: DateTime<Utc>,
    /// Exclusive.
    pub end: DateTime<Utc>,
    /// Truncated by the horizon.
    pub partial: bool,
}

impl Window {
    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        t >= self.start && t < self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub i: EditorId,
    pub j: EditorId,
    pub w_t: u64,
    pub w_c: f64,
    pub w: f64,
}

impl Edge {
    /// Orders the endpoints and sets `w = w_t * w_c`.
    pub fn new(a: EditorId, b: EditorId, w_t: u64, w_c: f64) -> Result<Self, GraphError> {
        if a == b {
            return Err(GraphError::InvalidEdge(format!("self-loop on `{a}`")));
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Ok(Edge {
            i,
            j,
            w_t,
            w_c,
            w: w_t as f64 * w_c,
        })
    }
}

/// Undirected editor graph. Edges are kept sorted by `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedGraph {
    pub nodes: BTreeSet<EditorId>,
    pub edges: Vec<Edge>,
}

impl WeightedGraph {
    /// Builds a graph from edges; zero-weight edges are dropped and nodes are the
    /// endpoints of the remaining ones.
    pub fn from_edges(edges: impl IntoIterator<Item = Edge>) -> Result<Self, GraphError> {
        let mut by_pair: BTreeMap<(EditorId, EditorId), Edge> = BTreeMap::new();
        for e in edges {
            if e.i >= e.j {
                return Err(GraphError::InvalidEdge(format!("endpoints `{}`, `{}` not ordered", e.i, e.j)));
            }
            if !(e.w.is_finite() && e.w >= 0.0) {
                return Err(GraphError::InvalidEdge(format!("weight {} on `{}`-`{}`", e.w, e.i, e.j)));
            }
            if e.w == 0.0 {
                continue;
            }
            let key = (e.i.clone(), e.j.clone());
            if by_pair.insert(key, e).is_some() {
                return Err(GraphError::InvalidEdge("duplicate pair".into()));
            }
        }
        let edges: Vec<Edge> = by_pair.into_values().collect();
        let nodes = edges.iter().flat_map(|e| [e.i.clone(), e.j.clone()]).collect();
        Ok(WeightedGraph { nodes, edges })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Unweighted adjacency structure with nodes indexed in sorted id order.
    pub fn skeleton(&self) -> SimpleGraph {
        let index: BTreeMap<&EditorId, usize> = self.nodes.iter().enumerate().map(|(k, v)| (v, k)).collect();
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (index[&e.i], index[&e.j])).collect();
        SimpleGraph::from_edges(self.nodes.len(), &pairs).expect("weighted graph edges are valid")
    }
}

/// Pruned giant component of one window, with the metadata needed downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub article: ArticleRef,
    pub window: Window,
    pub graph: WeightedGraph,
    pub age_months: u32,
    /// GCC edges over pruned-graph edges.
    pub edge_retention: f64,
    pub pre_prune_edge_count: usize,
    pub first_revision: DateTime<Utc>,
    pub last_revision: DateTime<Utc>,
}

impl NetworkSnapshot {
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn retention_flagged(&self) -> bool {
        self.edge_retention < RETENTION_FLOOR
    }
}

/// Timestamp of the first revision that directly precedes an edit by a different
/// editor within the threshold, scanning the whole history.
pub fn detect_onset(revisions: &[RevisionRecord], params: &AtiParams) -> Result<DateTime<Utc>, GraphError> {
    revisions
        .windows(2)
        .find(|w| w[0].editor != w[1].editor && params.within(w[0].timestamp, w[1].timestamp))
        .map(|w| w[0].timestamp)
        .ok_or(GraphError::NoCollaboration)
}

pub fn window_length(window_days: f64) -> Result<Duration, GraphError> {
    if !(window_days.is_finite() && window_days > 0.0) {
        return Err(GraphError::InvalidWindow(window_days));
    }
    let millis = (window_days * 86_400_000.0).round() as i64;
    if millis <= 0 {
        return Err(GraphError::InvalidWindow(window_days));
    }
    Ok(Duration::milliseconds(millis))
}

/// Fixed-length windows tiling `[onset, horizon)`; the last one may be cut short.
pub fn partition_windows(
    onset: DateTime<Utc>,
    horizon: DateTime<Utc>,
    window_days: f64,
) -> Result<Vec<Window>, GraphError> {
    if onset >= horizon {
        return Err(GraphError::EmptyRange { onset, horizon });
    }
    let length = window_length(window_days)?;
    let mut windows = Vec::new();
    let mut start = onset;
    while start < horizon {
        let full_end = start + length;
        let end = full_end.min(horizon);
        windows.push(Window {
            index: windows.len(),
            start,
            end,
            partial: end < full_end,
        });
        start = full_end;
    }
    Ok(windows)
}

/// Weighted collaboration graph of the revisions of one window.
pub fn build_network(
    window_revisions: &[RevisionRecord],
    sections: &SectionSet,
    stopwords: &Stopwords,
    params: &AtiParams,
) -> WeightedGraph {
    let mut by_editor: BTreeMap<EditorId, Vec<RevisionRecord>> = BTreeMap::new();
    for r in window_revisions {
        by_editor.entry(r.editor.clone()).or_default().push(r.clone());
    }
    if by_editor.len() < 2 || sections.is_empty() {
        return WeightedGraph::default();
    }
    let topics = accumulate_topics(window_revisions, sections, stopwords);
    let editors: Vec<&EditorId> = by_editor.keys().collect();

    let mut edges = Vec::new();
    for (a, ea) in editors.iter().enumerate() {
        for eb in &editors[a + 1..] {
            let timeline =
                build_pair_timeline(&by_editor[*ea], &by_editor[*eb]).expect("distinct single-editor groups");
            let w_t = ati_weight(&timeline, params);
            if w_t == 0 {
                continue;
            }
            let w_c = content_weight(&topics[*ea], &topics[*eb], sections.len()).expect("non-empty sections");
            if w_c == 0.0 {
                continue;
            }
            edges.push(Edge::new((*ea).clone(), (*eb).clone(), w_t, w_c).expect("distinct editors"));
        }
    }
    WeightedGraph::from_edges(edges).expect("edges built from valid pairs")
}

fn check_fraction(f: f64) -> Result<(), GraphError> {
    if (0.0..1.0).contains(&f) {
        Ok(())
    } else {
        Err(GraphError::InvalidFraction(f))
    }
}

/// Number of edges removed when pruning `m` edges with `fraction`.
pub fn prune_count(m: usize, fraction: f64) -> usize {
    // the epsilon keeps products such as 0.3 * 10 from flooring to 2
    ((fraction * m as f64) + 1e-9).floor() as usize
}

/// Drops the lightest `floor(fraction * m)` edges, ties broken by `(i, j)`.
pub fn prune_graph(g: &WeightedGraph, bottom_fraction: f64) -> Result<WeightedGraph, GraphError> {
    check_fraction(bottom_fraction)?;
    let mut order: Vec<&Edge> = g.edges.iter().collect();
    order.sort_by(|a, b| a.w.total_cmp(&b.w).then_with(|| a.i.cmp(&b.i)).then_with(|| a.j.cmp(&b.j)));
    let drop = prune_count(order.len(), bottom_fraction);
    WeightedGraph::from_edges(order[drop..].iter().map(|e| (*e).clone()))
}

/// Connected components as sorted node lists.
pub fn connected_components(g: &WeightedGraph) -> Vec<Vec<EditorId>> {
    let sk = g.skeleton();
    let names: Vec<&EditorId> = g.nodes.iter().collect();
    let mut seen = vec![false; names.len()];
    let mut out = Vec::new();
    for s in 0..names.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in sk.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp.into_iter().map(|k| names[k].clone()).collect());
    }
    out
}

/// Largest component by node count, then edge count, then smallest node id.
/// Also returns the fraction of `g`'s edges that the component keeps.
pub fn giant_component(g: &WeightedGraph) -> Result<(WeightedGraph, f64), GraphError> {
    if g.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut best: Option<(usize, usize, BTreeSet<EditorId>)> = None;
    for comp in connected_components(g) {
        let members: BTreeSet<EditorId> = comp.into_iter().collect();
        let m = g.edges.iter().filter(|e| members.contains(&e.i)).count();
        let better = match &best {
            None => true,
            Some((bn, bm, bset)) => {
                (members.len(), m) > (*bn, *bm)
                    || ((members.len(), m) == (*bn, *bm) && members.first() < bset.first())
            }
        };
        if better {
            best = Some((members.len(), m, members));
        }
    }
    let (_, _, members) = best.expect("at least one component");
    let edges: Vec<Edge> = g.edges.iter().filter(|e| members.contains(&e.i)).cloned().collect();
    let retention = if g.edge_count() == 0 {
        1.0
    } else {
        edges.len() as f64 / g.edge_count() as f64
    };
    let mut gcc = WeightedGraph::from_edges(edges)?;
    // a lone isolated node can only be the giant component of an edgeless graph
    if gcc.nodes.is_empty() {
        gcc.nodes = members;
    }
    Ok((gcc, retention))
}

/// `keep[k]` is true when `sizes[k] > fraction * max(sizes)`.
pub fn active_mask(sizes: &[usize], fraction: f64) -> Vec<bool> {
    let max = sizes.iter().copied().max().unwrap_or(0);
    let cutoff = fraction * max as f64;
    sizes.iter().map(|&s| s as f64 > cutoff).collect()
}

/// Drops windows whose giant component does not exceed `fraction` of the article's
/// largest one.
pub fn filter_active_windows(snapshots: Vec<NetworkSnapshot>, fraction: f64) -> Result<Vec<NetworkSnapshot>, GraphError> {
    check_fraction(fraction)?;
    let sizes: Vec<usize> = snapshots.iter().map(NetworkSnapshot::node_count).collect();
    let mask = active_mask(&sizes, fraction);
    Ok(snapshots.into_iter().zip(mask).filter_map(|(s, keep)| keep.then_some(s)).collect())
}

/// Whole months (of 30.4375 days) from onset to the window start.
pub fn artifact_age_months(onset: DateTime<Utc>, window_start: DateTime<Utc>) -> Result<u32, GraphError> {
    let secs = (window_start - onset).num_seconds();
    if secs < 0 {
        return Err(GraphError::NegativeAge { onset, window_start });
    }
    Ok((secs as f64 / 86_400.0 / DAYS_PER_MONTH).floor() as u32)
}

/// Renders a snapshot as a tab-separated edge list with a `#` metadata header.
pub fn write_edge_list(s: &NetworkSnapshot) -> String {
    let mut out = format!(
        "# article={}\tcategory={}\twindow={}\tstart={}\tend={}\tpartial={}\tage_months={}\tedge_retention={}\tpre_prune_edges={}\tfirst_revision={}\tlast_revision={}\tnodes={}\tedges={}\n",
        s.article.title,
        s.article.category,
        s.window.index,
        timestamp(s.window.start),
        timestamp(s.window.end),
        s.window.partial,
        s.age_months,
        sig6(s.edge_retention),
        s.pre_prune_edge_count,
        timestamp(s.first_revision),
        timestamp(s.last_revision),
        s.graph.node_count(),
        s.graph.edge_count(),
    );
    for e in &s.graph.edges {
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", e.i, e.j, e.w_t, sig6(e.w_c), sig6(e.w)));
    }
    out
}

/// Inverse of [`write_edge_list`]. Weights come back at printed precision.
pub fn parse_edge_list(text: &str, categories: &[String]) -> Result<NetworkSnapshot, GraphError> {
    let fmt_err = |line: usize, message: String| GraphError::EdgeListFormat { line, message };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| fmt_err(1, "missing header".into()))?;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| fmt_err(1, "header must start with `# `".into()))?;
    let fields: BTreeMap<&str, &str> = header.split('\t').filter_map(|kv| kv.split_once('=')).collect();
    let get = |key: &str| fields.get(key).copied().ok_or_else(|| fmt_err(1, format!("missing `{key}`")));
    let num = |key: &str| -> Result<u64, GraphError> {
        get(key)?.parse().map_err(|e| fmt_err(1, format!("`{key}`: {e}")))
    };
    let time = |key: &str| -> Result<DateTime<Utc>, GraphError> {
        parse_timestamp(get(key)?).map_err(|e| fmt_err(1, format!("`{key}`: {e}")))
    };

    let category = Category::new(get("category")?, categories).map_err(|e| fmt_err(1, e.to_string()))?;
    let article = ArticleRef::new(get("article")?, category).map_err(|e| fmt_err(1, e.to_string()))?;
    let window = Window {
        index: num("window")? as usize,
        start: time("start")?,
        end: time("end")?,
        partial: get("partial")? == "true",
    };
    let edge_retention: f64 = get("edge_retention")?
        .parse()
        .map_err(|e| fmt_err(1, format!("`edge_retention`: {e}")))?;

    let mut edges = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(fmt_err(idx + 1, format!("expected 5 columns, found {}", cols.len())));
        }
        let id = |s: &str| EditorId::new(s).map_err(|e| fmt_err(idx + 1, e.to_string()));
        let float = |s: &str| s.parse::<f64>().map_err(|e| fmt_err(idx + 1, e.to_string()));
        let w_t = cols[2].parse::<u64>().map_err(|e| fmt_err(idx + 1, e.to_string()))?;
        let (i, j) = (id(cols[0])?, id(cols[1])?);
        if i >= j {
            return Err(fmt_err(idx + 1, "endpoints must be ordered".into()));
        }
        edges.push(Edge {
            i,
            j,
            w_t,
            w_c: float(cols[3])?,
            w: float(cols[4])?,
        });
    }
    let graph = WeightedGraph::from_edges(edges)?;
    Ok(NetworkSnapshot {
        article,
        window,
        graph,
        age_months: num("age_months")? as u32,
        edge_retention,
        pre_prune_edge_count: num("pre_prune_edges")? as usize,
        first_revision: time("first_revision")?,
        last_revision: time("last_revision")?,
    })
}
