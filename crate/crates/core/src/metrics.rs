//! Structural measures of a collaboration network.
//!
//! All measures run on the unweighted skeleton of a snapshot's giant component:
//! average degree, mean local clustering, mean shortest-path length, and the
//! betweenness centralization of the graph.

use std::collections::VecDeque;
use std::io::Write;

use thiserror::Error;

use crate::format::sig6;
use crate::graph::NetworkSnapshot;
use crate::ingest::ArticleRef;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("graph is disconnected; metrics are defined on the giant component only")]
    Disconnected,
    #[error("{measure} needs at least {needed} nodes, graph has {got}")]
    TooFewNodes {
        measure: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
}

/// Simple undirected graph on nodes `0..n` stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    adj: Vec<Vec<usize>>,
}

impl SimpleGraph {
    /// Duplicate edges collapse; self-loops and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, MetricsError> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(MetricsError::InvalidEdge(a, b));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(SimpleGraph { adj })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.adj.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].expect("queued nodes have a distance");
            for &w in &self.adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.adj.is_empty() || self.bfs_distances(0).iter().all(Option::is_some)
    }
}

fn require(g: &SimpleGraph, measure: &'static str, needed: usize) -> Result<(), MetricsError> {
    if g.node_count() == 0 {
        return Err(MetricsError::EmptyGraph);
    }
    if g.node_count() < needed {
        return Err(MetricsError::TooFewNodes {
            measure,
            needed,
            got: g.node_count(),
        });
    }
    Ok(())
}

/// `2m / n`.
pub fn average_degree(g: &SimpleGraph) -> Result<f64, MetricsError> {
    require(g, "average degree", 1)?;
    Ok(2.0 * g.edge_count() as f64 / g.node_count() as f64)
}

/// Local clustering of one node; zero below degree two.
pub fn local_clustering(g: &SimpleGraph, v: usize) -> f64 {
    let nbrs = g.neighbors(v);
    let k = nbrs.len();
    if k < 2 {
        return 0.0;
    }
    let mut links = 0usize;
    for (a, &x) in nbrs.iter().enumerate() {
        for &y in &nbrs[a + 1..] {
            if g.has_edge(x, y) {
                links += 1;
            }
        }
    }
    links as f64 / (k * (k - 1) / 2) as f64
}

/// Mean local clustering over all nodes.
pub fn average_clustering(g: &SimpleGraph) -> Result<f64, MetricsError> {
    require(g, "average clustering", 1)?;
    let n = g.node_count();
    Ok((0..n).map(|v| local_clustering(g, v)).sum::<f64>() / n as f64)
}

/// Mean hop distance over all unordered node pairs of a connected graph.
pub fn average_shortest_path(g: &SimpleGraph) -> Result<f64, MetricsError> {
    require(g, "average shortest path", 2)?;
    let n = g.node_count();
    let mut total = 0usize;
    for s in 0..n {
        for (t, d) in g.bfs_distances(s).into_iter().enumerate() {
            match d {
                Some(d) if t > s => total += d,
                Some(_) => {}
                None => return Err(MetricsError::Disconnected),
            }
        }
    }
    let pairs = n * (n - 1) / 2;
    Ok(total as f64 / pairs as f64)
}

/// Node betweenness normalized by `(n - 1)(n - 2) / 2`, computed with Brandes'
/// dependency accumulation.
pub fn normalized_betweenness(g: &SimpleGraph) -> Vec<f64> {
    let n = g.node_count();
    let mut bc = vec![0.0f64; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut stack = Vec::with_capacity(n);
    let mut queue = VecDeque::with_capacity(n);

    for s in 0..n {
        for v in 0..n {
            sigma[v] = 0.0;
            dist[v] = usize::MAX;
            delta[v] = 0.0;
            preds[v].clear();
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in g.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                bc[w] += delta[w];
            }
        }
    }

    if n < 3 {
        return vec![0.0; n];
    }
    // each unordered pair was counted from both ends
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    bc.iter().map(|b| b * scale).collect()
}

/// `Σ_v (b_max − b_v) / (n − 1)` over normalized node betweenness; 1 for a star,
/// 0 when every node is equally central.
pub fn centralization_from_scores(scores: &[f64]) -> f64 {
    let n = scores.len();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().map(|b| max - b).sum::<f64>() / (n - 1) as f64
}

pub fn betweenness_centralization(g: &SimpleGraph) -> Result<f64, MetricsError> {
    require(g, "betweenness centralization", 3)?;
    if !g.is_connected() {
        return Err(MetricsError::Disconnected);
    }
    Ok(centralization_from_scores(&normalized_betweenness(g)))
}

/// One analyzed network.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub article: ArticleRef,
    pub window_index: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub avg_degree: f64,
    pub avg_clustering: f64,
    pub avg_shortest_path: f64,
    pub betweenness_centralization: f64,
    pub age_months: u32,
    pub edge_retention: f64,
}

impl MetricsRow {
    pub fn category(&self) -> &str {
        self.article.category.as_str()
    }
}

pub const METRICS_HEADER: [&str; 12] = [
    "article",
    "category",
    "window_index",
    "n_nodes",
    "n_edges",
    "avg_degree",
    "avg_clustering",
    "avg_shortest_path",
    "betweenness_centralization",
    "age_months",
    "edge_retention",
    "retention_flagged",
];

#[derive(Debug, Clone, PartialEq)]
pub enum Summary {
    Analyzed(MetricsRow),
    /// Below the minimum size; recorded but not measured.
    TooSmall { nodes: usize },
}

/// Computes all four measures for a snapshot whose GCC has at least `min_nodes` nodes.
pub fn summarize_network(snapshot: &NetworkSnapshot, min_nodes: usize) -> Result<Summary, MetricsError> {
    let n = snapshot.node_count();
    if n < min_nodes.max(3) {
        return Ok(Summary::TooSmall { nodes: n });
    }
    let g = snapshot.graph.skeleton();
    if !g.is_connected() {
        return Err(MetricsError::Disconnected);
    }
    Ok(Summary::Analyzed(MetricsRow {
        article: snapshot.article.clone(),
        window_index: snapshot.window.index,
        n_nodes: n,
        n_edges: g.edge_count(),
        avg_degree: average_degree(&g)?,
        avg_clustering: average_clustering(&g)?,
        avg_shortest_path: average_shortest_path(&g)?,
        betweenness_centralization: betweenness_centralization(&g)?,
        age_months: snapshot.age_months,
        edge_retention: snapshot.edge_retention,
    }))
}

/// Writes rows as CSV in [`METRICS_HEADER`] order.
pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.article.title.clone(),
            r.category().to_string(),
            r.window_index.to_string(),
            r.n_nodes.to_string(),
            r.n_edges.to_string(),
            sig6(r.avg_degree),
            sig6(r.avg_clustering),
            sig6(r.avg_shortest_path),
            sig6(r.betweenness_centralization),
            r.age_months.to_string(),
            sig6(r.edge_retention),
            (r.edge_retention < crate::graph::RETENTION_FLOOR).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_metrics_csv`]. Values come back at printed precision.
pub fn read_metrics_csv<R: std::io::Read>(input: R, categories: &[String]) -> Result<Vec<MetricsRow>, String> {
    use crate::ingest::Category;
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("missing column `{name}`"));
    let idx: Vec<usize> = METRICS_HEADER[..11].iter().map(|h| col(h)).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        let at = |k: usize| record.get(idx[k]).unwrap_or("");
        let bad = |k: usize, e: &dyn std::fmt::Display| format!("row {}: `{}`: {e}", line + 2, METRICS_HEADER[k]);
        let int = |k: usize| at(k).parse::<usize>().map_err(|e| bad(k, &e));
        let float = |k: usize| at(k).parse::<f64>().map_err(|e| bad(k, &e));
        let category = Category::new(at(1), categories).map_err(|e| bad(1, &e))?;
        rows.push(MetricsRow {
            article: ArticleRef::new(at(0), category).map_err(|e| bad(0, &e))?,
            window_index: int(2)?,
            n_nodes: int(3)?,
            n_edges: int(4)?,
            avg_degree: float(5)?,
            avg_clustering: float(6)?,
            avg_shortest_path: float(7)?,
            betweenness_centralization: float(8)?,
            age_months: int(9)? as u32,
            edge_retention: float(10)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> SimpleGraph {
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        SimpleGraph::from_edges(n, &edges).unwrap()
    }

    fn path(n: usize) -> SimpleGraph {
        let edges: Vec<(usize, usize)> = (1..n).map(|k| (k - 1, k)).collect();
        SimpleGraph::from_edges(n, &edges).unwrap()
    }

    fn star(leaves: usize) -> SimpleGraph {
        let edges: Vec<(usize, usize)> = (1..=leaves).map(|k| (0, k)).collect();
        SimpleGraph::from_edges(leaves + 1, &edges).unwrap()
    }

    fn cycle(n: usize) -> SimpleGraph {
        let edges: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
        SimpleGraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(average_degree(&complete(3)).unwrap(), 2.0);
        assert_eq!(average_degree(&path(3)).unwrap(), 4.0 / 3.0);
        assert_eq!(average_degree(&star(4)).unwrap(), 8.0 / 5.0);
        assert_eq!(average_degree(&SimpleGraph::from_edges(0, &[]).unwrap()), Err(MetricsError::EmptyGraph));
    }

    #[test]
    fn clustering_examples() {
        assert_eq!(average_clustering(&complete(3)).unwrap(), 1.0);
        assert_eq!(average_clustering(&star(4)).unwrap(), 0.0);
        // K4 without edge 2-3: locals 2/3, 2/3, 1, 1
        let k4_minus = SimpleGraph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert!((average_clustering(&k4_minus).unwrap() - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn shortest_path_examples() {
        for n in 2..7 {
            assert_eq!(average_shortest_path(&complete(n)).unwrap(), 1.0);
        }
        assert_eq!(average_shortest_path(&path(3)).unwrap(), 4.0 / 3.0);
        assert_eq!(average_shortest_path(&cycle(5)).unwrap(), 1.5);
        let split = SimpleGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(average_shortest_path(&split), Err(MetricsError::Disconnected));
        assert!(matches!(
            average_shortest_path(&SimpleGraph::from_edges(1, &[]).unwrap()),
            Err(MetricsError::TooFewNodes { .. })
        ));
    }

    #[test]
    fn centralization_examples() {
        for leaves in 2..8 {
            assert_eq!(betweenness_centralization(&star(leaves)).unwrap(), 1.0);
        }
        for n in 3..7 {
            assert_eq!(betweenness_centralization(&complete(n)).unwrap(), 0.0);
        }
        assert_eq!(betweenness_centralization(&path(3)).unwrap(), 1.0);
        assert!(matches!(betweenness_centralization(&path(2)), Err(MetricsError::TooFewNodes { .. })));
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(SimpleGraph::from_edges(3, &[(1, 1)]).is_err());
        assert!(SimpleGraph::from_edges(3, &[(0, 3)]).is_err());
        assert_eq!(SimpleGraph::from_edges(3, &[(0, 1), (1, 0)]).unwrap().edge_count(), 1);
    }
}
