//! Per-relation hierarchy analytics: Krackhardt hierarchy score and
//! shortest-path statistics over directed relation subgraphs.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::{KnowledgeGraph, Split};

pub const DEFAULT_KHS_THRESHOLD: f64 = 0.9;
pub const DEFAULT_MIN_MAX_PATH: usize = 2;

/// A directed graph on dense node ids `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiGraph {
    adj: Vec<Vec<usize>>,
    n_edges: usize,
}

impl DiGraph {
    /// Graph on `n` nodes; parallel edges are collapsed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            adj[u].push(v);
        }
        let mut n_edges = 0;
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
            n_edges += a.len();
        }
        Self { adj, n_edges }
    }

    /// Graph over the nodes that appear in `edges`, relabelled densely.
    pub fn from_sparse_edges(edges: &[(usize, usize)]) -> Self {
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let mut local = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            let next = ids.len();
            let u = *ids.entry(u).or_insert(next);
            let next = ids.len();
            let v = *ids.entry(v).or_insert(next);
            local.push((u, v));
        }
        Self::from_edges(ids.len(), &local)
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    /// BFS distances from `src` along paths of length >= 1. The source itself
    /// appears only if it lies on a cycle. Returned sorted by node id.
    pub fn reach_from(&self, src: usize) -> Vec<(usize, usize)> {
        let n = self.adj.len();
        let mut dist = vec![usize::MAX; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for &v in &self.adj[src] {
            if dist[v] == usize::MAX {
                dist[v] = 1;
                queue.push_back(v);
            }
        }
        while let Some(u) = queue.pop_front() {
            out.push((u, dist[u]));
            for &v in &self.adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Shortest-path summary over reachable ordered pairs `x != y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    pub max: usize,
    pub mean: f64,
    pub pairs: usize,
}

struct Reachability {
    // Per source: sorted (target, distance).
    reach: Vec<Vec<(usize, usize)>>,
}

impl Reachability {
    fn compute(g: &DiGraph) -> Self {
        let reach = (0..g.n_nodes()).into_par_iter().map(|u| g.reach_from(u)).collect();
        Self { reach }
    }

    fn reaches(&self, u: usize, v: usize) -> bool {
        self.reach[u].binary_search_by_key(&v, |&(t, _)| t).is_ok()
    }

    fn khs(&self) -> Option<f64> {
        let (mut reachable, mut one_way) = (0u64, 0u64);
        for (u, row) in self.reach.iter().enumerate() {
            for &(v, _) in row.iter().filter(|&&(v, _)| v != u) {
                reachable += 1;
                if !self.reaches(v, u) {
                    one_way += 1;
                }
            }
        }
        (reachable > 0).then(|| one_way as f64 / reachable as f64)
    }

    fn path_stats(&self) -> Option<PathStats> {
        let (mut pairs, mut sum, mut max) = (0usize, 0u64, 0usize);
        for (u, row) in self.reach.iter().enumerate() {
            for &(v, d) in row {
                if u != v {
                    pairs += 1;
                    sum += d as u64;
                    max = max.max(d);
                }
            }
        }
        (pairs > 0).then(|| PathStats {
            max,
            mean: sum as f64 / pairs as f64,
            pairs,
        })
    }
}

/// Krackhardt hierarchy score: the fraction of reachable ordered pairs
/// `(i, j)`, `i != j`, for which `j` does not reach back to `i`. `None` when
/// no such pair exists.
pub fn khs(g: &DiGraph) -> Option<f64> {
    Reachability::compute(g).khs()
}

/// Maximum and mean shortest directed path length over reachable pairs.
pub fn path_stats(g: &DiGraph) -> Option<PathStats> {
    Reachability::compute(g).path_stats()
}

/// Analytics for one base relation of the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationHierarchy {
    pub relation: String,
    pub nodes: usize,
    pub edges: usize,
    pub khs: Option<f64>,
    pub max_path: Option<usize>,
    pub avg_path: Option<f64>,
    pub hierarchical: bool,
    /// Why a relation was not flagged hierarchical.
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyReport {
    pub khs_threshold: f64,
    pub min_max_path: usize,
    pub relations: Vec<RelationHierarchy>,
}

impl HierarchyReport {
    pub fn hierarchical(&self) -> impl Iterator<Item = &RelationHierarchy> {
        self.relations.iter().filter(|r| r.hierarchical)
    }

    pub fn get(&self, relation: &str) -> Option<&RelationHierarchy> {
        self.relations.iter().find(|r| r.relation == relation)
    }

    /// Tab-separated table: relation, Khs, max path, avg path, flag, plus counts.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("relation\tkhs\tmax_path\tavg_path\thierarchical\tnodes\tedges\n");
        for r in &self.relations {
            let khs = r.khs.map_or("-".to_string(), |v| format!("{v:.4}"));
            let maxp = r.max_path.map_or("-".to_string(), |v| v.to_string());
            let avgp = r.avg_path.map_or("-".to_string(), |v| format!("{v:.4}"));
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.relation, khs, maxp, avgp, r.hierarchical, r.nodes, r.edges
            ));
        }
        s
    }
}

/// Analyze every base relation on the training split and flag it hierarchical
/// iff `khs >= khs_threshold` and `max_path >= min_max_path`.
pub fn classify_relations(kg: &KnowledgeGraph, khs_threshold: f64, min_max_path: usize) -> HierarchyReport {
    let mut by_rel: Vec<Vec<(usize, usize)>> = vec![Vec::new(); kg.n_relations()];
    for t in kg.split(Split::Train) {
        by_rel[t.relation].push((t.subject, t.object));
    }
    let relations = by_rel
        .par_iter()
        .enumerate()
        .map(|(r, edges)| {
            let g = DiGraph::from_sparse_edges(edges);
            let reach = Reachability::compute(&g);
            let k = reach.khs();
            let ps = reach.path_stats();
            let (hierarchical, reason) = match (k, ps) {
                (None, _) => (false, Some("khs undefined: no reachable pairs".to_string())),
                (Some(k), _) if k < khs_threshold => (false, Some(format!("khs {k:.4} below {khs_threshold}"))),
                (Some(_), None) => (false, Some("no paths between distinct nodes".to_string())),
                (Some(_), Some(p)) if p.max < min_max_path => {
                    (false, Some(format!("max path {} below {min_max_path}", p.max)))
                }
                _ => (true, None),
            };
            RelationHierarchy {
                relation: kg.relations.name(r).to_owned(),
                nodes: g.n_nodes(),
                edges: g.n_edges(),
                khs: k,
                max_path: ps.map(|p| p.max),
                avg_path: ps.map(|p| p.mean),
                hierarchical,
                reason,
            }
        })
        .collect();
    HierarchyReport {
        khs_threshold,
        min_max_path,
        relations,
    }
}
