//! Small generated graphs for experiments and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{KnowledgeGraph, NamedTriple};
use crate::error::Result;

/// Edges `(descendant, ancestor)` of the transitive closure of a complete
/// `arity`-ary tree with `depth` levels below the root.
///
/// Node 0 is the root; children of `v` are `arity*v + 1 ..= arity*v + arity`.
pub fn tree_closure(arity: usize, depth: usize) -> (usize, Vec<(usize, usize)>) {
    let mut n = 0;
    let mut level = 1;
    for _ in 0..=depth {
        n += level;
        level *= arity;
    }
    let mut edges = Vec::new();
    for v in 1..n {
        let mut a = v;
        while a != 0 {
            a = (a - 1) / arity;
            edges.push((v, a));
        }
    }
    (n, edges)
}

/// `pairs` random unordered pairs of distinct nodes, each emitted in both
/// directions.
pub fn symmetric_pairs<R: Rng + ?Sized>(n_nodes: usize, pairs: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(2 * pairs);
    while seen.len() < pairs {
        let a = rng.gen_range(0..n_nodes);
        let b = rng.gen_range(0..n_nodes);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            out.push((a, b));
            out.push((b, a));
        }
    }
    out
}

/// A two-relation graph: `hypernym` is the closure of a tree, `similar_to`
/// is a random symmetric relation over the same nodes. Triples are shuffled
/// and split by the given fractions of validation and test triples.
pub fn hierarchy_graph(
    arity: usize,
    depth: usize,
    symmetric: usize,
    valid_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<KnowledgeGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, tree) = tree_closure(arity, depth);
    let sym = symmetric_pairs(n, symmetric, &mut rng);
    let node = |v: usize| format!("n{v}");
    let mut rows: Vec<NamedTriple> = tree
        .iter()
        .map(|&(a, b)| (node(a), "hypernym".to_string(), node(b)))
        .chain(sym.iter().map(|&(a, b)| (node(a), "similar_to".to_string(), node(b))))
        .collect();
    // Keep every node and relation in train: the first rows fix the vocabulary.
    let mut anchors: Vec<NamedTriple> = Vec::new();
    let mut rest: Vec<NamedTriple> = Vec::new();
    let mut covered = vec![false; n];
    let mut rel_seen = [false; 2];
    rows.shuffle(&mut rng);
    for row in rows {
        let a: usize = row.0[1..].parse().expect("node name");
        let b: usize = row.2[1..].parse().expect("node name");
        let ri = (row.1 == "similar_to") as usize;
        if !covered[a] || !covered[b] || !rel_seen[ri] {
            covered[a] = true;
            covered[b] = true;
            rel_seen[ri] = true;
            anchors.push(row);
        } else {
            rest.push(row);
        }
    }
    let total = anchors.len() + rest.len();
    let n_valid = ((total as f64 * valid_frac).round() as usize).min(rest.len());
    let n_test = ((total as f64 * test_frac).round() as usize).min(rest.len() - n_valid);
    let test = rest.split_off(rest.len() - n_test);
    let valid = rest.split_off(rest.len() - n_valid);
    anchors.extend(rest);
    Ok(KnowledgeGraph::from_named(&anchors, &valid, &test)?.0)
}
