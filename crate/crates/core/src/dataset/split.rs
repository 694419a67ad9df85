//! Resplitting a pooled graph and building subsets with a controlled share of
//! hierarchical relations.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{HierarchyReport, KnowledgeGraph, Triple};
use crate::error::{Error, Result};

/// One subset produced by [`build_hier_subsets`].
#[derive(Debug, Clone, PartialEq)]
pub struct HierSubset {
    /// Requested share of hierarchical relations.
    pub proportion: f64,
    pub hierarchical: Vec<String>,
    pub non_hierarchical: Vec<String>,
    pub graph: KnowledgeGraph,
}

impl HierSubset {
    /// Conventional name suffix, e.g. `h75` for proportion 0.75.
    pub fn tag(&self) -> String {
        format!("h{}", (self.proportion * 100.0).round() as u32)
    }
}

/// Number of non-hierarchical relations to pair with `h` hierarchical ones so
/// that hierarchical relations make up `proportion` of the subset.
pub fn non_hierarchical_count(h: usize, proportion: f64) -> usize {
    (h as f64 * (1.0 - proportion) / proportion).round() as usize
}

/// Keep every hierarchical relation and add non-hierarchical relations, drawn
/// uniformly without replacement, so hierarchical relations make up each
/// requested proportion. Subsets for smaller proportions extend those for
/// larger ones.
pub fn build_hier_subsets(
    kg: &KnowledgeGraph,
    report: &HierarchyReport,
    proportions: &[f64],
    seed: u64,
) -> Result<Vec<HierSubset>> {
    let hier: Vec<String> = report.hierarchical().map(|r| r.relation.clone()).collect();
    let mut non_hier: Vec<String> = report
        .relations
        .iter()
        .filter(|r| !r.hierarchical)
        .map(|r| r.relation.clone())
        .collect();
    if hier.is_empty() {
        return Err(Error::Infeasible("no hierarchical relations".into()));
    }
    for &p in proportions {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("proportion {p} not in (0, 1]")));
        }
        let need = non_hierarchical_count(hier.len(), p);
        if need > non_hier.len() {
            // smallest proportion reachable with every non-hierarchical relation
            let min_p = hier.len() as f64 / (hier.len() + non_hier.len()) as f64;
            return Err(Error::Infeasible(format!(
                "proportion {p} needs {need} non-hierarchical relations but only {} exist; \
                 the lowest achievable proportion is {min_p:.4}",
                non_hier.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    non_hier.shuffle(&mut rng);

    proportions
        .iter()
        .map(|&p| {
            let extra = &non_hier[..non_hierarchical_count(hier.len(), p)];
            let keep: HashSet<usize> = hier.iter().chain(extra).filter_map(|n| kg.relations.get(n)).collect();
            let filt =
                |ts: &[Triple]| -> Vec<Triple> { ts.iter().filter(|t| keep.contains(&t.relation)).copied().collect() };
            let graph = kg.rebuild(&filt(&kg.train), &filt(&kg.valid), &filt(&kg.test))?;
            Ok(HierSubset {
                proportion: p,
                hierarchical: hier.clone(),
                non_hierarchical: extra.to_vec(),
                graph,
            })
        })
        .collect()
}

/// Pool every split and draw fresh disjoint validation and test sets.
///
/// The first triple of each relation in the shuffled pool is pinned to train,
/// so every relation in the held-out splits also occurs in train.
pub fn resplit(kg: &KnowledgeGraph, valid_size: usize, test_size: usize, seed: u64) -> Result<KnowledgeGraph> {
    let mut pool: Vec<Triple> = kg.all_triples().copied().collect();
    if pool.len() <= valid_size + test_size {
        return Err(Error::Infeasible(format!(
            "{} pooled triples cannot hold {valid_size} validation and {test_size} test triples",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);

    let mut seen_rel = vec![false; kg.n_relations()];
    let mut train = Vec::with_capacity(pool.len() - valid_size - test_size);
    let mut free = Vec::with_capacity(pool.len());
    for t in pool {
        if !seen_rel[t.relation] {
            seen_rel[t.relation] = true;
            train.push(t);
        } else {
            free.push(t);
        }
    }
    if free.len() < valid_size + test_size {
        return Err(Error::Infeasible(format!(
            "only {} triples remain after keeping one per relation in train",
            free.len()
        )));
    }
    let mut rest = free.split_off(valid_size + test_size);
    let test = free.split_off(valid_size);
    let valid = free;
    train.append(&mut rest);
    kg.rebuild(&train, &valid, &test)
}
