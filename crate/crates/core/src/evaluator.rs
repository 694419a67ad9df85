//! Filtered link-prediction evaluation (MRR and hits@k).

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::dataset::{KnowledgeGraph, Triple};
use crate::error::{Error, Result};
use crate::model::{ModelParams, QueryScratch};

/// Known-true objects per `(subject, relation)`, including reciprocal relations.
#[derive(Debug, Clone, Default)]
pub struct TruthIndex {
    map: HashMap<(usize, usize), HashSet<usize>>,
}

impl TruthIndex {
    /// Index every split of `kg`, adding `(o, r + n_base, s)` for every `(s, r, o)`.
    pub fn from_graph(kg: &KnowledgeGraph) -> Self {
        Self::from_triples(kg.all_triples(), kg.n_relations())
    }

    pub fn from_triples<'a, I: IntoIterator<Item = &'a Triple>>(triples: I, n_base_relations: usize) -> Self {
        let mut idx = Self::default();
        for t in triples {
            idx.insert(t.subject, t.relation, t.object);
            idx.insert(t.object, t.relation + n_base_relations, t.subject);
        }
        idx
    }

    pub fn insert(&mut self, s: usize, r: usize, o: usize) {
        self.map.entry((s, r)).or_default().insert(o);
    }

    pub fn contains(&self, s: usize, r: usize, o: usize) -> bool {
        self.map.get(&(s, r)).is_some_and(|set| set.contains(&o))
    }

    pub fn objects(&self, s: usize, r: usize) -> Option<&HashSet<usize>> {
        self.map.get(&(s, r))
    }
}

/// How candidates scoring exactly as high as the target are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieMode {
    /// Half of the tied competitors, rounded up.
    #[default]
    Mid,
    Optimistic,
    Pessimistic,
}

impl std::str::FromStr for TieMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mid" => Ok(Self::Mid),
            "optimistic" => Ok(Self::Optimistic),
            "pessimistic" => Ok(Self::Pessimistic),
            _ => Err(Error::InvalidArgument(format!("unknown tie mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for TieMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TieMode::Mid => "mid",
            TieMode::Optimistic => "optimistic",
            TieMode::Pessimistic => "pessimistic",
        })
    }
}

impl TieMode {
    pub fn rank(self, greater: usize, ties: usize) -> usize {
        1 + greater
            + match self {
                TieMode::Mid => ties.div_ceil(2),
                TieMode::Optimistic => 0,
                TieMode::Pessimistic => ties,
            }
    }
}

/// Filtered rank of `(s, r, o)` among all candidate objects.
pub fn rank_triple(params: &ModelParams, test: Triple, truth: &TruthIndex, ties: TieMode) -> Result<usize> {
    params.check_ids(test.subject, test.relation, test.object)?;
    if !truth.contains(test.subject, test.relation, test.object) {
        return Err(Error::UnknownTriple(test.subject, test.relation, test.object));
    }
    let mut scratch = QueryScratch::new(params.dim);
    Ok(rank_unchecked(
        params,
        test,
        truth.objects(test.subject, test.relation),
        ties,
        &mut scratch,
    ))
}

/// Unfiltered rank; used to check that filtering never hurts.
pub fn raw_rank(params: &ModelParams, test: Triple, ties: TieMode) -> usize {
    let mut scratch = QueryScratch::new(params.dim);
    rank_unchecked(params, test, None, ties, &mut scratch)
}

// Candidates are streamed one at a time, so memory stays O(d) per query.
fn rank_unchecked(
    params: &ModelParams,
    test: Triple,
    known: Option<&HashSet<usize>>,
    ties: TieMode,
    scratch: &mut QueryScratch,
) -> usize {
    let q = params.prepare_query(test.subject, test.relation);
    let target = q.score(params, test.object, scratch);
    let (mut greater, mut equal) = (0usize, 0usize);
    for e in 0..params.n_entities {
        if e == test.object || known.is_some_and(|k| k.contains(&e)) {
            continue;
        }
        let sc = q.score(params, e, scratch);
        if sc > target {
            greater += 1;
        } else if sc == target {
            equal += 1;
        }
    }
    ties.rank(greater, equal)
}

/// Aggregated ranking metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub count: usize,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

impl Metrics {
    pub fn from_ranks<I: IntoIterator<Item = usize>>(ranks: I) -> Self {
        let (mut n, mut rr, mut h1, mut h3, mut h10) = (0usize, 0.0, 0usize, 0usize, 0usize);
        for r in ranks {
            n += 1;
            rr += 1.0 / r as f64;
            h1 += (r <= 1) as usize;
            h3 += (r <= 3) as usize;
            h10 += (r <= 10) as usize;
        }
        if n == 0 {
            return Self::default();
        }
        let nf = n as f64;
        Self {
            count: n,
            mrr: rr / nf,
            hits1: h1 as f64 / nf,
            hits3: h3 as f64 / nf,
            hits10: h10 as f64 / nf,
        }
    }
}

/// One evaluation query and its filtered rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedQuery {
    /// The query as posed: for the reciprocal direction, `(o, r + n_base, s)`.
    pub query: Triple,
    pub base_relation: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub ranks: Vec<RankedQuery>,
    pub overall: Metrics,
    /// Indexed by base relation; both directions pooled.
    pub per_relation: Vec<Metrics>,
}

impl RankingReport {
    fn from_ranks(ranks: Vec<RankedQuery>, n_base_relations: usize) -> Self {
        let overall = Metrics::from_ranks(ranks.iter().map(|q| q.rank));
        let per_relation = (0..n_base_relations)
            .map(|r| Metrics::from_ranks(ranks.iter().filter(|q| q.base_relation == r).map(|q| q.rank)))
            .collect();
        Self {
            ranks,
            overall,
            per_relation,
        }
    }

    /// Summary row followed by one row per base relation with at least one query.
    pub fn to_tsv(&self, relation_names: &[String]) -> String {
        let mut s = String::from("relation\tcount\tmrr\thits@1\thits@3\thits@10\n");
        let row = |name: &str, m: &Metrics| {
            format!(
                "{name}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                m.count, m.mrr, m.hits1, m.hits3, m.hits10
            )
        };
        s.push_str(&row("ALL", &self.overall));
        for (r, m) in self.per_relation.iter().enumerate() {
            if m.count > 0 {
                s.push_str(&row(&relation_names[r], m));
            }
        }
        s
    }
}

/// Rank every test triple in both directions, `(s, r, ?)` and `(o, r⁻¹, ?)`.
///
/// `triples` use base relation ids; `params` must hold `2 * n_base_relations`
/// relations.
pub fn evaluate(
    params: &ModelParams,
    triples: &[Triple],
    truth: &TruthIndex,
    n_base_relations: usize,
    ties: TieMode,
) -> Result<RankingReport> {
    if params.n_relations != 2 * n_base_relations {
        return Err(Error::InvalidArgument(format!(
            "model has {} relations, expected {} (with reciprocals)",
            params.n_relations,
            2 * n_base_relations
        )));
    }
    let queries: Vec<(Triple, usize)> = triples
        .iter()
        .flat_map(|t| {
            [
                (*t, t.relation),
                (
                    Triple::new(t.object, t.relation + n_base_relations, t.subject),
                    t.relation,
                ),
            ]
        })
        .collect();
    for (q, _) in &queries {
        params.check_ids(q.subject, q.relation, q.object)?;
        if !truth.contains(q.subject, q.relation, q.object) {
            return Err(Error::UnknownTriple(q.subject, q.relation, q.object));
        }
    }
    let ranks: Vec<RankedQuery> = queries
        .par_iter()
        .map_init(
            || QueryScratch::new(params.dim),
            |scratch, &(q, base)| RankedQuery {
                query: q,
                base_relation: base,
                rank: rank_unchecked(params, q, truth.objects(q.subject, q.relation), ties, scratch),
            },
        )
        .collect();
    Ok(RankingReport::from_ranks(ranks, n_base_relations))
}
