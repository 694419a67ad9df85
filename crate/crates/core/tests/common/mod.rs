//! Independent reference implementations used as test oracles.
#![allow(dead_code, clippy::needless_range_loop)]

use murp::dataset::Triple;
use murp::model::{sample_loss, GeometryKind, ModelParams};
use rand::Rng;

/// Random vector with uniformly drawn direction and norm in `[0, max_norm]`.
pub fn random_vec<R: Rng>(rng: &mut R, d: usize, max_norm: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            let target = rng.gen_range(0.0..=max_norm);
            return v.iter().map(|x| x * target / n).collect();
        }
    }
}

/// Parameters with every ball point at most `0.7 / sqrt(c)` from the origin.
pub fn random_params<R: Rng>(geometry: GeometryKind, n_e: usize, n_r: usize, d: usize, rng: &mut R) -> ModelParams {
    let radius = match geometry {
        GeometryKind::Euclidean => 1.0,
        GeometryKind::Poincare(c) => 1.0 / c.get().sqrt(),
    };
    let mut p = ModelParams::zeros(geometry, n_e, n_r, d);
    for e in 0..n_e {
        p.entity_mut(e).copy_from_slice(&random_vec(rng, d, 0.7 * radius));
        p.bias_subject[e] = rng.gen_range(-1.0..1.0);
        p.bias_object[e] = rng.gen_range(-1.0..1.0);
    }
    for r in 0..n_r {
        p.translation_mut(r).copy_from_slice(&random_vec(rng, d, 0.5 * radius));
        for v in p.diag_mut(r) {
            *v = rng.gen_range(-1.5..1.5);
        }
    }
    p
}

fn loss_at(p: &ModelParams, t: Triple, y: f64) -> f64 {
    sample_loss(p.score_unchecked(t.subject, t.relation, t.object), y)
}

/// Central difference of the per-sample loss in one scalar parameter.
fn central_diff(p: &ModelParams, t: Triple, y: f64, h: f64, get: impl Fn(&mut ModelParams) -> &mut f64) -> f64 {
    let mut q = p.clone();
    let x0 = *get(&mut q);
    *get(&mut q) = x0 + h;
    let up = loss_at(&q, t, y);
    *get(&mut q) = x0 - h;
    let down = loss_at(&q, t, y);
    (up - down) / (2.0 * h)
}

/// Worst ratio `|analytic - fd| / max(1e-6, 1e-4 |fd|)` over every parameter
/// the sample touches; `<= 1` means the gradient passes.
pub fn gradient_error_ratio(p: &ModelParams, t: Triple, y: f64, h: f64) -> f64 {
    let g = p
        .score_gradients(t.subject, t.relation, t.object, y)
        .expect("valid ids");
    let d = p.dim;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, fd: f64| {
        let tol = (1e-4 * fd.abs()).max(1e-6);
        worst = worst.max((analytic - fd).abs() / tol);
    };
    for i in 0..d {
        let s_an = g.subject_emb[i] + if t.subject == t.object { g.object_emb[i] } else { 0.0 };
        check(s_an, central_diff(p, t, y, h, |q| &mut q.entity_emb[t.subject * d + i]));
        if t.subject != t.object {
            check(
                g.object_emb[i],
                central_diff(p, t, y, h, |q| &mut q.entity_emb[t.object * d + i]),
            );
        }
        check(
            g.rel_diag[i],
            central_diff(p, t, y, h, |q| &mut q.rel_diag[t.relation * d + i]),
        );
        check(
            g.rel_trans[i],
            central_diff(p, t, y, h, |q| &mut q.rel_trans[t.relation * d + i]),
        );
    }
    check(
        g.bias_subject,
        central_diff(p, t, y, h, |q| &mut q.bias_subject[t.subject]),
    );
    check(
        g.bias_object,
        central_diff(p, t, y, h, |q| &mut q.bias_object[t.object]),
    );
    worst
}

/// Filtered rank by materializing and sorting every candidate score.
pub fn brute_force_rank(p: &ModelParams, t: Triple, known_objects: &[usize]) -> usize {
    let target = p.score_unchecked(t.subject, t.relation, t.object);
    let mut scores: Vec<f64> = (0..p.n_entities)
        .filter(|&e| e == t.object || !known_objects.contains(&e))
        .map(|e| p.score_unchecked(t.subject, t.relation, e))
        .collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let first = scores.iter().position(|&s| s == target).unwrap();
    let last = scores.iter().rposition(|&s| s == target).unwrap();
    let tied_others = last - first;
    1 + first + tied_others.div_ceil(2)
}

/// Boolean reachability by repeated squaring of `A ∨ A²`, paths of length ≥ 1.
pub fn closure_by_squaring(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    loop {
        let mut next = r.clone();
        for i in 0..n {
            for k in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        next[i][j] |= r[k][j];
                    }
                }
            }
        }
        if next == r {
            return r;
        }
        r = next;
    }
}

pub fn khs_oracle(n: usize, edges: &[(usize, usize)]) -> Option<f64> {
    let r = closure_by_squaring(n, edges);
    let (mut num, mut den) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            if i != j && r[i][j] {
                den += 1;
                num += (!r[j][i]) as usize;
            }
        }
    }
    (den > 0).then(|| num as f64 / den as f64)
}

/// `(max, sum, count)` of shortest path lengths over reachable ordered pairs
/// `x != y`, by Floyd-Warshall.
pub fn floyd_warshall_stats(n: usize, edges: &[(usize, usize)]) -> Option<(usize, usize, usize)> {
    const INF: usize = usize::MAX / 4;
    let mut dist = vec![vec![INF; n]; n];
    for &(a, b) in edges {
        if a != b {
            dist[a][b] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if dist[i][k] + dist[k][j] < dist[i][j] {
                    dist[i][j] = dist[i][k] + dist[k][j];
                }
            }
        }
    }
    let (mut max, mut sum, mut count) = (0, 0, 0);
    for i in 0..n {
        for j in 0..n {
            if i != j && dist[i][j] < INF {
                max = max.max(dist[i][j]);
                sum += dist[i][j];
                count += 1;
            }
        }
    }
    (count > 0).then_some((max, sum, count))
}

/// Random digraph on `n` nodes with edge probability `p` (self-loops allowed).
pub fn random_digraph<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if rng.gen_bool(p) {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Random DAG: edges only go from lower to higher position in a random order.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> Vec<(usize, usize)> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((order[i], order[j]));
            }
        }
    }
    edges
}

/// One random evaluation instance checked against [`brute_force_rank`]:
/// filtered ranks, metrics, hits nesting and filtered <= raw.
pub fn check_eval_instance<R: Rng>(rng: &mut R) -> Result<(), String> {
    use murp::evaluator::{evaluate, raw_rank, Metrics, TieMode, TruthIndex};
    let n_e = rng.gen_range(2..=10);
    let n_base = rng.gen_range(1..=3);
    let d = rng.gen_range(1..=4);
    let p = match rng.gen_range(0..3) {
        0 => random_params(GeometryKind::Euclidean, n_e, 2 * n_base, d, rng),
        1 => random_params(
            GeometryKind::Poincare(murp::Curvature::new(rng.gen_range(0.5..2.0)).unwrap()),
            n_e,
            2 * n_base,
            d,
            rng,
        ),
        _ => {
            // Coarse biases only: many exact ties.
            let mut p = ModelParams::zeros(GeometryKind::Euclidean, n_e, 2 * n_base, d);
            for e in 0..n_e {
                p.bias_object[e] = rng.gen_range(0..3) as f64 * 0.5;
            }
            p
        }
    };
    let mut all: Vec<Triple> = (0..rng.gen_range(1..=3 * n_e))
        .map(|_| Triple::new(rng.gen_range(0..n_e), rng.gen_range(0..n_base), rng.gen_range(0..n_e)))
        .collect();
    all.sort();
    all.dedup();
    let test: Vec<Triple> = all.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    let truth = TruthIndex::from_triples(&all, n_base);
    let report = evaluate(&p, &test, &truth, n_base, TieMode::Mid).map_err(|e| e.to_string())?;
    if report.ranks.len() != 2 * test.len() {
        return Err(format!("{} ranks for {} test triples", report.ranks.len(), test.len()));
    }
    let mut oracle_ranks = Vec::new();
    for t in &test {
        let reciprocal = Triple::new(t.object, t.relation + n_base, t.subject);
        for q in [*t, reciprocal] {
            // Known objects for the query, straight from the triple list.
            let known: Vec<usize> = all
                .iter()
                .filter_map(|a| {
                    if q.relation < n_base && a.subject == q.subject && a.relation == q.relation {
                        Some(a.object)
                    } else if q.relation >= n_base && a.object == q.subject && a.relation + n_base == q.relation {
                        Some(a.subject)
                    } else {
                        None
                    }
                })
                .filter(|&e| e != q.object)
                .collect();
            let r = brute_force_rank(&p, q, &known);
            let raw = raw_rank(&p, q, TieMode::Mid);
            if r > raw {
                return Err(format!("filtered rank {r} > raw rank {raw} for {q:?}"));
            }
            oracle_ranks.push(r);
        }
    }
    let got: Vec<usize> = report.ranks.iter().map(|q| q.rank).collect();
    if got != oracle_ranks {
        return Err(format!("ranks {got:?} != oracle {oracle_ranks:?}"));
    }
    let n = oracle_ranks.len() as f64;
    let mrr = oracle_ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
    let hits = |k: usize| oracle_ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    let m: Metrics = report.overall;
    if !test.is_empty() && (m.mrr != mrr || m.hits1 != hits(1) || m.hits3 != hits(3) || m.hits10 != hits(10)) {
        return Err(format!("metrics {m:?} != oracle mrr {mrr}"));
    }
    if !(m.hits1 <= m.hits3 && m.hits3 <= m.hits10) {
        return Err(format!("hits not nested: {m:?}"));
    }
    Ok(())
}

/// Khs and path statistics of one random digraph against the matrix oracles.
pub fn check_hierarchy_instance<R: Rng>(rng: &mut R) -> Result<(), String> {
    use murp::dataset::{khs, path_stats, DiGraph};
    let n = rng.gen_range(1..=8);
    let p = rng.gen_range(0.05..0.6);
    let dag = rng.gen_bool(0.3);
    let edges = if dag {
        random_dag(rng, n, p)
    } else {
        random_digraph(rng, n, p)
    };
    let g = DiGraph::from_edges(n, &edges);
    let k = khs(&g);
    let k_oracle = khs_oracle(n, &edges);
    if k != k_oracle {
        return Err(format!("khs {k:?} != oracle {k_oracle:?} for {edges:?}"));
    }
    if let Some(v) = k {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("khs {v} out of range"));
        }
        if dag && v != 1.0 {
            return Err(format!("DAG with khs {v}: {edges:?}"));
        }
    }
    let ps = path_stats(&g);
    match (ps, floyd_warshall_stats(n, &edges)) {
        (None, None) => {}
        (Some(s), Some((max, sum, count))) => {
            if s.max != max || s.pairs != count || s.mean != sum as f64 / count as f64 {
                return Err(format!("path stats {s:?} != oracle ({max}, {sum}/{count})"));
            }
        }
        (a, b) => return Err(format!("path stats {a:?} vs oracle {b:?}")),
    }
    Ok(())
}

/// Complete symmetric digraph on `n >= 2` nodes must score 0.
pub fn complete_symmetric_khs(n: usize) -> Option<f64> {
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    murp::dataset::khs(&murp::dataset::DiGraph::from_edges(n, &edges))
}
