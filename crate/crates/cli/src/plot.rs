//! Tab-separated plot data: 2D projections and bias against norm.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use murp::checkpoint::reciprocal_name;
use murp::dataset::load_dir;
use murp::geometry::{dot, norm};
use murp::{Checkpoint, ModelParams, TruthIndex};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Resolver;
use crate::output::emit;
use crate::{BiasNormsArgs, ProjectArgs};

/// Coordinates of `v` in the plane spanned by `reference` and the part of `v`
/// orthogonal to it: `x` along the reference, `y >= 0` for the remainder.
pub fn project(reference: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    let n = norm(reference);
    if n == 0.0 {
        bail!("reference embedding has zero norm; the projection is undefined");
    }
    let x = dot(reference, v) / n;
    let y = (dot(v, v) - x * x).max(0.0).sqrt();
    Ok((x, y))
}

/// Relation-adjusted subject and objects, as compared by the score.
fn transformed(p: &ModelParams, s: usize, r: usize, objects: &[usize]) -> (Vec<f64>, Vec<Vec<f64>>) {
    match p.geometry.ball() {
        None => (
            p.entity(s).iter().zip(p.diag(r)).map(|(e, m)| e * m).collect(),
            objects
                .iter()
                .map(|&o| p.entity(o).iter().zip(p.translation(r)).map(|(e, t)| e + t).collect())
                .collect(),
        ),
        Some(ball) => (
            ball.mobius_matvec(p.diag(r), p.entity(s)),
            objects
                .iter()
                .map(|&o| ball.mobius_add(p.entity(o), p.translation(r)))
                .collect(),
        ),
    }
}

fn relation_id(ckpt: &Checkpoint, name: &str) -> Result<usize> {
    let nb = ckpt.n_base_relations();
    if let Some(r) = ckpt.relations.get(name) {
        return Ok(r);
    }
    (0..nb)
        .find(|&r| reciprocal_name(ckpt.relations.name(r)) == name)
        .map(|r| r + nb)
        .ok_or_else(|| anyhow!("unknown relation {name:?}"))
}

pub fn project2d(a: ProjectArgs, config: Option<&Path>) -> Result<()> {
    let mut r = Resolver::new(config)?;
    let ckpt_path = r.require_path("checkpoint", a.checkpoint)?;
    let subject = r
        .opt("subject", a.subject)?
        .ok_or_else(|| anyhow!("--subject is required"))?;
    r.record("subject", &subject);
    let relation = r
        .opt("relation", a.relation)?
        .ok_or_else(|| anyhow!("--relation is required"))?;
    r.record("relation", &relation);
    let objects: Option<String> = r.opt("objects", a.objects)?;
    let sample: Option<usize> = r.opt("sample", a.sample)?;
    let seed = match (&objects, sample) {
        (Some(list), None) => {
            r.record("objects", list);
            0
        }
        (None, Some(n)) => {
            r.record("sample", n);
            r.get("seed", a.seed, 0)?
        }
        _ => bail!("give exactly one of --objects and --sample"),
    };
    let data = r.path("data", a.data)?;
    let out = r.path("out", a.out)?;
    r.finish()?;

    let ckpt = Checkpoint::load(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;
    let p = &ckpt.params;
    let entity = |name: &str| {
        ckpt.entities
            .get(name)
            .ok_or_else(|| anyhow!("unknown entity {name:?}"))
    };
    let s = entity(&subject)?;
    let rel = relation_id(&ckpt, &relation)?;
    let objs: Vec<usize> = match (objects, sample) {
        (Some(list), _) => list.split(',').map(|n| entity(n.trim())).collect::<Result<_>>()?,
        (None, Some(n)) => {
            let pool: Vec<usize> = (0..p.n_entities).filter(|&e| e != s).collect();
            if n > pool.len() {
                bail!("cannot sample {n} objects from {} other entities", pool.len());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picks = index::sample(&mut rng, pool.len(), n).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| pool[i]).collect()
        }
        (None, None) => unreachable!(),
    };
    let truth = match &data {
        Some(dir) => {
            let (kg, report) = load_dir(dir).with_context(|| format!("loading {}", dir.display()))?;
            report.log();
            Some(TruthIndex::from_graph(&ckpt.align(&kg)?))
        }
        None => None,
    };

    let mut text = r.header("project2d");
    text.push_str("stage\trole\tentity\tx\ty\tnorm\tscore\tprobability\tpredicted\tactual\tclass\n");
    let (subject_after, objects_after) = transformed(p, s, rel, &objs);
    let objects_before: Vec<Vec<f64>> = objs.iter().map(|&o| p.entity(o).to_vec()).collect();
    for (stage, reference, points) in [
        ("before", p.entity(s).to_vec(), objects_before),
        ("after", subject_after, objects_after),
    ] {
        let n = norm(&reference);
        if n == 0.0 {
            bail!("{stage}: subject {subject:?} has a zero-norm embedding; the projection is undefined");
        }
        text.push_str(&format!("{stage}\tsubject\t{subject}\t{n}\t0\t{n}\t-\t-\t-\t-\t-\n"));
        for (&o, v) in objs.iter().zip(&points) {
            let (x, y) = project(&reference, v)?;
            let score = p.score(s, rel, o)?;
            let predicted = score.probability() >= 0.5;
            let (actual, class) = match &truth {
                Some(t) => {
                    let actual = t.contains(s, rel, o);
                    let class = match (predicted, actual) {
                        (true, true) => "TP",
                        (true, false) => "FP",
                        (false, false) => "TN",
                        (false, true) => "FN",
                    };
                    (actual.to_string(), class)
                }
                None => ("-".to_string(), "-"),
            };
            text.push_str(&format!(
                "{stage}\tobject\t{}\t{x}\t{y}\t{}\t{}\t{}\t{predicted}\t{actual}\t{class}\n",
                ckpt.entities.name(o),
                norm(v),
                score.value(),
                score.probability()
            ));
        }
    }
    emit(out.as_deref(), &text)
}

/// Sample Pearson correlation; `None` when either side has no variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn bias_norms(a: BiasNormsArgs, config: Option<&Path>) -> Result<()> {
    let mut r = Resolver::new(config)?;
    let ckpt_path = r.require_path("checkpoint", a.checkpoint)?;
    let out = r.path("out", a.out)?;
    r.finish()?;

    let ckpt = Checkpoint::load(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;
    let p = &ckpt.params;
    let norms: Vec<f64> = (0..p.n_entities).map(|e| norm(p.entity(e))).collect();
    let mut text = r.header("bias-norms");
    text.push_str("entity\tnorm\tbias_subject\tbias_object\n");
    for (e, n) in norms.iter().enumerate() {
        text.push_str(&format!(
            "{}\t{n}\t{}\t{}\n",
            ckpt.entities.name(e),
            p.bias_subject[e],
            p.bias_object[e]
        ));
    }
    match pearson(&norms, &p.bias_subject) {
        Some(c) => text.push_str(&format!("# pearson(norm, bias_subject)={c}\n")),
        None => text.push_str("# pearson(norm, bias_subject)=undefined\n"),
    }
    emit(out.as_deref(), &text)
}
