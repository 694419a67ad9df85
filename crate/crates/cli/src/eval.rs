use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use murp::dataset::{classify_relations, load_dir};
use murp::{evaluate, Checkpoint, Metrics, TieMode, TruthIndex};

use crate::config::Resolver;
use crate::output::emit;
use crate::EvalArgs;

pub fn run(a: EvalArgs, config: Option<&Path>) -> Result<()> {
    let mut r = Resolver::new(config)?;
    let ckpt_path = r.require_path("checkpoint", a.checkpoint)?;
    let data = r.require_path("data", a.data)?;
    let split = r.get("split", a.split, "test".to_string())?;
    let ties = r.get("ties", a.ties, TieMode::Mid)?;
    let per_relation = r.get("per-relation", a.per_relation, false)?;
    let out = r.path("out", a.out)?;
    r.finish()?;

    let ckpt = Checkpoint::load(&ckpt_path).with_context(|| format!("loading {}", ckpt_path.display()))?;
    let (kg, report) = load_dir(&data).with_context(|| format!("loading {}", data.display()))?;
    report.log();
    let kg = ckpt
        .align(&kg)
        .context("dataset does not match the checkpoint vocabulary")?;
    let triples = match split.as_str() {
        "train" => &kg.train,
        "valid" => &kg.valid,
        "test" => &kg.test,
        other => bail!("unknown split {other:?}; expected train, valid or test"),
    };
    if triples.is_empty() {
        bail!("the {split} split is empty");
    }
    let truth = TruthIndex::from_graph(&kg);
    let ranking = evaluate(&ckpt.params, triples, &truth, kg.n_relations(), ties)?;
    info!("{split} mrr {}", ranking.overall.mrr);

    let mut text = r.header("eval");
    text.push_str("relation\tcount\tmrr\thits@1\thits@3\thits@10\tkhs\tmax_path\tavg_path\n");
    push_row(&mut text, "ALL", &ranking.overall, ["-".into(), "-".into(), "-".into()]);
    if per_relation {
        let hier = classify_relations(&kg, 0.0, 0);
        for (rel, m) in ranking.per_relation.iter().enumerate() {
            if m.count == 0 {
                continue;
            }
            let h = &hier.relations[rel];
            let stats = [
                h.khs.map_or("-".into(), |v| format!("{v:.4}")),
                h.max_path.map_or("-".into(), |v| v.to_string()),
                h.avg_path.map_or("-".into(), |v| format!("{v:.4}")),
            ];
            push_row(&mut text, kg.relations.name(rel), m, stats);
        }
    }
    emit(out.as_deref(), &text)?;
    if out.is_some() {
        println!("mrr\t{}", ranking.overall.mrr);
    }
    Ok(())
}

// Metrics at full precision so they compare exactly with the trainer's.
fn push_row(text: &mut String, name: &str, m: &Metrics, stats: [String; 3]) {
    text.push_str(&format!(
        "{name}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        m.count,
        m.mrr,
        m.hits1,
        m.hits3,
        m.hits10,
        stats.join("\t")
    ));
}
