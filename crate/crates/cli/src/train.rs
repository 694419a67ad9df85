use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use murp::dataset::load_dir;
use murp::trainer::TraceRow;
use murp::{Checkpoint, Curvature, GeometryKind, TrainConfig};

use crate::config::Resolver;
use crate::output::write_atomic;
use crate::{resolve_seed, GeometryName, TrainArgs};

pub fn run(a: TrainArgs, config: Option<&Path>) -> Result<()> {
    let mut r = Resolver::new(config)?;
    let data = r.require_path("data", a.data)?;
    let out = r.require_path("out", a.out)?;
    let d = TrainConfig::default();

    let geometry = match r.get("geometry", a.geometry, GeometryName::Poincare)? {
        GeometryName::Euclidean => {
            if r.is_set("c", &a.c) {
                bail!("--c only applies to --geometry poincare");
            }
            GeometryKind::Euclidean
        }
        GeometryName::Poincare => GeometryKind::Poincare(Curvature::new(r.get("c", a.c, 1.0)?)?),
    };
    let cfg = TrainConfig {
        geometry,
        dim: r.get("dim", a.dim, d.dim)?,
        learning_rate: r.get("lr", a.lr, d.learning_rate)?,
        batch_size: r.get("batch", a.batch, d.batch_size)?,
        negatives: r.get("neg", a.neg, d.negatives)?,
        epochs: r.get("epochs", a.epochs, d.epochs)?,
        eval_every: r.get("eval-every", a.eval_every, d.eval_every)?,
        init_scale: r.get("init-scale", a.init_scale, d.init_scale)?,
        workers: r.get("workers", a.workers, d.workers)?,
        train_eval_limit: r.get("train-eval-limit", a.train_eval_limit, d.train_eval_limit)?,
        ties: r.get("ties", a.ties, d.ties)?,
        seed: resolve_seed(&mut r, a.seed)?,
    };
    r.finish()?;
    let header = r.header("train");
    for line in header.lines() {
        info!("{line}");
    }

    let (kg, report) = load_dir(&data).with_context(|| format!("loading {}", data.display()))?;
    report.log();
    info!(
        "{} entities, {} relations, {}/{}/{} train/valid/test triples",
        kg.n_entities(),
        kg.n_relations(),
        kg.train.len(),
        kg.valid.len(),
        kg.test.len()
    );

    let outcome = murp::train(&kg, &cfg, &mut |row: &TraceRow| {
        info!(
            "epoch {} {} mrr {:.4} hits@10 {:.4} loss {:.5}",
            row.epoch, row.split, row.metrics.mrr, row.metrics.hits10, row.mean_loss
        );
    })?;

    let mut ckpt = Vec::new();
    Checkpoint::new(outcome.best, &kg)?.write_to(&mut ckpt)?;
    write_atomic(&out.join("model.ckpt"), &ckpt)?;

    let mut trace = header;
    trace.push_str(TraceRow::TSV_HEADER);
    trace.push('\n');
    for row in &outcome.trace {
        trace.push_str(&row.to_tsv());
        trace.push('\n');
    }
    write_atomic(&out.join("trace.tsv"), trace.as_bytes())?;

    println!("seed\t{}", cfg.seed);
    println!("best_epoch\t{}", outcome.best_epoch);
    match outcome.best_valid {
        Some(m) => println!("best_valid_mrr\t{}", m.mrr),
        None => println!("best_valid_mrr\t-\t(no validation triples)"),
    }
    Ok(())
}
