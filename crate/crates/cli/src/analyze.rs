use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use murp::dataset::{build_hier_subsets, classify_relations, load_dir, resplit, write_dir};

use crate::config::Resolver;
use crate::output::emit;
use crate::{resolve_seed, AnalyzeArgs, SplitArgs};

pub fn analyze(a: AnalyzeArgs, config: Option<&Path>) -> Result<()> {
    let mut r = Resolver::new(config)?;
    let data = r.require_path("data", a.data)?;
    let khs_threshold = r.get("khs-threshold", a.khs_threshold, 0.9)?;
    let min_max_path = r.get("min-max-path", a.min_max_path, 2)?;
    let out = r.path("out", a.out)?;
    r.finish()?;

    let (kg, report) = load_dir(&data).with_context(|| format!("loading {}", data.display()))?;
    report.log();
    let hier = classify_relations(&kg, khs_threshold, min_max_path);
    info!(
        "{} of {} relations are hierarchical",
        hier.hierarchical().count(),
        hier.relations.len()
    );
    emit(out.as_deref(), &(r.header("analyze") + &hier.to_tsv()))
}

fn parse_proportions(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad proportion {p:?}")))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        bail!("no proportions given");
    }
    Ok(v)
}

pub fn split(a: SplitArgs, config: Option<&Path>) -> Result<()> {
    let mut r = Resolver::new(config)?;
    let data = r.require_path("data", a.data)?;
    let out = r.require_path("out", a.out)?;
    let proportions = parse_proportions(&r.get("proportions", a.proportions, "1,0.75,0.5,0.25".to_string())?)?;
    let khs_threshold = r.get("khs-threshold", a.khs_threshold, 0.9)?;
    let min_max_path = r.get("min-max-path", a.min_max_path, 2)?;
    let do_resplit = r.get("resplit", a.resplit, false)?;
    let sizes = if do_resplit {
        Some((
            r.get("valid-size", a.valid_size, 10_000)?,
            r.get("test-size", a.test_size, 10_000)?,
        ))
    } else {
        if r.is_set("valid-size", &a.valid_size) || r.is_set("test-size", &a.test_size) {
            bail!("--valid-size and --test-size need --resplit");
        }
        None
    };
    let seed = resolve_seed(&mut r, a.seed)?;
    r.finish()?;

    if out.exists() && fs::read_dir(&out)?.next().is_some() {
        bail!("output directory {} is not empty", out.display());
    }
    let (mut kg, report) = load_dir(&data).with_context(|| format!("loading {}", data.display()))?;
    report.log();
    if let Some((valid, test)) = sizes {
        kg = resplit(&kg, valid, test, seed)?;
    }
    let hier = classify_relations(&kg, khs_threshold, min_max_path);
    let subsets = build_hier_subsets(&kg, &hier, &proportions, seed)?;

    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(parent)?;
    let tmp = tempfile::Builder::new().prefix(".murp-split").tempdir_in(parent)?;
    let header = r.header("split");
    if sizes.is_some() {
        write_dir(&tmp.path().join("full"), &kg)?;
    }
    fs::write(tmp.path().join("hierarchy.tsv"), header.clone() + &hier.to_tsv())?;
    let mut manifest = header + "subset\tproportion\trelation\tkind\n";
    for s in &subsets {
        let tag = s.tag();
        write_dir(&tmp.path().join(&tag), &s.graph)?;
        info!(
            "{tag}: {} hierarchical + {} other relations, {} train triples",
            s.hierarchical.len(),
            s.non_hierarchical.len(),
            s.graph.train.len()
        );
        for (names, kind) in [
            (&s.hierarchical, "hierarchical"),
            (&s.non_hierarchical, "non_hierarchical"),
        ] {
            for name in names {
                manifest.push_str(&format!("{tag}\t{}\t{name}\t{kind}\n", s.proportion));
            }
        }
    }
    fs::write(tmp.path().join("manifest.tsv"), manifest)?;
    if out.exists() {
        fs::remove_dir(&out)?;
    }
    fs::rename(tmp.keep(), &out).with_context(|| format!("moving results to {}", out.display()))?;
    Ok(())
}
