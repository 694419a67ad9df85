//! Triple files, vocabularies and the in-memory knowledge graph.

mod hierarchy;
mod split;

pub use hierarchy::{
    classify_relations, khs, path_stats, DiGraph, HierarchyReport, PathStats, RelationHierarchy, DEFAULT_KHS_THRESHOLD,
    DEFAULT_MIN_MAX_PATH,
};
pub use split::{build_hier_subsets, resplit, HierSubset};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// An integer-coded `(subject, relation, object)` fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: usize,
    pub relation: usize,
    pub object: usize,
}

impl Triple {
    pub const fn new(subject: usize, relation: usize, object: usize) -> Self {
        Self {
            subject,
            relation,
            object,
        }
    }
}

impl From<(usize, usize, usize)> for Triple {
    fn from((s, r, o): (usize, usize, usize)) -> Self {
        Self::new(s, r, o)
    }
}

/// Bidirectional string ↔ id map; ids are dense and assigned in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Self::new();
        for n in names {
            v.intern(&n.into());
        }
        v
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// Non-fatal findings from loading a graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    /// Lines dropped because the triple already appeared (same or earlier split).
    pub duplicates: Vec<(Split, usize)>,
    /// Valid/test symbols that never occur in train: (split, line, symbol).
    pub unseen: Vec<(Split, usize, String)>,
}

impl LoadReport {
    pub fn log(&self) {
        if !self.duplicates.is_empty() {
            log::warn!("dropped {} duplicate triple(s)", self.duplicates.len());
            for (split, line) in self.duplicates.iter().take(5) {
                log::warn!("  duplicate at {split} line {line}");
            }
        }
        if !self.unseen.is_empty() {
            log::warn!("{} valid/test symbol(s) do not occur in train", self.unseen.len());
            for (split, line, sym) in self.unseen.iter().take(5) {
                log::warn!("  {split} line {line}: {sym:?}");
            }
        }
    }
}

/// A knowledge graph with train/valid/test splits over shared vocabularies.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

/// A named triple as read from a file.
pub type NamedTriple = (String, String, String);

impl KnowledgeGraph {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    /// Number of base (non-reciprocal) relations.
    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn named(&self, t: &Triple) -> NamedTriple {
        (
            self.entities.name(t.subject).to_owned(),
            self.relations.name(t.relation).to_owned(),
            self.entities.name(t.object).to_owned(),
        )
    }

    /// Build from named triples; ids follow first appearance in train, valid, test.
    ///
    /// Duplicates inside a split, and valid/test triples already present in an
    /// earlier split, are dropped and reported.
    pub fn from_named(
        train: &[NamedTriple],
        valid: &[NamedTriple],
        test: &[NamedTriple],
    ) -> Result<(Self, LoadReport)> {
        if train.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let mut kg = KnowledgeGraph::default();
        let mut report = LoadReport::default();
        let mut seen: HashSet<Triple> = HashSet::new();
        // Ids below these bounds were introduced by the train split.
        let mut train_entities = usize::MAX;
        let mut train_relations = usize::MAX;
        for (split, rows) in [(Split::Train, train), (Split::Valid, valid), (Split::Test, test)] {
            let mut out = Vec::with_capacity(rows.len());
            for (i, (s, r, o)) in rows.iter().enumerate() {
                if split != Split::Train {
                    let ent_known = |n: &str| kg.entities.get(n).is_some_and(|id| id < train_entities);
                    let rel_known = kg.relations.get(r).is_some_and(|id| id < train_relations);
                    for (sym, known) in [(s, ent_known(s)), (r, rel_known), (o, ent_known(o))] {
                        if !known {
                            report.unseen.push((split, i + 1, sym.clone()));
                        }
                    }
                }
                let t = Triple::new(kg.entities.intern(s), kg.relations.intern(r), kg.entities.intern(o));
                if !seen.insert(t) {
                    report.duplicates.push((split, i + 1));
                    continue;
                }
                out.push(t);
            }
            match split {
                Split::Train => {
                    kg.train = out;
                    train_entities = kg.entities.len();
                    train_relations = kg.relations.len();
                }
                Split::Valid => kg.valid = out,
                Split::Test => kg.test = out,
            }
        }
        Ok((kg, report))
    }

    /// Re-intern a set of splits given as triples of this graph.
    pub fn rebuild(&self, train: &[Triple], valid: &[Triple], test: &[Triple]) -> Result<Self> {
        let named = |ts: &[Triple]| ts.iter().map(|t| self.named(t)).collect::<Vec<_>>();
        let (kg, _) = Self::from_named(&named(train), &named(valid), &named(test))?;
        Ok(kg)
    }

    /// Triples of `split` restricted to relation `r`.
    pub fn relation_edges(&self, split: Split, r: usize) -> Vec<(usize, usize)> {
        self.split(split)
            .iter()
            .filter(|t| t.relation == r)
            .map(|t| (t.subject, t.object))
            .collect()
    }
}

/// Read one triple file: `subject<TAB>relation<TAB>object` per line.
pub fn read_triples(path: &Path) -> Result<Vec<NamedTriple>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        out.push((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned()));
    }
    Ok(out)
}

/// Load the three splits of a graph.
pub fn load_graph(train: &Path, valid: &Path, test: &Path) -> Result<(KnowledgeGraph, LoadReport)> {
    let tr = read_triples(train)?;
    let va = read_triples(valid)?;
    let te = read_triples(test)?;
    KnowledgeGraph::from_named(&tr, &va, &te)
}

/// Paths of `train.txt`, `valid.txt` and `test.txt` under `dir`.
pub fn split_paths(dir: &Path) -> [PathBuf; 3] {
    [dir.join("train.txt"), dir.join("valid.txt"), dir.join("test.txt")]
}

/// Load a dataset directory containing `train.txt`, `valid.txt`, `test.txt`.
pub fn load_dir(dir: &Path) -> Result<(KnowledgeGraph, LoadReport)> {
    let [tr, va, te] = split_paths(dir);
    for p in [&tr, &va, &te] {
        if !p.is_file() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("missing dataset file {}", p.display()),
            )));
        }
    }
    load_graph(&tr, &va, &te)
}

/// Write triples in the input file format.
pub fn write_triples<W: Write>(w: W, kg: &KnowledgeGraph, triples: &[Triple]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for t in triples {
        writeln!(
            w,
            "{}\t{}\t{}",
            kg.entities.name(t.subject),
            kg.relations.name(t.relation),
            kg.entities.name(t.object)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write a graph as a dataset directory.
pub fn write_dir(dir: &Path, kg: &KnowledgeGraph) -> Result<()> {
    fs::create_dir_all(dir)?;
    let [tr, va, te] = split_paths(dir);
    write_triples(fs::File::create(tr)?, kg, &kg.train)?;
    write_triples(fs::File::create(va)?, kg, &kg.valid)?;
    write_triples(fs::File::create(te)?, kg, &kg.test)?;
    Ok(())
}
