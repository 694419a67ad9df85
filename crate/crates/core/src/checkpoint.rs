//! Binary checkpoint format.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic      4 bytes   "MKGE"
//! version    u32
//! geometry   u32       0 = Euclidean, 1 = Poincaré
//! c          f64       0 for Euclidean
//! n_e        u64
//! n_r        u64       relations including reciprocals
//! d          u64
//! entity_emb      n_e * d f64
//! rel_diag        n_r * d f64
//! rel_trans       n_r * d f64
//! bias_subject    n_e f64
//! bias_object     n_e f64
//! n_e entity names, then n_r relation names, each as u64 byte length + UTF-8
//! ```

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::{KnowledgeGraph, Vocab};
use crate::error::{Error, Result};
use crate::geometry::Curvature;
use crate::model::{GeometryKind, ModelParams};

pub const MAGIC: &[u8; 4] = b"MKGE";
pub const FORMAT_VERSION: u32 = 1;

/// Name used for the reciprocal of base relation `name`.
pub fn reciprocal_name(name: &str) -> String {
    format!("{name}_reciprocal")
}

/// Model parameters plus the vocabularies they were trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub entities: Vocab,
    /// Base relation names; reciprocal ids follow them.
    pub relations: Vocab,
}

impl Checkpoint {
    pub fn new(params: ModelParams, kg: &KnowledgeGraph) -> Result<Self> {
        if params.n_entities != kg.n_entities() || params.n_relations != 2 * kg.n_relations() {
            return Err(Error::Checkpoint(format!(
                "model shape ({} entities, {} relations) does not match graph ({}, 2 x {})",
                params.n_entities,
                params.n_relations,
                kg.n_entities(),
                kg.n_relations()
            )));
        }
        Ok(Self {
            params,
            entities: kg.entities.clone(),
            relations: kg.relations.clone(),
        })
    }

    pub fn n_base_relations(&self) -> usize {
        self.relations.len()
    }

    /// Name of relation id `r`, including reciprocal ids.
    pub fn relation_name(&self, r: usize) -> String {
        let nb = self.n_base_relations();
        if r < nb {
            self.relations.name(r).to_owned()
        } else {
            reciprocal_name(self.relations.name(r - nb))
        }
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let p = &self.params;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let (tag, c) = match p.geometry {
            GeometryKind::Euclidean => (0u32, 0.0),
            GeometryKind::Poincare(c) => (1u32, c.get()),
        };
        w.write_all(&tag.to_le_bytes())?;
        w.write_all(&c.to_le_bytes())?;
        for n in [p.n_entities, p.n_relations, p.dim] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for table in [
            &p.entity_emb,
            &p.rel_diag,
            &p.rel_trans,
            &p.bias_subject,
            &p.bias_object,
        ] {
            for v in table.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        let rel_names = (0..p.n_relations).map(|r| self.relation_name(r));
        for name in self.entities.names().iter().cloned().chain(rel_names) {
            w.write_all(&(name.len() as u64).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let tag = read_u32(&mut r)?;
        let c = read_f64(&mut r)?;
        let geometry = match tag {
            0 => GeometryKind::Euclidean,
            1 => GeometryKind::Poincare(Curvature::new(c)?),
            t => return Err(Error::Checkpoint(format!("unknown geometry tag {t}"))),
        };
        let n_e = read_len(&mut r)?;
        let n_r = read_len(&mut r)?;
        let d = read_len(&mut r)?;
        if n_r % 2 != 0 {
            return Err(Error::Checkpoint(format!("odd relation count {n_r}")));
        }
        let mut p = ModelParams::zeros(geometry, n_e, n_r, d);
        for table in [
            &mut p.entity_emb,
            &mut p.rel_diag,
            &mut p.rel_trans,
            &mut p.bias_subject,
            &mut p.bias_object,
        ] {
            for v in table.iter_mut() {
                *v = read_f64(&mut r)?;
            }
        }
        let mut entities = Vocab::new();
        for _ in 0..n_e {
            let name = read_string(&mut r)?;
            if entities.intern(&name) != entities.len() - 1 {
                return Err(Error::Checkpoint(format!("duplicate entity name {name:?}")));
            }
        }
        let names: Vec<String> = (0..n_r).map(|_| read_string(&mut r)).collect::<Result<_>>()?;
        let relations = Vocab::from_names(names[..n_r / 2].iter().cloned());
        let ck = Self {
            params: p,
            entities,
            relations,
        };
        for (rid, name) in names.iter().enumerate() {
            if *name != ck.relation_name(rid) {
                return Err(Error::Checkpoint(format!(
                    "unexpected relation name {name:?} at id {rid}"
                )));
            }
        }
        let mut tail = [0u8; 1];
        if r.read(&mut tail)? != 0 {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }

    /// Map the graph's vocabularies onto this checkpoint's ids.
    ///
    /// Fails with the first symbol of `kg` the checkpoint does not know.
    pub fn align(&self, kg: &KnowledgeGraph) -> Result<KnowledgeGraph> {
        let ent = |id: usize| {
            let n = kg.entities.name(id);
            self.entities.get(n).ok_or_else(|| Error::UnknownSymbol(n.to_owned()))
        };
        let rel = |id: usize| {
            let n = kg.relations.name(id);
            self.relations.get(n).ok_or_else(|| Error::UnknownSymbol(n.to_owned()))
        };
        let map = |ts: &[crate::dataset::Triple]| -> Result<Vec<_>> {
            ts.iter()
                .map(|t| {
                    Ok(crate::dataset::Triple::new(
                        ent(t.subject)?,
                        rel(t.relation)?,
                        ent(t.object)?,
                    ))
                })
                .collect()
        };
        Ok(KnowledgeGraph {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            train: map(&kg.train)?,
            valid: map(&kg.valid)?,
            test: map(&kg.test)?,
        })
    }
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated file".into())
    } else {
        Error::Io(e)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v)
        .ok()
        .filter(|&v| v < (1 << 40))
        .ok_or_else(|| Error::Checkpoint(format!("implausible size {v}")))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let n = read_len(r)?;
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(Error::Checkpoint("truncated file".into()));
    }
    String::from_utf8(buf).map_err(|_| Error::Checkpoint("vocabulary entry is not UTF-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::NamedTriple;

    fn toy() -> KnowledgeGraph {
        let rows: Vec<NamedTriple> = vec![
            ("a".into(), "r".into(), "b".into()),
            ("b".into(), "q".into(), "c".into()),
        ];
        KnowledgeGraph::from_named(&rows, &[], &[]).unwrap().0
    }

    #[test]
    fn header_layout() {
        let kg = toy();
        let geo = GeometryKind::Poincare(Curvature::new(1.0).unwrap());
        let p = ModelParams::zeros(geo, 3, 4, 2);
        let ck = Checkpoint::new(p, &kg).unwrap();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MKGE");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 1.0);
        assert_eq!(u64::from_le_bytes(buf[20..28].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(buf[28..36].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(buf[36..44].try_into().unwrap()), 2);
        let floats = 3 * 2 + 4 * 2 * 2 + 3 * 2;
        let names = 3 * (8 + 1) + 2 * (8 + 1) + 2 * (8 + 1 + "_reciprocal".len());
        assert_eq!(buf.len(), 44 + 8 * floats + names);
        let back = Checkpoint::read_from(&buf[..]).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.relation_name(3), "q_reciprocal");
    }

    #[test]
    fn rejects_corruption() {
        let kg = toy();
        let ck = Checkpoint::new(ModelParams::zeros(GeometryKind::Euclidean, 3, 4, 2), &kg).unwrap();
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(Checkpoint::read_from(&bad[..]).is_err());
        assert!(Checkpoint::read_from(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(Checkpoint::read_from(&long[..]).is_err());
        assert!(Checkpoint::new(ModelParams::zeros(GeometryKind::Euclidean, 3, 2, 2), &kg).is_err());
    }

    #[test]
    fn align_reports_first_unknown_symbol() {
        let kg = toy();
        let ck = Checkpoint::new(ModelParams::zeros(GeometryKind::Euclidean, 3, 4, 2), &kg).unwrap();
        let rows: Vec<NamedTriple> = vec![("b".into(), "q".into(), "zz".into())];
        let other = KnowledgeGraph::from_named(&rows, &[], &[]).unwrap().0;
        match ck.align(&other) {
            Err(Error::UnknownSymbol(s)) => assert_eq!(s, "zz"),
            r => panic!("{r:?}"),
        }
        let same = ck.align(&kg).unwrap();
        assert_eq!(same, kg);
    }
}
