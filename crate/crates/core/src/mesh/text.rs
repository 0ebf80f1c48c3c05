//! Plain-text mesh files.
//!
//! ```text
//! # comments run to end of line; tokens are whitespace separated
//! sets 2
//! maps 1
//! dats 1
//! set nodes 3
//! set edges 2
//! map e2n edges nodes 2
//! 0 1
//! 1 2
//! dat x nodes 1 f64
//! 1.0 2.0 3.0
//! ```
//!
//! The three header lines come first and give the number of each entity.
//! Sets come next, then maps, then dats. A map line
//! (`map <name> <from> <to> <arity>`) is followed by `from.size * arity`
//! target indices; a dat line (`dat <name> <set> <dim> <kind>`) by
//! `set.size * dim` values. Kinds are `f64`, `f32` and `i32`. Names are
//! unique per entity type and may not contain whitespace or `#`. Line breaks
//! inside a table carry no meaning; the dumper writes one element per line.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::error::Error as MeshError;
use crate::runtime::Runtime;
use crate::scalar::{ScalarKind, Values};

use super::{MeshDat, MeshMap, MeshSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("unexpected end of input, expected {expected}")]
    UnexpectedEof { expected: String },

    #[error("header declares {declared} {what}, file has {found}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        found: usize,
    },

    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetDecl {
    pub name: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapDecl {
    pub name: String,
    pub from: String,
    pub to: String,
    pub arity: usize,
    pub table: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatDecl {
    pub name: String,
    pub set: String,
    pub dim: usize,
    pub values: Values,
}

/// A parsed, fully validated mesh file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshFile {
    pub sets: Vec<SetDecl>,
    pub maps: Vec<MapDecl>,
    pub dats: Vec<DatDecl>,
}

/// Handles created by [`MeshFile::load`], by name.
#[derive(Debug, Clone, Default)]
pub struct LoadedMesh {
    pub sets: HashMap<String, MeshSet>,
    pub maps: HashMap<String, MeshMap>,
    pub dats: HashMap<String, MeshDat>,
}

struct Tokens<'a> {
    inner: Box<dyn Iterator<Item = (usize, &'a str)> + 'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn new(src: &'a str) -> Self {
        let inner = src.lines().enumerate().flat_map(|(i, l)| {
            let l = l.split('#').next().unwrap_or("");
            l.split_whitespace().map(move |t| (i + 1, t))
        });
        Tokens {
            inner: Box::new(inner),
            line: 0,
        }
    }

    fn next(&mut self, expected: &str) -> Result<&'a str, TextError> {
        match self.inner.next() {
            Some((line, tok)) => {
                self.line = line;
                Ok(tok)
            }
            None => Err(TextError::UnexpectedEof {
                expected: expected.to_owned(),
            }),
        }
    }

    fn err(&self, message: impl Into<String>) -> TextError {
        TextError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), TextError> {
        let tok = self.next(kw)?;
        if tok == kw {
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`, found `{tok}`")))
        }
    }

    fn parse<T: FromStr>(&mut self, what: &str) -> Result<T, TextError> {
        let tok = self.next(what)?;
        tok.parse()
            .map_err(|_| self.err(format!("invalid {what} `{tok}`")))
    }

    fn name(&mut self, what: &str) -> Result<&'a str, TextError> {
        self.next(what)
    }
}

fn parse_values<T: FromStr>(tokens: &mut Tokens<'_>, n: usize, what: &str) -> Result<Vec<T>, TextError> {
    // The count comes from untrusted input; grow as tokens arrive.
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        out.push(tokens.parse(what)?);
    }
    Ok(out)
}

/// Parses and validates a mesh file.
pub fn parse_mesh(src: &str) -> Result<MeshFile, TextError> {
    let mut t = Tokens::new(src);
    let mut counts = [0usize; 3];
    for (count, kw) in counts.iter_mut().zip(["sets", "maps", "dats"]) {
        t.keyword(kw)?;
        *count = t.parse("count")?;
    }

    let mut file = MeshFile::default();
    let mut set_sizes: HashMap<&str, usize> = HashMap::new();
    for _ in 0..counts[0] {
        t.keyword("set")?;
        let name = t.name("set name")?;
        let size: usize = t.parse("set size")?;
        if set_sizes.insert(name, size).is_some() {
            return Err(t.err(format!("duplicate set `{name}`")));
        }
        file.sets.push(SetDecl {
            name: name.to_owned(),
            size,
        });
    }

    let lookup = |t: &Tokens<'_>, sizes: &HashMap<&str, usize>, name: &str| {
        sizes
            .get(name)
            .copied()
            .ok_or_else(|| t.err(format!("unknown set `{name}`")))
    };

    let mut map_names = HashMap::new();
    for _ in 0..counts[1] {
        t.keyword("map")?;
        let name = t.name("map name")?;
        let from = t.name("source set")?;
        let to = t.name("target set")?;
        let arity: usize = t.parse("arity")?;
        let from_size = lookup(&t, &set_sizes, from)?;
        let to_size = lookup(&t, &set_sizes, to)?;
        if map_names.insert(name, ()).is_some() {
            return Err(t.err(format!("duplicate map `{name}`")));
        }
        if arity == 0 {
            return Err(t.err(format!("map `{name}` has arity 0")));
        }
        let n = from_size
            .checked_mul(arity)
            .ok_or_else(|| t.err(format!("map `{name}` is too large")))?;
        let table: Vec<u32> = parse_values(&mut t, n, "map entry")?;
        if let Some(bad) = table.iter().find(|&&v| v as usize >= to_size) {
            return Err(t.err(format!("map `{name}` entry {bad} outside `{to}` (size {to_size})")));
        }
        file.maps.push(MapDecl {
            name: name.to_owned(),
            from: from.to_owned(),
            to: to.to_owned(),
            arity,
            table,
        });
    }

    let mut dat_names = HashMap::new();
    for _ in 0..counts[2] {
        t.keyword("dat")?;
        let name = t.name("dat name")?;
        let set = t.name("set")?;
        let dim: usize = t.parse("dim")?;
        let kind: ScalarKind = t.parse("kind")?;
        let size = lookup(&t, &set_sizes, set)?;
        if dat_names.insert(name, ()).is_some() {
            return Err(t.err(format!("duplicate dat `{name}`")));
        }
        if dim == 0 {
            return Err(t.err(format!("dat `{name}` has dim 0")));
        }
        let n = size
            .checked_mul(dim)
            .ok_or_else(|| t.err(format!("dat `{name}` is too large")))?;
        let values = match kind {
            ScalarKind::F64 => Values::F64(parse_values(&mut t, n, "f64 value")?),
            ScalarKind::F32 => Values::F32(parse_values(&mut t, n, "f32 value")?),
            ScalarKind::I32 => Values::I32(parse_values(&mut t, n, "i32 value")?),
        };
        file.dats.push(DatDecl {
            name: name.to_owned(),
            set: set.to_owned(),
            dim,
            values,
        });
    }

    if let Ok(tok) = t.next("") {
        return Err(t.err(format!("trailing token `{tok}`")));
    }
    Ok(file)
}

fn write_rows<T: std::fmt::Debug>(out: &mut String, values: &[T], width: usize) {
    for row in values.chunks(width.max(1)) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
}

impl MeshFile {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sets {}", self.sets.len());
        let _ = writeln!(out, "maps {}", self.maps.len());
        let _ = writeln!(out, "dats {}", self.dats.len());
        for s in &self.sets {
            let _ = writeln!(out, "set {} {}", s.name, s.size);
        }
        for m in &self.maps {
            let _ = writeln!(out, "map {} {} {} {}", m.name, m.from, m.to, m.arity);
            write_rows(&mut out, &m.table, m.arity);
        }
        for d in &self.dats {
            let _ = writeln!(out, "dat {} {} {} {}", d.name, d.set, d.dim, d.values.kind());
            match &d.values {
                Values::F64(v) => write_rows(&mut out, v, d.dim),
                Values::F32(v) => write_rows(&mut out, v, d.dim),
                Values::I32(v) => write_rows(&mut out, v, d.dim),
            }
        }
        out
    }

    /// Declares everything in `rt`.
    pub fn load(&self, rt: &mut Runtime) -> Result<LoadedMesh, TextError> {
        let mut loaded = LoadedMesh::default();
        for s in &self.sets {
            loaded.sets.insert(s.name.clone(), rt.decl_set(s.size, &s.name));
        }
        let set = |name: &str, loaded: &LoadedMesh| {
            loaded
                .sets
                .get(name)
                .copied()
                .ok_or_else(|| MeshError::UnknownHandle(format!("set `{name}`")))
        };
        for m in &self.maps {
            let handle = rt.decl_map(set(&m.from, &loaded)?, set(&m.to, &loaded)?, m.arity, &m.table, &m.name)?;
            loaded.maps.insert(m.name.clone(), handle);
        }
        for d in &self.dats {
            let handle = rt.decl_dat(set(&d.set, &loaded)?, d.dim, d.values.clone(), &d.name)?;
            loaded.dats.insert(d.name.clone(), handle);
        }
        Ok(loaded)
    }

    /// Captures the given declarations, waiting for pending writes to the
    /// dats. Sets referenced by the maps and dats must be listed in `sets`.
    pub fn capture(rt: &Runtime, sets: &[MeshSet], maps: &[MeshMap], dats: &[MeshDat]) -> Result<Self, TextError> {
        let set_name = |s: MeshSet| -> Result<String, TextError> {
            if !sets.contains(&s) {
                return Err(MeshError::UnknownHandle(format!("set {} not captured", s.id)).into());
            }
            Ok(rt.set_name(s)?.to_owned())
        };
        let mut file = MeshFile::default();
        for &s in sets {
            file.sets.push(SetDecl {
                name: set_name(s)?,
                size: s.size,
            });
        }
        for &m in maps {
            file.maps.push(MapDecl {
                name: rt.map_name(m)?.to_owned(),
                from: set_name(m.from)?,
                to: set_name(m.to)?,
                arity: m.arity,
                table: rt.map_table(m)?.to_vec(),
            });
        }
        for &d in dats {
            file.dats.push(DatDecl {
                name: rt.dat_name(d)?.to_owned(),
                set: set_name(d.set)?,
                dim: d.dim,
                values: rt.read_dat(d)?,
            });
        }
        Ok(file)
    }

    /// Captures every declaration of `rt`.
    pub fn capture_all(rt: &Runtime) -> Result<Self, TextError> {
        let reg = rt.registry();
        let sets: Vec<MeshSet> = (0..reg.sets.len())
            .map(|i| MeshSet {
                rt: reg.rt(),
                id: i as u32,
                size: reg.sets[i].size,
            })
            .collect();
        let maps: Vec<MeshMap> = reg.maps.iter().map(|m| m.handle).collect();
        let dats: Vec<MeshDat> = reg.dats.iter().map(|d| d.handle).collect();
        MeshFile::capture(rt, &sets, &maps, &dats)
    }
}
