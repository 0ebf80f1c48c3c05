//! Element kinds a dat or global cell may hold.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Tag for the scalar type stored in a dat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    F64,
    F32,
    I32,
}

impl ScalarKind {
    pub fn size_bytes(self) -> usize {
        match self {
            ScalarKind::F64 => 8,
            ScalarKind::F32 | ScalarKind::I32 => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScalarKind::F64 => "f64",
            ScalarKind::F32 => "f32",
            ScalarKind::I32 => "i32",
        }
    }
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalarKind {
    type Err = String;

    /// Accepts the Rust names as well as the C spellings used by mesh
    /// declarations ("double", "float", "int").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f64" | "double" => Ok(ScalarKind::F64),
            "f32" | "float" => Ok(ScalarKind::F32),
            "i32" | "int" => Ok(ScalarKind::I32),
            other => Err(format!("unknown scalar kind `{other}`")),
        }
    }
}

/// Rust types usable as dat elements.
pub trait Scalar: Copy + Send + Sync + PartialEq + fmt::Debug + 'static {
    const KIND: ScalarKind;
    const ZERO: Self;

    /// Accumulation used by INC arguments. Integers wrap.
    fn accumulate(self, rhs: Self) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    fn wrap(values: Vec<Self>) -> Values;
    fn unwrap_slice(values: &Values) -> Option<&[Self]>;
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::F64;
    const ZERO: Self = 0.0;

    #[inline]
    fn accumulate(self, rhs: Self) -> Self {
        self + rhs
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn wrap(values: Vec<Self>) -> Values {
        Values::F64(values)
    }
    fn unwrap_slice(values: &Values) -> Option<&[Self]> {
        match values {
            Values::F64(v) => Some(v),
            _ => None,
        }
    }
}

impl Scalar for f32 {
    const KIND: ScalarKind = ScalarKind::F32;
    const ZERO: Self = 0.0;

    #[inline]
    fn accumulate(self, rhs: Self) -> Self {
        self + rhs
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn wrap(values: Vec<Self>) -> Values {
        Values::F32(values)
    }
    fn unwrap_slice(values: &Values) -> Option<&[Self]> {
        match values {
            Values::F32(v) => Some(v),
            _ => None,
        }
    }
}

impl Scalar for i32 {
    const KIND: ScalarKind = ScalarKind::I32;
    const ZERO: Self = 0;

    #[inline]
    fn accumulate(self, rhs: Self) -> Self {
        self.wrapping_add(rhs)
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn wrap(values: Vec<Self>) -> Values {
        Values::I32(values)
    }
    fn unwrap_slice(values: &Values) -> Option<&[Self]> {
        match values {
            Values::I32(v) => Some(v),
            _ => None,
        }
    }
}

/// An owned, kind-tagged value array.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    F64(Vec<f64>),
    F32(Vec<f32>),
    I32(Vec<i32>),
}

impl Values {
    pub fn zeros(kind: ScalarKind, len: usize) -> Self {
        match kind {
            ScalarKind::F64 => Values::F64(vec![0.0; len]),
            ScalarKind::F32 => Values::F32(vec![0.0; len]),
            ScalarKind::I32 => Values::I32(vec![0; len]),
        }
    }

    pub fn kind(&self) -> ScalarKind {
        match self {
            Values::F64(_) => ScalarKind::F64,
            Values::F32(_) => ScalarKind::F32,
            Values::I32(_) => ScalarKind::I32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Values::F64(v) => v.len(),
            Values::F32(v) => v.len(),
            Values::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_slice<T: Scalar>(&self) -> Option<&[T]> {
        T::unwrap_slice(self)
    }

    /// Canonical little-endian byte image.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * self.kind().size_bytes());
        match self {
            Values::F64(v) => v.iter().for_each(|x| x.write_le(&mut out)),
            Values::F32(v) => v.iter().for_each(|x| x.write_le(&mut out)),
            Values::I32(v) => v.iter().for_each(|x| x.write_le(&mut out)),
        }
        out
    }
}

impl From<Vec<f64>> for Values {
    fn from(v: Vec<f64>) -> Self {
        Values::F64(v)
    }
}

impl From<Vec<f32>> for Values {
    fn from(v: Vec<f32>) -> Self {
        Values::F32(v)
    }
}

impl From<Vec<i32>> for Values {
    fn from(v: Vec<i32>) -> Self {
        Values::I32(v)
    }
}
