//! Parsers for command-line values. Each returns a message suitable for
//! display on error.

use std::str::FromStr;

use crate::airfoil::Mode;
use crate::executor::ChunkPolicy;

/// `N,M` or `NxM`, both positive.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .or_else(|| s.split_once(['x', 'X']))
        .ok_or_else(|| format!("grid `{s}` is not of the form N,M"))?;
    let dim = |t: &str| -> Result<usize, String> {
        match t.trim().parse::<usize>() {
            Ok(0) => Err(format!("grid `{s}` has a zero dimension")),
            Ok(v) => Ok(v),
            Err(_) => Err(format!("grid `{s}`: `{t}` is not a positive integer")),
        }
    };
    Ok((dim(a)?, dim(b)?))
}

/// Comma-separated, non-empty list.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|t| t.is_empty()) {
        return Err(format!("list `{s}` has an empty item"));
    }
    items
        .into_iter()
        .map(|t| t.parse::<T>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// `barrier`, `dataflow`, or a comma list of them (`both` for both).
pub fn parse_modes(s: &str) -> Result<Vec<Mode>, String> {
    if s == "both" {
        return Ok(vec![Mode::Barrier, Mode::Dataflow]);
    }
    parse_list(s)
}

pub fn parse_chunk(s: &str) -> Result<ChunkPolicy, String> {
    s.parse::<ChunkPolicy>().map_err(|e| e.to_string())
}
