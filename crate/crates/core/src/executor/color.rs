//! Greedy coloring of an iteration set so that elements sharing an indirect
//! target never execute in the same color.

use serde::Serialize;

/// Connectivity used for conflict detection: `table[e * arity + k]` is the
/// `k`-th target of element `e` in the set identified by `target_set`.
#[derive(Debug, Clone, Copy)]
pub struct ConflictMap<'a> {
    pub target_set: u32,
    pub target_size: usize,
    pub arity: usize,
    pub table: &'a [u32],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColorPlan {
    pub colors: Vec<u32>,
    pub num_colors: usize,
}

impl ColorPlan {
    /// A single color covering every element.
    pub fn uniform(set_size: usize) -> Self {
        ColorPlan {
            colors: vec![0; set_size],
            num_colors: 1,
        }
    }

    /// Element indices ordered by (color, index), and the start of each
    /// color's run in that order (`num_colors + 1` offsets).
    pub fn execution_order(&self) -> (Vec<u32>, Vec<usize>) {
        let mut offsets = vec![0usize; self.num_colors + 1];
        for &c in &self.colors {
            offsets[c as usize + 1] += 1;
        }
        for k in 0..self.num_colors {
            offsets[k + 1] += offsets[k];
        }
        let mut cursor = offsets.clone();
        let mut order = vec![0u32; self.colors.len()];
        for (e, &c) in self.colors.iter().enumerate() {
            order[cursor[c as usize]] = e as u32;
            cursor[c as usize] += 1;
        }
        (order, offsets)
    }
}

/// First-fit greedy coloring in ascending element order.
///
/// Two elements conflict when any of their targets coincide. Maps into the
/// same target set share conflict state, since they may address the same
/// storage.
pub fn greedy_color(set_size: usize, maps: &[ConflictMap<'_>]) -> ColorPlan {
    if set_size == 0 {
        return ColorPlan {
            colors: Vec::new(),
            num_colors: 1,
        };
    }
    if maps.is_empty() {
        return ColorPlan::uniform(set_size);
    }

    // one color bitset per target element, per distinct target set
    let mut set_ids: Vec<u32> = maps.iter().map(|m| m.target_set).collect();
    set_ids.sort_unstable();
    set_ids.dedup();
    let mut used: Vec<Vec<Vec<u64>>> = set_ids
        .iter()
        .map(|&s| {
            let size = maps.iter().find(|m| m.target_set == s).map_or(0, |m| m.target_size);
            vec![Vec::new(); size]
        })
        .collect();
    let slot_of = |set: u32| set_ids.binary_search(&set).expect("collected above");

    let mut colors = Vec::with_capacity(set_size);
    let mut forbidden: Vec<u64> = Vec::new();
    let mut num_colors = 1;
    for e in 0..set_size {
        forbidden.clear();
        for m in maps {
            let masks = &used[slot_of(m.target_set)];
            for k in 0..m.arity {
                let t = m.table[e * m.arity + k] as usize;
                let mask = &masks[t];
                if forbidden.len() < mask.len() {
                    forbidden.resize(mask.len(), 0);
                }
                for (f, w) in forbidden.iter_mut().zip(mask) {
                    *f |= *w;
                }
            }
        }
        let color = first_free(&forbidden);
        num_colors = num_colors.max(color + 1);
        let (word, bit) = (color / 64, color % 64);
        for m in maps {
            let masks = &mut used[slot_of(m.target_set)];
            for k in 0..m.arity {
                let t = m.table[e * m.arity + k] as usize;
                let mask = &mut masks[t];
                if mask.len() <= word {
                    mask.resize(word + 1, 0);
                }
                mask[word] |= 1 << bit;
            }
        }
        colors.push(color as u32);
    }
    ColorPlan { colors, num_colors }
}

fn first_free(words: &[u64]) -> usize {
    for (i, w) in words.iter().enumerate() {
        if *w != u64::MAX {
            return i * 64 + (!w).trailing_zeros() as usize;
        }
    }
    words.len() * 64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(table: &[u32], arity: usize, target_size: usize) -> ConflictMap<'_> {
        ConflictMap {
            target_set: 0,
            target_size,
            arity,
            table,
        }
    }

    #[test]
    fn path_of_four_edges_needs_two_colors() {
        let table = [0, 1, 1, 2, 2, 3, 3, 4];
        let plan = greedy_color(4, &[cm(&table, 2, 5)]);
        assert_eq!(plan.colors, vec![0, 1, 0, 1]);
        assert_eq!(plan.num_colors, 2);
    }

    #[test]
    fn star_needs_one_color_per_edge() {
        let table = [0, 1, 0, 2, 0, 3, 0, 4];
        let plan = greedy_color(4, &[cm(&table, 2, 5)]);
        assert_eq!(plan.colors, vec![0, 1, 2, 3]);
        assert_eq!(plan.num_colors, 4);
    }

    #[test]
    fn no_maps_gives_a_single_color() {
        let plan = greedy_color(7, &[]);
        assert_eq!(plan, ColorPlan::uniform(7));
    }

    #[test]
    fn more_than_64_colors() {
        let n = 130;
        let table = vec![0u32; n];
        let plan = greedy_color(n, &[cm(&table, 1, 1)]);
        assert_eq!(plan.num_colors, n);
        assert_eq!(plan.colors[129], 129);
    }

    #[test]
    fn maps_into_different_sets_do_not_conflict() {
        let a = [0u32, 0];
        let b = [1u32, 0];
        let maps = [
            ConflictMap { target_set: 1, target_size: 1, arity: 1, table: &a },
            ConflictMap { target_set: 2, target_size: 2, arity: 1, table: &b },
        ];
        // elements 0 and 1 share target 0 of set 1
        assert_eq!(greedy_color(2, &maps).colors, vec![0, 1]);
        let maps = [
            ConflictMap { target_set: 2, target_size: 2, arity: 1, table: &b },
        ];
        assert_eq!(greedy_color(2, &maps).colors, vec![0, 0]);
    }

    #[test]
    fn execution_order_is_color_major() {
        let plan = ColorPlan {
            colors: vec![1, 0, 1, 0, 2],
            num_colors: 3,
        };
        let (order, offsets) = plan.execution_order();
        assert_eq!(order, vec![1, 3, 0, 2, 4]);
        assert_eq!(offsets, vec![0, 2, 4, 5]);
    }
}
