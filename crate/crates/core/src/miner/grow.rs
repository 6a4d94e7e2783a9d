//! Seed selection and greedy minimum-variance growth.

use std::collections::BTreeSet;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::model::{NodeGrid, NodeKey};

use super::kdtree::KdTree;
use super::MiningInput;

/// Relative slack under which two variances count as equal.
pub const TIE_TOL: f64 = 1e-10;

#[inline]
pub fn within_tie(value: f64, min: f64) -> bool {
    value <= min + TIE_TOL * (1.0 + min.abs())
}

/// Aggregation order and recorded values of one growth run.
///
/// `v[0]` is the semantic distance of the seed pair; `v[t]` for `t >= 1` is
/// the embedding variance after `order[t + 1]` joined the pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTrace {
    pub order: Vec<NodeKey>,
    pub v: Vec<f64>,
}

/// Trace over grid indices, used internally.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IndexTrace {
    pub order: Vec<usize>,
    pub v: Vec<f64>,
}

/// Trace of the population covariance: the sum of per-axis population
/// variances.
pub fn cluster_variance<P: AsRef<[f64]>>(points: &[P]) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let dim = points[0].as_ref().len();
    let mut total = 0.0;
    for c in 0..dim {
        let mean = points.iter().map(|p| p.as_ref()[c]).sum::<f64>() / n as f64;
        total += points
            .iter()
            .map(|p| {
                let d = p.as_ref()[c] - mean;
                d * d
            })
            .sum::<f64>()
            / n as f64;
    }
    Ok(total)
}

/// Available nodes outside `pattern` whose slot is within one of some
/// pattern node's slot, on any day.
pub fn neighbours(
    pattern: &BTreeSet<NodeKey>,
    grid: &NodeGrid,
    excluded: &BTreeSet<NodeKey>,
) -> BTreeSet<NodeKey> {
    let slots = grid.slots_per_day();
    let mut reach = vec![false; slots];
    for k in pattern {
        for s in k.slot.saturating_sub(1)..=(k.slot + 1).min(slots - 1) {
            reach[s] = true;
        }
    }
    grid.keys()
        .filter(|k| reach[k.slot] && !pattern.contains(k) && !excluded.contains(k))
        .collect()
}

/// The closest pair of available nodes sharing a slot.
pub fn find_seed(
    grid: &NodeGrid,
    d: &DistanceMatrix,
    excluded: &BTreeSet<NodeKey>,
) -> Result<(NodeKey, NodeKey)> {
    let available: Vec<bool> = grid.keys().map(|k| !excluded.contains(&k)).collect();
    let columns = columns_of(grid);
    let (p, q) = find_seed_idx(&columns, d, &available, &BTreeSet::new()).ok_or(Error::NoSeed)?;
    let keys = d.node_ids();
    Ok((keys[p], keys[q]))
}

pub(crate) fn columns_of(grid: &NodeGrid) -> Vec<Vec<usize>> {
    let mut cols = vec![Vec::new(); grid.slots_per_day()];
    for (i, k) in grid.keys().enumerate() {
        cols[k.slot].push(i);
    }
    cols
}

/// Seed search over grid indices. Pairs in `banned` are skipped. Ties on
/// distance go to the lowest `(first day, second day, slot)`.
pub(crate) fn find_seed_idx(
    columns: &[Vec<usize>],
    d: &DistanceMatrix,
    available: &[bool],
    banned: &BTreeSet<(usize, usize)>,
) -> Option<(usize, usize)> {
    let keys = d.node_ids();
    let mut best: Option<(f64, (usize, usize, usize), (usize, usize))> = None;
    for col in columns {
        for (a, &p) in col.iter().enumerate() {
            if !available[p] {
                continue;
            }
            for &q in &col[a + 1..] {
                if !available[q] || banned.contains(&(p, q)) {
                    continue;
                }
                let dist = d.get(p, q);
                let rank = (keys[p].day, keys[q].day, keys[p].slot);
                let better = match &best {
                    None => true,
                    Some((bd, br, _)) => dist < *bd || (dist == *bd && rank < *br),
                };
                if better {
                    best = Some((dist, rank, (p, q)));
                }
            }
        }
    }
    best.map(|(_, _, pair)| pair)
}

/// Grows a pattern from `seed` over the available nodes and records the
/// variance after each addition. Growth stops when no neighbour is left or
/// the next value would exceed `cap`.
pub fn grow(
    input: &MiningInput<'_>,
    seed: (NodeKey, NodeKey),
    variance_cap: Option<f64>,
    excluded: &BTreeSet<NodeKey>,
) -> Result<VarianceTrace> {
    let grid = input.grid;
    let a = grid.index_of(seed.0).ok_or(Error::UnknownNode(seed.0))?;
    let b = grid.index_of(seed.1).ok_or(Error::UnknownNode(seed.1))?;
    if excluded.contains(&seed.0) || excluded.contains(&seed.1) || a == b {
        return Err(Error::InvalidConfig("seed nodes must be distinct and available".into()));
    }
    let available: Vec<bool> = grid.keys().map(|k| !excluded.contains(&k)).collect();
    let trace = grow_idx(input, (a, b), &available, variance_cap);
    let keys = input.distances.node_ids();
    Ok(VarianceTrace {
        order: trace.order.iter().map(|&i| keys[i]).collect(),
        v: trace.v,
    })
}

pub(crate) fn grow_idx(
    input: &MiningInput<'_>,
    seed: (usize, usize),
    available: &[bool],
    cap: Option<f64>,
) -> IndexTrace {
    let d = input.distances;
    let emb = input.embedding;
    let keys = d.node_ids();
    let n_slots = input.columns.len();
    let dim = emb.dim();
    let (sa, sb) = seed;

    let mut order = vec![sa, sb];
    let mut v = vec![d.get(sa, sb)];
    if cap.is_some_and(|k| v[0] > k) {
        return IndexTrace { order, v };
    }

    // nodes of inactive columns wait in `pending`; active candidates are
    // live in `frontier`
    let mut pending: Vec<Vec<usize>> = input
        .columns
        .iter()
        .map(|col| col.iter().copied().filter(|&i| available[i] && i != sa && i != sb).collect())
        .collect();
    let mut frontier = KdTree::new(emb, pending.iter().flatten().copied().collect());
    let mut activate = |slot: usize, frontier: &mut KdTree<'_>| {
        for s in slot.saturating_sub(1)..=(slot + 1).min(n_slots - 1) {
            for i in pending[s].drain(..) {
                frontier.insert(i);
            }
        }
    };

    // running mean and sum of squared deviations (Welford)
    let mut mean = vec![0.0; dim];
    let mut ss = 0.0;
    let mut m = 0usize;
    let push = |x: &[f64], mean: &mut Vec<f64>, ss: &mut f64, m: &mut usize| {
        *m += 1;
        for c in 0..dim {
            let delta = x[c] - mean[c];
            mean[c] += delta / *m as f64;
            *ss += delta * (x[c] - mean[c]);
        }
    };
    for &s in &[sa, sb] {
        push(emb.point(s), &mut mean, &mut ss, &mut m);
        activate(keys[s].slot, &mut frontier);
    }

    let mut near: Vec<(f64, usize)> = Vec::new();
    loop {
        near.clear();
        let mf = m as f64;
        let var_of = |dist2: f64| (ss + dist2 * mf / (mf + 1.0)) / (mf + 1.0);
        let best = frontier.nearest_ties(&mean, &var_of, &mut near);
        if near.is_empty() {
            break;
        }
        let (var, node) = near
            .iter()
            .filter(|c| within_tie(c.0, best))
            .min_by(|x, y| {
                let (i, j) = (x.1, y.1);
                let (di, dj) = (d.get(sa, i) + d.get(sb, i), d.get(sa, j) + d.get(sb, j));
                di.total_cmp(&dj).then(i.cmp(&j))
            })
            .copied()
            .expect("non-empty candidate list");
        if cap.is_some_and(|k| var > k) {
            break;
        }
        frontier.remove(node);
        push(emb.point(node), &mut mean, &mut ss, &mut m);
        activate(keys[node].slot, &mut frontier);
        order.push(node);
        v.push(var);
    }
    IndexTrace { order, v }
}
