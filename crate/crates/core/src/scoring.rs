//! Pattern quality: silhouette, representativeness and their sum.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::miner::{self, MinerConfig, MiningInput, RoundCache, SweepRange};
use crate::model::{NodeGrid, NodeKey};
use crate::par::Exec;
use crate::pattern::PatternSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Silhouette {
    /// Per matrix row; `None` for unlabelled nodes.
    pub values: Vec<Option<f64>>,
    pub mean: f64,
}

/// Silhouette of a labelling over the rows of `d`. Unlabelled rows are
/// ignored; a node alone in its cluster scores 0.
pub fn silhouette(d: &DistanceMatrix, labels: &[Option<usize>]) -> Result<Silhouette> {
    let n = d.len();
    if labels.len() != n {
        return Err(Error::InvalidConfig(format!("{} labels for {n} nodes", labels.len())));
    }
    let ids: BTreeSet<usize> = labels.iter().flatten().copied().collect();
    if ids.len() < 2 {
        return Err(Error::SingleCluster);
    }
    let dense: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let k = ids.len();
    let cluster: Vec<Option<usize>> = labels.iter().map(|l| l.map(|id| dense[&id])).collect();
    let mut sizes = vec![0usize; k];
    for c in cluster.iter().flatten() {
        sizes[*c] += 1;
    }

    let mut values = vec![None; n];
    let mut sums = vec![0.0; k];
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..n {
        let Some(own) = cluster[i] else { continue };
        sums.iter_mut().for_each(|s| *s = 0.0);
        for (q, c) in cluster.iter().enumerate() {
            if let Some(c) = c {
                sums[*c] += d.get(i, q);
            }
        }
        let s = if sizes[own] < 2 {
            0.0
        } else {
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                (b - a) / m
            } else {
                0.0
            }
        };
        values[i] = Some(s);
        total += s;
        count += 1;
    }
    Ok(Silhouette {
        values,
        mean: total / count as f64,
    })
}

/// Representativeness of one pattern: the fraction of grid days it touches
/// plus its image count over the larger of one hour's frames and the frames
/// its daily spans should hold.
///
/// The span is summed over days: on each day, last image minute minus first
/// image minute among the pattern's nodes.
pub fn pattern_representativeness(nodes: &[NodeKey], grid: &NodeGrid, frq: f64) -> Result<f64> {
    let mut per_day: BTreeMap<usize, (u16, u16)> = BTreeMap::new();
    let mut images = 0usize;
    for key in nodes {
        let node = grid.get(*key).ok_or(Error::UnknownNode(*key))?;
        images += node.image_count;
        let e = per_day
            .entry(key.day)
            .or_insert((node.first_minute, node.last_minute));
        e.0 = e.0.min(node.first_minute);
        e.1 = e.1.max(node.last_minute);
    }
    let span: f64 = per_day.values().map(|(a, b)| f64::from(b - a)).sum();
    let days = per_day.len() as f64 / grid.n_days() as f64;
    let hour_frames = 60.0 * frq;
    Ok(days + images as f64 / hour_frames.max(span * frq))
}

/// Mean representativeness over the patterns of a set.
pub fn t_rpr(patterns: &PatternSet, grid: &NodeGrid, frq: f64) -> Result<f64> {
    if patterns.is_empty() {
        return Err(Error::NoPatterns);
    }
    let mut total = 0.0;
    for p in &patterns.patterns {
        total += pattern_representativeness(&p.nodes, grid, frq)?;
    }
    Ok(total / patterns.len() as f64)
}

#[inline]
pub fn sc(silhouette: f64, t_rpr: f64) -> f64 {
    silhouette + t_rpr
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub sc: f64,
    pub patterns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Mean silhouette of each pattern's nodes, in pattern order.
    pub pattern_silhouette: Vec<f64>,
    /// Mean silhouette over all pattern nodes; 0 with fewer than two patterns.
    pub silhouette: f64,
    pub t_rpr: f64,
    pub sc: f64,
    pub sweep: Vec<SweepRow>,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("T,sc\n");
    for r in rows {
        out.push_str(&format!("{},{}\n", r.threshold, r.sc));
    }
    out
}

/// Scores a pattern set, using each pattern as a cluster and leaving
/// unassigned nodes out. Empty sets score 0.
pub fn score_pattern_set(
    set: &PatternSet,
    grid: &NodeGrid,
    d: &DistanceMatrix,
    frq: f64,
) -> Result<ScoreReport> {
    if set.is_empty() {
        return Ok(ScoreReport {
            pattern_silhouette: vec![],
            silhouette: 0.0,
            t_rpr: 0.0,
            sc: 0.0,
            sweep: vec![],
        });
    }
    let mut labels = vec![None; d.len()];
    for p in &set.patterns {
        for k in &p.nodes {
            let i = grid.index_of(*k).ok_or(Error::UnknownNode(*k))?;
            labels[i] = Some(p.id);
        }
    }
    let (pattern_silhouette, sl) = match silhouette(d, &labels) {
        Ok(s) => {
            let per = set
                .patterns
                .iter()
                .map(|p| {
                    let vals: Vec<f64> = p
                        .nodes
                        .iter()
                        .filter_map(|k| s.values[grid.index_of(*k).expect("checked above")])
                        .collect();
                    vals.iter().sum::<f64>() / vals.len() as f64
                })
                .collect();
            (per, s.mean)
        }
        Err(Error::SingleCluster) => (vec![0.0; set.len()], 0.0),
        Err(e) => return Err(e),
    };
    let rep = t_rpr(set, grid, frq)?;
    Ok(ScoreReport {
        pattern_silhouette,
        silhouette: sl,
        t_rpr: rep,
        sc: sc(sl, rep),
        sweep: vec![],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best: f64,
    pub table: Vec<SweepRow>,
    /// Patterns mined at the best threshold.
    pub patterns: PatternSet,
}

/// Mines at every threshold of `range` and keeps the one with the highest
/// set score; ties go to the smaller threshold.
pub fn sweep_threshold(
    input: &MiningInput<'_>,
    cfg: &MinerConfig,
    range: SweepRange,
) -> Result<SweepResult> {
    sweep_threshold_with(input, cfg, range, Exec::auto())
}

pub fn sweep_threshold_with(
    input: &MiningInput<'_>,
    cfg: &MinerConfig,
    range: SweepRange,
    exec: Exec,
) -> Result<SweepResult> {
    range.validate()?;
    let thresholds = range.thresholds();
    let cache = RoundCache::default();
    let runs: Vec<Result<(PatternSet, f64)>> = exec.map(&thresholds, |&t| {
        let set = miner::mine_at(input, cfg, t, Some(&cache));
        let report = score_pattern_set(&set, input.grid, input.distances, cfg.frq)?;
        Ok((set, report.sc))
    });
    let mut table = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, f64)> = None;
    let mut sets = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        let (set, score) = run?;
        table.push(SweepRow {
            threshold: thresholds[i],
            sc: score,
            patterns: set.len(),
        });
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
        sets.push(set);
    }
    let (idx, _) = best.expect("sweep has at least one threshold");
    Ok(SweepResult {
        best: thresholds[idx],
        table,
        patterns: sets.swap_remove(idx),
    })
}
