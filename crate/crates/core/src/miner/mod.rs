//! Greedy pattern extraction.
//!
//! Each round picks the closest same-slot pair of available nodes as a seed,
//! grows it by repeatedly adding the neighbouring node that keeps the
//! embedding variance lowest, finds cut candidates in the resulting variance
//! trace and keeps the prefix with the best score. Accepted patterns leave
//! the pool; rejected seeds are never reused. Rounds continue until no seed
//! remains.

pub mod cut;
pub mod grow;
mod kdtree;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::mds::Embedding;
use crate::model::{NodeGrid, NodeKey};
use crate::par::Exec;
use crate::pattern::{Pattern, PatternSet, METHOD_GREEDY};
use crate::scoring::{self, SweepRow};

pub use cut::{cut_candidates, detect_cut, smooth_derivatives, CutCandidate, Derivatives};
pub use grow::{cluster_variance, find_seed, grow, neighbours, within_tie, VarianceTrace, TIE_TOL};

/// Grid, distances and embedding of one user, checked to share node order.
#[derive(Debug, Clone)]
pub struct MiningInput<'a> {
    pub grid: &'a NodeGrid,
    pub distances: &'a DistanceMatrix,
    pub embedding: &'a Embedding,
    pub(crate) columns: Vec<Vec<usize>>,
}

impl<'a> MiningInput<'a> {
    pub fn new(grid: &'a NodeGrid, distances: &'a DistanceMatrix, embedding: &'a Embedding) -> Result<Self> {
        let keys: Vec<NodeKey> = grid.keys().collect();
        if distances.node_ids() != keys.as_slice() || embedding.node_ids() != keys.as_slice() {
            return Err(Error::InvalidConfig(
                "grid, distance matrix and embedding disagree on nodes".into(),
            ));
        }
        Ok(Self {
            grid,
            distances,
            embedding,
            columns: grow::columns_of(grid),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for SweepRange {
    fn default() -> Self {
        Self {
            lo: 0.0,
            hi: 0.05,
            step: 0.002,
        }
    }
}

impl SweepRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo >= 0.0 && self.lo < self.hi && self.step > 0.0) || !self.hi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "sweep needs 0 <= lo < hi and step > 0, got {}:{}:{}",
                self.lo, self.hi, self.step
            )));
        }
        Ok(())
    }

    /// Grid points `lo, lo + step, ...` up to `hi`, rounded to 12 decimals.
    pub fn thresholds(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Threshold {
    Fixed(f64),
    Sweep(SweepRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    /// Growth stops before the variance would exceed this cap.
    pub variance_cap: Option<f64>,
    /// Gaussian smoothing width, in trace samples.
    pub sigma: f64,
    pub threshold: Threshold,
    pub min_pattern_nodes: usize,
    pub min_pattern_days: usize,
    pub max_patterns: Option<usize>,
    /// A pattern that leaves other nodes in the pool must separate from
    /// them with a mean silhouette strictly above this value.
    pub min_silhouette: f64,
    /// Camera rate in frames per minute, used by the representativeness term.
    pub frq: f64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            variance_cap: None,
            sigma: 3.0,
            threshold: Threshold::Sweep(SweepRange::default()),
            min_pattern_nodes: 2,
            min_pattern_days: 2,
            max_patterns: None,
            min_silhouette: 0.0,
            frq: 0.5,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
        if self.min_pattern_nodes < 2 {
            return Err(Error::InvalidConfig("min_pattern_nodes must be >= 2".into()));
        }
        if !(self.frq > 0.0) {
            return Err(Error::InvalidConfig("frq must be positive".into()));
        }
        match self.threshold {
            Threshold::Fixed(t) if !t.is_finite() => {
                Err(Error::InvalidConfig("threshold must be finite".into()))
            }
            Threshold::Sweep(r) => r.validate(),
            _ => Ok(()),
        }
    }
}

/// One way of closing a grown trace: keep `order[..len]`.
#[derive(Debug, Clone, PartialEq)]
struct CutOption {
    /// `Some(k)` for a detected cut at trace index `k` (keeps `k + 1` nodes).
    index: Option<usize>,
    len: usize,
    slope: f64,
    /// Mean silhouette of {prefix, rest of pool}; `None` when nothing is left.
    silhouette: Option<f64>,
    score: f64,
    days: usize,
}

/// Everything a round needs that does not depend on the threshold.
#[derive(Debug)]
struct RoundEval {
    seed: (usize, usize),
    order: Vec<usize>,
    cuts: Vec<CutOption>,
    whole: CutOption,
}

type StateKey = (Vec<u64>, Vec<(usize, usize)>);

/// Memo of round evaluations keyed by pool state, shared across the
/// thresholds of one sweep.
#[derive(Default)]
pub(crate) struct RoundCache {
    map: Mutex<HashMap<StateKey, Option<Arc<RoundEval>>>>,
}

fn pack(available: &[bool]) -> Vec<u64> {
    let mut bits = vec![0u64; available.len().div_ceil(64)];
    for (i, &a) in available.iter().enumerate() {
        if a {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn evaluate_round(
    input: &MiningInput<'_>,
    cfg: &MinerConfig,
    available: &[bool],
    banned: &BTreeSet<(usize, usize)>,
) -> Option<RoundEval> {
    let d = input.distances;
    let seed = grow::find_seed_idx(&input.columns, d, available, banned)?;
    let trace = grow::grow_idx(input, seed, available, cfg.variance_cap);
    let candidates = cut_candidates(&trace.v, cfg.sigma).unwrap_or_default();

    let pool: Vec<usize> = (0..available.len()).filter(|&i| available[i]).collect();
    let total: Vec<f64> = pool
        .iter()
        .map(|&i| pool.iter().map(|&q| d.get(i, q)).sum())
        .collect();
    let mut in_prefix = vec![0.0; pool.len()];
    let mut added = 0;
    let mut member = vec![false; available.len()];
    let grid = input.grid;

    let mut option_for = |len: usize, index: Option<usize>, slope: f64| -> CutOption {
        while added < len {
            let node = trace.order[added];
            member[node] = true;
            for (slot, &i) in pool.iter().enumerate() {
                in_prefix[slot] += d.get(i, node);
            }
            added += 1;
        }
        let silhouette = two_cluster_silhouette(&pool, &member, &total, &in_prefix, len);
        let nodes: Vec<NodeKey> = trace.order[..len].iter().map(|&i| grid.nodes()[i].key).collect();
        let rep = scoring::pattern_representativeness(&nodes, grid, cfg.frq)
            .expect("trace nodes belong to the grid");
        CutOption {
            index,
            len,
            slope,
            silhouette,
            score: scoring::sc(silhouette.unwrap_or(0.0), rep),
            days: nodes.iter().map(|k| k.day).collect::<BTreeSet<_>>().len(),
        }
    };
    let cuts: Vec<CutOption> = candidates
        .iter()
        .map(|c| option_for(c.index + 1, Some(c.index), c.slope))
        .collect();
    let whole = option_for(trace.order.len(), None, f64::NAN);
    Some(RoundEval {
        seed,
        order: trace.order,
        cuts,
        whole,
    })
}

/// Mean silhouette over the pool for the split {members, rest}, from row
/// sums: `total[i]` over the pool and `in_prefix[i]` over the members.
fn two_cluster_silhouette(
    pool: &[usize],
    member: &[bool],
    total: &[f64],
    in_prefix: &[f64],
    size: usize,
) -> Option<f64> {
    let rest = pool.len() - size;
    if rest == 0 || size == 0 {
        return None;
    }
    let mut sum = 0.0;
    for (slot, &i) in pool.iter().enumerate() {
        let inside = in_prefix[slot];
        let outside = total[slot] - inside;
        let (own, own_n, other, other_n) = if member[i] {
            (inside, size, outside, rest)
        } else {
            (outside, rest, inside, size)
        };
        if own_n < 2 {
            continue;
        }
        let a = own / (own_n - 1) as f64;
        let b = other / other_n as f64;
        let m = a.max(b);
        if m > 0.0 {
            sum += (b - a) / m;
        }
    }
    Some(sum / pool.len() as f64)
}

impl RoundEval {
    /// Picks the cut for `threshold`: the best-scoring candidate whose slope
    /// exceeds it, else the whole trace.
    fn choose(&self, threshold: f64) -> &CutOption {
        let mut best: Option<&CutOption> = None;
        for c in self.cuts.iter().filter(|c| c.slope > threshold) {
            if best.is_none_or(|b| c.score > b.score) {
                best = Some(c);
            }
        }
        best.unwrap_or(&self.whole)
    }
}

fn accepts(cfg: &MinerConfig, opt: &CutOption) -> bool {
    opt.len >= cfg.min_pattern_nodes
        && opt.days >= cfg.min_pattern_days
        && opt.silhouette.is_none_or(|s| s > cfg.min_silhouette)
}

pub(crate) fn mine_at(
    input: &MiningInput<'_>,
    cfg: &MinerConfig,
    threshold: f64,
    cache: Option<&RoundCache>,
) -> PatternSet {
    let grid = input.grid;
    let mut available = vec![true; grid.len()];
    let mut banned: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut patterns = Vec::new();

    while cfg.max_patterns.is_none_or(|m| patterns.len() < m) {
        let round = match cache {
            Some(cache) => {
                let key = (pack(&available), banned.iter().copied().collect::<Vec<_>>());
                let hit = cache.map.lock().expect("cache lock").get(&key).cloned();
                match hit {
                    Some(r) => r,
                    None => {
                        let r = evaluate_round(input, cfg, &available, &banned).map(Arc::new);
                        cache.map.lock().expect("cache lock").insert(key, r.clone());
                        r
                    }
                }
            }
            None => evaluate_round(input, cfg, &available, &banned).map(Arc::new),
        };
        let Some(round) = round else { break };
        let chosen = round.choose(threshold);
        if !accepts(cfg, chosen) {
            banned.insert(round.seed);
            continue;
        }
        let members = &round.order[..chosen.len];
        for &i in members {
            available[i] = false;
        }
        let mut pattern = Pattern::from_nodes(
            patterns.len(),
            members.iter().map(|&i| grid.nodes()[i].key),
            grid,
        )
        .expect("members belong to the grid");
        pattern.threshold_used = Some(threshold);
        pattern.seed = Some((grid.nodes()[round.seed.0].key, grid.nodes()[round.seed.1].key));
        pattern.cut_index = chosen.index;
        patterns.push(pattern);
    }

    PatternSet {
        method: METHOD_GREEDY.to_string(),
        patterns,
        unassigned: grid
            .keys()
            .zip(&available)
            .filter(|(_, a)| **a)
            .map(|(k, _)| k)
            .collect(),
    }
}

/// Result of a mining run.
#[derive(Debug, Clone, PartialEq)]
pub struct MineOutcome {
    pub patterns: PatternSet,
    pub threshold: f64,
    /// Present when the threshold was chosen by a sweep.
    pub sweep: Option<Vec<SweepRow>>,
}

/// Mines patterns with a fixed threshold, or sweeps the configured range once
/// and mines with the best threshold.
pub fn mine(input: &MiningInput<'_>, cfg: &MinerConfig) -> Result<MineOutcome> {
    mine_with(input, cfg, Exec::auto())
}

pub fn mine_with(input: &MiningInput<'_>, cfg: &MinerConfig, exec: Exec) -> Result<MineOutcome> {
    cfg.validate()?;
    match cfg.threshold {
        Threshold::Fixed(t) => Ok(MineOutcome {
            patterns: mine_at(input, cfg, t, None),
            threshold: t,
            sweep: None,
        }),
        Threshold::Sweep(range) => {
            let result = scoring::sweep_threshold_with(input, cfg, range, exec)?;
            Ok(MineOutcome {
                patterns: result.patterns,
                threshold: result.best,
                sweep: Some(result.table),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::distance_matrix;
    use crate::mds::embed;
    use crate::model::TimeSlotNode;
    use crate::scoring::silhouette;

    #[test]
    fn sweep_grid_points() {
        let t = SweepRange::default().thresholds();
        assert_eq!(t.len(), 26);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[3], 0.006);
        assert_eq!(t[25], 0.05);
        assert!(SweepRange { lo: 0.1, hi: 0.05, step: 0.01 }.validate().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(MinerConfig::default().validate().is_ok());
        let bad = MinerConfig { sigma: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MinerConfig { min_pattern_nodes: 1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn prefix_silhouette_matches_direct() {
        let nodes: Vec<TimeSlotNode> = (0..6)
            .map(|i| {
                let scene = if i < 3 { "office" } else { "street" };
                let objs: Vec<String> = (0..=(i % 3)).map(|o| format!("o{o}")).collect();
                TimeSlotNode::new(NodeKey::new(i, 2), scene, "x", objs)
            })
            .collect();
        let g = NodeGrid::with_days(6, 30, nodes).unwrap();
        let d = distance_matrix(&g).unwrap();
        let pool: Vec<usize> = (0..6).collect();
        let total: Vec<f64> = pool.iter().map(|&i| d.row(i).iter().sum()).collect();
        for size in 1..6 {
            let member: Vec<bool> = (0..6).map(|i| i < size).collect();
            let in_prefix: Vec<f64> = pool.iter().map(|&i| (0..size).map(|q| d.get(i, q)).sum()).collect();
            let fast = two_cluster_silhouette(&pool, &member, &total, &in_prefix, size).unwrap();
            let labels: Vec<Option<usize>> = member.iter().map(|&m| Some(usize::from(!m))).collect();
            let direct = silhouette(&d, &labels).unwrap().mean;
            assert!((fast - direct).abs() < 1e-12, "{size}: {fast} vs {direct}");
        }
    }

    fn planted_grid() -> NodeGrid {
        // days 0..6, slots 10..14; a routine on slots 10-11 of days 0-3
        let mut nodes = Vec::new();
        for day in 0..6 {
            for slot in 10..14 {
                let routine = slot < 12 && day < 4;
                let node = if routine {
                    TimeSlotNode::new(NodeKey::new(day, slot), "office", "working", ["laptop", "person"])
                } else {
                    let scene = format!("s{}", (day * 7 + slot * 3) % 11);
                    let act = format!("a{}", (day * 5 + slot) % 7);
                    TimeSlotNode::new(NodeKey::new(day, slot), &scene, &act, [format!("o{}", (day + slot) % 5)])
                };
                nodes.push(node);
            }
        }
        NodeGrid::with_days(6, 30, nodes).unwrap()
    }

    #[test]
    fn partition_and_determinism() {
        let g = planted_grid();
        let d = distance_matrix(&g).unwrap();
        let e = embed(&d, 2).unwrap();
        let input = MiningInput::new(&g, &d, &e).unwrap();
        let cfg = MinerConfig { threshold: Threshold::Fixed(0.0), ..Default::default() };
        let a = mine(&input, &cfg).unwrap();
        let b = mine(&input, &cfg).unwrap();
        assert_eq!(a, b);
        a.patterns.check_partition(&g).unwrap();
        let routine: BTreeSet<NodeKey> = g
            .keys()
            .filter(|k| k.slot < 12 && k.day < 4)
            .collect();
        let first: BTreeSet<NodeKey> = a.patterns.patterns[0].nodes.iter().copied().collect();
        assert_eq!(first, routine);
    }

    #[test]
    fn max_patterns_limits_output() {
        let g = planted_grid();
        let d = distance_matrix(&g).unwrap();
        let e = embed(&d, 2).unwrap();
        let input = MiningInput::new(&g, &d, &e).unwrap();
        let cfg = MinerConfig {
            threshold: Threshold::Fixed(0.0),
            max_patterns: Some(1),
            ..Default::default()
        };
        let out = mine(&input, &cfg).unwrap();
        assert_eq!(out.patterns.len(), 1);
        out.patterns.check_partition(&g).unwrap();
    }

    #[test]
    fn misaligned_inputs_rejected() {
        let g = planted_grid();
        let d = distance_matrix(&g).unwrap();
        let e = embed(&d, 2).unwrap();
        let other = NodeGrid::with_days(
            2,
            30,
            vec![
                TimeSlotNode::new(NodeKey::new(0, 0), "a", "b", ["x"]),
                TimeSlotNode::new(NodeKey::new(1, 0), "a", "b", ["x"]),
            ],
        )
        .unwrap();
        assert!(MiningInput::new(&other, &d, &e).is_err());
    }
}
