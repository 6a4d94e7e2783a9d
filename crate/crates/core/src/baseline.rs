//! Density-based baseline: concept vectors with a weighted time component,
//! clustered with DBSCAN.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeGrid, TimeSlotNode};
use crate::pattern::{Pattern, PatternSet, METHOD_DBSCAN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub eps: f64,
    pub min_pts: usize,
    pub time_weight: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            eps: 0.5,
            min_pts: 3,
            time_weight: 1.0,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || self.min_pts == 0 || !(self.time_weight >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "baseline needs eps > 0, min_pts >= 1, time_weight >= 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Sorted label vocabularies defining the feature layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    pub scenes: Vec<String>,
    pub activities: Vec<String>,
    pub objects: Vec<String>,
}

impl Vocabulary {
    pub fn from_grid(grid: &NodeGrid) -> Self {
        let mut scenes = BTreeSet::new();
        let mut activities = BTreeSet::new();
        let mut objects = BTreeSet::new();
        for n in grid.nodes() {
            scenes.insert(n.scene.clone());
            activities.insert(n.activity.clone());
            objects.extend(n.objects.iter().cloned());
        }
        Self {
            scenes: scenes.into_iter().collect(),
            activities: activities.into_iter().collect(),
            objects: objects.into_iter().collect(),
        }
    }

    pub fn feature_len(&self) -> usize {
        self.scenes.len() + self.activities.len() + self.objects.len() + 1
    }
}

/// Scene one-hot, activity one-hot, object multi-hot normalized to unit sum,
/// then `time_weight * slot / slots_per_day`.
pub fn featurize(
    node: &TimeSlotNode,
    vocab: &Vocabulary,
    slots_per_day: usize,
    time_weight: f64,
) -> Result<Vec<f64>> {
    let mut v = vec![0.0; vocab.feature_len()];
    let find = |list: &[String], label: &str| {
        list.binary_search_by(|l| l.as_str().cmp(label))
            .map_err(|_| Error::UnknownLabel(node.key, label.to_string()))
    };
    let mut offset = 0;
    v[offset + find(&vocab.scenes, &node.scene)?] = 1.0;
    offset += vocab.scenes.len();
    v[offset + find(&vocab.activities, &node.activity)?] = 1.0;
    offset += vocab.activities.len();
    if !node.objects.is_empty() {
        let w = 1.0 / node.objects.len() as f64;
        for o in &node.objects {
            v[offset + find(&vocab.objects, o)?] = w;
        }
    }
    *v.last_mut().expect("feature vector is never empty") =
        time_weight * node.key.slot as f64 / slots_per_day as f64;
    Ok(v)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// DBSCAN under Euclidean distance. A point is core when at least `min_pts`
/// points, itself included, lie within `eps`. Core points within `eps` of
/// each other share a cluster; a border point joins the cluster of its
/// nearest core neighbour (ties go to the lexicographically smallest core
/// point, so labels do not depend on input order). Clusters are numbered by
/// their first point in input order. `None` marks noise.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbourhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| euclidean(&points[i], &points[j]) <= eps)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbourhoods.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbourhoods[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(next);
                    stack.push(q);
                }
            }
        }
        next += 1;
    }

    let mut border = vec![None; n];
    for i in (0..n).filter(|&i| !core[i]) {
        let nearest = neighbourhoods[i]
            .iter()
            .copied()
            .filter(|&j| core[j])
            .min_by(|&a, &b| {
                euclidean(&points[i], &points[a])
                    .total_cmp(&euclidean(&points[i], &points[b]))
                    .then_with(|| lex_cmp(&points[a], &points[b]))
            });
        border[i] = nearest.and_then(|j| labels[j]);
    }
    for (i, b) in border.into_iter().enumerate() {
        if !core[i] {
            labels[i] = b;
        }
    }

    // renumber by first appearance so ids follow input order
    let mut remap = vec![None; next];
    let mut fresh = 0;
    for l in labels.iter_mut().flatten() {
        let id = *remap[*l].get_or_insert_with(|| {
            fresh += 1;
            fresh - 1
        });
        *l = id;
    }
    labels
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Clusters every node of the grid and reports each cluster as a pattern.
pub fn baseline_patterns(grid: &NodeGrid, cfg: &BaselineConfig) -> Result<PatternSet> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::NoNodes);
    }
    let vocab = Vocabulary::from_grid(grid);
    let features = grid
        .nodes()
        .iter()
        .map(|n| featurize(n, &vocab, grid.slots_per_day(), cfg.time_weight))
        .collect::<Result<Vec<_>>>()?;
    let labels = dbscan(&features, cfg.eps, cfg.min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);

    let mut members = vec![Vec::new(); n_clusters];
    let mut unassigned = Vec::new();
    for (node, label) in grid.nodes().iter().zip(&labels) {
        match label {
            Some(c) => members[*c].push(node.key),
            None => unassigned.push(node.key),
        }
    }
    let patterns = members
        .into_iter()
        .enumerate()
        .map(|(id, keys)| Pattern::from_nodes(id, keys, grid))
        .collect::<Result<Vec<_>>>()?;
    Ok(PatternSet {
        method: METHOD_DBSCAN.to_string(),
        patterns,
        unassigned,
    })
}
