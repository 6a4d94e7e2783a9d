//! Semantic distance between time-slot nodes.
//!
//! Two nodes differ by one unit when their scenes differ, one unit when their
//! activities differ, plus the Jaccard distance of their object sets, so every
//! distance lies in `[0, 3]`.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{NodeGrid, NodeKey, TimeSlotNode};
use crate::par::Exec;

/// Jaccard distance of two sorted sets. Two empty sets are at distance 0; an
/// empty and a non-empty set at distance 1.
pub fn jaccard_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    jaccard_from_counts(inter, a.len() + b.len() - inter)
}

#[inline]
fn jaccard_from_counts(inter: usize, union: usize) -> f64 {
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

#[inline]
fn indicator(differs: bool) -> f64 {
    if differs {
        1.0
    } else {
        0.0
    }
}

pub fn node_distance(a: &TimeSlotNode, b: &TimeSlotNode) -> f64 {
    indicator(a.scene != b.scene)
        + indicator(a.activity != b.activity)
        + jaccard_distance(&a.objects, &b.objects)
}

/// Symmetric all-pairs distance matrix over a grid's nodes in row-major
/// `(day, slot)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    node_ids: Vec<NodeKey>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a full row-major value buffer. Checks shape,
    /// symmetry, zero diagonal and the `[0, 3]` range.
    pub fn from_values(node_ids: Vec<NodeKey>, values: Vec<f64>) -> Result<Self> {
        let n = node_ids.len();
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        if values.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "{} values for {n} nodes",
                values.len()
            )));
        }
        for p in 0..n {
            if values[p * n + p] != 0.0 {
                return Err(Error::InvalidConfig(format!("nonzero diagonal at {p}")));
            }
            for q in 0..p {
                let v = values[p * n + q];
                if v != values[q * n + p] || !(0.0..=3.0).contains(&v) {
                    return Err(Error::InvalidConfig(format!(
                        "entry ({p}, {q}) = {v} is asymmetric or outside [0, 3]"
                    )));
                }
            }
        }
        Ok(Self { node_ids, values })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_ids(&self) -> &[NodeKey] {
        &self.node_ids
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.node_ids.len() + q]
    }

    #[inline]
    pub fn row(&self, p: usize) -> &[f64] {
        let n = self.node_ids.len();
        &self.values[p * n..(p + 1) * n]
    }

    /// Square CSV: a header of `day:slot` keys followed by one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.node_ids.iter().map(|k| k.to_string()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for p in 0..self.len() {
            let row: Vec<String> = self.row(p).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Labels interned to integers so the all-pairs loop avoids string work.
struct Interned {
    scene: Vec<u32>,
    activity: Vec<u32>,
    objects: Vec<Vec<u32>>,
}

impl Interned {
    fn new<'a>(nodes: &'a [TimeSlotNode]) -> Self {
        let mut ids: HashMap<&'a str, u32> = HashMap::new();
        let mut intern = |s: &'a str| -> u32 {
            let next = ids.len() as u32;
            *ids.entry(s).or_insert(next)
        };
        let scene = nodes.iter().map(|n| intern(&n.scene)).collect();
        let activity = nodes.iter().map(|n| intern(&n.activity)).collect();
        let objects = nodes
            .iter()
            .map(|n| {
                let mut v: Vec<u32> = n.objects.iter().map(|o| intern(o)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Self {
            scene,
            activity,
            objects,
        }
    }

    fn distance(&self, p: usize, q: usize) -> f64 {
        let (a, b) = (&self.objects[p], &self.objects[q]);
        let (mut i, mut j, mut inter) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        indicator(self.scene[p] != self.scene[q])
            + indicator(self.activity[p] != self.activity[q])
            + jaccard_from_counts(inter, a.len() + b.len() - inter)
    }
}

pub fn distance_matrix(grid: &NodeGrid) -> Result<DistanceMatrix> {
    distance_matrix_with(grid, Exec::auto())
}

pub fn distance_matrix_with(grid: &NodeGrid, exec: Exec) -> Result<DistanceMatrix> {
    let n = grid.len();
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    let interned = Interned::new(grid.nodes());
    let upper = exec.map_range(n, |p| {
        ((p + 1)..n)
            .map(|q| interned.distance(p, q))
            .collect::<Vec<f64>>()
    });
    let mut values = vec![0.0; n * n];
    for (p, row) in upper.into_iter().enumerate() {
        for (off, d) in row.into_iter().enumerate() {
            let q = p + 1 + off;
            values[p * n + q] = d;
            values[q * n + p] = d;
        }
    }
    Ok(DistanceMatrix {
        node_ids: grid.keys().collect(),
        values,
    })
}
