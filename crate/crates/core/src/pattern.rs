//! Discovered patterns and their JSON export.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeGrid, NodeKey};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCount {
    pub label: String,
    pub node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub id: usize,
    pub threshold_used: Option<f64>,
    pub seed: Option<(NodeKey, NodeKey)>,
    /// Index into the variance trace of the accepted cut; `None` when the
    /// whole trace was kept or the pattern came from another method.
    pub cut_index: Option<usize>,
    pub nodes: Vec<NodeKey>,
    pub scene: String,
    pub activity: String,
    pub objects: Vec<ObjectCount>,
}

impl Pattern {
    /// Builds a pattern over `nodes`, summarizing their labels from `grid`.
    pub fn from_nodes(id: usize, nodes: impl IntoIterator<Item = NodeKey>, grid: &NodeGrid) -> Result<Self> {
        let nodes: Vec<NodeKey> = nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut scenes: BTreeMap<&str, usize> = BTreeMap::new();
        let mut activities: BTreeMap<&str, usize> = BTreeMap::new();
        let mut objects: BTreeMap<&str, usize> = BTreeMap::new();
        for key in &nodes {
            let node = grid.get(*key).ok_or(Error::UnknownNode(*key))?;
            *scenes.entry(&node.scene).or_default() += 1;
            *activities.entry(&node.activity).or_default() += 1;
            for o in &node.objects {
                *objects.entry(o).or_default() += 1;
            }
        }
        Ok(Self {
            id,
            threshold_used: None,
            seed: None,
            cut_index: None,
            nodes,
            scene: modal(&scenes),
            activity: modal(&activities),
            objects: objects
                .into_iter()
                .map(|(label, node_count)| ObjectCount {
                    label: label.to_string(),
                    node_count,
                })
                .collect(),
        })
    }

    pub fn days(&self) -> BTreeSet<usize> {
        self.nodes.iter().map(|k| k.day).collect()
    }

    pub fn contains(&self, key: NodeKey) -> bool {
        self.nodes.binary_search(&key).is_ok()
    }
}

fn modal(counts: &BTreeMap<&str, usize>) -> String {
    let mut best: Option<(&str, usize)> = None;
    for (&label, &count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map(|(l, _)| l.to_string()).unwrap_or_default()
}

/// Disjoint patterns plus every grid node left out of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub method: String,
    pub patterns: Vec<Pattern>,
    pub unassigned: Vec<NodeKey>,
}

pub const METHOD_GREEDY: &str = "greedy-variance";
pub const METHOD_DBSCAN: &str = "dbscan-baseline";

impl PatternSet {
    pub fn empty(method: &str, grid: &NodeGrid) -> Self {
        Self {
            method: method.to_string(),
            patterns: Vec::new(),
            unassigned: grid.keys().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Pattern id of every node, `None` for unassigned ones.
    pub fn assignment(&self) -> BTreeMap<NodeKey, Option<usize>> {
        let mut out: BTreeMap<NodeKey, Option<usize>> =
            self.unassigned.iter().map(|k| (*k, None)).collect();
        for p in &self.patterns {
            for k in &p.nodes {
                out.insert(*k, Some(p.id));
            }
        }
        out
    }

    /// Checks that patterns are disjoint and, together with `unassigned`,
    /// cover exactly the grid's nodes.
    pub fn check_partition(&self, grid: &NodeGrid) -> Result<()> {
        let mut seen = BTreeSet::new();
        let all = self
            .patterns
            .iter()
            .flat_map(|p| p.nodes.iter())
            .chain(self.unassigned.iter());
        for k in all {
            if !seen.insert(*k) {
                return Err(Error::InvalidConfig(format!("node {k} assigned twice")));
            }
            if grid.get(*k).is_none() {
                return Err(Error::UnknownNode(*k));
            }
        }
        if seen.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "{} of {} grid nodes covered",
                seen.len(),
                grid.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pattern serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}
