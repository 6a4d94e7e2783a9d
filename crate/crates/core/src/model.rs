//! Concept records, time-slot nodes and the per-user node grid.
//!
//! A concept log holds one record per captured image: the recognised scene,
//! the recognised activity and any object detections. Records are bucketed
//! into fixed-width slots of each day; every slot with enough images becomes
//! a [`TimeSlotNode`] described by its modal scene, modal activity and the
//! objects seen in enough distinct images.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub conf: f64,
}

/// One labelled image.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptRecord {
    pub user_id: String,
    pub day: NaiveDate,
    /// Minute of the day, `0..1440`.
    pub minute: u16,
    pub scene: String,
    pub activity: String,
    pub objects: Vec<Detection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    user: String,
    day: String,
    time: String,
    scene: String,
    activity: String,
    #[serde(default)]
    objects: Vec<Detection>,
}

impl ConceptRecord {
    /// Serializes the record as one concept-log line (no trailing newline).
    pub fn to_line(&self) -> String {
        let wire = WireRecord {
            user: self.user_id.clone(),
            day: self.day.format("%Y-%m-%d").to_string(),
            time: format!("{:02}:{:02}", self.minute / 60, self.minute % 60),
            scene: self.scene.clone(),
            activity: self.activity.clone(),
            objects: self.objects.clone(),
        };
        serde_json::to_string(&wire).expect("record serialization cannot fail")
    }

    fn from_wire(wire: WireRecord) -> std::result::Result<Self, String> {
        let day = NaiveDate::parse_from_str(&wire.day, "%Y-%m-%d")
            .map_err(|e| format!("bad day {:?}: {e}", wire.day))?;
        let time = NaiveTime::parse_from_str(&wire.time, "%H:%M")
            .map_err(|e| format!("bad time {:?}: {e}", wire.time))?;
        if wire.user.is_empty() {
            return Err("empty user".into());
        }
        if wire.scene.trim().is_empty() {
            return Err("empty scene label".into());
        }
        if wire.activity.trim().is_empty() {
            return Err("empty activity label".into());
        }
        for det in &wire.objects {
            if det.label.trim().is_empty() {
                return Err("empty object label".into());
            }
            if !(0.0..=1.0).contains(&det.conf) {
                return Err(format!(
                    "confidence {} of {:?} outside [0, 1]",
                    det.conf, det.label
                ));
            }
        }
        Ok(Self {
            user_id: wire.user,
            day,
            minute: (time.hour() * 60 + time.minute()) as u16,
            scene: wire.scene,
            activity: wire.activity,
            objects: wire.objects,
        })
    }
}

/// Parses a line-delimited concept log. Blank lines are ignored; any other
/// line that fails to parse aborts with its 1-based line number.
pub fn parse_concept_log<R: BufRead>(reader: R) -> Result<Vec<ConceptRecord>> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        let record = ConceptRecord::from_wire(wire).map_err(|reason| Error::MalformedRecord {
            line: line_no,
            reason,
        })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(records)
}

pub fn parse_concept_str(text: &str) -> Result<Vec<ConceptRecord>> {
    parse_concept_log(text.as_bytes())
}

/// Grid coordinate of a node: chronological day index and slot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    #[serde(rename = "day_index")]
    pub day: usize,
    #[serde(rename = "slot_index")]
    pub slot: usize,
}

impl NodeKey {
    pub const fn new(day: usize, slot: usize) -> Self {
        Self { day, slot }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.day, self.slot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSlotNode {
    #[serde(flatten)]
    pub key: NodeKey,
    pub scene: String,
    pub activity: String,
    pub objects: BTreeSet<String>,
    pub image_count: usize,
    /// Minute of day of the first and last image in the slot.
    pub first_minute: u16,
    pub last_minute: u16,
}

impl TimeSlotNode {
    /// Convenience constructor for a node holding a single image's worth of
    /// time information.
    pub fn new<S: Into<String>>(
        key: NodeKey,
        scene: &str,
        activity: &str,
        objects: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            key,
            scene: scene.to_string(),
            activity: activity.to_string(),
            objects: objects.into_iter().map(Into::into).collect(),
            image_count: 1,
            first_minute: 0,
            last_minute: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub slot_minutes: u32,
    pub min_images_per_slot: usize,
    /// An object is kept when it is detected in strictly more images than this.
    pub object_min_count: usize,
    /// Detections at or below this confidence are ignored.
    pub object_conf_min: f64,
    /// Camera rate in frames per minute.
    pub frq: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            slot_minutes: 30,
            min_images_per_slot: 1,
            object_min_count: 10,
            object_conf_min: 0.5,
            frq: 0.5,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slot_minutes == 0 || MINUTES_PER_DAY % self.slot_minutes != 0 {
            return Err(Error::InvalidConfig(format!(
                "slot_minutes {} does not divide 1440",
                self.slot_minutes
            )));
        }
        if self.min_images_per_slot == 0 {
            return Err(Error::InvalidConfig("min_images_per_slot must be >= 1".into()));
        }
        if !(self.object_conf_min >= 0.0) {
            return Err(Error::InvalidConfig("object_conf_min must be >= 0".into()));
        }
        if !(self.frq > 0.0) || !self.frq.is_finite() {
            return Err(Error::InvalidConfig("frq must be positive".into()));
        }
        Ok(())
    }

    pub fn slots_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.slot_minutes) as usize
    }
}

/// All nodes of one user, sorted row-major by `(day, slot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGrid {
    pub user_id: String,
    pub slot_minutes: u32,
    pub days: Vec<NaiveDate>,
    nodes: Vec<TimeSlotNode>,
}

impl NodeGrid {
    /// Assembles a grid, checking bounds and uniqueness of keys.
    pub fn new(
        user_id: impl Into<String>,
        slot_minutes: u32,
        days: Vec<NaiveDate>,
        mut nodes: Vec<TimeSlotNode>,
    ) -> Result<Self> {
        if slot_minutes == 0 || MINUTES_PER_DAY % slot_minutes != 0 {
            return Err(Error::InvalidConfig(format!(
                "slot_minutes {slot_minutes} does not divide 1440"
            )));
        }
        if days.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("days are not strictly chronological".into()));
        }
        let slots = (MINUTES_PER_DAY / slot_minutes) as usize;
        nodes.sort_by_key(|n| n.key);
        for pair in nodes.windows(2) {
            if pair[0].key == pair[1].key {
                return Err(Error::InvalidConfig(format!("duplicate node {}", pair[0].key)));
            }
        }
        for node in &nodes {
            if node.key.day >= days.len() || node.key.slot >= slots {
                return Err(Error::InvalidConfig(format!(
                    "node {} outside a {}x{} grid",
                    node.key,
                    days.len(),
                    slots
                )));
            }
        }
        Ok(Self {
            user_id: user_id.into(),
            slot_minutes,
            days,
            nodes,
        })
    }

    /// Test and synthetic-data helper: a grid over `n_days` consecutive days
    /// starting 2020-01-01.
    pub fn with_days(n_days: usize, slot_minutes: u32, nodes: Vec<TimeSlotNode>) -> Result<Self> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
        let days = start.iter_days().take(n_days).collect();
        Self::new("user", slot_minutes, days, nodes)
    }

    pub fn slots_per_day(&self) -> usize {
        (MINUTES_PER_DAY / self.slot_minutes) as usize
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[TimeSlotNode] {
        &self.nodes
    }

    pub fn keys(&self) -> impl Iterator<Item = NodeKey> + '_ {
        self.nodes.iter().map(|n| n.key)
    }

    pub fn index_of(&self, key: NodeKey) -> Option<usize> {
        self.nodes.binary_search_by_key(&key, |n| n.key).ok()
    }

    pub fn get(&self, key: NodeKey) -> Option<&TimeSlotNode> {
        self.index_of(key).map(|i| &self.nodes[i])
    }

    /// Flat per-node export records.
    pub fn export_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| NodeRecord {
                day: self.days[n.key.day].format("%Y-%m-%d").to_string(),
                node: n.clone(),
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in self.export_records() {
            out.push_str(&serde_json::to_string(&rec).expect("node serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a grid from its line-delimited export.
    pub fn from_jsonl(text: &str, user_id: &str, slot_minutes: u32) -> Result<Self> {
        let mut days: BTreeMap<usize, NaiveDate> = BTreeMap::new();
        let mut nodes = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |reason: String| Error::MalformedRecord {
                line: idx + 1,
                reason,
            };
            let rec: NodeRecord =
                serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
            let date = NaiveDate::parse_from_str(&rec.day, "%Y-%m-%d")
                .map_err(|e| malformed(e.to_string()))?;
            if let Some(prev) = days.insert(rec.node.key.day, date) {
                if prev != date {
                    return Err(malformed(format!(
                        "day index {} maps to two dates",
                        rec.node.key.day
                    )));
                }
            }
            nodes.push(rec.node);
        }
        if nodes.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n_days = days.keys().next_back().map_or(0, |d| d + 1);
        if days.len() != n_days {
            return Err(Error::InvalidConfig("node export skips a day index".into()));
        }
        Self::new(user_id, slot_minutes, days.into_values().collect(), nodes)
    }
}

/// One node as written to the grid export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub day: String,
    #[serde(flatten)]
    pub node: TimeSlotNode,
}

/// Most frequent label; ties go to the lexicographically smallest.
fn modal_label<'a>(labels: impl Iterator<Item = &'a str>) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (label, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((label, count));
        }
    }
    best.map(|(l, _)| l.to_string()).unwrap_or_default()
}

/// Buckets records into time slots and summarizes each slot as a node.
pub fn build_nodes(records: &[ConceptRecord], cfg: &IngestConfig) -> Result<NodeGrid> {
    cfg.validate()?;
    let first = records.first().ok_or(Error::EmptyInput)?;
    if let Some(other) = records.iter().find(|r| r.user_id != first.user_id) {
        return Err(Error::MixedUsers(first.user_id.clone(), other.user_id.clone()));
    }

    let mut slots: BTreeMap<(NaiveDate, usize), Vec<&ConceptRecord>> = BTreeMap::new();
    for r in records {
        let slot = r.minute as usize / cfg.slot_minutes as usize;
        slots.entry((r.day, slot)).or_default().push(r);
    }
    slots.retain(|_, recs| recs.len() >= cfg.min_images_per_slot);
    if slots.is_empty() {
        return Err(Error::NoNodes);
    }

    let days: Vec<NaiveDate> = slots
        .keys()
        .map(|(d, _)| *d)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let day_index: BTreeMap<NaiveDate, usize> =
        days.iter().enumerate().map(|(i, d)| (*d, i)).collect();

    let nodes = slots
        .into_iter()
        .map(|((date, slot), recs)| {
            let mut object_images: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &recs {
                let seen: BTreeSet<&str> = r
                    .objects
                    .iter()
                    .filter(|d| d.conf > cfg.object_conf_min)
                    .map(|d| d.label.as_str())
                    .collect();
                for label in seen {
                    *object_images.entry(label).or_default() += 1;
                }
            }
            let objects = object_images
                .into_iter()
                .filter(|&(_, n)| n > cfg.object_min_count)
                .map(|(l, _)| l.to_string())
                .collect();
            TimeSlotNode {
                key: NodeKey::new(day_index[&date], slot),
                scene: modal_label(recs.iter().map(|r| r.scene.as_str())),
                activity: modal_label(recs.iter().map(|r| r.activity.as_str())),
                objects,
                image_count: recs.len(),
                first_minute: recs.iter().map(|r| r.minute).min().unwrap_or(0),
                last_minute: recs.iter().map(|r| r.minute).max().unwrap_or(0),
            }
        })
        .collect();

    NodeGrid::new(first.user_id.clone(), cfg.slot_minutes, days, nodes)
}
