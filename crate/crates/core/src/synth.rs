//! Seeded synthetic lifelogs with planted routines, and scoring of mined
//! patterns against the planted truth.
//!
//! Randomness comes from ChaCha8 seeded with the spec's `seed`, which yields
//! the same stream on every platform.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConceptRecord, Detection, NodeKey, MINUTES_PER_DAY};
use crate::pattern::PatternSet;

/// One planted routine: the same labels at the same slots on several days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    /// Inclusive slot range.
    pub slots: (usize, usize),
    pub days: Vec<usize>,
    pub scene: String,
    pub activity: String,
    pub objects: Vec<String>,
    pub images_per_slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub scenes: Vec<String>,
    pub activities: Vec<String>,
    pub objects: Vec<String>,
    /// Background slots carry between 0 and this many objects.
    pub max_objects: usize,
    pub images_per_slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub user: String,
    pub start: NaiveDate,
    pub n_days: usize,
    pub slots_per_day: usize,
    /// Inclusive slot range the camera records every day.
    pub recorded: (usize, usize),
    /// Camera rate in frames per minute; images in a slot are this far apart.
    pub frq: f64,
    pub planted: Vec<PlantedSpec>,
    pub background: BackgroundSpec,
    /// Probability that each planted label is swapped for a background one.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn slot_minutes(&self) -> u32 {
        MINUTES_PER_DAY / self.slots_per_day as u32
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_days == 0 {
            return bad("n_days must be positive".into());
        }
        if self.slots_per_day == 0 || MINUTES_PER_DAY as usize % self.slots_per_day != 0 {
            return bad(format!("{} slots do not divide a day", self.slots_per_day));
        }
        let (lo, hi) = self.recorded;
        if lo > hi || hi >= self.slots_per_day {
            return bad(format!("recorded range {lo}..={hi} outside the day"));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        if !(self.frq > 0.0) {
            return bad("frq must be positive".into());
        }
        let bg = &self.background;
        if bg.scenes.is_empty() || bg.activities.is_empty() {
            return bad("background scene and activity pools must be non-empty".into());
        }
        if bg.max_objects > bg.objects.len() {
            return bad("max_objects exceeds the background object pool".into());
        }
        let capacity = (self.slot_minutes() as f64 * self.frq).ceil() as usize;
        let mut images = vec![bg.images_per_slot];
        images.extend(self.planted.iter().map(|p| p.images_per_slot));
        if images.iter().any(|&n| n == 0 || n > capacity) {
            return bad(format!("images per slot must lie in 1..={capacity}"));
        }

        let mut claimed = BTreeSet::new();
        for (id, p) in self.planted.iter().enumerate() {
            let (a, b) = p.slots;
            if a > b || a < lo || b > hi {
                return bad(format!("pattern {id}: slots {a}..={b} outside the recorded range"));
            }
            if p.days.is_empty() || p.days.iter().any(|&d| d >= self.n_days) {
                return bad(format!("pattern {id}: day list empty or out of range"));
            }
            if self.noise > 0.0 {
                let has_other = |pool: &[String], own: &str| pool.iter().any(|l| l != own);
                if !has_other(&bg.scenes, &p.scene) || !has_other(&bg.activities, &p.activity) {
                    return bad(format!("pattern {id}: no background label to swap in"));
                }
                if !p.objects.is_empty() && bg.objects.iter().all(|o| p.objects.contains(o)) {
                    return bad(format!("pattern {id}: no background object to swap in"));
                }
            }
            for &d in &p.days {
                for s in a..=b {
                    if !claimed.insert((d, s)) {
                        return bad(format!("pattern {id} overlaps another at {d}:{s}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// A random instance: 7 to 21 days of 48 slots with 2 to 4 routines in a
    /// 12-hour recorded window and label noise up to 0.1.
    pub fn randomized(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let n_days = rng.random_range(7..=21);
        let recorded = (14, 37);
        let k = rng.random_range(2..=4);

        // split the window into k segments, plant each routine inside its own
        let width = (recorded.1 - recorded.0 + 1) / k;
        let planted = (0..k)
            .map(|id| {
                let seg = recorded.0 + id * width;
                let len = rng.random_range(2..=4.min(width));
                let start = seg + rng.random_range(0..=width - len);
                let mut days: Vec<usize> = (0..n_days).filter(|_| rng.random_bool(0.7)).collect();
                while days.len() < 3 {
                    let d = rng.random_range(0..n_days);
                    if !days.contains(&d) {
                        days.push(d);
                    }
                }
                days.sort_unstable();
                let n_obj = rng.random_range(1..=3);
                PlantedSpec {
                    slots: (start, start + len - 1),
                    days,
                    scene: format!("routine-scene-{id}"),
                    activity: format!("routine-activity-{id}"),
                    objects: (0..n_obj).map(|o| format!("routine-object-{id}-{o}")).collect(),
                    images_per_slot: 15,
                }
            })
            .collect();

        SynthSpec {
            user: format!("synth-{seed}"),
            start: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            n_days,
            slots_per_day: 48,
            recorded,
            frq: 0.5,
            planted,
            background: BackgroundSpec {
                scenes: (0..12).map(|i| format!("scene-{i}")).collect(),
                activities: (0..8).map(|i| format!("activity-{i}")).collect(),
                objects: (0..20).map(|i| format!("object-{i}")).collect(),
                max_objects: 3,
                images_per_slot: 15,
            },
            noise: rng.random_range(0.0..=0.1),
            seed,
        }
    }
}

/// Planted routine of every recorded node, `None` for background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub nodes: Vec<TruthEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    #[serde(flatten)]
    pub key: NodeKey,
    pub pattern: Option<usize>,
}

impl GroundTruth {
    pub fn planted_count(&self) -> usize {
        self.nodes.iter().filter_map(|e| e.pattern).max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, id: usize) -> BTreeSet<NodeKey> {
        self.nodes
            .iter()
            .filter(|e| e.pattern == Some(id))
            .map(|e| e.key)
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("truth serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })
    }
}

struct SlotLabels {
    scene: String,
    activity: String,
    objects: Vec<String>,
    images: usize,
}

fn swap<'a>(rng: &mut ChaCha8Rng, pool: &'a [String], avoid: &BTreeSet<&str>) -> Option<&'a String> {
    let options: Vec<&String> = pool.iter().filter(|l| !avoid.contains(l.as_str())).collect();
    options.choose(rng).copied()
}

/// Emits concept records for every recorded slot of every day, plus the
/// planted routine of each node. Day indices of the truth match the grid
/// `build_nodes` assembles from the records.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<ConceptRecord>, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = &spec.background;
    let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (id, p) in spec.planted.iter().enumerate() {
        for &d in &p.days {
            for s in p.slots.0..=p.slots.1 {
                owner.insert((d, s), id);
            }
        }
    }

    let slot_minutes = spec.slot_minutes() as f64;
    let mut records = Vec::new();
    let mut truth = Vec::new();
    let mut date = spec.start;
    for day in 0..spec.n_days {
        for slot in spec.recorded.0..=spec.recorded.1 {
            let planted = owner.get(&(day, slot)).copied();
            let labels = match planted {
                Some(id) => {
                    let p = &spec.planted[id];
                    let mut scene = p.scene.clone();
                    if rng.random_bool(spec.noise) {
                        scene = swap(&mut rng, &bg.scenes, &[p.scene.as_str()].into())
                            .expect("validated")
                            .clone();
                    }
                    let mut activity = p.activity.clone();
                    if rng.random_bool(spec.noise) {
                        activity = swap(&mut rng, &bg.activities, &[p.activity.as_str()].into())
                            .expect("validated")
                            .clone();
                    }
                    let mut objects: Vec<String> = Vec::new();
                    for o in &p.objects {
                        if rng.random_bool(spec.noise) {
                            let avoid: BTreeSet<&str> = p
                                .objects
                                .iter()
                                .chain(objects.iter())
                                .map(String::as_str)
                                .collect();
                            if let Some(r) = swap(&mut rng, &bg.objects, &avoid) {
                                objects.push(r.clone());
                            }
                        } else {
                            objects.push(o.clone());
                        }
                    }
                    SlotLabels {
                        scene,
                        activity,
                        objects,
                        images: p.images_per_slot,
                    }
                }
                None => {
                    let k = rng.random_range(0..=bg.max_objects);
                    let mut objects: Vec<String> =
                        bg.objects.choose_multiple(&mut rng, k).cloned().collect();
                    objects.sort();
                    SlotLabels {
                        scene: bg.scenes.choose(&mut rng).expect("validated").clone(),
                        activity: bg.activities.choose(&mut rng).expect("validated").clone(),
                        objects,
                        images: bg.images_per_slot,
                    }
                }
            };
            truth.push(TruthEntry {
                key: NodeKey::new(day, slot),
                pattern: planted,
            });

            let base = slot as f64 * slot_minutes;
            for i in 0..labels.images {
                let minute = (base + i as f64 / spec.frq).floor() as u16;
                let mut dets: Vec<Detection> = labels
                    .objects
                    .iter()
                    .map(|o| Detection {
                        label: o.clone(),
                        conf: round3(rng.random_range(0.6..1.0)),
                    })
                    .collect();
                // a weak detection that ingestion must drop
                if let Some(o) = bg.objects.choose(&mut rng) {
                    if !labels.objects.contains(o) {
                        dets.push(Detection {
                            label: o.clone(),
                            conf: round3(rng.random_range(0.05..0.45)),
                        });
                    }
                }
                records.push(ConceptRecord {
                    user_id: spec.user.clone(),
                    day: date,
                    minute,
                    scene: labels.scene.clone(),
                    activity: labels.activity.clone(),
                    objects: dets,
                });
            }
        }
        date = date.succ_opt().expect("date in range");
    }
    Ok((records, GroundTruth { nodes: truth }))
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatch {
    pub planted: usize,
    pub found: Option<usize>,
    pub overlap: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub matches: Vec<PatternMatch>,
    pub macro_f1: f64,
}

impl Evaluation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evaluation serialization cannot fail")
    }
}

/// Pairs planted and found patterns greedily by node overlap (largest first,
/// ties to the lower found id, then the lower planted id) and scores each
/// planted routine at node level. With nothing planted, macro-F1 is 1 when
/// nothing was found and 0 otherwise.
pub fn evaluate(found: &PatternSet, truth: &GroundTruth) -> Evaluation {
    let planted: Vec<BTreeSet<NodeKey>> = (0..truth.planted_count()).map(|id| truth.members(id)).collect();
    let mut pairs = Vec::new();
    for (pi, members) in planted.iter().enumerate() {
        for (fi, p) in found.patterns.iter().enumerate() {
            let overlap = p.nodes.iter().filter(|k| members.contains(k)).count();
            if overlap > 0 {
                pairs.push((overlap, fi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut matched: Vec<Option<(usize, usize)>> = vec![None; planted.len()];
    let mut used = vec![false; found.patterns.len()];
    for (overlap, fi, pi) in pairs {
        if matched[pi].is_none() && !used[fi] {
            matched[pi] = Some((fi, overlap));
            used[fi] = true;
        }
    }

    let matches: Vec<PatternMatch> = matched
        .iter()
        .enumerate()
        .map(|(pi, m)| match *m {
            Some((fi, overlap)) => {
                let precision = overlap as f64 / found.patterns[fi].nodes.len() as f64;
                let recall = overlap as f64 / planted[pi].len() as f64;
                PatternMatch {
                    planted: pi,
                    found: Some(found.patterns[fi].id),
                    overlap,
                    precision,
                    recall,
                    f1: 2.0 * precision * recall / (precision + recall),
                }
            }
            None => PatternMatch {
                planted: pi,
                found: None,
                overlap: 0,
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            },
        })
        .collect();
    let macro_f1 = if matches.is_empty() {
        if found.is_empty() { 1.0 } else { 0.0 }
    } else {
        matches.iter().map(|m| m.f1).sum::<f64>() / matches.len() as f64
    };
    Evaluation { matches, macro_f1 }
}

/// Writes records as a concept log, one line each.
pub fn to_concept_log(records: &[ConceptRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}
