use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use proptest::prelude::*;
use routine_core::baseline::dbscan;
use routine_core::distance::{distance_matrix, jaccard_distance, node_distance};
use routine_core::mds::Embedding;
use routine_core::miner::{cluster_variance, detect_cut, find_seed, grow, mine, MinerConfig, MiningInput, Threshold};
use routine_core::model::{build_nodes, parse_concept_str, ConceptRecord, Detection, IngestConfig, NodeGrid, NodeKey, TimeSlotNode};
use routine_core::scoring::silhouette;
use routine_core::synth::{evaluate, generate, SynthSpec};
use routine_core::pattern::{Pattern, PatternSet};

const LABELS: [&str; 5] = ["a", "b", "c", "d", "e"];

fn label() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&LABELS[..])
}

fn node_at(key: NodeKey) -> impl Strategy<Value = TimeSlotNode> {
    (label(), label(), prop::collection::btree_set(label(), 0..4))
        .prop_map(move |(s, a, o)| TimeSlotNode::new(key, s, a, o))
}

fn node() -> impl Strategy<Value = TimeSlotNode> {
    node_at(NodeKey::new(0, 0))
}

/// A grid over days 0..3 and slots 20..26 holding a random subset of keys,
/// with random planar coordinates.
fn grid_with_points(max: usize) -> impl Strategy<Value = (NodeGrid, Vec<Vec<f64>>)> {
    let keys: Vec<NodeKey> = (0..3).flat_map(|d| (20..26).map(move |s| NodeKey::new(d, s))).collect();
    prop::sample::subsequence(keys, 3..=max)
        .prop_flat_map(|keys| {
            let n = keys.len();
            (
                keys.into_iter().map(node_at).collect::<Vec<_>>(),
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 2), n),
            )
        })
        .prop_map(|(nodes, pts)| (NodeGrid::with_days(3, 30, nodes).unwrap(), pts))
}

fn record(day: u32, minute: u16, scene: &str, activity: &str, objects: &[(&str, f64)]) -> ConceptRecord {
    ConceptRecord {
        user_id: "u".into(),
        day: NaiveDate::from_ymd_opt(2022, 5, day).unwrap(),
        minute,
        scene: scene.into(),
        activity: activity.into(),
        objects: objects.iter().map(|(l, c)| Detection { label: (*l).into(), conf: *c }).collect(),
    }
}

fn records() -> impl Strategy<Value = Vec<ConceptRecord>> {
    let one = (1..4u32, 600..700u16, label(), label(), prop::collection::vec((label(), 0.0..1.0f64), 0..4));
    prop::collection::vec(one, 1..80).prop_map(|rs| {
        rs.into_iter()
            .map(|(d, m, s, a, o)| record(d, m, s, a, &o))
            .collect()
    })
}

proptest! {
    #[test]
    fn distance_is_a_bounded_metric(a in node(), b in node(), c in node()) {
        let (ab, ba, bc, ac) = (node_distance(&a, &b), node_distance(&b, &a), node_distance(&b, &c), node_distance(&a, &c));
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=3.0).contains(&ab));
        prop_assert_eq!(node_distance(&a, &a), 0.0);
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn jaccard_bounds(a in prop::collection::btree_set(0u8..8, 0..6), b in prop::collection::btree_set(0u8..8, 0..6)) {
        let d = jaccard_distance(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d == 0.0, a == b);
    }

    #[test]
    fn record_order_does_not_change_nodes(mut recs in records(), seed in any::<u64>()) {
        let cfg = IngestConfig { object_min_count: 1, ..Default::default() };
        let before = build_nodes(&recs, &cfg).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        use rand::{seq::SliceRandom, SeedableRng};
        recs.shuffle(&mut rng);
        prop_assert_eq!(build_nodes(&recs, &cfg).unwrap(), before);
    }

    #[test]
    fn raising_object_min_count_only_drops_objects(recs in records(), low in 0usize..4, extra in 1usize..4) {
        let lo = build_nodes(&recs, &IngestConfig { object_min_count: low, ..Default::default() }).unwrap();
        let hi = build_nodes(&recs, &IngestConfig { object_min_count: low + extra, ..Default::default() }).unwrap();
        for (a, b) in lo.nodes().iter().zip(hi.nodes()) {
            prop_assert!(b.objects.is_subset(&a.objects));
        }
    }

    #[test]
    fn concept_lines_round_trip(recs in records()) {
        let text: String = recs.iter().map(|r| r.to_line() + "\n").collect();
        let back = parse_concept_str(&text).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in back.iter().zip(&recs) {
            prop_assert_eq!((a.day, a.minute, &a.scene, &a.activity), (b.day, b.minute, &b.scene, &b.activity));
        }
    }

    #[test]
    fn detect_cut_scales_with_the_trace(
        v in prop::collection::vec(0.0..1.0f64, 3..40),
        t in 0.0..0.1f64,
        sigma in prop::sample::select(vec![1.0, 3.0]),
    ) {
        let mut sorted = v.clone();
        sorted[1..].sort_by(f64::total_cmp);
        let scaled: Vec<f64> = sorted.iter().map(|x| x * 8.0).collect();
        prop_assert_eq!(detect_cut(&sorted, sigma, t).unwrap(), detect_cut(&scaled, sigma, t * 8.0).unwrap());
    }

    #[test]
    fn silhouette_values_are_bounded(
        nodes in prop::collection::vec(node(), 2..30),
        labels in prop::collection::vec(prop::option::weighted(0.9, 0usize..4), 30),
    ) {
        let n = nodes.len();
        let nodes: Vec<TimeSlotNode> = nodes
            .into_iter()
            .enumerate()
            .map(|(i, mut x)| { x.key = NodeKey::new(i, 0); x })
            .collect();
        let grid = NodeGrid::with_days(n, 30, nodes).unwrap();
        let d = distance_matrix(&grid).unwrap();
        let mut labels = labels[..n].to_vec();
        labels[0] = Some(0);
        labels[1] = Some(1);
        let s = silhouette(&d, &labels).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s.mean));
        for (v, l) in s.values.iter().zip(&labels) {
            prop_assert_eq!(v.is_some(), l.is_some());
            prop_assert!(v.is_none_or(|v| (-1.0..=1.0).contains(&v)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grow_records_prefix_variances((grid, pts) in grid_with_points(18)) {
        let d = distance_matrix(&grid).unwrap();
        let e = Embedding::from_points(grid.keys().collect(), &pts).unwrap();
        let input = MiningInput::new(&grid, &d, &e).unwrap();
        let Ok(seed) = find_seed(&grid, &d, &BTreeSet::new()) else { return Ok(()) };
        let trace = grow(&input, seed, None, &BTreeSet::new()).unwrap();
        prop_assert_eq!(trace.v.len(), trace.order.len() - 1);
        prop_assert_eq!(trace.v[0], d.get(grid.index_of(seed.0).unwrap(), grid.index_of(seed.1).unwrap()));
        let mut last_ss = 0.0;
        for t in 1..trace.v.len() {
            let prefix: Vec<&[f64]> = trace.order[..t + 2].iter().map(|k| e.point(grid.index_of(*k).unwrap())).collect();
            prop_assert!((trace.v[t] - cluster_variance(&prefix).unwrap()).abs() < 1e-9);
            // the sum of squared deviations never shrinks, though the
            // variance itself may when a node lands near the mean
            let ss = trace.v[t] * prefix.len() as f64;
            prop_assert!(ss >= last_ss - 1e-9);
            last_ss = ss;
        }
        // every node reachable through adjacent columns is aggregated
        let seed_slots: BTreeSet<usize> = [seed.0.slot, seed.1.slot].into();
        let mut reach = seed_slots.clone();
        loop {
            let grown: BTreeSet<usize> = grid.keys().map(|k| k.slot).filter(|s| reach.iter().any(|r| r.abs_diff(*s) <= 1)).collect();
            if grown == reach { break; }
            reach = grown;
        }
        prop_assert_eq!(trace.order.len(), grid.keys().filter(|k| reach.contains(&k.slot)).count());
    }

    #[test]
    fn grow_respects_the_cap((grid, pts) in grid_with_points(18), cap in 0.0..3.0f64) {
        let d = distance_matrix(&grid).unwrap();
        let e = Embedding::from_points(grid.keys().collect(), &pts).unwrap();
        let input = MiningInput::new(&grid, &d, &e).unwrap();
        let Ok(seed) = find_seed(&grid, &d, &BTreeSet::new()) else { return Ok(()) };
        let full = grow(&input, seed, None, &BTreeSet::new()).unwrap();
        let capped = grow(&input, seed, Some(cap), &BTreeSet::new()).unwrap();
        prop_assert!(capped.v.iter().skip(1).all(|v| *v <= cap));
        prop_assert_eq!(&full.order[..capped.order.len()], &capped.order[..]);
    }

    #[test]
    fn mined_patterns_partition_the_grid((grid, pts) in grid_with_points(18), t in 0.0..0.05f64) {
        let d = distance_matrix(&grid).unwrap();
        let e = Embedding::from_points(grid.keys().collect(), &pts).unwrap();
        let input = MiningInput::new(&grid, &d, &e).unwrap();
        let cfg = MinerConfig { threshold: Threshold::Fixed(t), sigma: 1.0, ..Default::default() };
        let set = mine(&input, &cfg).unwrap().patterns;
        set.check_partition(&grid).unwrap();
        for p in &set.patterns {
            prop_assert!(p.nodes.len() >= cfg.min_pattern_nodes);
            prop_assert!(p.days().len() >= cfg.min_pattern_days);
            let slots: BTreeSet<usize> = p.nodes.iter().map(|k| k.slot).collect();
            let slots: Vec<usize> = slots.into_iter().collect();
            prop_assert!(slots.windows(2).all(|w| w[1] - w[0] <= 1), "pattern columns are contiguous");
        }
        prop_assert_eq!(&mine(&input, &cfg).unwrap().patterns, &set);
    }

    #[test]
    fn dbscan_ignores_input_order(
        pts in prop::collection::vec(prop::collection::vec(0.0..3.0f64, 2), 1..40),
        eps in 0.1..1.0f64,
        min_pts in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut perm: Vec<usize> = (0..pts.len()).collect();
        perm.shuffle(&mut rand::rngs::StdRng::seed_from_u64(seed));
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let a = dbscan(&pts, eps, min_pts);
        let b = dbscan(&shuffled, eps, min_pts);
        // same partition up to renaming
        let mut rename: BTreeMap<usize, usize> = BTreeMap::new();
        for (j, &i) in perm.iter().enumerate() {
            match (a[i], b[j]) {
                (None, None) => {}
                (Some(x), Some(y)) => prop_assert_eq!(*rename.entry(x).or_insert(y), y),
                _ => prop_assert!(false, "noise differs at point {}", i),
            }
        }
        let distinct: BTreeSet<usize> = rename.values().copied().collect();
        prop_assert_eq!(distinct.len(), rename.len());
    }

    #[test]
    fn larger_eps_never_adds_clusters_or_noise(
        pts in prop::collection::vec(prop::collection::vec(0.0..3.0f64, 2), 1..40),
        eps in 0.05..1.0f64,
        grow_by in 0.0..1.0f64,
        min_pts in 1usize..5,
    ) {
        let count = |eps: f64| {
            let labels = dbscan(&pts, eps, min_pts);
            let clusters: BTreeSet<usize> = labels.iter().flatten().copied().collect();
            clusters.len() + labels.iter().filter(|l| l.is_none()).count()
        };
        prop_assert!(count(eps + grow_by) <= count(eps));
    }

    #[test]
    fn generated_truth_scores_itself_perfectly(seed in 0u64..1000) {
        let spec = SynthSpec::randomized(seed);
        spec.validate().unwrap();
        let (records, truth) = generate(&spec).unwrap();
        let grid = build_nodes(&records, &IngestConfig::default()).unwrap();
        let patterns = (0..truth.planted_count())
            .map(|id| Pattern::from_nodes(id, truth.members(id), &grid).unwrap())
            .collect();
        let set = PatternSet { method: "truth".into(), patterns, unassigned: vec![] };
        prop_assert_eq!(evaluate(&set, &truth).macro_f1, 1.0);
        prop_assert!(truth.nodes.iter().all(|e| grid.get(e.key).is_some()));
    }
}
