//! Discovery of recurrent daily routines in concept-labelled lifelogs.
//!
//! Images labelled with a scene, an activity and object detections are
//! grouped into time-slot nodes ([`model`]). Nodes are compared with a
//! label distance ([`distance`]), embedded in the plane ([`mds`]) and
//! greedily aggregated into patterns that keep the embedding variance low
//! ([`miner`]). [`scoring`] rates pattern sets and picks the cut threshold;
//! [`baseline`] offers a DBSCAN comparison, [`synth`] a planted-routine
//! generator, and [`report`] histogram and timeline output.
//!
//! ```
//! use routine_core::prelude::*;
//!
//! let spec = SynthSpec::randomized(3);
//! let (records, _truth) = generate(&spec).unwrap();
//! let grid = build_nodes(&records, &IngestConfig::default()).unwrap();
//! let d = distance_matrix(&grid).unwrap();
//! let e = embed(&d, 2).unwrap();
//! let input = MiningInput::new(&grid, &d, &e).unwrap();
//! let cfg = MinerConfig { threshold: Threshold::Fixed(0.0), ..Default::default() };
//! let out = mine(&input, &cfg).unwrap();
//! out.patterns.check_partition(&grid).unwrap();
//! ```

pub mod baseline;
pub mod distance;
pub mod error;
pub mod mds;
pub mod miner;
pub mod model;
pub mod par;
pub mod pattern;
pub mod report;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod prelude {
    pub use crate::baseline::{baseline_patterns, dbscan, featurize, BaselineConfig, Vocabulary};
    pub use crate::distance::{distance_matrix, node_distance, DistanceMatrix};
    pub use crate::error::{Error, Result};
    pub use crate::mds::{embed, Embedding};
    pub use crate::miner::{mine, MineOutcome, MinerConfig, MiningInput, SweepRange, Threshold};
    pub use crate::model::{build_nodes, parse_concept_log, IngestConfig, NodeGrid, NodeKey, TimeSlotNode};
    pub use crate::par::Exec;
    pub use crate::pattern::{Pattern, PatternSet};
    pub use crate::scoring::{score_pattern_set, silhouette, sweep_threshold, t_rpr, ScoreReport};
    pub use crate::synth::{evaluate, generate, GroundTruth, SynthSpec};
}
