//! k-nearest-neighbor search under non-metric distances with a
//! vantage-point tree.
//!
//! The tree supports three ways of pruning when the distance breaks the
//! triangle inequality:
//!
//! - the exact metric rule `|R - x|`, which is fast but loses recall;
//! - a piecewise linear (or polynomial) decision function whose slopes are
//!   tuned on training queries ([`pruners`]);
//! - a TriGen concave transform that makes the distance nearly metric
//!   ([`transform`]), including two search modes for non-symmetric distances
//!   ([`vptree::SearchMode`]).
//!
//! [`datagen`] provides the synthetic histogram data, the brute-force oracle
//! and recall; [`harness`] runs the timed evaluation protocol.

pub mod datagen;
pub mod distances;
mod error;
pub mod harness;
mod params;
pub mod pruners;
pub mod transform;
pub mod vptree;

pub use datagen::{
    brute_force_knn, gen_rand_hist, load_dataset, load_ground_truth, recall, save_dataset,
    save_ground_truth, Dataset, GroundTruth, Neighbor,
};
pub use distances::{estimate_dmax, DistanceSpec};
pub use error::{Error, Result};
pub use harness::{run, sweep, RunConfig, RunResult, SweepConfig, SweepMethod};
pub use pruners::{sample_decision_function, tune, PrunerSpec, TuneConfig, TuneReport, TuningGrid};
pub use transform::{fit, Base, FitReport, Symmetrization, TransformSpec, TriGenFitConfig};
pub use vptree::{CountingEvaluator, SearchMode, SearchResult, SearchStats, VpTree};
