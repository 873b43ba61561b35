//! Split-skip learning for a quad-tree block encoder.
//!
//! The crate covers the whole offline loop:
//!
//! * [`codec`]: a luma-only toy inter encoder that partitions frames into a
//!   CU quad-tree (64×64 down to 8×8) by exhaustive Lagrangian RDO.
//! * [`features`]: the nine per-CU features harvested right after the
//!   merge/skip and whole-CU tests, dataset files, correlation and binning.
//! * [`cart`]: Gini-impurity CART trees, one per CU depth, with k-fold
//!   validation.
//! * [`pruning`]: accuracy/coverage threshold pruning that turns tree nodes
//!   into conjunctive skip rules.
//! * [`skip`]: the runtime side that evaluates those rules inside the encoder.
//! * [`eval`]: BD-rate and effort comparison between anchor and skip-enabled
//!   encodes.

pub mod cart;
pub mod codec;
pub mod error;
pub mod eval;
pub mod features;
pub mod pruning;
pub mod skip;

pub use cart::{Constraints, DecisionTree, NodeRef, Split, TreeNode};
pub use codec::{
    CodingUnit, CuTree, EncoderConfig, Frame, FrameStats, ModeKind, ModeResult, MotionVector,
    PartitionMode, RdoStats, Sequence, SequenceSpec,
};
pub use error::{Error, Result};
pub use eval::{BenchReport, RdPoint};
pub use features::{Dataset, Feature, FeatureVector, Sample};
pub use pruning::{Comparator, Predicate, PruneThresholds, SkipCriterion};
pub use skip::{CriteriaBundle, SkipDecision};

/// Base QPs used for every extraction and benchmark run by default.
pub const DEFAULT_QPS: [u8; 4] = [22, 27, 32, 37];
