//! Binary CART classification trees grown with Gini impurity.

mod kfold;
mod split;
mod tree;

pub use kfold::{fold_assignments, kfold_validate, CrossValidationConfig, KFoldReport};
pub use split::{best_split, gini_impurity, SplitCandidate, ThresholdRule, TrainingMatrix};
pub use tree::{grow, grow_tree, Constraints, DecisionTree, NodeRef, Prediction, Split, TreeNode};
