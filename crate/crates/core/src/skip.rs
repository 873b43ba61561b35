//! Skip criteria evaluated inside the encoder, right after the merge/skip
//! and whole-CU tests.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::CuEvaluation;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::pruning::{CriteriaFile, PruneThresholds, SkipCriterion};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipDecision {
    SkipRecursion,
    Continue,
}

/// At most one criterion for each of depths 0..=2.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CriteriaBundle {
    slots: [Option<SkipCriterion>; 3],
    pub provenance: String,
    pub thresholds: Option<PruneThresholds>,
    pub trained_on: Vec<String>,
}

impl CriteriaBundle {
    pub fn empty() -> Self {
        CriteriaBundle::default()
    }

    pub fn from_criteria(
        criteria: Vec<SkipCriterion>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let mut bundle = CriteriaBundle {
            provenance: provenance.into(),
            ..Default::default()
        };
        for c in criteria {
            let d = c.cu_depth as usize;
            if d > 2 {
                return Err(Error::Config(format!(
                    "criterion for CU depth {d}; only 0..=2 can be skipped"
                )));
            }
            if c.predicates.is_empty() {
                return Err(Error::Config(format!(
                    "criterion for depth {d} has no predicates"
                )));
            }
            if bundle.slots[d].is_some() {
                return Err(Error::Config(format!(
                    "more than one criterion for depth {d}"
                )));
            }
            bundle.slots[d] = Some(c);
        }
        Ok(bundle)
    }

    pub fn from_file(file: CriteriaFile, provenance: impl Into<String>) -> Result<Self> {
        let mut b = Self::from_criteria(file.criteria, provenance)?;
        b.thresholds = file.thresholds;
        b.trained_on = file.trained_on;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = CriteriaFile::load(path)?;
        Self::from_file(file, path.display().to_string())
    }

    pub fn to_file(&self) -> CriteriaFile {
        CriteriaFile {
            thresholds: self.thresholds,
            trained_on: self.trained_on.clone(),
            criteria: self.criteria().cloned().collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn get(&self, cu_depth: u8) -> Option<&SkipCriterion> {
        self.slots.get(cu_depth as usize).and_then(Option::as_ref)
    }

    pub fn criteria(&self) -> impl Iterator<Item = &SkipCriterion> {
        self.slots.iter().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }
}

/// True iff every predicate holds on the raw feature values.
pub fn evaluate_criterion(criterion: &SkipCriterion, features: &FeatureVector) -> bool {
    criterion.matches(features)
}

pub fn apply_skip(
    eval: &CuEvaluation,
    features: &FeatureVector,
    bundle: &CriteriaBundle,
) -> SkipDecision {
    match bundle.get(eval.cu.depth) {
        Some(c) if evaluate_criterion(c, features) => SkipDecision::SkipRecursion,
        _ => SkipDecision::Continue,
    }
}
