//! The nine per-CU decision features and the samples built from them.

mod dataset;
mod stats;

pub use dataset::{Dataset, DATASET_HEADER};
pub use stats::{bin_continuous, correlation_table, pearson_correlation, Binned, CorrelationTable};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{encode_sequence, CodingUnit, CuEvaluation, CuTree, EncoderConfig, Sequence};
use crate::error::{Error, Result};

/// Feature identifiers, in the column order of the correlation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Feature {
    /// Skip flag of the merge/skip test.
    Sf,
    /// Coded block flag of the merge/skip test.
    Cbf,
    /// RD cost of the merge/skip test.
    Rdc,
    /// Bits of the merge/skip test.
    Bits,
    /// Average depth of the above and left neighbours.
    And,
    /// Effective QP.
    Qp,
    Lambda,
    /// Frame QP offset.
    Qpo,
    /// Partition mode of the best whole-CU inter candidate.
    Pm,
}

/// Value domain of a feature, used when simplifying predicates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureKind {
    Boolean,
    /// Integer-valued in `[min, max]`.
    Integer {
        min: i64,
        max: i64,
    },
    Continuous,
}

impl Feature {
    pub const ALL: [Feature; 9] = [
        Feature::Sf,
        Feature::Cbf,
        Feature::Rdc,
        Feature::Bits,
        Feature::And,
        Feature::Qp,
        Feature::Lambda,
        Feature::Qpo,
        Feature::Pm,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Feature> {
        Feature::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Sf => "SF",
            Feature::Cbf => "CBF",
            Feature::Rdc => "RDC",
            Feature::Bits => "Bits",
            Feature::And => "AND",
            Feature::Qp => "QP",
            Feature::Lambda => "lambda",
            Feature::Qpo => "QPO",
            Feature::Pm => "PM",
        }
    }

    pub fn kind(self) -> FeatureKind {
        match self {
            Feature::Sf | Feature::Cbf => FeatureKind::Boolean,
            Feature::Qp => FeatureKind::Integer { min: 0, max: 55 },
            Feature::Qpo => FeatureKind::Integer { min: 1, max: 4 },
            Feature::Pm => FeatureKind::Integer { min: 0, max: 2 },
            Feature::Rdc | Feature::Bits | Feature::And | Feature::Lambda => {
                FeatureKind::Continuous
            }
        }
    }

    /// Features quantile-binned before tree training.
    pub fn is_binned(self) -> bool {
        matches!(self, Feature::Rdc | Feature::Bits)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let f = match s.trim() {
            "SF" => Feature::Sf,
            "CBF" => Feature::Cbf,
            // "RCD" appears as a variant spelling of RDC in published rule tables.
            "RDC" | "RCD" => Feature::Rdc,
            "Bits" | "BITS" | "bits" => Feature::Bits,
            "AND" => Feature::And,
            "QP" => Feature::Qp,
            "lambda" | "λ" | "LAMBDA" => Feature::Lambda,
            "QPO" => Feature::Qpo,
            "PM" => Feature::Pm,
            other => return Err(Error::Config(format!("unknown feature `{other}`"))),
        };
        Ok(f)
    }
}

/// Features observed for one CU right after its whole-CU tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sf: bool,
    pub cbf: bool,
    pub rdc: f64,
    pub bits: f64,
    pub and: f64,
    pub qp: u8,
    pub lambda: f64,
    pub qpo: u8,
    pub pm: u8,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Sf => self.sf as u8 as f64,
            Feature::Cbf => self.cbf as u8 as f64,
            Feature::Rdc => self.rdc,
            Feature::Bits => self.bits,
            Feature::And => self.and,
            Feature::Qp => self.qp as f64,
            Feature::Lambda => self.lambda,
            Feature::Qpo => self.qpo as f64,
            Feature::Pm => self.pm as f64,
        }
    }

    pub fn to_array(&self) -> [f64; 9] {
        Feature::ALL.map(|f| self.get(f))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (!self.sf || !self.cbf)
            && (0.0..=3.0).contains(&self.and)
            && (1..=4).contains(&self.qpo)
            && self.pm <= 2
            && self.rdc >= 0.0
            && self.bits >= 0.0
            && self.lambda > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "feature vector violates invariants: {self:?}"
            )))
        }
    }
}

/// Where a sample came from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub sequence_id: String,
    pub base_qp: u8,
    pub frame_index: u32,
    pub cu_x: usize,
    pub cu_y: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureVector,
    pub depth: u8,
    /// `true` when full RDO split the CU.
    pub label: bool,
    pub provenance: Provenance,
}

/// Mean of the available neighbour depths; the CU's own depth when neither
/// neighbour exists.
pub fn average_neighbour_depth(above: Option<u8>, left: Option<u8>, own_depth: u8) -> f64 {
    match (above, left) {
        (Some(a), Some(l)) => (a as f64 + l as f64) / 2.0,
        (Some(d), None) | (None, Some(d)) => d as f64,
        (None, None) => own_depth as f64,
    }
}

/// Builds a sample from the post-test state of a CU and its full-RDO label.
pub fn extract_sample(
    eval: &CuEvaluation,
    full_rdo_label: bool,
    provenance: Provenance,
) -> Result<Sample> {
    if eval.cu.depth > 2 {
        return Err(Error::domain("depth-3 CUs carry no split decision"));
    }
    Ok(Sample {
        features: eval.features()?,
        depth: eval.cu.depth,
        label: full_rdo_label,
        provenance,
    })
}

/// Samples for every depth 0..2 CU of the final full-RDO quad-trees of one
/// frame. Refuses trees in which a skip criterion fired, since those labels
/// did not come from full RDO.
pub fn collect_samples(
    trees: &[CuTree],
    sequence_id: &str,
    base_qp: u8,
    frame_index: u32,
) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    let mut skipped = false;
    for t in trees {
        t.visit(&mut |n| {
            skipped |= n.skipped;
            if n.unit.depth <= 2 {
                out.push(sample_from_node(n, sequence_id, base_qp, frame_index));
            }
        });
    }
    if skipped {
        return Err(Error::Contract(
            "training samples must come from encodes without skip criteria".into(),
        ));
    }
    Ok(out)
}

/// Full-RDO encodes of every sequence at every base QP, merged into one
/// dataset. The result does not depend on scheduling.
pub fn extract_dataset(
    sequences: &[Sequence],
    qps: &[u8],
    template: &EncoderConfig,
) -> Result<Dataset> {
    if sequences.is_empty() {
        return Err(Error::domain("no sequences to extract from"));
    }
    if qps.is_empty() {
        return Err(Error::domain("no QPs given"));
    }
    let jobs: Vec<(&Sequence, u8)> = sequences
        .iter()
        .flat_map(|s| qps.iter().map(move |&qp| (s, qp)))
        .collect();
    let parts = jobs
        .par_iter()
        .map(|&(seq, qp)| {
            let config = EncoderConfig {
                base_qp: qp,
                ..template.clone()
            };
            let (trees, _) = encode_sequence(&seq.frames, &config, None)?;
            let mut samples = Vec::new();
            for (frame, frame_trees) in seq.frames[1..].iter().zip(&trees) {
                samples.extend(collect_samples(
                    frame_trees,
                    seq.id(),
                    qp,
                    frame.frame_index(),
                )?);
            }
            Dataset::new(samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::merge(parts)
}

fn sample_from_node(n: &CuTree, sequence_id: &str, base_qp: u8, frame_index: u32) -> Sample {
    let CodingUnit { x, y, depth } = n.unit;
    Sample {
        features: n.features,
        depth,
        label: n.split,
        provenance: Provenance {
            sequence_id: sequence_id.to_string(),
            base_qp,
            frame_index,
            cu_x: x,
            cu_y: y,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{ModeKind, ModeResult, MotionVector, PartitionMode};

    #[test]
    fn neighbour_depth_mean() {
        assert_eq!(average_neighbour_depth(Some(2), Some(1), 0), 1.5);
        assert_eq!(average_neighbour_depth(Some(3), None, 1), 3.0);
        assert_eq!(average_neighbour_depth(None, Some(0), 2), 0.0);
        assert_eq!(average_neighbour_depth(None, None, 2), 2.0);
    }

    #[test]
    fn feature_names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(f.name().parse::<Feature>().unwrap(), f);
            assert_eq!(Feature::from_id(f.id()), Some(f));
        }
        assert_eq!("RCD".parse::<Feature>().unwrap(), Feature::Rdc);
        assert!("Depth".parse::<Feature>().is_err());
    }

    fn eval_with(skip: bool, above: Option<u8>, left: Option<u8>) -> CuEvaluation {
        let merge = ModeResult {
            kind: ModeKind::MergeSkip,
            pm: PartitionMode::Whole,
            mvs: [MotionVector::ZERO; 2],
            distortion: 10.0,
            bits: if skip { 2.0 } else { 30.0 },
            rd_cost: 0.0,
            cbf: !skip,
            skip_flag: skip,
        };
        let inter = ModeResult {
            kind: ModeKind::InterWhole,
            pm: PartitionMode::Vertical,
            cbf: true,
            skip_flag: false,
            ..merge
        };
        CuEvaluation {
            cu: CodingUnit::new(0, 0, 1).unwrap(),
            merge: Some(merge),
            inter: Some(inter),
            above_depth: above,
            left_depth: left,
            qp: 25,
            qp_offset: 3,
            lambda: 2.5,
        }
    }

    fn prov() -> Provenance {
        Provenance {
            sequence_id: "s".into(),
            base_qp: 22,
            frame_index: 1,
            cu_x: 0,
            cu_y: 0,
        }
    }

    #[test]
    fn skip_result_yields_sf_without_cbf() {
        let s = extract_sample(&eval_with(true, None, None), false, prov()).unwrap();
        assert!(s.features.sf && !s.features.cbf);
        assert_eq!(s.features.pm, 2);
        assert_eq!(s.features.qpo, 3);
        s.features.validate().unwrap();
    }

    #[test]
    fn origin_cu_uses_own_depth_for_and() {
        let s = extract_sample(&eval_with(false, None, None), true, prov()).unwrap();
        assert_eq!(s.features.and, 1.0);
        assert_eq!(s.depth, 1);
        assert!(s.label);
    }

    #[test]
    fn extraction_before_tests_is_rejected() {
        let mut e = eval_with(true, None, None);
        e.inter = None;
        assert!(matches!(
            extract_sample(&e, false, prov()),
            Err(Error::Contract(_))
        ));
    }
}
