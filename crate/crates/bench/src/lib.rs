//! Fixtures shared by the benchmarks.

use cusplit_core::codec::{generate_sequence, Archetype};
use cusplit_core::features::extract_dataset;
use cusplit_core::pruning::{parse_conjunction, SkipCriterion};
use cusplit_core::{CriteriaBundle, Dataset, EncoderConfig, Sequence, SequenceSpec, DEFAULT_QPS};

pub fn mixed_sequence(
    name: &str,
    width: usize,
    height: usize,
    frames: usize,
    seed: u64,
) -> Sequence {
    let spec = SequenceSpec::new(name, Archetype::Mixed, width, height, frames, seed);
    generate_sequence(&spec, seed).expect("valid spec")
}

/// Full-RDO samples from two small mixed sequences at the default QPs.
pub fn training_dataset() -> Dataset {
    let seqs = [
        mixed_sequence("bench-a", 256, 192, 4, 11),
        mixed_sequence("bench-b", 256, 192, 4, 12),
    ];
    extract_dataset(&seqs, &DEFAULT_QPS, &EncoderConfig::new(22)).expect("extraction succeeds")
}

/// Typical criteria of the shape the pruning step produces.
pub fn typical_bundle() -> CriteriaBundle {
    let rules = [
        (0, "Bits < 66 & PM = 0 & SF = 1"),
        (1, "Bits < 34 & RDC < 2900"),
        (2, "Bits < 20 & PM = 0"),
    ];
    let crits = rules
        .iter()
        .map(|&(d, text)| {
            SkipCriterion::from_predicates(d, parse_conjunction(text).expect("valid rule"))
        })
        .collect();
    CriteriaBundle::from_criteria(crits, "bench").expect("one rule per depth")
}
