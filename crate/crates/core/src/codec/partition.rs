use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::frame::{CodingUnit, Frame, CTU_SIZE, MAX_CU_DEPTH};
use super::modes::{merge_skip_test, whole_cu_inter_test, ModeResult, NeighbourContext};
use super::{CodingParams, EncoderConfig};
use crate::error::{Error, Result};
use crate::features::{average_neighbour_depth, FeatureVector};
use crate::skip::{apply_skip, CriteriaBundle, SkipDecision};

/// Bits spent on the split flag of every CU above the maximum depth.
const SPLIT_FLAG_BITS: f64 = 1.0;

/// Effort counters of an RDO run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdoStats {
    /// Whole-CU candidate evaluations: one per merge/skip test plus one per
    /// inter partition mode.
    pub mode_evaluations: u64,
    /// Child CUs entered while evaluating quad splits.
    pub recursions_entered: u64,
    pub cus_evaluated: u64,
    pub skips_fired: u64,
}

impl RdoStats {
    /// Effort figure used for comparisons: mode evaluations plus recursions.
    pub fn effort(&self) -> u64 {
        self.mode_evaluations + self.recursions_entered
    }
}

impl AddAssign for RdoStats {
    fn add_assign(&mut self, o: Self) {
        self.mode_evaluations += o.mode_evaluations;
        self.recursions_entered += o.recursions_entered;
        self.cus_evaluated += o.cus_evaluated;
        self.skips_fired += o.skips_fired;
    }
}

/// State of a CU right after its whole-CU tests, before any split decision.
#[derive(Clone, Debug, PartialEq)]
pub struct CuEvaluation {
    pub cu: CodingUnit,
    pub merge: Option<ModeResult>,
    pub inter: Option<ModeResult>,
    pub above_depth: Option<u8>,
    pub left_depth: Option<u8>,
    pub qp: u8,
    pub qp_offset: u8,
    pub lambda: f64,
}

impl CuEvaluation {
    /// The nine decision features. Fails unless both whole-CU tests ran.
    pub fn features(&self) -> Result<FeatureVector> {
        let (Some(merge), Some(inter)) = (&self.merge, &self.inter) else {
            return Err(Error::Contract(
                "features requested before merge/skip and whole-CU tests completed".into(),
            ));
        };
        Ok(FeatureVector {
            sf: merge.skip_flag,
            cbf: merge.cbf,
            rdc: merge.rd_cost,
            bits: merge.bits,
            and: average_neighbour_depth(self.above_depth, self.left_depth, self.cu.depth),
            qp: self.qp,
            lambda: self.lambda,
            qpo: self.qp_offset,
            pm: inter.pm.index(),
        })
    }

    /// Cheaper of the two whole-CU results (merge wins ties).
    pub fn best_whole(&self) -> Option<ModeResult> {
        match (self.merge, self.inter) {
            (Some(m), Some(i)) => Some(if i.rd_cost < m.rd_cost { i } else { m }),
            (m, i) => m.or(i),
        }
    }
}

/// Quad-tree node with the RDO outcome for its CU.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuTree {
    pub unit: CodingUnit,
    pub split: bool,
    /// Four children in Z order when split, empty otherwise.
    pub children: Vec<CuTree>,
    /// Winning whole-CU candidate; `None` when split.
    pub chosen_mode: Option<ModeResult>,
    /// Features observed after the whole-CU tests.
    pub features: FeatureVector,
    /// Cost of coding the CU whole, split flag included.
    pub whole_cost: f64,
    /// Cost of the best quad split, when it was evaluated.
    pub split_cost: Option<f64>,
    /// Set when a skip criterion stopped the recursion here.
    pub skipped: bool,
    /// Total bits and SSD of the chosen configuration.
    pub bits: f64,
    pub distortion: f64,
}

impl CuTree {
    /// RD cost of the chosen configuration.
    pub fn cost(&self) -> f64 {
        match self.split_cost {
            Some(s) if self.split => s,
            _ => self.whole_cost,
        }
    }

    /// Leaves in Z order.
    pub fn leaves(&self) -> Vec<&CuTree> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if !n.split {
                out.push(n)
            }
        });
        out
    }

    /// Pre-order traversal over every node.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a CuTree)) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }
}

/// Runs the whole-CU tests for `cu` and records their effort.
fn evaluate_whole(
    cu: &CodingUnit,
    frame: &Frame,
    reference: &Frame,
    context: &NeighbourContext,
    params: &CodingParams,
    stats: &mut RdoStats,
) -> Result<CuEvaluation> {
    stats.cus_evaluated += 1;
    let merge = merge_skip_test(cu, frame, reference, context, params)?;
    stats.mode_evaluations += 1;
    let inter = whole_cu_inter_test(cu, frame, reference, context, params)?;
    stats.mode_evaluations += 3;
    let (above_depth, left_depth) = context.neighbour_depths(cu);
    Ok(CuEvaluation {
        cu: *cu,
        merge: Some(merge),
        inter: Some(inter),
        above_depth,
        left_depth,
        qp: params.qp,
        qp_offset: params.qp_offset,
        lambda: params.lambda,
    })
}

fn partition_inner(
    cu: &CodingUnit,
    frame: &Frame,
    reference: &Frame,
    context: &mut NeighbourContext,
    params: &CodingParams,
    criteria: Option<&CriteriaBundle>,
    stats: &mut RdoStats,
) -> Result<CuTree> {
    let eval = evaluate_whole(cu, frame, reference, context, params, stats)?;
    let features = eval.features()?;
    let best = eval.best_whole().expect("both tests ran");
    let flag_bits = if cu.depth < MAX_CU_DEPTH {
        SPLIT_FLAG_BITS
    } else {
        0.0
    };
    let whole_cost = best.rd_cost + params.lambda * flag_bits;
    let whole = |split_cost, skipped| CuTree {
        unit: *cu,
        split: false,
        children: Vec::new(),
        chosen_mode: Some(best),
        features,
        whole_cost,
        split_cost,
        skipped,
        bits: best.bits + flag_bits,
        distortion: best.distortion,
    };

    let Some(quads) = cu.children() else {
        context.record(cu, &best);
        return Ok(whole(None, false));
    };
    if let Some(bundle) = criteria {
        if apply_skip(&eval, &features, bundle) == SkipDecision::SkipRecursion {
            stats.skips_fired += 1;
            context.record(cu, &best);
            return Ok(whole(None, true));
        }
    }

    let mut children = Vec::with_capacity(4);
    for q in &quads {
        stats.recursions_entered += 1;
        children.push(partition_inner(
            q, frame, reference, context, params, criteria, stats,
        )?);
    }
    let split_cost: f64 =
        children.iter().map(CuTree::cost).sum::<f64>() + params.lambda * SPLIT_FLAG_BITS;
    if split_cost < whole_cost {
        let bits = children.iter().map(|c| c.bits).sum::<f64>() + SPLIT_FLAG_BITS;
        let distortion = children.iter().map(|c| c.distortion).sum();
        Ok(CuTree {
            unit: *cu,
            split: true,
            children,
            chosen_mode: None,
            features,
            whole_cost,
            split_cost: Some(split_cost),
            skipped: false,
            bits,
            distortion,
        })
    } else {
        // Children wrote tentative state over this CU's area; restore it.
        context.record(cu, &best);
        Ok(whole(Some(split_cost), false))
    }
}

/// Decides the quad-tree below `cu` by RDO, optionally short-circuiting the
/// recursion wherever a criterion in `criteria` fires.
pub fn partition_cu(
    cu: &CodingUnit,
    frame: &Frame,
    reference: &Frame,
    context: &mut NeighbourContext,
    params: &CodingParams,
    criteria: Option<&CriteriaBundle>,
) -> Result<(CuTree, RdoStats)> {
    let mut stats = RdoStats::default();
    let tree = partition_inner(cu, frame, reference, context, params, criteria, &mut stats)?;
    Ok((tree, stats))
}

/// Totals for one encoded frame.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame_index: u32,
    pub qp: u8,
    pub lambda: f64,
    pub total_rd_cost: f64,
    pub total_bits: f64,
    pub total_distortion: f64,
    pub rdo: RdoStats,
}

/// Encodes every CTU of `frame` in raster order against `reference`.
pub fn encode_frame(
    frame: &Frame,
    reference: &Frame,
    config: &EncoderConfig,
    criteria: Option<&CriteriaBundle>,
) -> Result<(Vec<CuTree>, FrameStats)> {
    if frame.width() != reference.width() || frame.height() != reference.height() {
        return Err(Error::domain(format!(
            "frame is {}x{} but reference is {}x{}",
            frame.width(),
            frame.height(),
            reference.width(),
            reference.height()
        )));
    }
    let params = config.params_for(frame)?;
    let mut context = NeighbourContext::new(frame.width(), frame.height());
    let mut stats = FrameStats {
        frame_index: frame.frame_index(),
        qp: params.qp,
        lambda: params.lambda,
        ..Default::default()
    };
    let mut trees = Vec::with_capacity(frame.ctu_count());
    for y in (0..frame.height()).step_by(CTU_SIZE) {
        for x in (0..frame.width()).step_by(CTU_SIZE) {
            let ctu = CodingUnit::ctu(x, y)?;
            let (tree, rdo) =
                partition_cu(&ctu, frame, reference, &mut context, &params, criteria)?;
            stats.total_rd_cost += tree.cost();
            stats.total_bits += tree.bits;
            stats.total_distortion += tree.distortion;
            stats.rdo += rdo;
            trees.push(tree);
        }
    }
    Ok((trees, stats))
}

/// Totals over the inter frames of a sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SequenceStats {
    pub frames: Vec<FrameStats>,
    pub total_bits: f64,
    pub total_distortion: f64,
    pub total_rd_cost: f64,
    pub pixels: u64,
    pub rdo: RdoStats,
}

/// Encodes frames `1..` of a sequence, each predicted from the previous
/// source frame. Frame 0 only serves as the first reference.
pub fn encode_sequence(
    frames: &[Frame],
    config: &EncoderConfig,
    criteria: Option<&CriteriaBundle>,
) -> Result<(Vec<Vec<CuTree>>, SequenceStats)> {
    if frames.len() < 2 {
        return Err(Error::domain(
            "a sequence needs at least two frames to inter-code",
        ));
    }
    let mut all = Vec::with_capacity(frames.len() - 1);
    let mut seq = SequenceStats::default();
    for pair in frames.windows(2) {
        let (trees, fs) = encode_frame(&pair[1], &pair[0], config, criteria)?;
        seq.total_bits += fs.total_bits;
        seq.total_distortion += fs.total_distortion;
        seq.total_rd_cost += fs.total_rd_cost;
        seq.pixels += (pair[1].width() * pair[1].height()) as u64;
        seq.rdo += fs.rdo;
        seq.frames.push(fs);
        all.push(trees);
    }
    Ok((all, seq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Feature;
    use crate::pruning::{Comparator, Predicate, SkipCriterion};

    fn flat(v: u8, w: usize, h: usize, idx: u32) -> Frame {
        Frame::new(w, h, vec![v; w * h], idx, 1).unwrap()
    }

    fn noisy(seed: u64, w: usize, h: usize) -> Frame {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Frame::new(w, h, (0..w * h).map(|_| rng.gen()).collect(), 1, 2).unwrap()
    }

    fn always_true_bundle(depth: u8) -> CriteriaBundle {
        let crit = SkipCriterion::from_predicates(
            depth,
            vec![Predicate::new(Feature::Rdc, Comparator::Ge, 0.0)],
        );
        CriteriaBundle::from_criteria(vec![crit], "test").unwrap()
    }

    #[test]
    fn depth3_cu_never_splits() {
        let f = noisy(1, 64, 64);
        let r = noisy(2, 64, 64);
        let params = EncoderConfig::new(22).params_for(&f).unwrap();
        let cu = CodingUnit::new(8, 16, 3).unwrap();
        let mut ctx = NeighbourContext::new(64, 64);
        let (tree, stats) = partition_cu(&cu, &f, &r, &mut ctx, &params, None).unwrap();
        assert!(!tree.split && tree.children.is_empty());
        assert_eq!(stats.recursions_entered, 0);
        assert_eq!(stats.mode_evaluations, 4);
    }

    #[test]
    fn flat_content_stays_whole() {
        let f = flat(90, 128, 64, 1);
        let r = flat(90, 128, 64, 0);
        let (trees, stats) = encode_frame(&f, &r, &EncoderConfig::new(22), None).unwrap();
        assert_eq!(trees.len(), 2);
        for t in &trees {
            assert!(!t.split);
            // The split alternative was computed and lost.
            assert!(t.split_cost.unwrap() > t.whole_cost);
        }
        assert_eq!(stats.total_distortion, 0.0);
    }

    #[test]
    fn always_true_criterion_stops_recursion_at_root() {
        let f = noisy(3, 64, 64);
        let r = noisy(4, 64, 64);
        let params = EncoderConfig::new(27).params_for(&f).unwrap();
        let bundle = always_true_bundle(0);
        let mut ctx = NeighbourContext::new(64, 64);
        let cu = CodingUnit::ctu(0, 0).unwrap();
        let (tree, stats) = partition_cu(&cu, &f, &r, &mut ctx, &params, Some(&bundle)).unwrap();
        assert_eq!(stats.recursions_entered, 0);
        assert_eq!(stats.skips_fired, 1);
        assert_eq!(stats.mode_evaluations, 4);
        assert!(tree.skipped && !tree.split);
    }

    #[test]
    fn argmin_soundness_and_tiling() {
        let f = noisy(5, 128, 128);
        let mut r = f.luma().to_vec();
        // Half the reference identical, half new noise.
        let other = noisy(6, 128, 128);
        r[128 * 64..].copy_from_slice(&other.luma()[128 * 64..]);
        let r = Frame::new(128, 128, r, 0, 1).unwrap();
        let (trees, stats) = encode_frame(&f, &r, &EncoderConfig::new(32), None).unwrap();
        let mut cost = 0.0;
        for t in &trees {
            t.visit(&mut |n| {
                if let Some(s) = n.split_cost {
                    assert!(n.cost() <= s && n.cost() <= n.whole_cost);
                }
                if n.split {
                    assert_eq!(n.children.len(), 4);
                } else {
                    assert!(n.children.is_empty());
                    assert!(n.chosen_mode.is_some());
                }
            });
            let area: usize = t.leaves().iter().map(|l| l.unit.size().pow(2)).sum();
            assert_eq!(area, 64 * 64);
            cost += t.cost();
        }
        assert!((cost - stats.total_rd_cost).abs() < 1e-6);
        let lambda = stats.lambda;
        let j = stats.total_distortion + lambda * stats.total_bits;
        assert!((j - stats.total_rd_cost).abs() <= 1e-9 * j.max(1.0));
    }

    #[test]
    fn encode_is_deterministic_and_checks_sizes() {
        let f = noisy(7, 128, 64);
        let r = noisy(8, 128, 64);
        let a = encode_frame(&f, &r, &EncoderConfig::new(27), None).unwrap();
        let b = encode_frame(&f, &r, &EncoderConfig::new(27), None).unwrap();
        assert_eq!(a, b);
        assert!(encode_frame(&f, &noisy(1, 64, 64), &EncoderConfig::new(27), None).is_err());
    }

    #[test]
    fn evaluation_without_tests_is_contract_violation() {
        let eval = CuEvaluation {
            cu: CodingUnit::ctu(0, 0).unwrap(),
            merge: None,
            inter: None,
            above_depth: None,
            left_depth: None,
            qp: 23,
            qp_offset: 1,
            lambda: 1.0,
        };
        assert!(matches!(eval.features(), Err(Error::Contract(_))));
    }
}
