//! Toy luma-only inter encoder with a CU quad-tree and exhaustive RDO.
//!
//! Every CU is first tested as a whole (merge/skip, then inter with the
//! three partition modes); at depths 0..2 the four-way split is then
//! evaluated recursively and the cheaper configuration under
//! `J = D + λ·R` is kept. Skip criteria can short-circuit that recursion
//! right after the whole-CU tests.

mod frame;
mod modes;
mod partition;
mod sequence;

pub use frame::{
    raw_path_for, read_raw, write_raw, CodingUnit, Frame, RawHeader, CTU_SIZE, MAX_CU_DEPTH,
};
pub use modes::{
    merge_skip_test, whole_cu_inter_candidates, whole_cu_inter_test, ModeKind, ModeResult,
    MotionVector, NeighbourContext, PartitionMode,
};
pub use partition::{
    encode_frame, encode_sequence, CuEvaluation, CuTree, FrameStats, RdoStats, SequenceStats,
};
pub use sequence::{generate_sequence, Archetype, Sequence, SequenceSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_QP: u8 = 51;

/// Lagrangian cost `J = D + λ·R`.
pub fn rd_cost(distortion: f64, bits: f64, lambda: f64) -> Result<f64> {
    if distortion.is_nan() || bits.is_nan() || distortion < 0.0 || bits < 0.0 {
        return Err(Error::domain(format!(
            "distortion ({distortion}) and bits ({bits}) must be non-negative"
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::domain(format!("lambda ({lambda}) must be positive")));
    }
    Ok(distortion + lambda * bits)
}

/// QP → λ mapping: `scale · 2^((qp − 12) / 3)`, so λ doubles every 3 QP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaRule {
    pub scale: f64,
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule { scale: 0.57 }
    }
}

impl LambdaRule {
    pub fn lambda(&self, qp: u8) -> Result<f64> {
        if qp > MAX_QP {
            return Err(Error::domain(format!("qp {qp} outside [0, {MAX_QP}]")));
        }
        Ok(self.scale * 2f64.powf((qp as f64 - 12.0) / 3.0))
    }
}

/// λ for `qp` under the default rule.
pub fn lambda_from_qp(qp: u8) -> Result<f64> {
    LambdaRule::default().lambda(qp)
}

/// Residual quantizer step, doubling every 6 QP (step 1 at QP 4).
pub fn quantizer_step(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub base_qp: u8,
    pub lambda_rule: LambdaRule,
    /// Integer displacement search radius for the whole-CU inter test.
    pub search_range: i16,
    pub rng_seed: u64,
}

impl EncoderConfig {
    pub fn new(base_qp: u8) -> Self {
        EncoderConfig {
            base_qp,
            lambda_rule: LambdaRule::default(),
            search_range: 3,
            rng_seed: 0,
        }
    }

    /// Effective QP for a frame: base QP plus the frame's offset.
    pub fn effective_qp(&self, qp_offset: u8) -> Result<u8> {
        let qp = self.base_qp as u16 + qp_offset as u16;
        if qp > MAX_QP as u16 {
            return Err(Error::domain(format!("effective qp {qp} exceeds {MAX_QP}")));
        }
        Ok(qp as u8)
    }

    pub fn params_for(&self, frame: &Frame) -> Result<CodingParams> {
        let qp = self.effective_qp(frame.qp_offset())?;
        Ok(CodingParams {
            qp,
            qp_offset: frame.qp_offset(),
            lambda: self.lambda_rule.lambda(qp)?,
            qstep: quantizer_step(qp),
            search_range: self.search_range,
        })
    }
}

/// Per-frame quantities derived from [`EncoderConfig`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodingParams {
    pub qp: u8,
    pub qp_offset: u8,
    pub lambda: f64,
    pub qstep: f64,
    pub search_range: i16,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rd_cost_substitution() {
        assert_eq!(rd_cost(0.0, 0.0, 5.0).unwrap(), 0.0);
        assert_eq!(rd_cost(100.0, 10.0, 4.0).unwrap(), 140.0);
        assert_eq!(rd_cost(327.5, 12.25, 16.5).unwrap(), 529.625);
    }

    #[test]
    fn rd_cost_rejects_negative_inputs() {
        assert!(rd_cost(-1.0, 0.0, 1.0).is_err());
        assert!(rd_cost(1.0, -0.5, 1.0).is_err());
        assert!(rd_cost(1.0, 1.0, 0.0).is_err());
        assert!(rd_cost(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn lambda_doubles_every_three_qp() {
        let l12 = lambda_from_qp(12).unwrap();
        let l18 = lambda_from_qp(18).unwrap();
        assert!((l18 / l12 - 4.0).abs() < 1e-12);
        let ratio = lambda_from_qp(37).unwrap() / lambda_from_qp(22).unwrap();
        assert!((ratio - 32.0).abs() < 1e-12);
        assert!(lambda_from_qp(22).unwrap() > 0.0);
        assert!(lambda_from_qp(52).is_err());
    }

    #[test]
    fn lambda_strictly_increasing() {
        let all: Vec<f64> = (0..=MAX_QP).map(|q| lambda_from_qp(q).unwrap()).collect();
        assert!(all.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn effective_qp_adds_offset() {
        let cfg = EncoderConfig::new(37);
        assert_eq!(cfg.effective_qp(4).unwrap(), 41);
        assert!(EncoderConfig::new(50).effective_qp(4).is_err());
    }
}
