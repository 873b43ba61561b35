//! Anchor-versus-test comparison: Bjøntegaard delta rate and effort deltas.

mod bdrate;
mod bench;

pub use bdrate::{bd_rate, psnr_from_ssd, RdPoint};
pub use bench::{
    run_benchmark, BenchReport, BenchRow, BenchRun, BenchTiming, EncodeSummary, TimingRow,
    REFERENCE_BD_RATE_PCT, REFERENCE_TIME_SAVING_PCT, REPORT_COLUMNS,
};
