use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bdrate::{bd_rate, RdPoint};
use crate::codec::{encode_sequence, EncoderConfig, RdoStats, Sequence};
use crate::error::{Error, Result};
use crate::skip::CriteriaBundle;

/// Outcome of one encode of one sequence at one base QP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeSummary {
    pub sequence: String,
    pub qp: u8,
    pub point: RdPoint,
    pub rd_cost: f64,
    pub rdo: RdoStats,
}

/// One line of the report. Deltas are `(test − anchor) / anchor` in percent,
/// so negative effort deltas are savings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub label: String,
    pub class: String,
    /// `None` when the BD-rate is undefined for the content (e.g. lossless
    /// at every QP).
    pub bd_rate_pct: Option<f64>,
    pub mode_eval_delta_pct: f64,
    pub recursion_delta_pct: f64,
    pub effort_delta_pct: f64,
    pub skips_fired: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub criteria: String,
    pub qps: Vec<u8>,
    pub sequences: Vec<BenchRow>,
    pub classes: Vec<BenchRow>,
    pub average: BenchRow,
    pub anchor: Vec<EncodeSummary>,
    pub test: Vec<EncodeSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub sequence: String,
    pub anchor_secs: f64,
    pub test_secs: f64,
    pub delta_pct: f64,
}

/// Wall-clock figures, kept apart from the report because they vary
/// between runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    pub rows: Vec<TimingRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRun {
    pub report: BenchReport,
    pub timing: BenchTiming,
}

fn delta_pct(anchor: f64, test: f64) -> f64 {
    if anchor == 0.0 {
        0.0
    } else {
        (test - anchor) / anchor * 100.0
    }
}

/// Encodes every sequence at every QP twice, without and with `bundle`,
/// and compares the two. Refuses sequences the criteria were trained on.
pub fn run_benchmark(
    sequences: &[Sequence],
    qps: &[u8],
    template: &EncoderConfig,
    bundle: &CriteriaBundle,
) -> Result<BenchRun> {
    if sequences.is_empty() {
        return Err(Error::domain("no sequences to benchmark"));
    }
    if qps.is_empty() {
        return Err(Error::domain("no QPs to benchmark"));
    }
    let mut ids = BTreeSet::new();
    for s in sequences {
        if !ids.insert(s.id()) {
            return Err(Error::domain(format!(
                "sequence id `{}` appears twice",
                s.id()
            )));
        }
        if bundle.trained_on.iter().any(|t| t == s.id()) {
            return Err(Error::Contract(format!(
                "sequence `{}` was used to train the criteria; benchmark sequences must be held out",
                s.id()
            )));
        }
    }

    let jobs: Vec<(usize, u8, bool)> = (0..sequences.len())
        .flat_map(|i| {
            qps.iter()
                .flat_map(move |&qp| [(i, qp, false), (i, qp, true)])
        })
        .collect();
    let results: Vec<(EncodeSummary, f64)> = jobs
        .par_iter()
        .map(|&(i, qp, with_criteria)| {
            let seq = &sequences[i];
            let config = EncoderConfig {
                base_qp: qp,
                ..template.clone()
            };
            let criteria = (with_criteria && !bundle.is_empty()).then_some(bundle);
            let start = Instant::now();
            let (_, stats) = encode_sequence(&seq.frames, &config, criteria)?;
            let secs = start.elapsed().as_secs_f64();
            let summary = EncodeSummary {
                sequence: seq.id().to_string(),
                qp,
                point: RdPoint::from_encode(
                    stats.total_bits,
                    stats.total_distortion,
                    stats.pixels,
                    qp,
                )?,
                rd_cost: stats.total_rd_cost,
                rdo: stats.rdo,
            };
            Ok((summary, secs))
        })
        .collect::<Result<_>>()?;

    let mut anchor = Vec::new();
    let mut test = Vec::new();
    let mut timing = BenchTiming::default();
    let mut rows = Vec::new();
    let per_seq = 2 * qps.len();
    for (seq, chunk) in sequences.iter().zip(results.chunks(per_seq)) {
        let a: Vec<&EncodeSummary> = chunk.iter().step_by(2).map(|r| &r.0).collect();
        let t: Vec<&EncodeSummary> = chunk.iter().skip(1).step_by(2).map(|r| &r.0).collect();
        let sum = |v: &[&EncodeSummary], f: fn(&RdoStats) -> u64| {
            v.iter().map(|e| f(&e.rdo)).sum::<u64>() as f64
        };
        let a_pts: Vec<RdPoint> = a.iter().map(|e| e.point).collect();
        let t_pts: Vec<RdPoint> = t.iter().map(|e| e.point).collect();
        rows.push(BenchRow {
            label: seq.id().to_string(),
            class: seq.spec.archetype.to_string(),
            bd_rate_pct: bd_rate(&a_pts, &t_pts).ok(),
            mode_eval_delta_pct: delta_pct(
                sum(&a, |r| r.mode_evaluations),
                sum(&t, |r| r.mode_evaluations),
            ),
            recursion_delta_pct: delta_pct(
                sum(&a, |r| r.recursions_entered),
                sum(&t, |r| r.recursions_entered),
            ),
            effort_delta_pct: delta_pct(sum(&a, RdoStats::effort), sum(&t, RdoStats::effort)),
            skips_fired: sum(&t, |r| r.skips_fired) as u64,
        });
        let a_secs: f64 = chunk.iter().step_by(2).map(|r| r.1).sum();
        let t_secs: f64 = chunk.iter().skip(1).step_by(2).map(|r| r.1).sum();
        timing.rows.push(TimingRow {
            sequence: seq.id().to_string(),
            anchor_secs: a_secs,
            test_secs: t_secs,
            delta_pct: delta_pct(a_secs, t_secs),
        });
        anchor.extend(a.into_iter().cloned());
        test.extend(t.into_iter().cloned());
    }

    let mut by_class: BTreeMap<&str, Vec<&BenchRow>> = BTreeMap::new();
    for r in &rows {
        by_class.entry(r.class.as_str()).or_default().push(r);
    }
    let classes = by_class
        .iter()
        .map(|(c, rs)| mean_row(&format!("class {c}"), c, rs))
        .collect();
    let all: Vec<&BenchRow> = rows.iter().collect();
    let average = mean_row("average", "all", &all);

    Ok(BenchRun {
        report: BenchReport {
            criteria: bundle.provenance.clone(),
            qps: qps.to_vec(),
            sequences: rows,
            classes,
            average,
            anchor,
            test,
        },
        timing,
    })
}

fn mean_row(label: &str, class: &str, rows: &[&BenchRow]) -> BenchRow {
    let n = rows.len() as f64;
    let mean = |f: fn(&BenchRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    let bds: Vec<f64> = rows.iter().filter_map(|r| r.bd_rate_pct).collect();
    BenchRow {
        label: label.to_string(),
        class: class.to_string(),
        bd_rate_pct: (!bds.is_empty()).then(|| bds.iter().sum::<f64>() / bds.len() as f64),
        mode_eval_delta_pct: mean(|r| r.mode_eval_delta_pct),
        recursion_delta_pct: mean(|r| r.recursion_delta_pct),
        effort_delta_pct: mean(|r| r.effort_delta_pct),
        skips_fired: rows.iter().map(|r| r.skips_fired).sum(),
    }
}

/// Published figures for a full HEVC encoder on natural content, printed for
/// context only; the toy codec is not expected to reproduce them.
pub const REFERENCE_TIME_SAVING_PCT: f64 = 42.1;
pub const REFERENCE_BD_RATE_PCT: f64 = 0.7;

pub const REPORT_COLUMNS: [&str; 7] = [
    "sequence",
    "class",
    "y_bd_rate_pct",
    "mode_eval_delta_pct",
    "recursion_delta_pct",
    "effort_delta_pct",
    "skips_fired",
];

impl BenchReport {
    fn all_rows(&self) -> impl Iterator<Item = &BenchRow> {
        self.sequences
            .iter()
            .chain(&self.classes)
            .chain(std::iter::once(&self.average))
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let qps: Vec<String> = self.qps.iter().map(u8::to_string).collect();
        let _ = writeln!(
            s,
            "criteria: {}",
            if self.criteria.is_empty() {
                "none"
            } else {
                &self.criteria
            }
        );
        let _ = writeln!(s, "base QPs: {}", qps.join(", "));
        let _ = writeln!(
            s,
            "{:<24} {:<16} {:>12} {:>14} {:>14} {:>12} {:>8}",
            "Sequence", "Class", "Y BD-rate %", "ModeEval d%", "Recursion d%", "Effort d%", "Skips"
        );
        let sep = |s: &mut String| {
            let _ = writeln!(s, "{}", "-".repeat(106));
        };
        sep(&mut s);
        for (i, r) in self.all_rows().enumerate() {
            if i == self.sequences.len() || i == self.sequences.len() + self.classes.len() {
                sep(&mut s);
            }
            let bd = r
                .bd_rate_pct
                .map_or_else(|| "n/a".to_string(), |v| format!("{v:+.2}"));
            let _ = writeln!(
                s,
                "{:<24} {:<16} {:>12} {:>14} {:>14} {:>12} {:>8}",
                r.label,
                r.class,
                bd,
                format!("{:+.2}", r.mode_eval_delta_pct),
                format!("{:+.2}", r.recursion_delta_pct),
                format!("{:+.2}", r.effort_delta_pct),
                r.skips_fired
            );
        }
        let _ = writeln!(
            s,
            "reference (full HEVC encoder, natural content): encoding time -{REFERENCE_TIME_SAVING_PCT}%, Y BD-rate +{REFERENCE_BD_RATE_PCT}%"
        );
        s
    }

    /// Machine-readable grid with [`REPORT_COLUMNS`].
    pub fn to_csv(&self) -> String {
        let mut s = REPORT_COLUMNS.join(",");
        s.push('\n');
        for r in self.all_rows() {
            let bd = r
                .bd_rate_pct
                .map_or_else(|| "n/a".to_string(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.label,
                r.class,
                bd,
                r.mode_eval_delta_pct,
                r.recursion_delta_pct,
                r.effort_delta_pct,
                r.skips_fired
            );
        }
        s
    }

    pub fn total_mode_evaluations(&self) -> (u64, u64) {
        let f = |v: &[EncodeSummary]| v.iter().map(|e| e.rdo.mode_evaluations).sum();
        (f(&self.anchor), f(&self.test))
    }
}

impl BenchTiming {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sequence,anchor_secs,test_secs,wall_time_delta_pct\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.sequence, r.anchor_secs, r.test_secs, r.delta_pct
            );
        }
        s
    }
}
