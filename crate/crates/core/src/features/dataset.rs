use std::path::Path;

use super::{FeatureVector, Provenance, Sample};
use crate::error::{Error, Result};

pub const DATASET_HEADER: [&str; 16] = [
    "SF",
    "CBF",
    "RDC",
    "Bits",
    "AND",
    "QP",
    "lambda",
    "QPO",
    "PM",
    "depth",
    "label",
    "sequence_id",
    "base_qp",
    "frame_index",
    "cu_x",
    "cu_y",
];

/// Samples with a per-depth index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    by_depth: [Vec<usize>; 3],
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let mut by_depth: [Vec<usize>; 3] = Default::default();
        for (i, s) in samples.iter().enumerate() {
            let slot = by_depth
                .get_mut(s.depth as usize)
                .ok_or_else(|| Error::domain(format!("sample depth {} outside 0..=2", s.depth)))?;
            slot.push(i);
        }
        Ok(Dataset { samples, by_depth })
    }

    /// Merges partial datasets (e.g. from parallel encodes) into one whose
    /// order does not depend on the order of `parts`.
    pub fn merge(parts: impl IntoIterator<Item = Dataset>) -> Result<Self> {
        let mut all: Vec<Sample> = parts.into_iter().flat_map(|d| d.samples).collect();
        all.sort_by(|a, b| {
            (
                &a.provenance.sequence_id,
                a.provenance.base_qp,
                a.provenance.frame_index,
                a.depth,
            )
                .cmp(&(
                    &b.provenance.sequence_id,
                    b.provenance.base_qp,
                    b.provenance.frame_index,
                    b.depth,
                ))
                .then(
                    (a.provenance.cu_y, a.provenance.cu_x)
                        .cmp(&(b.provenance.cu_y, b.provenance.cu_x)),
                )
        });
        Dataset::new(all)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn depth_len(&self, depth: u8) -> usize {
        self.by_depth.get(depth as usize).map_or(0, Vec::len)
    }

    pub fn at_depth(&self, depth: u8) -> impl Iterator<Item = &Sample> + '_ {
        self.by_depth
            .get(depth as usize)
            .into_iter()
            .flatten()
            .map(move |&i| &self.samples[i])
    }

    /// Distinct sequence ids, sorted.
    pub fn sequence_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .samples
            .iter()
            .map(|s| s.provenance.sequence_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn export(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(DATASET_HEADER)
            .map_err(|e| csv_err(path, e))?;
        for s in &self.samples {
            let f = &s.features;
            let b = |v: bool| if v { "1" } else { "0" };
            w.write_record([
                b(f.sf).to_string(),
                b(f.cbf).to_string(),
                f.rdc.to_string(),
                f.bits.to_string(),
                f.and.to_string(),
                f.qp.to_string(),
                f.lambda.to_string(),
                f.qpo.to_string(),
                f.pm.to_string(),
                s.depth.to_string(),
                b(s.label).to_string(),
                s.provenance.sequence_id.clone(),
                s.provenance.base_qp.to_string(),
                s.provenance.frame_index.to_string(),
                s.provenance.cu_x.to_string(),
                s.provenance.cu_y.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(Error::io(path))?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_err(path, e))?;
        let mut samples = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(i as u64 + 1, |p| p.line());
            if i == 0 {
                if rec.iter().ne(DATASET_HEADER) {
                    return Err(Error::parse(path, line, "unexpected header row"));
                }
                continue;
            }
            if rec.len() != DATASET_HEADER.len() {
                return Err(Error::parse(
                    path,
                    line,
                    format!(
                        "expected {} columns, found {}",
                        DATASET_HEADER.len(),
                        rec.len()
                    ),
                ));
            }
            samples.push(parse_row(&rec, path, line)?);
        }
        Dataset::new(samples)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

fn parse_row(rec: &csv::StringRecord, path: &Path, line: u64) -> Result<Sample> {
    fn field<T: std::str::FromStr>(
        rec: &csv::StringRecord,
        i: usize,
        path: &Path,
        line: u64,
    ) -> Result<T> {
        rec[i].parse().map_err(|_| {
            Error::parse(
                path,
                line,
                format!("invalid {} value `{}`", DATASET_HEADER[i], &rec[i]),
            )
        })
    }
    let flag = |i: usize| -> Result<bool> {
        match &rec[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(Error::parse(
                path,
                line,
                format!("invalid {} flag `{v}`", DATASET_HEADER[i]),
            )),
        }
    };
    let features = FeatureVector {
        sf: flag(0)?,
        cbf: flag(1)?,
        rdc: field(rec, 2, path, line)?,
        bits: field(rec, 3, path, line)?,
        and: field(rec, 4, path, line)?,
        qp: field(rec, 5, path, line)?,
        lambda: field(rec, 6, path, line)?,
        qpo: field(rec, 7, path, line)?,
        pm: field(rec, 8, path, line)?,
    };
    features
        .validate()
        .map_err(|e| Error::parse(path, line, e.to_string()))?;
    let depth: u8 = field(rec, 9, path, line)?;
    if depth > 2 {
        return Err(Error::parse(
            path,
            line,
            format!("depth {depth} outside 0..=2"),
        ));
    }
    Ok(Sample {
        features,
        depth,
        label: flag(10)?,
        provenance: Provenance {
            sequence_id: rec[11].to_string(),
            base_qp: field(rec, 12, path, line)?,
            frame_index: field(rec, 13, path, line)?,
            cu_x: field(rec, 14, path, line)?,
            cu_y: field(rec, 15, path, line)?,
        },
    })
}
