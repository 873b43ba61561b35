use std::fmt::Write as _;

use super::{Dataset, Feature};
use crate::error::{Error, Result};

/// Pearson product-moment correlation of `values` against 0/1 `labels`
/// (point-biserial when `values` is itself boolean).
pub fn pearson_correlation(values: &[f64], labels: &[f64]) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::domain("correlation columns differ in length"));
    }
    if values.len() < 2 {
        return Err(Error::domain("correlation needs at least two rows"));
    }
    let constant = |c: &[f64]| c.iter().all(|&v| v == c[0]);
    if constant(values) || constant(labels) {
        return Err(Error::Undefined(
            "correlation with a constant column".into(),
        ));
    }
    // Single-pass co-moment accumulation.
    let (mut mx, mut my, mut cxy, mut m2x, mut m2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (n, (&x, &y)) in values.iter().zip(labels).enumerate() {
        let n = (n + 1) as f64;
        let dx = x - mx;
        let dy = y - my;
        mx += dx / n;
        my += dy / n;
        cxy += dx * (y - my);
        m2x += dx * (x - mx);
        m2y += dy * (y - my);
    }
    Ok((cxy / (m2x * m2y).sqrt()).clamp(-1.0, 1.0))
}

/// Signed correlations of each feature with the split label; rows are CU
/// depths 0..2, columns follow [`Feature::ALL`]. `None` marks undefined cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationTable {
    pub cells: [[Option<f64>; 9]; 3],
}

impl CorrelationTable {
    pub fn abs(&self, depth: usize, feature: Feature) -> Option<f64> {
        self.cells[depth][feature.id()].map(f64::abs)
    }

    fn cell_text(v: Option<f64>) -> String {
        v.map_or_else(|| "n/a".to_string(), |r| format!("{:.2}", r.abs()))
    }

    /// Aligned text in the depth × feature layout, absolute values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<6}", "Depth");
        for f in Feature::ALL {
            let _ = write!(s, "{:>8}", f.name());
        }
        s.push('\n');
        for (d, row) in self.cells.iter().enumerate() {
            let _ = write!(s, "{:<6}", d);
            for &c in row {
                let _ = write!(s, "{:>8}", Self::cell_text(c));
            }
            s.push('\n');
        }
        s
    }

    /// Comma-separated grid with full-precision absolute values.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("depth");
        for f in Feature::ALL {
            s.push(',');
            s.push_str(f.name());
        }
        s.push('\n');
        for (d, row) in self.cells.iter().enumerate() {
            s.push_str(&d.to_string());
            for &c in row {
                s.push(',');
                match c {
                    Some(r) => s.push_str(&r.abs().to_string()),
                    None => s.push_str("n/a"),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Correlation of every feature with the split label at each depth.
pub fn correlation_table(dataset: &Dataset) -> CorrelationTable {
    let mut cells = [[None; 9]; 3];
    for (d, row) in cells.iter_mut().enumerate() {
        let samples: Vec<_> = dataset.at_depth(d as u8).collect();
        let labels: Vec<f64> = samples.iter().map(|s| s.label as u8 as f64).collect();
        for f in Feature::ALL {
            let col: Vec<f64> = samples.iter().map(|s| s.features.get(f)).collect();
            row[f.id()] = pearson_correlation(&col, &labels).ok();
        }
    }
    CorrelationTable { cells }
}

/// A quantile-binned column.
#[derive(Clone, Debug, PartialEq)]
pub struct Binned {
    /// Each input value replaced by its bin's representative (lower edge,
    /// or the column minimum for the first bin).
    pub values: Vec<f64>,
    /// Strictly increasing inner edges; bin `i` is `[edges[i-1], edges[i])`.
    pub edges: Vec<f64>,
}

/// Representative of `v` under `edges`: the largest edge `<= v`, or `min`.
pub fn bin_representative(v: f64, edges: &[f64], min: f64) -> f64 {
    match edges.partition_point(|&e| e <= v) {
        0 => min,
        i => edges[i - 1],
    }
}

/// Equal-frequency binning with linearly interpolated quantile edges at
/// `i / bin_count`. Columns with at most `bin_count` distinct values get one
/// bin per distinct value.
pub fn bin_continuous(values: &[f64], bin_count: usize) -> Result<Binned> {
    if bin_count < 2 {
        return Err(Error::domain("bin_count must be at least 2"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("cannot bin NaN values"));
    }
    if values.is_empty() {
        return Ok(Binned {
            values: Vec::new(),
            edges: Vec::new(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let mut distinct = sorted.clone();
    distinct.dedup();

    let edges: Vec<f64> = if distinct.len() <= bin_count {
        distinct[1..].to_vec()
    } else {
        let n = sorted.len();
        let mut edges: Vec<f64> = (1..bin_count)
            .map(|i| {
                let pos = (n - 1) as f64 * i as f64 / bin_count as f64;
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                if lo + 1 < n {
                    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
                } else {
                    sorted[lo]
                }
            })
            .filter(|&e| e > min)
            .collect();
        edges.dedup();
        edges
    };
    let values = values
        .iter()
        .map(|&v| bin_representative(v, &edges, min))
        .collect();
    Ok(Binned { values, edges })
}
