use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PSNR reported for a lossless encode.
const PSNR_CAP: f64 = 100.0;

/// One rate/quality measurement of an encode at a base QP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    /// Total bits.
    pub rate: f64,
    /// Luma PSNR in dB.
    pub quality: f64,
    pub qp: u8,
}

impl RdPoint {
    pub fn from_encode(bits: f64, ssd: f64, pixels: u64, qp: u8) -> Result<Self> {
        if bits.is_nan() || bits <= 0.0 {
            return Err(Error::domain(format!("rate must be positive, got {bits}")));
        }
        Ok(RdPoint {
            rate: bits,
            quality: psnr_from_ssd(ssd, pixels)?,
            qp,
        })
    }
}

pub fn psnr_from_ssd(ssd: f64, pixels: u64) -> Result<f64> {
    if pixels == 0 || ssd.is_nan() || ssd < 0.0 {
        return Err(Error::domain(
            "PSNR needs pixels > 0 and a non-negative SSD",
        ));
    }
    if ssd == 0.0 {
        return Ok(PSNR_CAP);
    }
    let mse = ssd / pixels as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP))
}

/// Average rate difference of `test` against `anchor` in percent over the
/// common quality range; positive means `test` needs more rate.
///
/// Each curve's natural-log rate is fitted as a cubic in PSNR (least
/// squares, exact for four points) and the fits are integrated in closed
/// form.
pub fn bd_rate(anchor: &[RdPoint], test: &[RdPoint]) -> Result<f64> {
    let a = fit(anchor)?;
    let t = fit(test)?;
    let lo = a.lo.max(t.lo);
    let hi = a.hi.min(t.hi);
    if hi <= lo {
        return Err(Error::Undefined(format!(
            "quality ranges [{}, {}] and [{}, {}] do not overlap",
            a.lo, a.hi, t.lo, t.hi
        )));
    }
    let avg = (t.integral(lo, hi) - a.integral(lo, hi)) / (hi - lo);
    Ok((avg.exp() - 1.0) * 100.0)
}

/// ln(rate) as a cubic in `x = (psnr − centre) / scale`.
struct Cubic {
    coef: [f64; 4],
    centre: f64,
    scale: f64,
    lo: f64,
    hi: f64,
}

impl Cubic {
    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let c = &self.coef;
        let anti = |q: f64| {
            let x = (q - self.centre) / self.scale;
            c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0
        };
        self.scale * (anti(hi) - anti(lo))
    }
}

fn fit(points: &[RdPoint]) -> Result<Cubic> {
    if points.len() < 4 {
        return Err(Error::domain(format!(
            "need at least 4 RD points, got {}",
            points.len()
        )));
    }
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for p in points {
        if p.rate.is_nan() || p.rate <= 0.0 || !p.quality.is_finite() {
            return Err(Error::domain(format!("invalid RD point {p:?}")));
        }
        pts.push((p.quality, p.rate.ln()));
    }
    pts.sort_by(|x, y| x.1.total_cmp(&y.1));
    if pts
        .windows(2)
        .any(|w| !(w[1].0 > w[0].0 && w[1].1 > w[0].1))
    {
        return Err(Error::domain(
            "quality must be strictly increasing with rate",
        ));
    }
    let lo = pts[0].0;
    let hi = pts[pts.len() - 1].0;
    let centre = (lo + hi) / 2.0;
    let scale = (hi - lo) / 2.0;
    // Normal equations of the least-squares cubic.
    let mut m = [[0.0f64; 5]; 4];
    for &(q, r) in &pts {
        let q = (q - centre) / scale;
        let pw = [1.0, q, q * q, q * q * q];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] += pw[i] * pw[j];
            }
            m[i][4] += pw[i] * r;
        }
    }
    let coef = solve4(m).ok_or_else(|| Error::domain("degenerate RD points"))?;
    Ok(Cubic {
        coef,
        centre,
        scale,
        lo,
        hi,
    })
}

fn solve4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row = m[col];
        for (row, r) in m.iter_mut().enumerate() {
            if row != col {
                let f = r[col] / pivot_row[col];
                for (x, p) in r[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Some([
        m[0][4] / m[0][0],
        m[1][4] / m[1][1],
        m[2][4] / m[2][2],
        m[3][4] / m[3][3],
    ])
}
