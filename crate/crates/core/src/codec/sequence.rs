//! Deterministic synthetic test content.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Frame, RawHeader, CTU_SIZE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    /// One constant value for every sample of every frame.
    Flat,
    /// A smooth texture panning with a constant global displacement.
    MovingTexture,
    /// Independent uniform noise in every frame.
    Noise,
    /// Static background, moving textured objects and a noise patch.
    Mixed,
}

impl Archetype {
    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::Flat => "flat",
            Archetype::MovingTexture => "moving-texture",
            Archetype::Noise => "noise",
            Archetype::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Archetype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(Archetype::Flat),
            "moving-texture" => Ok(Archetype::MovingTexture),
            "noise" => Ok(Archetype::Noise),
            "mixed" => Ok(Archetype::Mixed),
            other => Err(Error::Config(format!("unknown archetype `{other}`"))),
        }
    }
}

/// Text config describing one synthetic sequence, e.g.
///
/// ```toml
/// name = "mixed-a"
/// archetype = "mixed"
/// width = 256
/// height = 256
/// frames = 10
/// seed = 7
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub name: String,
    pub archetype: Archetype,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
}

impl SequenceSpec {
    pub fn new(
        name: &str,
        archetype: Archetype,
        width: usize,
        height: usize,
        frames: usize,
        seed: u64,
    ) -> Self {
        SequenceSpec {
            name: name.to_string(),
            archetype,
            width,
            height,
            frames,
            seed,
        }
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1) as u64)
                .unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(path, &text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::domain("frames must be at least 1"));
        }
        if self.width == 0
            || self.height == 0
            || !self.width.is_multiple_of(CTU_SIZE)
            || !self.height.is_multiple_of(CTU_SIZE)
        {
            return Err(Error::domain(format!(
                "width and height must be non-zero multiples of {CTU_SIZE} (got {}x{})",
                self.width, self.height
            )));
        }
        if self.name.is_empty() || self.name.contains(|c: char| c.is_whitespace() || c == ',') {
            return Err(Error::domain(
                "name must be non-empty without whitespace or commas",
            ));
        }
        Ok(())
    }
}

/// A named sequence of frames with its generating spec.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub spec: SequenceSpec,
    pub frames: Vec<Frame>,
}

impl Sequence {
    pub fn id(&self) -> &str {
        &self.spec.name
    }

    pub fn header(&self) -> RawHeader {
        RawHeader {
            name: self.spec.name.clone(),
            archetype: self.spec.archetype.to_string(),
            seed: self.spec.seed,
            width: self.spec.width,
            height: self.spec.height,
            qp_offsets: self.frames.iter().map(Frame::qp_offset).collect(),
        }
    }

    pub fn from_raw(header: RawHeader, frames: Vec<Frame>) -> Result<Self> {
        let spec = SequenceSpec {
            name: header.name,
            archetype: header.archetype.parse()?,
            width: header.width,
            height: header.height,
            frames: frames.len(),
            seed: header.seed,
        };
        Ok(Sequence { spec, frames })
    }
}

/// QP offset of frame `i`: frames after the first cycle through 1..=4.
/// The leading frame is only ever a reference and carries offset 1.
pub fn qp_offset_for(i: usize) -> u8 {
    if i == 0 {
        1
    } else {
        ((i - 1) % 4) as u8 + 1
    }
}

/// Periodic value-noise texture with bilinear interpolation over a lattice.
struct Texture {
    w: usize,
    h: usize,
    cell: usize,
    lattice: Vec<f64>,
    detail: Vec<f64>,
}

impl Texture {
    fn new(
        rng: &mut ChaCha8Rng,
        w: usize,
        h: usize,
        cell: usize,
        contrast: f64,
        detail: f64,
    ) -> Self {
        let lw = w.div_ceil(cell);
        let lh = h.div_ceil(cell);
        let lattice = (0..lw * lh)
            .map(|_| rng.gen_range(-contrast..=contrast))
            .collect();
        let detail = (0..w * h)
            .map(|_| rng.gen_range(-detail..=detail))
            .collect();
        Texture {
            w,
            h,
            cell,
            lattice,
            detail,
        }
    }

    fn at(&self, x: isize, y: isize) -> f64 {
        let x = x.rem_euclid(self.w as isize) as usize;
        let y = y.rem_euclid(self.h as isize) as usize;
        let lw = self.w.div_ceil(self.cell);
        let lh = self.h.div_ceil(self.cell);
        let (cx, cy) = (x / self.cell, y / self.cell);
        let fx = (x % self.cell) as f64 / self.cell as f64;
        let fy = (y % self.cell) as f64 / self.cell as f64;
        let l = |i: usize, j: usize| self.lattice[(j % lh) * lw + (i % lw)];
        let top = l(cx, cy) * (1.0 - fx) + l(cx + 1, cy) * fx;
        let bottom = l(cx, cy + 1) * (1.0 - fx) + l(cx + 1, cy + 1) * fx;
        top * (1.0 - fy) + bottom * fy + self.detail[y * self.w + x]
    }
}

struct MovingObject {
    x: isize,
    y: isize,
    w: usize,
    h: usize,
    vx: isize,
    vy: isize,
    base: f64,
    texture: Texture,
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn nonzero_velocity(rng: &mut ChaCha8Rng, max: isize) -> (isize, isize) {
    loop {
        let v = (rng.gen_range(-max..=max), rng.gen_range(-max..=max));
        if v != (0, 0) {
            return v;
        }
    }
}

/// Generates the frames described by `spec`, deterministically in `seed`.
pub fn generate_sequence(spec: &SequenceSpec, seed: u64) -> Result<Sequence> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planes: Vec<Vec<u8>> = Vec::with_capacity(spec.frames);

    match spec.archetype {
        Archetype::Flat => {
            let v: u8 = rng.gen_range(16..=240);
            planes.resize(spec.frames, vec![v; w * h]);
        }
        Archetype::MovingTexture => {
            let tex = Texture::new(&mut rng, w, h, 16, 70.0, 6.0);
            let (vx, vy) = nonzero_velocity(&mut rng, 2);
            for t in 0..spec.frames as isize {
                let mut p = Vec::with_capacity(w * h);
                for y in 0..h as isize {
                    for x in 0..w as isize {
                        p.push(clamp_u8(128.0 + tex.at(x - vx * t, y - vy * t)));
                    }
                }
                planes.push(p);
            }
        }
        Archetype::Noise => {
            for _ in 0..spec.frames {
                planes.push((0..w * h).map(|_| rng.gen_range(64..=192)).collect());
            }
        }
        Archetype::Mixed => planes = mixed(&mut rng, w, h, spec.frames),
    }

    let frames = planes
        .into_iter()
        .enumerate()
        .map(|(i, p)| Frame::new(w, h, p, i as u32, qp_offset_for(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sequence {
        spec: spec.clone(),
        frames,
    })
}

fn mixed(rng: &mut ChaCha8Rng, w: usize, h: usize, frames: usize) -> Vec<Vec<u8>> {
    let background = Texture::new(rng, w, h, 32, 25.0, 0.0);
    let bg_level: f64 = rng.gen_range(70.0..=170.0);
    // Roughly one object per two CTUs of area.
    let n_objects = ((w * h) / (2 * CTU_SIZE * CTU_SIZE)).max(2);
    let mut objects: Vec<MovingObject> = (0..n_objects)
        .map(|_| {
            let ow = rng.gen_range(12..=40);
            let oh = rng.gen_range(12..=40);
            let (vx, vy) = nonzero_velocity(rng, 3);
            MovingObject {
                x: rng.gen_range(0..w as isize),
                y: rng.gen_range(0..h as isize),
                w: ow,
                h: oh,
                vx,
                vy,
                base: rng.gen_range(-60.0..=60.0),
                texture: Texture::new(rng, ow, oh, 4, 50.0, 8.0),
            }
        })
        .collect();
    let patch = 32.min(w).min(h);
    let patch_x = rng.gen_range(0..=(w - patch) / 8) * 8;
    let patch_y = rng.gen_range(0..=(h - patch) / 8) * 8;

    let mut out = Vec::with_capacity(frames);
    for _ in 0..frames {
        let mut p = vec![0f64; w * h];
        for y in 0..h {
            for x in 0..w {
                p[y * w + x] = bg_level + background.at(x as isize, y as isize);
            }
        }
        for o in &objects {
            for oy in 0..o.h {
                for ox in 0..o.w {
                    let x = (o.x + ox as isize).rem_euclid(w as isize) as usize;
                    let y = (o.y + oy as isize).rem_euclid(h as isize) as usize;
                    p[y * w + x] = bg_level + o.base + o.texture.at(ox as isize, oy as isize);
                }
            }
        }
        for y in patch_y..patch_y + patch {
            for x in patch_x..patch_x + patch {
                p[y * w + x] = rng.gen_range(40.0..=215.0);
            }
        }
        // Low-level sensor noise everywhere.
        out.push(
            p.iter()
                .map(|&v| clamp_u8(v + rng.gen_range(-1i32..=1) as f64))
                .collect(),
        );
        for o in &mut objects {
            o.x += o.vx;
            o.y += o.vy;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(a: Archetype, frames: usize) -> SequenceSpec {
        SequenceSpec::new("s", a, 128, 64, frames, 11)
    }

    #[test]
    fn flat_frames_are_constant() {
        let s = generate_sequence(&spec(Archetype::Flat, 3), 5).unwrap();
        let v = s.frames[0].luma()[0];
        assert!(s.frames.iter().all(|f| f.luma().iter().all(|&x| x == v)));
    }

    #[test]
    fn generation_is_deterministic() {
        for a in [
            Archetype::Flat,
            Archetype::MovingTexture,
            Archetype::Noise,
            Archetype::Mixed,
        ] {
            let x = generate_sequence(&spec(a, 4), 9).unwrap();
            let y = generate_sequence(&spec(a, 4), 9).unwrap();
            assert_eq!(x, y);
            let z = generate_sequence(&spec(a, 4), 10).unwrap();
            if a != Archetype::Flat {
                assert_ne!(x.frames, z.frames);
            }
        }
    }

    #[test]
    fn qp_offsets_cycle_after_first_frame() {
        let s = generate_sequence(&spec(Archetype::Noise, 10), 1).unwrap();
        let qpo: Vec<u8> = s.frames.iter().map(Frame::qp_offset).collect();
        assert_eq!(qpo, vec![1, 1, 2, 3, 4, 1, 2, 3, 4, 1]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_sequence(&spec(Archetype::Flat, 0), 1).is_err());
        let mut bad = spec(Archetype::Flat, 2);
        bad.width = 100;
        let err = generate_sequence(&bad, 1).unwrap_err();
        assert!(err.to_string().contains("multiples of 64"));
    }

    #[test]
    fn spec_parses_from_toml() {
        let text = "name = \"m\"\narchetype = \"moving-texture\"\nwidth = 128\nheight = 64\nframes = 5\nseed = 3\n";
        let s = SequenceSpec::parse(Path::new("x.toml"), text).unwrap();
        assert_eq!(
            s,
            SequenceSpec::new("m", Archetype::MovingTexture, 128, 64, 5, 3)
        );
        let err = SequenceSpec::parse(Path::new("x.toml"), "name = \"m\"\narchetype = \"blob\"\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
