use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest CU edge; frames are tiled by CTUs of this size.
pub const CTU_SIZE: usize = 64;
/// Deepest quad-tree level (8×8 CUs).
pub const MAX_CU_DEPTH: u8 = 3;

/// One 8-bit luma plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    luma: Vec<u8>,
    frame_index: u32,
    qp_offset: u8,
}

impl Frame {
    pub fn new(
        width: usize,
        height: usize,
        luma: Vec<u8>,
        frame_index: u32,
        qp_offset: u8,
    ) -> Result<Self> {
        if width == 0
            || height == 0
            || !width.is_multiple_of(CTU_SIZE)
            || !height.is_multiple_of(CTU_SIZE)
        {
            return Err(Error::domain(format!(
                "frame dimensions {width}x{height} must be non-zero multiples of {CTU_SIZE}"
            )));
        }
        if luma.len() != width * height {
            return Err(Error::domain(format!(
                "luma plane has {} samples, expected {}",
                luma.len(),
                width * height
            )));
        }
        check_qp_offset(qp_offset)?;
        Ok(Frame {
            width,
            height,
            luma,
            frame_index,
            qp_offset,
        })
    }

    /// Builds a frame from arbitrary dimensions, padding right and bottom by
    /// edge replication up to the next multiple of 64.
    pub fn from_unpadded(
        width: usize,
        height: usize,
        luma: &[u8],
        frame_index: u32,
        qp_offset: u8,
    ) -> Result<Self> {
        if width == 0 || height == 0 || luma.len() != width * height {
            return Err(Error::domain(
                "unpadded plane size does not match dimensions",
            ));
        }
        let padded_w = width.div_ceil(CTU_SIZE) * CTU_SIZE;
        let padded_h = height.div_ceil(CTU_SIZE) * CTU_SIZE;
        let mut out = Vec::with_capacity(padded_w * padded_h);
        for y in 0..padded_h {
            let row = &luma[y.min(height - 1) * width..][..width];
            out.extend_from_slice(row);
            out.extend(std::iter::repeat_n(row[width - 1], padded_w - width));
        }
        Frame::new(padded_w, padded_h, out, frame_index, qp_offset)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn luma(&self) -> &[u8] {
        &self.luma
    }

    pub fn frame_index(&self) -> u32 {
        self.frame_index
    }

    pub fn qp_offset(&self) -> u8 {
        self.qp_offset
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize) -> u8 {
        self.luma[y * self.width + x]
    }

    /// Sample fetch with edge replication outside the plane.
    #[inline]
    pub fn sample_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.luma[y * self.width + x]
    }

    pub fn ctu_count(&self) -> usize {
        (self.width / CTU_SIZE) * (self.height / CTU_SIZE)
    }
}

pub(crate) fn check_qp_offset(qpo: u8) -> Result<()> {
    if (1..=4).contains(&qpo) {
        Ok(())
    } else {
        Err(Error::domain(format!("qp_offset {qpo} outside [1, 4]")))
    }
}

/// A square block of the quad-tree. `size == 64 >> depth`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodingUnit {
    pub x: usize,
    pub y: usize,
    pub depth: u8,
}

impl CodingUnit {
    pub fn new(x: usize, y: usize, depth: u8) -> Result<Self> {
        if depth > MAX_CU_DEPTH {
            return Err(Error::domain(format!(
                "CU depth {depth} exceeds {MAX_CU_DEPTH}"
            )));
        }
        let size = CTU_SIZE >> depth;
        if !x.is_multiple_of(size) || !y.is_multiple_of(size) {
            return Err(Error::domain(format!(
                "CU origin ({x}, {y}) not aligned to size {size}"
            )));
        }
        Ok(CodingUnit { x, y, depth })
    }

    pub fn ctu(x: usize, y: usize) -> Result<Self> {
        CodingUnit::new(x, y, 0)
    }

    #[inline]
    pub fn size(&self) -> usize {
        CTU_SIZE >> self.depth
    }

    pub fn contains_within(&self, frame: &Frame) -> bool {
        self.x + self.size() <= frame.width() && self.y + self.size() <= frame.height()
    }

    /// The four quad-split children in Z order, or `None` at depth 3.
    pub fn children(&self) -> Option<[CodingUnit; 4]> {
        if self.depth >= MAX_CU_DEPTH {
            return None;
        }
        let half = self.size() / 2;
        let d = self.depth + 1;
        Some([
            CodingUnit {
                x: self.x,
                y: self.y,
                depth: d,
            },
            CodingUnit {
                x: self.x + half,
                y: self.y,
                depth: d,
            },
            CodingUnit {
                x: self.x,
                y: self.y + half,
                depth: d,
            },
            CodingUnit {
                x: self.x + half,
                y: self.y + half,
                depth: d,
            },
        ])
    }
}

const RAW_MAGIC: &str = "cusplit-luma8";

/// Header stored in the sidecar `.hdr` file next to a planar `.y` file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawHeader {
    pub name: String,
    pub archetype: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub qp_offsets: Vec<u8>,
}

impl RawHeader {
    pub fn to_line(&self) -> String {
        let qpo: Vec<String> = self.qp_offsets.iter().map(|q| q.to_string()).collect();
        format!(
            "{RAW_MAGIC} name={} archetype={} seed={} width={} height={} frames={} qp_offsets={}",
            self.name,
            self.archetype,
            self.seed,
            self.width,
            self.height,
            self.qp_offsets.len(),
            qpo.join(",")
        )
    }

    pub fn parse_line(path: &Path, line: &str) -> Result<Self> {
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some(RAW_MAGIC) {
            return Err(Error::parse(
                path,
                1,
                format!("expected `{RAW_MAGIC}` header"),
            ));
        }
        let mut name = None;
        let mut archetype = None;
        let mut seed = None;
        let mut width = None;
        let mut height = None;
        let mut frames = None;
        let mut qpo = None;
        for tok in tokens {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(path, 1, format!("malformed field `{tok}`")))?;
            let bad = |what: &str| Error::parse(path, 1, format!("invalid {what} `{value}`"));
            match key {
                "name" => name = Some(value.to_string()),
                "archetype" => archetype = Some(value.to_string()),
                "seed" => seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "width" => width = Some(value.parse().map_err(|_| bad("width"))?),
                "height" => height = Some(value.parse().map_err(|_| bad("height"))?),
                "frames" => frames = Some(value.parse::<usize>().map_err(|_| bad("frames"))?),
                "qp_offsets" => {
                    let list: Result<Vec<u8>, _> = value.split(',').map(str::parse).collect();
                    qpo = Some(list.map_err(|_| bad("qp_offsets"))?);
                }
                other => return Err(Error::parse(path, 1, format!("unknown field `{other}`"))),
            }
        }
        let missing = |f: &str| Error::parse(path, 1, format!("missing field `{f}`"));
        let header = RawHeader {
            name: name.ok_or_else(|| missing("name"))?,
            archetype: archetype.ok_or_else(|| missing("archetype"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            qp_offsets: qpo.ok_or_else(|| missing("qp_offsets"))?,
        };
        if Some(header.qp_offsets.len()) != frames {
            return Err(Error::parse(
                path,
                1,
                "frames does not match qp_offsets length",
            ));
        }
        Ok(header)
    }
}

/// Path of the raw plane file belonging to a sidecar header.
pub fn raw_path_for(header_path: &Path) -> PathBuf {
    header_path.with_extension("y")
}

/// Writes `frames` as planar 8-bit luma (`<stem>.y`) plus the one-line
/// sidecar header (`<stem>.hdr`). Returns both paths.
pub fn write_raw(
    header_path: &Path,
    header: &RawHeader,
    frames: &[Frame],
) -> Result<(PathBuf, PathBuf)> {
    let raw_path = raw_path_for(header_path);
    let mut bytes = Vec::with_capacity(frames.len() * header.width * header.height);
    for f in frames {
        if f.width() != header.width || f.height() != header.height {
            return Err(Error::domain("frame dimensions differ from header"));
        }
        bytes.extend_from_slice(f.luma());
    }
    fs::write(&raw_path, &bytes).map_err(Error::io(&raw_path))?;
    let mut hdr = fs::File::create(header_path).map_err(Error::io(header_path))?;
    writeln!(hdr, "{}", header.to_line()).map_err(Error::io(header_path))?;
    Ok((header_path.to_path_buf(), raw_path))
}

/// Reads a sidecar header and its planar luma file.
pub fn read_raw(header_path: &Path) -> Result<(RawHeader, Vec<Frame>)> {
    let file = fs::File::open(header_path).map_err(Error::io(header_path))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(Error::io(header_path))?;
    let header = RawHeader::parse_line(header_path, line.trim_end())?;
    let raw_path = raw_path_for(header_path);
    let bytes = fs::read(&raw_path).map_err(Error::io(&raw_path))?;
    let plane = header.width * header.height;
    if bytes.len() != plane * header.qp_offsets.len() {
        return Err(Error::parse(
            &raw_path,
            0,
            format!(
                "expected {} bytes for {} frames, found {}",
                plane * header.qp_offsets.len(),
                header.qp_offsets.len(),
                bytes.len()
            ),
        ));
    }
    let frames = bytes
        .chunks_exact(plane)
        .zip(&header.qp_offsets)
        .enumerate()
        .map(|(i, (chunk, &qpo))| {
            Frame::new(header.width, header.height, chunk.to_vec(), i as u32, qpo)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, frames))
}
