//! On-disk formats: channel data, envelope rasters, PGM previews and CSV profiles.
//!
//! Channel file layout, all little-endian:
//!
//! ```text
//! "PABF1" | M: u32 | T: u32 | sampling_rate: f64 | pitch: f64 | M·T × f32 (channel-major)
//! ```
//!
//! Envelope rasters start with one ASCII line of `key=value` pairs after the
//! tag `PABF-ENVELOPE`, then `axial_count × lateral_count` f32 values, one
//! axial row after another.

use std::fmt::Write as _;
use std::io::{self, Read, Write};

use crate::beamformers::Method;
use crate::geometry::ImageGrid;
use crate::metrics::LateralProfile;
use crate::signal::{ChannelDataset, ImagePlane, RealImage, Stage};

pub const CHANNEL_MAGIC: &[u8; 5] = b"PABF1";
pub const ENVELOPE_TAG: &str = "PABF-ENVELOPE";
const CHANNEL_HEADER_LEN: usize = 5 + 4 + 4 + 8 + 8;
const MAX_HEADER_LINE: usize = 4096;

/// Display range of the PGM preview.
pub const PREVIEW_DYNAMIC_RANGE_DB: f64 = 40.0;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed file: {0}")]
    Malformed(String),
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

/// Channel data together with the element pitch it was recorded with.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDataFile {
    pub pitch: f64,
    pub data: ChannelDataset,
}

impl ChannelDataFile {
    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        let m = self.data.channel_count();
        let t = self.data.sample_count();
        let mut buf = Vec::with_capacity(CHANNEL_HEADER_LEN + 4 * m * t);
        buf.extend_from_slice(CHANNEL_MAGIC);
        buf.extend_from_slice(&(m as u32).to_le_bytes());
        buf.extend_from_slice(&(t as u32).to_le_bytes());
        buf.extend_from_slice(&self.data.sampling_rate().to_le_bytes());
        buf.extend_from_slice(&self.pitch.to_le_bytes());
        for &v in self.data.samples() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, FormatError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < CHANNEL_HEADER_LEN {
            return Err(malformed(format!(
                "{} bytes is shorter than the {CHANNEL_HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..5] != CHANNEL_MAGIC {
            return Err(malformed("bad magic; expected PABF1"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (m, t) = (u32_at(5), u32_at(9));
        let (sampling_rate, pitch) = (f64_at(13), f64_at(21));
        let expected = (m as u64) * (t as u64) * 4;
        let payload = (bytes.len() - CHANNEL_HEADER_LEN) as u64;
        if payload != expected {
            return Err(malformed(format!(
                "payload is {payload} bytes; header M = {m}, T = {t} requires {expected}"
            )));
        }
        let samples = bytes[CHANNEL_HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let data = ChannelDataset::from_samples(m, t, sampling_rate, samples)
            .map_err(|e| malformed(e.to_string()))?;
        Ok(Self { pitch, data })
    }
}

/// Envelope raster of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFile {
    pub method: Method,
    pub flagged_pixels: usize,
    pub image: RealImage,
}

impl EnvelopeFile {
    pub fn header_line(&self) -> String {
        let g = &self.image.grid;
        let mut s = String::from(ENVELOPE_TAG);
        write!(
            s,
            " method={} flagged_pixels={} lateral_min={} lateral_max={} lateral_count={} \
             axial_min={} axial_max={} axial_count={}",
            self.method,
            self.flagged_pixels,
            g.lateral_min,
            g.lateral_max,
            g.lateral_count,
            g.axial_min,
            g.axial_max,
            g.axial_count
        )
        .unwrap();
        s.push('\n');
        s
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        let mut buf = self.header_line().into_bytes();
        buf.reserve(4 * self.image.values.len());
        for &v in &self.image.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, FormatError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let end = bytes
            .iter()
            .take(MAX_HEADER_LINE)
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("missing envelope header line"))?;
        let line = std::str::from_utf8(&bytes[..end]).map_err(|_| malformed("header is not ASCII"))?;
        let mut parts = line.split_ascii_whitespace();
        if parts.next() != Some(ENVELOPE_TAG) {
            return Err(malformed(format!("bad tag; expected {ENVELOPE_TAG}")));
        }
        let mut fields = std::collections::BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| malformed(format!("header entry `{p}` is not key=value")))?;
            fields.insert(k, v);
        }
        fn get<T: std::str::FromStr>(
            fields: &std::collections::BTreeMap<&str, &str>,
            key: &str,
        ) -> Result<T, FormatError> {
            fields
                .get(key)
                .ok_or_else(|| malformed(format!("header lacks `{key}`")))?
                .parse()
                .map_err(|_| malformed(format!("header value for `{key}` does not parse")))
        }
        let method: Method = get(&fields, "method")?;
        let grid = ImageGrid {
            lateral_min: get(&fields, "lateral_min")?,
            lateral_max: get(&fields, "lateral_max")?,
            lateral_count: get(&fields, "lateral_count")?,
            axial_min: get(&fields, "axial_min")?,
            axial_max: get(&fields, "axial_max")?,
            axial_count: get(&fields, "axial_count")?,
        };
        grid.validate().map_err(|e| malformed(e.to_string()))?;
        let flagged_pixels = get(&fields, "flagged_pixels")?;

        let payload = &bytes[end + 1..];
        let expected = grid.pixel_count() as u64 * 4;
        if payload.len() as u64 != expected {
            return Err(malformed(format!(
                "payload is {} bytes; a {}x{} grid requires {expected}",
                payload.len(),
                grid.lateral_count,
                grid.axial_count
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let image = ImagePlane::new(grid, Stage::Envelope, values).map_err(|e| malformed(e.to_string()))?;
        Ok(Self {
            method,
            flagged_pixels,
            image,
        })
    }
}

/// 8-bit binary PGM of the log-compressed envelope, `0 dB` white and
/// `-dynamic_range_db` black. An all-zero image renders black.
pub fn render_pgm(image: &RealImage, dynamic_range_db: f64) -> Vec<u8> {
    let g = &image.grid;
    let mut out = format!("P5\n{} {}\n255\n", g.lateral_count, g.axial_count).into_bytes();
    let peak = image.max();
    out.extend(image.values.iter().map(|&v| {
        if !(peak > 0.0) || !(v > 0.0) {
            return 0u8;
        }
        let db = (20.0 * (v / peak).log10()).max(-dynamic_range_db);
        ((db + dynamic_range_db) / dynamic_range_db * 255.0).round() as u8
    }));
    out
}

/// Parses a binary PGM into `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), FormatError> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("truncated PGM header"));
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed("bad PGM header"))?);
    }
    if tokens[0] != "P5" || tokens[3] != "255" {
        return Err(malformed("not an 8-bit binary PGM"));
    }
    let w: usize = tokens[1].parse().map_err(|_| malformed("bad PGM width"))?;
    let h: usize = tokens[2].parse().map_err(|_| malformed("bad PGM height"))?;
    let data = bytes.get(pos + 1..).unwrap_or_default();
    if data.len() != w * h {
        return Err(malformed("PGM payload length mismatch"));
    }
    Ok((w, h, data.to_vec()))
}

pub const PROFILE_CSV_HEADER: &str = "method,depth_mm,lateral_mm,linear,db\n";

/// Appends one lateral profile to a CSV body.
pub fn append_profile_csv(out: &mut String, method: Method, profile: &LateralProfile) {
    for ((x, lin), db) in profile.lateral.iter().zip(&profile.linear).zip(&profile.db) {
        writeln!(out, "{method},{},{},{lin},{db}", profile.depth * 1e3, x * 1e3).unwrap();
    }
}
