//! Getting data in and out: CSV point sets, binary PPM rasters cut into
//! pixel blocks, and a seeded Gaussian sampler.

use crate::error::{Error, Result};
use crate::gaussmodel::PointSet;
use crate::linalg::{spd_power, Matrix, SymMatrix};
use crate::rng::SplitMix64;
use std::io::{Read, Write};

/// Reads one point per line from comma-separated decimal text.
///
/// Blank lines and lines starting with `#` are skipped. If the first
/// field of the first row does not parse as a number, that row is taken to
/// be a header.
pub fn read_points_csv<R: Read>(source: R) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| Error::ParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if first {
            first = false;
            let looks_like_header = record
                .get(0)
                .is_some_and(|f| f.parse::<f64>().is_err());
            if looks_like_header {
                continue;
            }
        }
        let row = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::ParseError {
                    line,
                    message: format!("'{field}' is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(prev) = rows.first() {
            if prev.len() != row.len() {
                return Err(Error::ParseError {
                    line,
                    message: format!("expected {} columns, found {}", prev.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData { n: rows.len() });
    }
    PointSet::from_rows(&rows)
}

/// Writes one point per line. `f64` display is the shortest representation
/// that parses back to the same bits.
pub fn write_points_csv<W: Write>(points: &Matrix, sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(sink);
    for row in points.row_iter() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// RGB raster with interleaved samples in `0..=maxval`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// `height·width·3` samples, row-major, channel-minor.
    pub samples: Vec<u16>,
}

impl Raster {
    pub fn new(width: usize, height: usize, maxval: u16, samples: Vec<u16>) -> Result<Self> {
        if maxval == 0 {
            return Err(Error::InvalidInput("maxval must be positive".into()));
        }
        if samples.len() != width * height * 3 {
            return Err(Error::InvalidInput(format!(
                "{} samples for a {}x{} RGB raster",
                samples.len(),
                width,
                height
            )));
        }
        if samples.iter().any(|&s| s > maxval) {
            return Err(Error::InvalidInput("sample exceeds maxval".into()));
        }
        Ok(Self {
            width,
            height,
            maxval,
            samples,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u16; 3] {
        let i = 3 * (y * self.width + x);
        [self.samples[i], self.samples[i + 1], self.samples[i + 2]]
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidInput(format!("PPM header: bad {what}")))
    }
}

/// Decodes a binary PPM (`P6`), 8- or 16-bit.
pub fn decode_ppm(bytes: &[u8]) -> Result<Raster> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(Error::InvalidInput("not a binary PPM (expected magic P6)".into()));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::InvalidInput("PPM header: zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::InvalidInput(format!("PPM header: maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::InvalidInput("PPM header: missing separator".into()));
    }
    let data = &bytes[cur.pos + 1..];
    let count = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| Error::InvalidInput("PPM dimensions overflow".into()))?;
    let wide = maxval > 255;
    let needed = if wide { 2 * count } else { count };
    if data.len() < needed {
        return Err(Error::InvalidInput(format!(
            "PPM raster truncated: {} of {} bytes",
            data.len(),
            needed
        )));
    }
    let samples = if wide {
        data[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        data[..needed].iter().map(|&b| u16::from(b)).collect()
    };
    Raster::new(width, height, maxval as u16, samples)
}

pub fn encode_ppm(raster: &Raster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n{}\n", raster.width, raster.height, raster.maxval).into_bytes();
    if raster.maxval > 255 {
        for s in &raster.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(raster.samples.iter().map(|&s| s as u8));
    }
    out
}

/// Non-overlapping square tiles of an RGB image as vectors in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBlocks {
    pub block_size: usize,
    pub channels: usize,
    /// One tile per row, `block_size²·channels` columns.
    pub blocks: Matrix,
}

impl ImageBlocks {
    pub fn dim(&self) -> usize {
        self.block_size * self.block_size * self.channels
    }

    pub fn count(&self) -> usize {
        self.blocks.rows()
    }

    /// The tiles as a dataset; needs at least two tiles.
    pub fn into_point_set(self) -> Result<PointSet> {
        PointSet::new(self.blocks)
    }
}

/// Cuts `image` into `block × block` tiles, row-major over tiles, dropping
/// partial tiles on the right and bottom edges. Each tile is flattened
/// pixel by pixel in row-major order with `r, g, b` per pixel, every sample
/// divided by the raster's maxval.
pub fn image_to_blocks(image: &Raster, block: usize) -> Result<ImageBlocks> {
    if block == 0 {
        return Err(Error::InvalidInput("block size must be positive".into()));
    }
    if image.width < block || image.height < block {
        return Err(Error::InvalidInput(format!(
            "{}x{} image is smaller than one {block}x{block} block",
            image.width, image.height
        )));
    }
    let across = image.width / block;
    let down = image.height / block;
    let dim = block * block * 3;
    let scale = 1.0 / f64::from(image.maxval);
    let mut data = Vec::with_capacity(across * down * dim);
    for by in 0..down {
        for bx in 0..across {
            for y in by * block..(by + 1) * block {
                for x in bx * block..(bx + 1) * block {
                    data.extend(image.pixel(x, y).iter().map(|&s| f64::from(s) * scale));
                }
            }
        }
    }
    Ok(ImageBlocks {
        block_size: block,
        channels: 3,
        blocks: Matrix::new(across * down, dim, data)?,
    })
}

/// `n` points `mean + Σ^{1/2}·z` with `z` drawn from the seeded normal
/// stream documented in [`crate::rng`], coordinates filled row by row.
pub fn sample_gaussian(mean: &[f64], cov: &SymMatrix, n: usize, seed: u64) -> Result<PointSet> {
    if mean.len() != cov.dim() {
        return Err(Error::InvalidInput(format!(
            "mean has length {}, covariance is {}x{}",
            mean.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData { n });
    }
    let root = spd_power(cov, 0.5)?;
    let dim = mean.len();
    let mut rng = SplitMix64::new(seed);
    let mut data = Vec::with_capacity(n * dim);
    let mut z = vec![0.0; dim];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = rng.standard_normal());
        let y = root.as_matrix().matvec(&z)?;
        data.extend(y.iter().zip(mean).map(|(a, m)| a + m));
    }
    PointSet::new(Matrix::new(n, dim, data)?)
}
