//! Grayscale raster and label-mask loading.
//!
//! The only container supported is binary PGM ("P5"). Samples are one byte
//! when `maxval < 256`, otherwise two bytes big-endian. Both 8- and 16-bit
//! rasters are held as `u16` so feature code deals with a single value domain.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Default number of rows handed out per [`RowTile`].
pub const DEFAULT_ROWS_PER_TILE: usize = 256;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed raster: {0}")]
    Format(String),
    #[error("image is {image_w}x{image_h} but mask is {mask_w}x{mask_h}")]
    Pairing {
        image_w: usize,
        image_h: usize,
        mask_w: usize,
        mask_h: usize,
    },
    #[error("rows_per_tile must be at least 1")]
    ZeroTileRows,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityImage {
    width: usize,
    height: usize,
    bit_depth: u8,
    pixels: Vec<u16>,
}

impl IntensityImage {
    pub fn new(
        width: usize,
        height: usize,
        bit_depth: u8,
        pixels: Vec<u16>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Format("zero-sized image".into()));
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(ImageError::Format(format!("unsupported bit depth {bit_depth}")));
        }
        if pixels.len() != width * height {
            return Err(ImageError::Format(format!(
                "expected {} samples, got {}",
                width * height,
                pixels.len()
            )));
        }
        if bit_depth == 8 && pixels.iter().any(|&v| v > 255) {
            return Err(ImageError::Format("sample exceeds 8-bit range".into()));
        }
        Ok(Self {
            width,
            height,
            bit_depth,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Format("zero-sized mask".into()));
        }
        if labels.len() != width * height {
            return Err(ImageError::Format(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Sorted `(label, pixel count)` pairs for every non-background label.
    pub fn label_counts(&self) -> Vec<(u32, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for &l in self.labels.iter().filter(|&&l| l != 0) {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }
}

/// A horizontal band of a matched image/mask pair.
#[derive(Debug, Clone, Copy)]
pub struct RowTile<'a> {
    pub y0: usize,
    pub rows: usize,
    pub width: usize,
    pub intensity: &'a [u16],
    pub labels: &'a [u32],
}

impl RowTile<'_> {
    /// Size in bytes of the raster data this tile exposes.
    pub fn byte_len(&self) -> usize {
        std::mem::size_of_val(self.intensity) + std::mem::size_of_val(self.labels)
    }
}

pub fn check_pairing(image: &IntensityImage, mask: &LabelMask) -> Result<(), ImageError> {
    if image.width != mask.width || image.height != mask.height {
        return Err(ImageError::Pairing {
            image_w: image.width,
            image_h: image.height,
            mask_w: mask.width,
            mask_h: mask.height,
        });
    }
    Ok(())
}

/// Split a matched pair into contiguous row bands, top to bottom.
pub fn iter_row_tiles<'a>(
    image: &'a IntensityImage,
    mask: &'a LabelMask,
    rows_per_tile: usize,
) -> Result<impl Iterator<Item = RowTile<'a>> + 'a, ImageError> {
    check_pairing(image, mask)?;
    if rows_per_tile == 0 {
        return Err(ImageError::ZeroTileRows);
    }
    let width = image.width;
    let height = image.height;
    Ok((0..height).step_by(rows_per_tile).map(move |y0| {
        let rows = rows_per_tile.min(height - y0);
        let span = y0 * width..(y0 + rows) * width;
        RowTile {
            y0,
            rows,
            width,
            intensity: &image.pixels[span.clone()],
            labels: &mask.labels[span],
        }
    }))
}

struct PgmRaster {
    width: usize,
    height: usize,
    maxval: u32,
    samples: Vec<u16>,
}

fn read_file(path: &Path) -> Result<Vec<u8>, ImageError> {
    fs::read(path).map_err(|source| ImageError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct HeaderCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImageError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Format(format!("missing or invalid {what}")))
    }
}

fn parse_pgm(data: &[u8]) -> Result<PgmRaster, ImageError> {
    if data.len() < 2 {
        return Err(ImageError::Format("file too short for a PNM header".into()));
    }
    match &data[..2] {
        b"P5" => {}
        b"P6" | b"P3" => {
            return Err(ImageError::Format("colour PNM is not supported".into()));
        }
        b"P2" | b"P1" | b"P4" | b"P7" => {
            return Err(ImageError::Format(format!(
                "unsupported PNM variant {}",
                String::from_utf8_lossy(&data[..2])
            )));
        }
        _ => return Err(ImageError::Format("not a PGM file".into())),
    }
    let mut cur = HeaderCursor { data, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::Format("zero-sized raster".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::Format(format!("maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the payload
    match data.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(ImageError::Format("missing header terminator".into())),
    }
    let payload = &data[cur.pos..];
    let n = width * height;
    let samples: Vec<u16> = if maxval < 256 {
        if payload.len() < n {
            return Err(ImageError::Format(format!(
                "truncated payload: {} of {n} bytes",
                payload.len()
            )));
        }
        payload[..n].iter().map(|&b| b as u16).collect()
    } else {
        if payload.len() < 2 * n {
            return Err(ImageError::Format(format!(
                "truncated payload: {} of {} bytes",
                payload.len(),
                2 * n
            )));
        }
        payload[..2 * n]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    if let Some(v) = samples.iter().find(|&&v| v as u32 > maxval) {
        return Err(ImageError::Format(format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(PgmRaster {
        width,
        height,
        maxval,
        samples,
    })
}

pub fn decode_intensity(data: &[u8]) -> Result<IntensityImage, ImageError> {
    let r = parse_pgm(data)?;
    let depth = if r.maxval < 256 { 8 } else { 16 };
    IntensityImage::new(r.width, r.height, depth, r.samples)
}

pub fn decode_mask(data: &[u8]) -> Result<LabelMask, ImageError> {
    let r = parse_pgm(data)?;
    LabelMask::new(
        r.width,
        r.height,
        r.samples.into_iter().map(u32::from).collect(),
    )
}

pub fn load_intensity(path: impl AsRef<Path>) -> Result<IntensityImage, ImageError> {
    decode_intensity(&read_file(path.as_ref())?)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<LabelMask, ImageError> {
    decode_mask(&read_file(path.as_ref())?)
}

/// Encode samples as binary PGM. `maxval` decides the sample width.
pub fn encode_pgm(width: usize, height: usize, maxval: u16, samples: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval < 256 {
        out.extend(samples.iter().map(|&v| v as u8));
    } else {
        out.reserve(samples.len() * 2);
        for &v in samples {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    let io = |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(bytes).map_err(io)
}

pub fn write_intensity(path: impl AsRef<Path>, image: &IntensityImage) -> Result<(), ImageError> {
    let maxval = if image.bit_depth == 8 { 255 } else { 65535 };
    write_file(
        path.as_ref(),
        &encode_pgm(image.width, image.height, maxval, &image.pixels),
    )
}

/// Masks are written as 16-bit PGM, so labels above 65535 are rejected.
pub fn write_mask(path: impl AsRef<Path>, mask: &LabelMask) -> Result<(), ImageError> {
    let samples = mask
        .labels
        .iter()
        .map(|&l| u16::try_from(l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ImageError::Format("label exceeds 16-bit PGM range".into()))?;
    let maxval = if samples.iter().all(|&v| v < 256) { 255 } else { 65535 };
    write_file(
        path.as_ref(),
        &encode_pgm(mask.width, mask.height, maxval, &samples),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_by_one() {
        let img = decode_intensity(b"P5\n1 1\n255\n\x07").unwrap();
        assert_eq!((img.width(), img.height()), (1, 1));
        assert_eq!(img.pixels(), &[7]);
        assert_eq!(img.bit_depth(), 8);
    }

    #[test]
    fn two_by_two_row_major() {
        let img = decode_intensity(b"P5\n2 2\n255\n\x00\x01\x02\x03").unwrap();
        assert_eq!(img.pixels(), &[0, 1, 2, 3]);
    }

    #[test]
    fn sixteen_bit_big_endian() {
        let img = decode_intensity(b"P5\n2 1\n65535\n\x01\x02\xff\xfe").unwrap();
        assert_eq!(img.pixels(), &[0x0102, 0xfffe]);
        assert_eq!(img.bit_depth(), 16);
    }

    #[test]
    fn comments_after_magic() {
        let img = decode_intensity(b"P5\n# made by hand\n2 1\n# another\n255\n\x05\x06").unwrap();
        assert_eq!(img.pixels(), &[5, 6]);
    }

    #[test]
    fn colour_rejected() {
        let err = decode_intensity(b"P6\n1 1\n255\n\x00\x00\x00").unwrap_err();
        assert!(matches!(err, ImageError::Format(_)));
    }

    #[test]
    fn truncated_rejected() {
        let err = decode_intensity(b"P5\n2 2\n255\n\x00\x01").unwrap_err();
        assert!(matches!(err, ImageError::Format(_)));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_intensity("/definitely/not/here.pgm").unwrap_err();
        assert!(matches!(err, ImageError::Io { .. }));
    }

    #[test]
    fn mask_label_counts() {
        let m = decode_mask(b"P5\n2 2\n255\n\x00\x01\x01\x02").unwrap();
        assert_eq!(m.label_counts(), vec![(1, 2), (2, 1)]);
        let empty = decode_mask(b"P5\n2 2\n255\n\x00\x00\x00\x00").unwrap();
        assert!(empty.label_counts().is_empty());
    }

    #[test]
    fn pairing_mismatch() {
        let img = IntensityImage::new(2, 2, 8, vec![0; 4]).unwrap();
        let mask = LabelMask::new(3, 2, vec![0; 6]).unwrap();
        assert!(matches!(
            iter_row_tiles(&img, &mask, 4).err(),
            Some(ImageError::Pairing { .. })
        ));
    }

    fn tile_shape(h: usize, r: usize) -> Vec<(usize, usize)> {
        let img = IntensityImage::new(3, h, 16, vec![0; 3 * h]).unwrap();
        let mask = LabelMask::new(3, h, vec![0; 3 * h]).unwrap();
        iter_row_tiles(&img, &mask, r)
            .unwrap()
            .map(|t| (t.y0, t.rows))
            .collect()
    }

    #[test]
    fn tile_partitions() {
        assert_eq!(tile_shape(10, 4), vec![(0, 4), (4, 4), (8, 2)]);
        assert_eq!(tile_shape(1, 100), vec![(0, 1)]);
        assert_eq!(tile_shape(6, 2), vec![(0, 2), (2, 2), (4, 2)]);
    }

    proptest! {
        #[test]
        fn tiles_cover_exactly_once(h in 1usize..200, r in 1usize..64) {
            let tiles = tile_shape(h, r);
            let mut next = 0;
            for (y0, rows) in &tiles {
                prop_assert_eq!(*y0, next);
                prop_assert!(*rows >= 1);
                next += rows;
            }
            prop_assert_eq!(next, h);
        }

        #[test]
        fn pgm_round_trip(
            w in 1usize..12,
            h in 1usize..12,
            wide in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let depth = if wide { 16 } else { 8 };
            let mut s = seed;
            let pixels: Vec<u16> = (0..w * h)
                .map(|_| {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let v = (s >> 33) as u16;
                    if wide { v } else { v & 0xff }
                })
                .collect();
            let img = IntensityImage::new(w, h, depth, pixels).unwrap();
            let maxval = if wide { 65535 } else { 255 };
            let bytes = encode_pgm(w, h, maxval, img.pixels());
            prop_assert_eq!(decode_intensity(&bytes).unwrap(), img);
        }
    }
}
