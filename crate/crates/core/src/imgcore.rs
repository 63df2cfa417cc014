//! Image containers, PPM/PGM decoding and encoding, and RGB to grayscale
//! conversion.
//!
//! All images are stored row-major with one entry per pixel. Channel values
//! are `u8`, so the `[0, 255]` range invariant holds by construction.

use std::fmt;

use thiserror::Error;

/// Errors raised while constructing or decoding images.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("malformed image file: {0}")]
    MalformedFile(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("pixel buffer holds {actual} entries but {width}x{height} needs {expected}")]
    DimensionMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("binary image pixel {index} has value {value}; only 0 and 255 are allowed")]
    NotBinary { index: usize, value: u8 },
}

fn check_len(width: usize, height: usize, actual: usize) -> Result<(), ImageError> {
    let expected = width * height;
    if expected != actual {
        return Err(ImageError::DimensionMismatch {
            width,
            height,
            expected,
            actual,
        });
    }
    Ok(())
}

/// A three-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        check_len(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// A single-channel 8-bit intensity image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_len(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Pixel value used for shadow pixels.
pub const BLACK: u8 = 0;
/// Pixel value used for lit pixels.
pub const WHITE: u8 = 255;

/// A shadow map: every pixel is either [`BLACK`] (shadow) or [`WHITE`] (light).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        check_len(width, height, pixels.len())?;
        if let Some((index, &value)) = pixels
            .iter()
            .enumerate()
            .find(|(_, &v)| v != BLACK && v != WHITE)
        {
            return Err(ImageError::NotBinary { index, value });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from a per-pixel predicate; `true` marks a white pixel.
    pub fn from_fn(width: usize, height: usize, mut white: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(if white(x, y) { WHITE } else { BLACK });
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    /// Caller guarantees every value is 0 or 255.
    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        debug_assert!(pixels.iter().all(|&v| v == BLACK || v == WHITE));
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn is_white(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == WHITE
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn black_count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v == BLACK).count()
    }

    pub fn white_count(&self) -> usize {
        self.pixels.iter().filter(|&&v| v == WHITE).count()
    }

    /// View as a grayscale image with the same pixel values.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.clone(),
        }
    }
}

/// Luma of one RGB triple: `0.21 r + 0.72 g + 0.07 b`, rounded half-up.
///
/// Evaluated in exact integer hundredths so ties such as `x.5` always round
/// up regardless of binary floating-point representation.
pub fn gray_value(r: u8, g: u8, b: u8) -> u8 {
    let hundredths = 21 * u32::from(r) + 72 * u32::from(g) + 7 * u32::from(b);
    ((hundredths + 50) / 100).min(255) as u8
}

/// Converts an RGB image to grayscale pixel by pixel.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img
            .pixels
            .iter()
            .map(|&[r, g, b]| gray_value(r, g, b))
            .collect(),
    }
}

/// Netpbm variants understood by the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnmKind {
    /// `P2`
    PlainGray,
    /// `P3`
    PlainRgb,
    /// `P5`
    RawGray,
    /// `P6`
    RawRgb,
}

impl PnmKind {
    fn from_magic(magic: &[u8]) -> Result<Self, ImageError> {
        match magic {
            b"P2" => Ok(Self::PlainGray),
            b"P3" => Ok(Self::PlainRgb),
            b"P5" => Ok(Self::RawGray),
            b"P6" => Ok(Self::RawRgb),
            [b'P', _] => Err(ImageError::UnsupportedFormat(format!(
                "netpbm variant {}",
                String::from_utf8_lossy(magic)
            ))),
            _ => Err(ImageError::UnsupportedFormat(
                "not a PPM/PGM file".to_string(),
            )),
        }
    }

    fn channels(self) -> usize {
        match self {
            Self::PlainGray | Self::RawGray => 1,
            Self::PlainRgb | Self::RawRgb => 3,
        }
    }

    fn is_plain(self) -> bool {
        matches!(self, Self::PlainGray | Self::PlainRgb)
    }
}

impl fmt::Display for PnmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let magic = match self {
            Self::PlainGray => "P2",
            Self::PlainRgb => "P3",
            Self::RawGray => "P5",
            Self::RawRgb => "P6",
        };
        f.write_str(magic)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while let Some(&c) = self.bytes.get(self.pos) {
            if c.is_ascii_whitespace() || c == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        let tok = self
            .token()
            .ok_or_else(|| ImageError::MalformedFile(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                ImageError::MalformedFile(format!(
                    "invalid {what} {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<u8>,
}

fn decode_samples(bytes: &[u8]) -> Result<Decoded, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::MalformedFile("file too short".to_string()));
    }
    let kind = PnmKind::from_magic(&bytes[..2])?;
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!(
            "maxval {maxval} (only 255 is supported)"
        )));
    }
    let channels = kind.channels();
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::MalformedFile("image dimensions overflow".to_string()))?;

    let samples = if kind.is_plain() {
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            let v = cur.token().ok_or_else(|| {
                ImageError::MalformedFile(format!("expected {count} samples, found {i}"))
            })?;
            let v = std::str::from_utf8(v)
                .ok()
                .and_then(|s| s.parse::<u16>().ok())
                .filter(|&v| v <= 255)
                .ok_or_else(|| {
                    ImageError::MalformedFile(format!(
                        "invalid sample {:?}",
                        String::from_utf8_lossy(v)
                    ))
                })?;
            samples.push(v as u8);
        }
        samples
    } else {
        // Exactly one whitespace byte separates the header from raster data.
        match bytes.get(cur.pos) {
            Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
            _ => {
                return Err(ImageError::MalformedFile(
                    "missing whitespace after header".to_string(),
                ))
            }
        }
        let body = &bytes[cur.pos..];
        if body.len() < count {
            return Err(ImageError::MalformedFile(format!(
                "expected {count} raster bytes, found {}",
                body.len()
            )));
        }
        body[..count].to_vec()
    };

    Ok(Decoded {
        width,
        height,
        channels,
        samples,
    })
}

/// Decodes a PPM (`P3`/`P6`) or PGM (`P2`/`P5`) file with maxval 255.
///
/// Grayscale files are expanded to RGB with equal channels, which
/// [`to_gray`] maps back to the original intensity.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    let d = decode_samples(bytes)?;
    let pixels = if d.channels == 3 {
        d.samples
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect()
    } else {
        d.samples.iter().map(|&v| [v, v, v]).collect()
    };
    RgbImage::new(d.width, d.height, pixels)
}

/// Encodes a grayscale image as binary PGM (`P5`).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    encode_raw(b"P5", img.width, img.height, &img.pixels)
}

/// Encodes a binary image as binary PGM (`P5`).
pub fn encode_binary_pgm(img: &BinaryImage) -> Vec<u8> {
    encode_raw(b"P5", img.width, img.height, &img.pixels)
}

/// Encodes an RGB image as binary PPM (`P6`).
pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let flat: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    encode_raw(b"P6", img.width, img.height, &flat)
}

fn encode_raw(magic: &[u8], width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + 20);
    out.extend_from_slice(magic);
    out.extend_from_slice(format!("\n{width} {height}\n255\n").as_bytes());
    out.extend_from_slice(data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_plain_ppm() {
        let img = decode_image(b"P3\n2 2\n255\n255 255 255 255 255 255\n255 255 255 255 255 255\n")
            .unwrap();
        assert_eq!((img.width(), img.height()), (2, 2));
        assert!(img.pixels().iter().all(|&p| p == [255, 255, 255]));
    }

    #[test]
    fn decodes_single_pixel_with_comment() {
        let img = decode_image(b"P3 # a comment\n1 1\n# another\n255\n10 20 30").unwrap();
        assert_eq!(img.pixels(), &[[10, 20, 30]]);
    }

    #[test]
    fn decodes_raw_ppm_and_pgm() {
        let ppm = decode_image(b"P6\n1 1\n255\n\x0a\x14\x1e").unwrap();
        assert_eq!(ppm.pixels(), &[[10, 20, 30]]);
        let pgm = decode_image(b"P5\n2 1\n255\n\x07\xff").unwrap();
        assert_eq!(pgm.pixels(), &[[7, 7, 7], [255, 255, 255]]);
        let plain = decode_image(b"P2\n2 1\n255\n7 255\n").unwrap();
        assert_eq!(plain, pgm);
    }

    #[test]
    fn truncated_payload_is_malformed() {
        let err = decode_image(b"P3\n2 2\n255\n1 2 3 4 5 6\n").unwrap_err();
        assert!(matches!(err, ImageError::MalformedFile(_)), "{err:?}");
        let err = decode_image(b"P6\n2 2\n255\n\x01\x02\x03\x04\x05\x06").unwrap_err();
        assert!(matches!(err, ImageError::MalformedFile(_)), "{err:?}");
    }

    #[test]
    fn rejects_other_formats_and_maxvals() {
        assert!(matches!(
            decode_image(b"P1\n1 1\n1\n"),
            Err(ImageError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_image(b"\x89PNG\r\n"),
            Err(ImageError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_image(b"P2\n1 1\n65535\n7\n"),
            Err(ImageError::UnsupportedFormat(_))
        ));
        assert!(matches!(
            decode_image(b"P2\n1 1\n255\n300\n"),
            Err(ImageError::MalformedFile(_))
        ));
        assert!(matches!(decode_image(b"P"), Err(ImageError::MalformedFile(_))));
        assert!(matches!(
            decode_image(b"P2\nx 1\n255\n"),
            Err(ImageError::MalformedFile(_))
        ));
    }

    #[test]
    fn gray_examples() {
        assert_eq!(gray_value(0, 0, 0), 0);
        assert_eq!(gray_value(255, 255, 255), 255);
        assert_eq!(gray_value(100, 50, 200), 71);
        // 0.21 * 50 = 10.5 rounds half-up
        assert_eq!(gray_value(50, 0, 0), 11);
    }

    #[test]
    fn gray_of_gray_triple_is_identity() {
        for v in 0..=255u8 {
            assert_eq!(gray_value(v, v, v), v);
        }
    }

    #[test]
    fn to_gray_preserves_dimensions() {
        let img = RgbImage::new(3, 1, vec![[0, 0, 0], [100, 50, 200], [255, 255, 255]]).unwrap();
        let g = to_gray(&img);
        assert_eq!((g.width(), g.height()), (3, 1));
        assert_eq!(g.pixels(), &[0, 71, 255]);
    }

    #[test]
    fn pgm_round_trip() {
        let g = GrayImage::from_fn(4, 3, |x, y| (x * 40 + y * 7) as u8);
        let back = to_gray(&decode_image(&encode_pgm(&g)).unwrap());
        assert_eq!(back, g);
        let rgb = RgbImage::new(1, 2, vec![[1, 2, 3], [4, 5, 6]]).unwrap();
        assert_eq!(decode_image(&encode_ppm(&rgb)).unwrap(), rgb);
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            GrayImage::new(2, 2, vec![0; 3]),
            Err(ImageError::DimensionMismatch { expected: 4, actual: 3, .. })
        ));
        assert!(matches!(
            BinaryImage::new(2, 1, vec![0, 7]),
            Err(ImageError::NotBinary { index: 1, value: 7 })
        ));
        let b = BinaryImage::new(2, 1, vec![0, 255]).unwrap();
        assert_eq!((b.black_count(), b.white_count()), (1, 1));
    }
}
