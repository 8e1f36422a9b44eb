//! Per-pixel face/hair/background classifications and their canonical
//! binary PGM (P5) encoding.
//!
//! The canonical encoding is `P5\n<w> <h>\n255\n` followed by one byte per
//! pixel in row-major order, where the byte is the class number. Decoding
//! accepts any well-formed P5 header (arbitrary whitespace, `#` comments)
//! as long as `maxval` is 255 and every sample is a valid class.

use std::fmt;

use thiserror::Error;

/// Segmentation class of a single pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PixelClass {
    Background = 0,
    Face = 1,
    Hair = 2,
}

impl PixelClass {
    pub const ALL: [PixelClass; 3] = [PixelClass::Background, PixelClass::Face, PixelClass::Hair];

    pub fn from_raw(raw: u8) -> Option<Self> {
        match raw {
            0 => Some(PixelClass::Background),
            1 => Some(PixelClass::Face),
            2 => Some(PixelClass::Hair),
            _ => None,
        }
    }

    #[inline]
    pub fn raw(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for PixelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PixelClass::Background => "background",
            PixelClass::Face => "face",
            PixelClass::Hair => "hair",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelMapError {
    #[error("label map dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel count {actual} does not match {width}x{height}")]
    PixelCountMismatch {
        width: usize,
        height: usize,
        actual: usize,
    },
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("illegal class value {value} at pixel offset {offset}")]
    IllegalClassValue { value: u8, offset: usize },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
}

/// A rectangular grid of pixel classes, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    pixels: Vec<PixelClass>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, pixels: Vec<PixelClass>) -> Result<Self, LabelMapError> {
        if width == 0 || height == 0 {
            return Err(LabelMapError::EmptyDimensions { width, height });
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(LabelMapError::PixelCountMismatch {
                width,
                height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// A map with every pixel set to `class`.
    pub fn filled(width: usize, height: usize, class: PixelClass) -> Result<Self, LabelMapError> {
        let len = width
            .checked_mul(height)
            .ok_or(LabelMapError::EmptyDimensions { width, height })?;
        Self::new(width, height, vec![class; len])
    }

    /// Builds a map by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> PixelClass,
    ) -> Result<Self, LabelMapError> {
        let mut pixels = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    /// Always false; a label map has at least one pixel.
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[PixelClass] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Option<PixelClass> {
        if x < self.width && y < self.height {
            Some(self.pixels[y * self.width + x])
        } else {
            None
        }
    }

    /// Returns a copy with one pixel replaced. Panics if out of bounds.
    pub fn with_pixel(mut self, x: usize, y: usize, class: PixelClass) -> Self {
        assert!(x < self.width && y < self.height, "pixel ({x},{y}) out of bounds");
        self.pixels[y * self.width + x] = class;
        self
    }

    pub fn count(&self, class: PixelClass) -> usize {
        self.pixels.iter().filter(|&&p| p == class).count()
    }
}

/// Emits the canonical P5 encoding of `map`.
pub fn encode_labelmap(map: &LabelMap) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", map.width, map.height);
    let mut out = Vec::with_capacity(header.len() + map.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(map.pixels.iter().map(|p| p.raw()));
    out
}

/// Parses a binary PGM whose samples are class numbers.
pub fn decode_labelmap(bytes: &[u8]) -> Result<LabelMap, LabelMapError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(LabelMapError::MalformedHeader("missing P5 magic".into()));
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.next_uint("width")?;
    let height = cursor.next_uint("height")?;
    let maxval = cursor.next_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(LabelMapError::MalformedHeader(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(LabelMapError::MalformedHeader(format!(
            "maxval must be 255, got {maxval}"
        )));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        Some(_) => {
            return Err(LabelMapError::MalformedHeader(
                "expected whitespace after maxval".into(),
            ))
        }
        None => {
            return Err(LabelMapError::TruncatedPayload {
                expected: width.saturating_mul(height),
                found: 0,
            })
        }
    }

    let expected = width
        .checked_mul(height)
        .ok_or_else(|| LabelMapError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(LabelMapError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(LabelMapError::MalformedHeader(format!(
            "{} trailing bytes after raster",
            payload.len() - expected
        )));
    }
    let pixels = payload
        .iter()
        .enumerate()
        .map(|(offset, &value)| {
            PixelClass::from_raw(value).ok_or(LabelMapError::IllegalClassValue { value, offset })
        })
        .collect::<Result<Vec<_>, _>>()?;
    LabelMap::new(width, height, pixels)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self, field: &str) -> Result<usize, LabelMapError> {
        let start = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == start {
            return Err(LabelMapError::MalformedHeader(format!(
                "expected whitespace before {field}"
            )));
        }
        let digits_start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(LabelMapError::MalformedHeader(format!("missing {field}")));
        }
        std::str::from_utf8(&self.bytes[digits_start..self.pos])
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| LabelMapError::MalformedHeader(format!("{field} out of range")))
    }
}
