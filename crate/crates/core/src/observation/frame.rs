use std::collections::VecDeque;

use super::ObservationError;

pub type Rgb = [u8; 3];

/// Row-major RGB image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            pixels.extend_from_slice(&color);
        }
        Self { width, height, pixels }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }

    pub fn count_color(&self, c: Rgb) -> usize {
        self.pixels.chunks_exact(3).filter(|p| *p == c).count()
    }

    pub fn contains_color(&self, c: Rgb) -> bool {
        self.pixels.chunks_exact(3).any(|p| p == c)
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Parses a binary PPM with maxval 255.
    pub fn from_ppm(bytes: &[u8]) -> Result<Self, ObservationError> {
        let bad = |m: &str| ObservationError::Ppm(m.to_string());
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        if fields[0] != "P6" {
            return Err(bad("magic is not P6"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        let len = width * height * 3;
        if bytes.len() < pos || bytes.len() - pos != len {
            return Err(bad("raster length mismatch"));
        }
        Ok(Self {
            width,
            height,
            pixels: bytes[pos..].to_vec(),
        })
    }
}

/// The `capacity` most recent frames of one viewpoint, oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationContext {
    capacity: usize,
    width: usize,
    height: usize,
    frames: VecDeque<Frame>,
}

impl ObservationContext {
    pub fn new(capacity: usize, width: usize, height: usize) -> Self {
        assert!(capacity >= 1, "context capacity must be positive");
        Self {
            capacity,
            width,
            height,
            frames: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.frames.iter()
    }

    pub fn latest(&self) -> Option<&Frame> {
        self.frames.back()
    }

    /// Appends `frame`, evicting the oldest when full.
    pub fn push(&mut self, frame: Frame) -> Result<(), ObservationError> {
        if frame.width != self.width || frame.height != self.height {
            return Err(ObservationError::FrameSize {
                expected: (self.width, self.height),
                found: (frame.width, frame.height),
            });
        }
        if self.frames.len() == self.capacity {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }
}
