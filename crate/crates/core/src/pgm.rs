//! Netpbm PGM (P2 plain / P5 raw) reading and P5 writing.

use crate::image::Image;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgmError {
    #[error("not a PGM file (expected magic P2 or P5)")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("maxval {0} outside 1..=65535")]
    BadMaxval(u64),
    #[error("pixel data truncated: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample value {value} exceeds maxval {maxval}")]
    BadSample { value: u64, maxval: u64 },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len()
                    && self.bytes[self.pos] != b'\n'
                    && self.bytes[self.pos] != b'\r'
                {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Option<u64> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

pub fn load_pgm(bytes: &[u8]) -> Result<Image, PgmError> {
    let raw = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(PgmError::BadMagic),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur
        .number()
        .ok_or_else(|| PgmError::BadHeader("missing width".into()))? as usize;
    let height = cur
        .number()
        .ok_or_else(|| PgmError::BadHeader("missing height".into()))? as usize;
    let maxval = cur
        .number()
        .ok_or_else(|| PgmError::BadHeader("missing maxval".into()))?;
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::BadMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader(format!("empty image {width}x{height}")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::BadHeader("dimensions overflow".into()))?;
    let scale = 1.0 / maxval as f64;
    let mut pixels = Vec::with_capacity(count.min(1 << 24));

    let check = |v: u64| {
        if v > maxval {
            Err(PgmError::BadSample { value: v, maxval })
        } else {
            Ok(v as f64 * scale)
        }
    };

    if raw {
        // exactly one whitespace byte separates maxval from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(PgmError::Truncated {
                expected: count,
                found: 0,
            });
        }
        let data = &bytes[cur.pos + 1..];
        if maxval < 256 {
            if data.len() < count {
                return Err(PgmError::Truncated {
                    expected: count,
                    found: data.len(),
                });
            }
            for &b in &data[..count] {
                pixels.push(check(b as u64)?);
            }
        } else {
            if data.len() < 2 * count {
                return Err(PgmError::Truncated {
                    expected: count,
                    found: data.len() / 2,
                });
            }
            for pair in data[..2 * count].chunks_exact(2) {
                pixels.push(check(u16::from_be_bytes([pair[0], pair[1]]) as u64)?);
            }
        }
    } else {
        for found in 0..count {
            match cur.number() {
                Some(v) => pixels.push(check(v)?),
                None => {
                    return Err(PgmError::Truncated {
                        expected: count,
                        found,
                    })
                }
            }
        }
    }
    Ok(Image::new(width, height, pixels).expect("validated dimensions and range"))
}

/// Encodes as raw P5 with `round(p * maxval)` samples.
pub fn save_pgm(img: &Image, maxval: u8) -> Vec<u8> {
    let maxval = maxval.max(1);
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval);
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    let m = maxval as f64;
    out.extend(img.pixels().iter().map(|&p| (p * m).round() as u8));
    out
}
