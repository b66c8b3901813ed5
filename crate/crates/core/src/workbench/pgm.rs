//! Binary PGM (`P5`) with 8-bit samples.
//!
//! Only `maxval = 255` is accepted. Headers may contain `#` comments and
//! any whitespace between fields; exactly one whitespace byte separates the
//! maxval from the raster.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::error::Result;
use crate::image::GrayImage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PgmError {
    #[error("not a PGM file (magic {0:?})")]
    BadMagic(String),

    #[error("ASCII PGM (P2) is not supported; convert to binary P5")]
    UnsupportedAscii,

    #[error("malformed PGM header: {0}")]
    MalformedHeader(&'static str),

    #[error("unsupported maxval {0}; only 255 is accepted")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &'static str) -> std::result::Result<u32, PgmError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PgmError::MalformedHeader(what));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PgmError::MalformedHeader(what))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    match magic {
        b"P5" => {}
        b"P2" => return Err(PgmError::UnsupportedAscii.into()),
        other => return Err(PgmError::BadMagic(String::from_utf8_lossy(other).into_owned()).into()),
    }
    let mut header = Header { bytes, pos: 2 };
    if !header.bytes.get(2).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::MalformedHeader("missing whitespace after magic").into());
    }
    let width = header.number("width")? as usize;
    let height = header.number("height")? as usize;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader("zero dimension").into());
    }
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(PgmError::UnsupportedMaxval(maxval).into());
    }
    if !bytes.get(header.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::MalformedHeader("missing whitespace before raster").into());
    }
    let payload = &bytes[header.pos + 1..];
    let expected = width
        .checked_mul(height)
        .ok_or(PgmError::MalformedHeader("dimensions overflow"))?;
    if payload.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            found: payload.len(),
        }
        .into());
    }
    GrayImage::new(width, height, payload[..expected].to_vec())
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(image))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn pgm_err(bytes: &[u8]) -> PgmError {
        match decode_pgm(bytes) {
            Err(Error::Pgm(e)) => e,
            other => panic!("expected a PGM error, got {other:?}"),
        }
    }

    #[test]
    fn exact_layout() {
        let img = GrayImage::new(2, 2, vec![0, 255, 7, 8]).unwrap();
        let mut expected = b"P5\n2 2\n255\n".to_vec();
        expected.extend([0, 255, 7, 8]);
        assert_eq!(encode_pgm(&img), expected);
        assert_eq!(decode_pgm(&expected).unwrap(), img);
    }

    #[test]
    fn comments_and_whitespace() {
        let bytes = b"P5 # made by hand\n3\t1\n# max\n255 \x01\x02\x03";
        let img = decode_pgm(bytes).unwrap();
        assert_eq!(img.dimensions(), (3, 1));
        assert_eq!(img.pixels(), &[1, 2, 3]);
    }

    #[test]
    fn raster_bytes_that_look_like_whitespace() {
        let bytes = b"P5\n2 1\n255\n\n\n";
        assert_eq!(decode_pgm(bytes).unwrap().pixels(), b"\n\n");
    }

    #[test]
    fn distinct_errors() {
        assert_eq!(pgm_err(b"P2\n1 1\n255\n0\n"), PgmError::UnsupportedAscii);
        assert!(matches!(pgm_err(b"P6\n1 1\n255\n000"), PgmError::BadMagic(_)));
        assert!(matches!(pgm_err(b""), PgmError::BadMagic(_)));
        assert!(matches!(pgm_err(b"P5\nx 1\n255\n0"), PgmError::MalformedHeader("width")));
        assert!(matches!(pgm_err(b"P5\n1\n"), PgmError::MalformedHeader("height")));
        assert!(matches!(pgm_err(b"P5\n0 1\n255\n"), PgmError::MalformedHeader(_)));
        assert_eq!(pgm_err(b"P5\n1 1\n65535\n00"), PgmError::UnsupportedMaxval(65535));
        assert_eq!(pgm_err(b"P5\n1 1\n15\n0"), PgmError::UnsupportedMaxval(15));
        assert_eq!(
            pgm_err(b"P5\n4 4\n255\n\x00\x01"),
            PgmError::Truncated {
                expected: 16,
                found: 2
            }
        );
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("stegokey-pgm-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.pgm");
        let img = GrayImage::new(5, 3, (0..15).map(|v| v * 17).collect()).unwrap();
        write_pgm(&img, &path).unwrap();
        assert_eq!(read_pgm(&path).unwrap(), img);
        fs::remove_dir_all(&dir).unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Io(_))));
    }
}
