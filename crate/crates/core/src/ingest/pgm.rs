//! Strict binary masks stored as 8-bit `P5` PGM with values 0 and 255 only.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::BinaryMask;

/// Parses the `P5` header, skipping `#` comments. Returns (width, height, maxval, offset).
fn parse_header(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, usize)> {
    let mut pos = 0usize;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != "P5" {
        return Err(Error::format(
            path,
            format!("expected binary PGM magic 'P5', found '{}'", tokens[0]),
        ));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad {what} '{s}'")))
    };
    let (w, h, maxval) = (
        num(&tokens[1], "width")?,
        num(&tokens[2], "height")?,
        num(&tokens[3], "maxval")?,
    );
    if pos >= bytes.len() {
        return Err(Error::format(path, "missing header terminator"));
    }
    Ok((w, h, maxval, pos + 1))
}

pub fn decode_mask(path: &Path, bytes: &[u8]) -> Result<BinaryMask> {
    let (w, h, maxval, offset) = parse_header(path, bytes)?;
    if maxval != 255 {
        return Err(Error::format(path, format!("maxval must be 255, found {maxval}")));
    }
    let body = &bytes[offset..];
    if body.len() != w * h {
        return Err(Error::format(
            path,
            format!("expected {} pixel bytes, found {}", w * h, body.len()),
        ));
    }
    let mut bits = Vec::with_capacity(w * h);
    for (i, &b) in body.iter().enumerate() {
        match b {
            0 => bits.push(false),
            255 => bits.push(true),
            other => {
                return Err(Error::format(
                    path,
                    format!("pixel ({}, {}) has value {other}; masks must be 0/255", i % w, i / w),
                ))
            }
        }
    }
    BinaryMask::from_bits(w, h, bits)
}

pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0u8 }));
    out
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_mask(path, &bytes)
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_mask(mask)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pgm(w: usize, h: usize, pixels: &[u8]) -> Vec<u8> {
        let mut v = format!("P5\n{w} {h}\n255\n").into_bytes();
        v.extend_from_slice(pixels);
        v
    }

    #[test]
    fn all_zero_and_single_pixel() {
        let p = Path::new("m.pgm");
        assert_eq!(decode_mask(p, &pgm(3, 2, &[0; 6])).unwrap().count(), 0);
        let m = decode_mask(p, &pgm(3, 2, &[255, 0, 0, 0, 0, 0])).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.get(0, 0));
    }

    #[test]
    fn rejects_non_binary_values() {
        let p = Path::new("m.pgm");
        assert!(matches!(
            decode_mask(p, &pgm(2, 1, &[0, 128])),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            decode_mask(p, &pgm(2, 1, &[1, 0])),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn rejects_bad_headers() {
        let p = Path::new("m.pgm");
        assert!(decode_mask(p, b"P2\n1 1\n255\n0").is_err());
        assert!(decode_mask(p, b"P5\n1 1\n1\n\x01").is_err());
        assert!(decode_mask(p, b"P5\n2 2\n255\n\0\0").is_err());
    }

    #[test]
    fn comments_are_skipped() {
        let p = Path::new("m.pgm");
        let m = decode_mask(p, b"P5\n# made by hand\n2 1\n255\n\xff\0").unwrap();
        assert!(m.get(0, 0) && !m.get(1, 0));
    }

    proptest! {
        #[test]
        fn save_of_load_is_byte_identical(
            (w, h, bits) in (1usize..12, 1usize..12)
                .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(any::<bool>(), w * h)))
        ) {
            let bytes = pgm(w, h, &bits.iter().map(|&b| if b { 255 } else { 0 }).collect::<Vec<u8>>());
            let m = decode_mask(Path::new("m.pgm"), &bytes).unwrap();
            prop_assert_eq!(encode_mask(&m), bytes);
        }
    }
}
