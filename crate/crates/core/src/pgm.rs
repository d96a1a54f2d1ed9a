//! Binary 8-bit PGM (P5) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Patch;

pub fn encode(img: &Patch) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Patch> {
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
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
            return Err(Error::parse(path, 1, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::parse(path, 1, format!("expected P5, got {}", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(path, 1, format!("bad header field {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse(path, 1, format!("unsupported maxval {maxval}")));
    }
    let raster = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| Error::parse(path, 1, "truncated PGM raster"))?;
    let scale = maxval as f32;
    Patch::new(w, h, raster.iter().map(|&b| b as f32 / scale).collect())
}

pub fn read(path: &Path) -> Result<Patch> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

pub fn write(path: &Path, img: &Patch) -> Result<()> {
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn quantized_images_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let img = Patch::from_fn(w, h, |x, y| {
                ((seed.wrapping_mul(31).wrapping_add((x * 17 + y * 101) as u64)) % 256) as f32 / 255.0
            });
            let back = decode(&encode(&img), Path::new("mem")).unwrap();
            prop_assert_eq!(back, img);
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_ascii_pgm() {
        assert!(decode(b"P2\n1 1\n255\n0\n", Path::new("mem")).is_err());
    }
}
