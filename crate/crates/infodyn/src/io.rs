//! File formats: binary PGM, flat little-endian volumes, CSV tables and JSON
//! reports. Every write goes to a temporary file that is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use infodyn_core::frame::max_level;
use infodyn_core::Frame;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::validation(path.display().to_string(), "file not found"),
        _ => CliError::io(path, e),
    })
}

pub fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read_bytes(path)?).map_err(|_| CliError::validation(path.display().to_string(), "not UTF-8 text"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::runtime(path.display(), e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::validation(path.display().to_string(), e))
}

/// CSV with a header row; every record must have the header's length.
pub fn csv_bytes<R, I, S>(header: &[String], records: R) -> Vec<u8>
where
    R: IntoIterator<Item = I>,
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in records {
        w.write_record(r).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

/// Header and records of a CSV file.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let field = path.display().to_string();
    let bytes = read_bytes(path)?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    let header = r.headers().map_err(|e| CliError::validation(&field, e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::validation(&field, e))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn parse_f64(field: &str, text: &str) -> CliResult<f64> {
    text.trim().parse().map_err(|_| CliError::validation(field, format!("`{text}` is not a number")))
}

/// `P5` image with `maxval = 2^bit_depth - 1`; 16-bit samples are big-endian.
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let maxval = max_level(frame.bit_depth());
    let mut out = format!("P5\n{} {}\n{}\n", frame.width(), frame.height(), maxval).into_bytes();
    if maxval < 256 {
        out.extend(frame.pixels().iter().map(|&p| p as u8));
    } else {
        out.extend(frame.pixels().iter().flat_map(|p| p.to_be_bytes()));
    }
    out
}

/// Reads a `P5` image. The bit depth is the smallest one that holds `maxval`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame, String> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    let magic = next_token(bytes, &mut pos).ok_or("missing magic number")?;
    if magic != b"P5" {
        return Err("not a binary PGM (P5)".into());
    }
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| format!("missing {name}"))?;
        fields[i] = std::str::from_utf8(tok).ok().and_then(|s| s.parse().ok()).ok_or_else(|| format!("bad {name}"))?;
    }
    let [width, height, maxval] = fields;
    if !(1..=65535).contains(&maxval) {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let wide = maxval > 255;
    let n = width * height;
    let raster = bytes.get(pos..).unwrap_or_default();
    let need = if wide { 2 * n } else { n };
    if raster.len() < need {
        return Err(format!("raster has {} bytes, expected {need}", raster.len()));
    }
    let pixels: Vec<u16> = if wide {
        raster[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster[..need].iter().map(|&b| b as u16).collect()
    };
    let bit_depth = (usize::BITS - maxval.leading_zeros()) as u8;
    if let Some(&v) = pixels.iter().find(|&&v| v as usize > maxval) {
        return Err(format!("sample {v} exceeds maxval {maxval}"));
    }
    Frame::new(width, height, bit_depth, pixels).map_err(|e| e.to_string())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

pub fn write_pgm(path: &Path, frame: &Frame) -> CliResult<()> {
    write_atomic(path, &encode_pgm(frame))
}

pub fn read_pgm(path: &Path) -> CliResult<Frame> {
    decode_pgm(&read_bytes(path)?).map_err(|e| CliError::validation(path.display().to_string(), e))
}

pub fn f64_le_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn f64_from_le_bytes(bytes: &[u8]) -> Option<Vec<f64>> {
    bytes
        .len()
        .is_multiple_of(8)
        .then(|| bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn u16_from_le_bytes(bytes: &[u8]) -> Option<Vec<u16>> {
    bytes.len().is_multiple_of(2).then(|| bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect())
}

/// `relative` resolved against the directory holding `anchor`.
pub fn sibling(anchor: &Path, relative: &str) -> PathBuf {
    anchor.parent().unwrap_or(Path::new("")).join(relative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_8bit_round_trip() {
        let f = Frame::new(3, 2, 8, vec![0, 1, 2, 200, 254, 255]).unwrap();
        let bytes = encode_pgm(&f);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(decode_pgm(&bytes).unwrap(), f);
    }

    #[test]
    fn pgm_comments_and_odd_maxval() {
        let bytes = b"P5 # comment\n2 1\n# another\n4095\n\x0f\xff\x00\x01";
        let f = decode_pgm(bytes).unwrap();
        assert_eq!(f.bit_depth(), 12);
        assert_eq!(f.pixels(), &[4095, 1]);
    }

    #[test]
    fn pgm_rejects_bad_input() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n100\n\xff").is_err());
        assert!(decode_pgm(b"P5\n1 1\n").is_err());
    }

    #[test]
    fn atomic_write_creates_parents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a/b/c.txt");
        write_atomic(&p, b"hello").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"hello");
        write_atomic(&p, b"bye").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"bye");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn missing_file_is_a_validation_error() {
        let err = read_bytes(Path::new("/definitely/not/here")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1usize..9, h in 1usize..9, depth in 1u8..=16, raw in proptest::collection::vec(any::<u16>(), 64)) {
            let max = max_level(depth);
            let px: Vec<u16> = raw[..w * h].iter().map(|&v| if max == u16::MAX { v } else { v % (max + 1) }).collect();
            let f = Frame::new(w, h, depth, px).unwrap();
            prop_assert_eq!(decode_pgm(&encode_pgm(&f)).unwrap(), f);
        }

        #[test]
        fn f64_round_trip(v in proptest::collection::vec(any::<f64>(), 0..20)) {
            let back = f64_from_le_bytes(&f64_le_bytes(&v)).unwrap();
            prop_assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
