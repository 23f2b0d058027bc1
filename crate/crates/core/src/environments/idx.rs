//! IDX (MNIST) file reading and writing.
//!
//! Layout: big-endian u32 magic (`0x00000803` for rank-3 u8 images,
//! `0x00000801` for rank-1 u8 labels), big-endian u32 dimension sizes, then
//! the raw bytes. Files ending in `.gz` are decompressed transparently.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, IdxError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, IdxError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(IdxError::TruncatedHeader { offset, needed: 4 })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), IdxError> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(IdxError::BadMagic { expected, found });
    }
    Ok(())
}

fn payload(bytes: &[u8], offset: usize, expected: usize) -> Result<&[u8], IdxError> {
    let found = bytes.len().saturating_sub(offset);
    if found < expected {
        return Err(IdxError::TruncatedPayload {
            offset,
            expected,
            found,
        });
    }
    Ok(&bytes[offset..offset + expected])
}

pub fn parse_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let pixels = payload(bytes, 16, count * rows * cols)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.to_vec())
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    let bytes = read_bytes(path)?;
    parse_images(&bytes).map_err(|source| Error::Idx {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    parse_labels(&bytes).map_err(|source| Error::Idx {
        path: path.to_path_buf(),
        source,
    })
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_images(path: &Path, images: &IdxImages) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_images(images))?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_labels(labels))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_small_fixture() {
        let imgs = IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 128, 1, 2, 3, 4, 5],
        };
        assert_eq!(parse_images(&encode_images(&imgs)).unwrap(), imgs);
        assert_eq!(parse_labels(&encode_labels(&[3, 7])).unwrap(), vec![3, 7]);
    }

    #[test]
    fn wrong_magic_names_offset() {
        let mut bytes = encode_labels(&[1, 2]);
        bytes[3] = 0x03;
        let err = parse_labels(&bytes).unwrap_err();
        assert!(matches!(err, IdxError::BadMagic { found: 0x803, .. }));
        assert!(err.to_string().contains("offset 0"));
    }

    #[test]
    fn truncated_payload_detected() {
        let imgs = IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![0; 8],
        };
        let mut bytes = encode_images(&imgs);
        bytes.truncate(bytes.len() - 3);
        let err = parse_images(&bytes).unwrap_err();
        assert!(matches!(
            err,
            IdxError::TruncatedPayload {
                offset: 16,
                expected: 8,
                found: 5
            }
        ));
        assert!(matches!(
            parse_labels(&[0, 0, 8]),
            Err(IdxError::TruncatedHeader { offset: 0, .. })
        ));
    }
}
