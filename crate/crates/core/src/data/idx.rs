//! IDX ubyte files (the MNIST distribution format): a big-endian magic number
//! (`0x00000803` for image stacks, `0x00000801` for label vectors), big-endian
//! `u32` dimensions, then raw bytes. Gzipped files are detected by their magic
//! bytes and decompressed transparently.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use nalgebra::DMatrix;

use super::LabeledTable;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// An image stack: `count` images of `rows × cols` bytes, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out).map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::malformed(path, "truncated header"))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::malformed(path, format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let expected = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < expected {
        return Err(Error::malformed(path, format!("truncated: expected {expected} pixel bytes, found {}", body.len())));
    }
    Ok(IdxImages { count, rows, cols, pixels: body[..expected].to_vec() })
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let magic = be_u32(&bytes, 0, path)?;
    if magic != LABELS_MAGIC {
        return Err(Error::malformed(path, format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(&bytes, 4, path)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::malformed(path, format!("truncated: expected {count} labels, found {}", body.len())));
    }
    Ok(body[..count].to_vec())
}

/// Loads an image/label pair as a table: one feature per pixel scaled to
/// `[0, 1]`, targets are the integer labels.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledTable> {
    let images = read_idx_images(&images_path)?;
    let labels = read_idx_labels(&labels_path)?;
    if images.count != labels.len() {
        return Err(Error::malformed(
            labels_path.as_ref(),
            format!("count mismatch: {} images vs {} labels", images.count, labels.len()),
        ));
    }
    let d = images.rows * images.cols;
    let features = DMatrix::from_fn(images.count, d, |i, j| f64::from(images.pixels[i * d + j]) / 255.0);
    let names = (0..d).map(|j| format!("px{j}")).collect();
    LabeledTable::new(names, "label", features, labels.into_iter().map(f64::from).collect())
}

fn write_all(path: &Path, header: &[u32], body: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(4 * header.len() + body.len());
    for h in header {
        out.extend_from_slice(&h.to_be_bytes());
    }
    out.extend_from_slice(body);
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::invalid("pixel buffer does not match the declared dimensions"));
    }
    write_all(
        path.as_ref(),
        &[IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32],
        &images.pixels,
    )
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    write_all(path.as_ref(), &[LABELS_MAGIC, labels.len() as u32], labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_image() -> IdxImages {
        IdxImages { count: 1, rows: 2, cols: 3, pixels: vec![0, 51, 102, 153, 204, 255] }
    }

    #[test]
    fn single_image_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        write_idx_images(&ip, &one_image()).unwrap();
        write_idx_labels(&lp, &[7]).unwrap();
        assert_eq!(read_idx_images(&ip).unwrap(), one_image());
        let t = load_idx(&ip, &lp).unwrap();
        assert_eq!(t.n_rows(), 1);
        assert_eq!(t.n_features(), 6);
        assert_eq!(t.targets, vec![7.0]);
        assert_eq!(t.raw_row(0), vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn gzip_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("l.idx");
        write_idx_labels(&plain, &[1, 2, 3]).unwrap();
        let gz = dir.path().join("l.idx.gz");
        let mut enc = flate2::write::GzEncoder::new(std::fs::File::create(&gz).unwrap(), flate2::Compression::fast());
        enc.write_all(&std::fs::read(&plain).unwrap()).unwrap();
        enc.finish().unwrap();
        assert_eq!(read_idx_labels(&gz).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn count_mismatch_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        write_idx_images(&ip, &one_image()).unwrap();
        write_idx_labels(&lp, &[1, 2]).unwrap();
        let err = load_idx(&ip, &lp).unwrap_err();
        assert!(err.to_string().contains("count mismatch"), "{err}");

        // labels file read as images
        assert!(read_idx_images(&lp).unwrap_err().to_string().contains("magic"));

        let mut bytes = std::fs::read(&ip).unwrap();
        bytes.truncate(bytes.len() - 1);
        std::fs::write(&ip, &bytes).unwrap();
        assert!(read_idx_images(&ip).unwrap_err().to_string().contains("truncated"));
        std::fs::write(&ip, [0u8, 0]).unwrap();
        assert!(read_idx_images(&ip).is_err());
    }
}
