//! Reader for the IDX format used by the MNIST distribution: a big-endian
//! magic number (`0x00000803` for `u8` images, `0x00000801` for `u8`
//! labels), one big-endian `u32` per dimension, then the raw bytes.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn ingest_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| ingest_err(path, "truncated header"))
}

/// Parses an IDX buffer, returning its dimensions and payload.
fn parse<'a>(bytes: &'a [u8], magic: u32, path: &Path) -> Result<(Vec<usize>, &'a [u8])> {
    let found = read_u32(bytes, 0, path)?;
    if found != magic {
        return Err(ingest_err(
            path,
            format!("bad magic 0x{found:08x}, expected 0x{magic:08x}"),
        ));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim)
        .map(|i| read_u32(bytes, 4 + 4 * i, path).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * ndim;
    let len: usize = dims.iter().product();
    let payload = bytes
        .get(start..start + len)
        .ok_or_else(|| ingest_err(path, format!("truncated payload: need {len} bytes")))?;
    if bytes.len() != start + len {
        return Err(ingest_err(path, "trailing bytes after payload"));
    }
    Ok((dims, payload))
}

/// Loads an image/label pair. Pixels are scaled to `[0, 1]` by `/ 255`; the
/// class count is one past the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let read = |p: &Path| fs::read(p).map_err(|e| ingest_err(p, e.to_string()));
    let image_bytes = read(images_path)?;
    let label_bytes = read(labels_path)?;
    let (idims, ipayload) = parse(&image_bytes, IMAGES_MAGIC, images_path)?;
    let (ldims, lpayload) = parse(&label_bytes, LABELS_MAGIC, labels_path)?;
    if idims[0] != ldims[0] {
        return Err(ingest_err(
            labels_path,
            format!("{} labels for {} images", ldims[0], idims[0]),
        ));
    }
    let labels: Vec<usize> = lpayload.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(1, |m| m + 1);
    let pixels = ipayload.iter().map(|&b| b as f64 / 255.0).collect();
    Dataset::new(idims[1], idims[2], 1, num_classes, pixels, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    fn header(magic: u32, dims: &[u32]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend_from_slice(&d.to_be_bytes());
        }
        v
    }

    #[test]
    fn three_image_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = header(IMAGES_MAGIC, &[3, 2, 2]);
        img.extend_from_slice(&[0, 255, 51, 102, 1, 2, 3, 4, 255, 255, 0, 0]);
        let mut lab = header(LABELS_MAGIC, &[3]);
        lab.extend_from_slice(&[7, 0, 3]);
        let ip = write(dir.path(), "img", &img);
        let lp = write(dir.path(), "lab", &lab);
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!((d.len(), d.height(), d.width(), d.channels()), (3, 2, 2, 1));
        assert_eq!(d.labels(), &[7, 0, 3]);
        assert_eq!(d.num_classes(), 8);
        assert_eq!(d.image(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(d.image(1), &[1.0 / 255.0, 2.0 / 255.0, 3.0 / 255.0, 4.0 / 255.0]);
    }

    #[test]
    fn image_file_passed_as_labels_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = header(IMAGES_MAGIC, &[1, 1, 1]);
        img.push(9);
        let ip = write(dir.path(), "img", &img);
        let err = load_idx(&ip, &ip).unwrap_err();
        match err {
            Error::Ingest { path, reason } => {
                assert_eq!(path, ip);
                assert!(reason.contains("bad magic"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_and_mismatched_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = header(IMAGES_MAGIC, &[2, 2, 2]);
        img.extend_from_slice(&[0; 7]);
        let mut lab = header(LABELS_MAGIC, &[2]);
        lab.extend_from_slice(&[0, 1]);
        let ip = write(dir.path(), "img", &img);
        let lp = write(dir.path(), "lab", &lab);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Ingest { path, .. }) if path == ip));

        let mut img = header(IMAGES_MAGIC, &[3, 1, 1]);
        img.extend_from_slice(&[0; 3]);
        let ip = write(dir.path(), "img3", &img);
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Ingest { path, .. }) if path == lp));
        assert!(load_idx(dir.path().join("missing"), &lp).is_err());
    }
}
