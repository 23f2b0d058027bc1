//! Dataset download and integrity checks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use log::info;

use crate::environments::idx::{read_images, read_labels};
use crate::error::{Error, Result};

/// The standard MNIST file pairs, training set first.
pub const MNIST_FILES: [(&str, &str); 2] = [
    ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
    ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
];

pub const DEFAULT_MNIST_URL: &str = "https://storage.googleapis.com/cvdf-datasets/mnist/";

fn data_error(msg: String) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg))
}

/// Parses both files (checking that every header-declared length is
/// present) and that they describe the same number of items.
/// Returns the item count.
pub fn verify_idx_pair(images: &Path, labels: &Path) -> Result<usize> {
    let img = read_images(images)?;
    let lbl = read_labels(labels)?;
    if img.count != lbl.len() {
        return Err(data_error(format!(
            "{} holds {} images but {} holds {} labels",
            images.display(),
            img.count,
            labels.display(),
            lbl.len()
        )));
    }
    if let Some(bad) = lbl.iter().find(|&&l| l > 9) {
        return Err(data_error(format!("{}: label {bad} outside 0..=9", labels.display())));
    }
    Ok(img.count)
}

fn download(url: &str, dest: &Path) -> Result<()> {
    info!("fetching {url}");
    let status = Command::new("curl")
        .args(["--fail", "--silent", "--show-error", "--location", "--output"])
        .arg(dest)
        .arg(url)
        .status()
        .map_err(|e| data_error(format!("cannot run curl: {e}")))?;
    if !status.success() {
        return Err(data_error(format!("download of {url} failed ({status})")));
    }
    Ok(())
}

/// Downloads each `(images, labels)` pair from `base_url` into `dest`
/// and verifies it. Files that already verify are kept; a pair that
/// fails verification is removed.
pub fn fetch_idx(base_url: &str, dest: &Path, pairs: &[(&str, &str)]) -> Result<Vec<(PathBuf, PathBuf, usize)>> {
    fs::create_dir_all(dest)?;
    let base = base_url.trim_end_matches('/');
    let mut out = Vec::new();
    for &(img, lbl) in pairs {
        let (pi, pl) = (dest.join(img), dest.join(lbl));
        if let Ok(n) = verify_idx_pair(&pi, &pl) {
            info!("{} already present ({n} items)", pi.display());
            out.push((pi, pl, n));
            continue;
        }
        for (name, path) in [(img, &pi), (lbl, &pl)] {
            let partial = path.with_extension("part");
            download(&format!("{base}/{name}"), &partial)?;
            fs::rename(&partial, path)?;
        }
        match verify_idx_pair(&pi, &pl) {
            Ok(n) => out.push((pi, pl, n)),
            Err(e) => {
                let _ = fs::remove_file(&pi);
                let _ = fs::remove_file(&pl);
                return Err(e);
            }
        }
    }
    Ok(out)
}
