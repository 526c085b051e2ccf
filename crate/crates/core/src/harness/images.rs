//! Image corpora as random-field realizations: one channel per image,
//! standardized per image to mean 0 and sd 1.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::real::{mean_sd, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    R,
    G,
    B,
    Gray,
}

impl FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r" | "red" => Ok(Channel::R),
            "g" | "green" => Ok(Channel::G),
            "b" | "blue" => Ok(Channel::B),
            "gray" | "grey" | "luma" => Ok(Channel::Gray),
            _ => Err(Error::Config(format!("unknown channel `{s}`"))),
        }
    }
}

const EXTENSIONS: [&str; 5] = ["png", "pgm", "ppm", "pnm", "pbm"];

/// Image files of `dir` with a supported extension, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Channel values in `[0, 255]`, row-major, with the image dimensions `(rows, cols)`.
pub fn load_channel(path: &Path, channel: Channel) -> Result<(usize, usize, Vec<f64>)> {
    let err = |m: String| Error::Input {
        path: path.display().to_string(),
        message: m,
    };
    let img = image::open(path).map_err(|e| err(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match channel {
        Channel::Gray => img.to_luma8().pixels().map(|p| p.0[0] as f64).collect(),
        c => {
            let i = match c {
                Channel::R => 0,
                Channel::G => 1,
                _ => 2,
            };
            img.to_rgb8().pixels().map(|p| p.0[i] as f64).collect()
        }
    };
    Ok((h, w, values))
}

/// Standardize to mean 0 and (n - 1)-sd 1; constant input is an error.
pub fn standardize(values: &[f64]) -> Option<Vec<f64>> {
    let (m, sd) = mean_sd(values);
    (sd > 0.0).then(|| values.iter().map(|v| (v - m) / sd).collect())
}

/// Loaded corpus with the files that were skipped and why.
#[derive(Debug)]
pub struct Corpus<T> {
    pub fields: Vec<(String, FieldGrid<T>)>,
    pub skipped: Vec<(String, Error)>,
}

/// Read up to `count` valid images of `dir` in file-name order.
///
/// Unreadable files, zero-variance images and images whose dimensions differ
/// from the first valid one are skipped and reported.
pub fn ingest_images<T: Real>(dir: &Path, channel: Channel, count: usize) -> Result<Corpus<T>> {
    let mut corpus = Corpus {
        fields: Vec::new(),
        skipped: Vec::new(),
    };
    let mut dims: Option<(usize, usize)> = None;
    for path in list_images(dir)? {
        if corpus.fields.len() >= count {
            break;
        }
        let name = path
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let loaded = load_channel(&path, channel).and_then(|(h, w, v)| {
            if dims.is_some_and(|d| d != (h, w)) {
                let (eh, ew) = dims.unwrap();
                return Err(Error::Input {
                    path: path.display().to_string(),
                    message: format!("dimensions {h}x{w} differ from {eh}x{ew}"),
                });
            }
            let z = standardize(&v).ok_or_else(|| Error::Input {
                path: path.display().to_string(),
                message: "zero-variance image".into(),
            })?;
            Ok((h, w, z))
        });
        match loaded {
            Ok((h, w, z)) => {
                dims = Some((h, w));
                let field = FieldGrid::new(h, w, z.into_iter().map(T::lit).collect())?;
                corpus.fields.push((name, field));
            }
            Err(e) => corpus.skipped.push((name, e)),
        }
    }
    Ok(corpus)
}
