//! Correspondence weight files.
//!
//! ```text
//! DGRW 1
//! sizes <N_x> <N_y>
//! count <K>
//! <i> <j> <w>        (K lines)
//! ```
//!
//! UTF-8 with LF line endings. Indices are base-10 and must be below the
//! declared cloud sizes; weights are decimal floats in `[0, 1]`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::correspondence::{CorrespondenceSet, WeightVector};
use crate::error::{Error, Result};

pub const MAGIC: &str = "DGRW 1";

#[derive(Debug, Clone, PartialEq)]
pub struct WeightFile {
    pub correspondences: CorrespondenceSet,
    pub weights: WeightVector,
}

impl WeightFile {
    pub fn source_size(&self) -> usize {
        self.correspondences.source_size()
    }

    pub fn target_size(&self) -> usize {
        self.correspondences.target_size()
    }
}

pub fn read_weight_file(path: impl AsRef<Path>) -> Result<WeightFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_weight_file(&bytes, path)
}

/// Parses weight-file bytes; `path` is only used in error messages.
pub fn parse_weight_file(bytes: &[u8], path: &Path) -> Result<WeightFile> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::format(path, format!("byte {}", e.valid_up_to()), "file is not valid UTF-8"))?;
    if let Some(k) = text.find('\r') {
        let line = text[..k].matches('\n').count() + 1;
        return Err(Error::format(path, format!("line {line}"), "CR found: line endings must be LF"));
    }
    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut lines = body.split('\n').enumerate().map(|(k, l)| (k + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::format(path, "end of file", format!("missing {what}")))
    };
    let loc = |n: usize| format!("line {n}");

    let (n, line) = next("header")?;
    if line != MAGIC {
        return Err(Error::format(path, loc(n), format!("expected '{MAGIC}'")));
    }

    let (n, line) = next("sizes line")?;
    let (nx, ny) = match line.split(' ').collect::<Vec<_>>().as_slice() {
        ["sizes", a, b] => (parse_index(a, path, n)?, parse_index(b, path, n)?),
        _ => return Err(Error::format(path, loc(n), "expected 'sizes <N_x> <N_y>'")),
    };

    let (n, line) = next("count line")?;
    let count = match line.split(' ').collect::<Vec<_>>().as_slice() {
        ["count", k] => parse_index(k, path, n)?,
        _ => return Err(Error::format(path, loc(n), "expected 'count <K>'")),
    };

    let mut pairs = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut seen = vec![false; nx];
    for (n, line) in lines {
        if pairs.len() == count {
            return Err(Error::format(path, loc(n), format!("more than the declared {count} entries")));
        }
        let (i, j, w) = match line.split(' ').collect::<Vec<_>>().as_slice() {
            [i, j, w] => (parse_index(i, path, n)?, parse_index(j, path, n)?, *w),
            _ => return Err(Error::format(path, loc(n), "expected '<i> <j> <w>'")),
        };
        if i >= nx || j >= ny {
            return Err(Error::format(path, loc(n), format!("pair ({i}, {j}) outside sizes ({nx}, {ny})")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::format(path, loc(n), format!("source index {i} appears twice")));
        }
        let w: f64 = w
            .parse()
            .map_err(|_| Error::format(path, loc(n), format!("invalid weight '{w}'")))?;
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::format(path, loc(n), format!("weight {w} outside [0, 1]")));
        }
        pairs.push((i, j));
        weights.push(w);
    }
    if pairs.len() != count {
        return Err(Error::format(
            path,
            "end of file",
            format!("declared {count} entries, found {}", pairs.len()),
        ));
    }
    Ok(WeightFile {
        correspondences: CorrespondenceSet::new(pairs, nx, ny)?,
        weights: WeightVector::new(weights)?,
    })
}

fn parse_index(token: &str, path: &Path, line: usize) -> Result<usize> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::format(path, format!("line {line}"), format!("invalid integer '{token}'")));
    }
    token
        .parse()
        .map_err(|_| Error::format(path, format!("line {line}"), format!("integer '{token}' out of range")))
}

pub fn encode_weight_file(correspondences: &CorrespondenceSet, weights: &WeightVector) -> Result<String> {
    if weights.len() != correspondences.len() {
        return Err(Error::WeightLengthMismatch {
            expected: correspondences.len(),
            found: weights.len(),
        });
    }
    let mut out = format!(
        "{MAGIC}\nsizes {} {}\ncount {}\n",
        correspondences.source_size(),
        correspondences.target_size(),
        correspondences.len()
    );
    for (&(i, j), w) in correspondences.pairs().iter().zip(weights.as_slice()) {
        writeln!(out, "{i} {j} {w:?}").unwrap();
    }
    Ok(out)
}

pub fn write_weight_file(
    path: impl AsRef<Path>,
    correspondences: &CorrespondenceSet,
    weights: &WeightVector,
) -> Result<()> {
    let path = path.as_ref();
    let text = encode_weight_file(correspondences, weights)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
