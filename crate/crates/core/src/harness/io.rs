//! Plain-text field files: a header line `n1 n2` followed by `n1` rows of
//! `n2` space-separated reals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::real::Real;

pub fn field_to_text<T: Real>(field: &FieldGrid<T>) -> String {
    let mut s = format!("{} {}\n", field.n1(), field.n2());
    for row in field.values().chunks(field.n2()) {
        let mut first = true;
        for v in row {
            if !first {
                s.push(' ');
            }
            first = false;
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn field_from_text<T: Real>(text: &str) -> Result<FieldGrid<T>> {
    let bad = |m: String| Error::Input {
        path: "<field>".into(),
        message: m,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("empty field file".into()))?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(format!("header: {e}")))?;
    if head.len() != 2 {
        return Err(bad("header must be `n1 n2`".into()));
    }
    let (n1, n2) = (head[0], head[1]);
    let mut values = Vec::with_capacity(n1 * n2);
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {i}: {e}")))?;
        if row.len() != n2 {
            return Err(bad(format!(
                "row {i} has {} values, expected {n2}",
                row.len()
            )));
        }
        values.extend(row.into_iter().map(T::lit));
    }
    if values.len() != n1 * n2 {
        return Err(bad(format!(
            "expected {n1} rows, got {}",
            values.len() / n2.max(1)
        )));
    }
    FieldGrid::new(n1, n2, values)
}

pub fn write_field<T: Real>(path: &Path, field: &FieldGrid<T>) -> Result<()> {
    fs::write(path, field_to_text(field))?;
    Ok(())
}

pub fn read_field<T: Real>(path: &Path) -> Result<FieldGrid<T>> {
    let text = fs::read_to_string(path)?;
    field_from_text(&text).map_err(|e| match e {
        Error::Input { message, .. } => Error::Input {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}
