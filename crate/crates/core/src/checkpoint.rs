//! Plain-text parameter checkpoints.
//!
//! ```text
//! msi-gnn-checkpoint 1
//! param <name> <rows> <cols> <decay|nodecay>
//! <row 0 values, space separated>
//! ...
//! ```
//!
//! Values use Rust's shortest round-trip exponent formatting, so a
//! dump/restore cycle is lossless.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};
use crate::graph::write_lines;

const MAGIC: &str = "msi-gnn-checkpoint 1";

pub fn write_checkpoint(w: &mut impl Write, params: &ParamStore) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    for p in params.iter() {
        let (rows, cols) = p.value.dim();
        let decay = if p.decay { "decay" } else { "nodecay" };
        writeln!(w, "param {} {rows} {cols} {decay}", p.name)?;
        for row in p.value.rows() {
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b" ")?;
                }
                first = false;
                write!(w, "{v:e}")?;
            }
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, params: &ParamStore) -> Result<()> {
    write_lines(path, |w| write_checkpoint(w, params))
}

pub fn parse_checkpoint(text: &str) -> Result<ParamStore> {
    let bad = |line: usize, msg: &str| Error::Checkpoint(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(bad(1, "missing checkpoint header")),
    }
    let mut store = ParamStore::new();
    while let Some((lineno, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [tag, name, rows, cols, decay] = fields[..] else {
            return Err(bad(lineno, "expected `param <name> <rows> <cols> <decay>`"));
        };
        if tag != "param" {
            return Err(bad(lineno, "expected a param header"));
        }
        let rows: usize = rows.parse().map_err(|_| bad(lineno, "bad row count"))?;
        let cols: usize = cols.parse().map_err(|_| bad(lineno, "bad column count"))?;
        let decay = match decay {
            "decay" => true,
            "nodecay" => false,
            _ => return Err(bad(lineno, "decay flag must be decay or nodecay")),
        };
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| bad(lineno, "truncated parameter"))?;
            let before = values.len();
            for raw in line.split_whitespace() {
                values.push(raw.parse::<f64>().map_err(|_| bad(lineno, "bad value"))?);
            }
            if values.len() - before != cols {
                return Err(bad(lineno, "wrong number of values in row"));
            }
        }
        let value = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| bad(lineno, &e.to_string()))?;
        store.push(name, value, decay);
    }
    Ok(store)
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text)
}
