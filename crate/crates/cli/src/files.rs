//! Output files (written to a temporary sibling, then renamed into place) and
//! the sample CSV format.

use std::io::Write;
use std::path::{Path, PathBuf};

use detmmot_core::{linalg, Point, Tuple};

use crate::CliError;

/// A file to be created; nothing touches the destination until `commit`.
pub struct Pending {
    path: PathBuf,
    bytes: Vec<u8>,
}

impl Pending {
    pub fn new(path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) -> Self {
        Self {
            path: path.into(),
            bytes: bytes.into(),
        }
    }
}

/// Writes every file to a temporary sibling first and renames only once all
/// of them were written, so a failure leaves no partial outputs behind.
pub fn commit(files: Vec<Pending>) -> Result<(), CliError> {
    let mut staged = Vec::with_capacity(files.len());
    for f in &files {
        let dir = match f.path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut tmp = staging_builder().tempfile_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(&f.bytes).map_err(|e| CliError::io(&f.path, e))?;
        tmp.flush().map_err(|e| CliError::io(&f.path, e))?;
        staged.push(tmp);
    }
    for (tmp, f) in staged.into_iter().zip(&files) {
        tmp.persist(&f.path).map_err(|e| CliError::io(&f.path, e.error))?;
    }
    Ok(())
}

#[cfg(unix)]
fn staging_builder() -> tempfile::Builder<'static, 'static> {
    use std::os::unix::fs::PermissionsExt;
    let mut b = tempfile::Builder::new();
    b.permissions(std::fs::Permissions::from_mode(0o644));
    b
}

#[cfg(not(unix))]
fn staging_builder() -> tempfile::Builder<'static, 'static> {
    tempfile::Builder::new()
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Shortest round-trip rendering (`{:?}` switches to exponent form for very
/// large or small magnitudes).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=d)
        .flat_map(|i| (1..=d).map(move |c| format!("x{i}_{c}")))
        .collect();
    h.push("det".into());
    h
}

/// Sample CSV: one row per tuple, `x1_1..x1_d, x2_1, ..., det`.
pub fn samples_csv(d: usize, tuples: &[Tuple]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::with_capacity(tuples.len() * 24 * (d * d + 1)));
    w.write_record(header(d)).map_err(CliError::internal)?;
    let mut row: Vec<String> = Vec::with_capacity(d * d + 1);
    for t in tuples {
        row.clear();
        for x in t {
            row.extend(x.iter().map(|&c| fmt_f64(c)));
        }
        row.push(fmt_f64(linalg::det_unchecked(t, d)));
        w.write_record(&row).map_err(CliError::internal)?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

/// Parses a sample CSV, recovering `d` from the header.
pub fn read_samples_csv(path: &Path) -> Result<(usize, Vec<Tuple>), CliError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
    let cols = r
        .headers()
        .map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?
        .len();
    let d = (1..=linalg::MAX_DIM)
        .find(|d| d * d + 1 == cols)
        .ok_or_else(|| CliError::bad_input(format!("{}: {cols} columns is not d*d + 1", path.display())))?;
    if r.headers().map(|h| h.iter().map(str::to_owned).collect::<Vec<_>>()).ok() != Some(header(d)) {
        return Err(CliError::bad_input(format!("{}: unexpected header", path.display())));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::bad_input(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        let tuple = (0..d)
            .map(|i| Point::new(vals[i * d..(i + 1) * d].to_vec()))
            .collect::<Result<Tuple, _>>()?;
        out.push(tuple);
    }
    Ok((d, out))
}
