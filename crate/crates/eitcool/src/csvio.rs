//! Plot-ready CSV emission: header row, LF line endings, and floats printed
//! with 17 significant digits so every f64 round-trips exactly.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::Result;

/// Full-precision cell: 17 significant digits in scientific form.
pub fn float_cell(value: f64) -> String {
    format!("{value:.16e}")
}

/// Nullable cell: empty when the value is absent.
pub fn option_cell(value: Option<f64>) -> String {
    value.map(float_cell).unwrap_or_default()
}

/// Write `header` and the finished rows, each terminated with a bare `\n`.
pub fn write_table<I>(path: &Path, header: &str, rows: I) -> Result<()>
where
    I: IntoIterator<Item = String>,
{
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(header.as_bytes())?;
    out.write_all(b"\n")?;
    for row in rows {
        out.write_all(row.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
