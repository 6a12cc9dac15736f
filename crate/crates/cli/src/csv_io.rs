//! CSV ingestion and emission. Comma-separated, header row required, UTF-8,
//! decimal point, no thousands separators. Every cell must parse as a finite
//! number; errors name the data row (1-based, header excluded) and the
//! column. Output files are written whole to a temporary name and renamed
//! into place, so a failed run never leaves a partial file behind.

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug)]
pub struct NumericTable {
    pub headers: Vec<String>,
    /// Column-major; `columns[j].len() == n_rows` for every `j`.
    pub columns: Vec<Vec<f64>>,
    pub n_rows: usize,
}

impl NumericTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

pub fn read_table(path: &Path) -> CliResult<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: bad header row: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() {
        return Err(CliError::Data(format!("{}: empty header row", path.display())));
    }
    for (j, h) in headers.iter().enumerate() {
        if h.is_empty() {
            return Err(CliError::Data(format!(
                "{}: header column {} is empty",
                path.display(),
                j + 1
            )));
        }
        if headers[..j].contains(h) {
            return Err(CliError::Data(format!(
                "{}: duplicate header '{h}'",
                path.display()
            )));
        }
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record =
            record.map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        if record.len() != headers.len() {
            return Err(CliError::Data(format!(
                "{}: row {row} has {} fields, header has {}",
                path.display(),
                record.len(),
                headers.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            // "NaN" and "inf" parse as f64, so the finiteness check is what
            // actually rejects them.
            let value: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {row}, column '{}': cannot parse '{cell}' as a number",
                    path.display(),
                    headers[j]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: row {row}, column '{}': non-finite value '{cell}'",
                    path.display(),
                    headers[j]
                )));
            }
            columns[j].push(value);
        }
    }
    let n_rows = columns[0].len();
    if n_rows == 0 {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(NumericTable {
        headers,
        columns,
        n_rows,
    })
}

/// How the response column is printed.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum ResponseFormat {
    /// 17 significant digits: the printed value parses back to the same
    /// float, so refitting the file reproduces the statistics.
    FullPrecision,
    /// Rounded to a whole unit (integer yen). Breaks exact invariance; the
    /// sidecar then records post-rounding statistics.
    WholeNumber,
}

/// Plain decimal with 17 significant digits and no exponent.
pub fn format_full(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (16 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_table(
    path: &Path,
    headers: &[String],
    columns: &[Vec<f64>],
    response_idx: usize,
    format: ResponseFormat,
) -> CliResult<()> {
    let n = columns.first().map_or(0, Vec::len);
    let mut text = String::new();
    let header_line: Vec<String> = headers.iter().map(|h| csv_field(h)).collect();
    text.push_str(&header_line.join(","));
    text.push('\n');
    for i in 0..n {
        for (j, col) in columns.iter().enumerate() {
            if j > 0 {
                text.push(',');
            }
            if j == response_idx {
                match format {
                    ResponseFormat::FullPrecision => text.push_str(&format_full(col[i])),
                    ResponseFormat::WholeNumber => text.push_str(&format!("{:.0}", col[i])),
                }
            } else {
                // shortest round-trip form, exact by construction
                text.push_str(&format!("{}", col[i]));
            }
        }
        text.push('\n');
    }
    write_atomic(path, &text)
}

/// Write-then-rename. The temporary lives in the destination directory so
/// the final rename stays on one filesystem.
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| {
        CliError::Data(format!(
            "cannot create temporary file in {}: {e}",
            dir.display()
        ))
    })?;
    tmp.write_all(content.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path).map_err(|e| {
        CliError::Data(format!(
            "cannot move output into place at {}: {e}",
            path.display()
        ))
    })?;
    Ok(())
}
