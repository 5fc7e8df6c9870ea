use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Decimal rendering rounded to 12 significant digits.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        rounded.to_string()
    }
}

/// File at `path`, or stdout when `path` is `None` or `-`.
pub fn sink(path: Option<&Path>) -> CliResult<(Box<dyn Write>, Option<PathBuf>)> {
    match path {
        Some(p) if p != Path::new("-") => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok((Box::new(BufWriter::new(file)), Some(p.to_path_buf())))
        }
        _ => Ok((Box::new(BufWriter::new(io::stdout().lock())), None)),
    }
}

fn write_error(path: &Option<PathBuf>, e: impl Into<io::Error>) -> CliError {
    CliError::io(path.as_deref().unwrap_or(Path::new("<stdout>")), e.into())
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let (mut out, p) = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| write_error(&p, e))?;
    writeln!(out).map_err(|e| write_error(&p, e))?;
    out.flush().map_err(|e| write_error(&p, e))
}

/// Writes a header and rows of numbers as CSV.
pub fn write_csv<I, R>(path: Option<&Path>, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let (out, p) = sink(path)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| write_error(&p, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| write_error(&p, e))?;
    }
    w.flush().map_err(|e| write_error(&p, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(flag: &str, path: &Path) -> CliResult<T> {
    let file = File::open(path)
        .map_err(|e| CliError::invalid(flag, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_reader(io::BufReader::new(file))
        .map_err(|e| CliError::invalid(flag, format!("malformed JSON in {}: {e}", path.display())))
}
