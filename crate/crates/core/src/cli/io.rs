use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::{format_float, Dataset, Fit};
use crate::error::{Error, Result};

/// Reads an `x,y` CSV file into a dataset.
pub fn parse_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_csv_str(&text)
}

/// Parses CSV text with the exact header `x,y`. LF and CRLF line endings
/// are both accepted; errors carry 1-based line numbers.
pub fn parse_csv_str(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `x,y`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let cell = |i: usize| {
            record[i].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("`{}` is not a number", &record[i]),
            })
        };
        xs.push(cell(0)?);
        ys.push(cell(1)?);
    }
    if xs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(xs, ys)
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// `x0,ghat,degenerate` with degenerate points written as `NaN,1`.
pub fn fit_csv(fit: &Fit) -> String {
    let mut out = String::from("x0,ghat,degenerate\n");
    for ((x0, g), d) in fit.grid.iter().zip(&fit.values).zip(&fit.degenerate) {
        out.push_str(&format!(
            "{},{},{}\n",
            format_float(*x0),
            format_float(*g),
            u8::from(*d)
        ));
    }
    out
}

pub fn points_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("x,y\n");
    for (x, y) in points {
        out.push_str(&format!("{},{}\n", format_float(*x), format_float(*y)));
    }
    out
}

/// Writes to `path`, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_file(p, contents),
        None => std::io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|e| Error::io("writing standard output", e)),
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
