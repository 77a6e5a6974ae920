//! CSV emission and the run manifest.

use std::fs::File;
use std::path::Path;

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 17;

/// Positional decimal with 17 significant digits; `NaN`, `inf` and `-inf` otherwise.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exponent: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `header` and `rows` with `\n` line endings. An empty row set gives a header-only file.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(|e| io(path, e))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(CliError::Io(format!(
                "{}: record has {} fields, schema has {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        w.write_record(row).map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// Config echo plus command, seed and versions. Contains nothing run-dependent beyond these.
pub fn write_manifest(
    path: &Path,
    command: &str,
    echo: &[(String, String)],
    extra: &[(String, String)],
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&format!("command={command}\n"));
    text.push_str(&format!("hawkes-cli={}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("hawkes-core={}\n", hawkes_core::VERSION));
    for (k, v) in echo.iter().chain(extra) {
        text.push_str(&format!("{k}={v}\n"));
    }
    std::fs::write(path, text).map_err(|e| io(path, e))
}
