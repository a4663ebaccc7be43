//! CSV reading/writing for the command-line tools.
//!
//! Data files hold one vector per row, comma separated. Lines starting with
//! '#' are comments; a single leading header row can be skipped with the
//! `--has-header` flag. Floats are written with 17 significant digits so
//! round-trips are exact, and every output file starts with a commented
//! header echoing the fully resolved configuration.

use ndarray::{Array1, Array2};

use crate::CliError;

/// f64 with 17 significant digits; parses back to the identical bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_rows(path: &str, has_header: bool) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {path}: {e}")))?;
    let mut rows = Vec::new();
    let mut header_pending = has_header;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect();
        let row =
            row.map_err(|e| CliError::input(format!("{path}:{}: bad number: {e}", lineno + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{path}: no data rows")));
    }
    let width = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(CliError::input(format!(
            "{path}: row {} has {} fields, expected {width}",
            bad + 1,
            rows[bad].len()
        )));
    }
    Ok(rows)
}

pub fn read_matrix(path: &str, has_header: bool) -> Result<Array2<f64>, CliError> {
    let rows = read_rows(path, has_header)?;
    let (n, m) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, m), flat).map_err(|e| CliError::input(format!("{path}: {e}")))
}

/// A file holding exactly one vector (one data row).
pub fn read_vector(path: &str, has_header: bool) -> Result<Array1<f64>, CliError> {
    let rows = read_rows(path, has_header)?;
    if rows.len() != 1 {
        return Err(CliError::input(format!(
            "{path}: expected exactly one data row, found {}",
            rows.len()
        )));
    }
    Ok(Array1::from_vec(rows.into_iter().next().unwrap()))
}

/// Buffered writer for self-describing CSV outputs.
pub struct OutputFile {
    lines: Vec<String>,
}

impl OutputFile {
    /// Start a file with the echoed configuration: a command line followed
    /// by one `# key = value` line per resolved setting.
    pub fn with_config(command: &str, config: &[(&str, String)]) -> Self {
        let mut lines = vec![format!("# pbn {command}")];
        for (k, v) in config {
            lines.push(format!("# {k} = {v}"));
        }
        OutputFile { lines }
    }

    pub fn comment(&mut self, text: impl AsRef<str>) {
        self.lines.push(format!("# {}", text.as_ref()));
    }

    pub fn row(&mut self, values: &[f64]) {
        self.lines.push(
            values
                .iter()
                .map(|&v| fmt_f64(v))
                .collect::<Vec<_>>()
                .join(","),
        );
    }

    pub fn labeled_row(&mut self, label: &str, values: &[f64]) {
        let mut fields = vec![label.to_string()];
        fields.extend(values.iter().map(|&v| fmt_f64(v)));
        self.lines.push(fields.join(","));
    }

    pub fn labeled_value(&mut self, label: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{label},{value}"));
    }

    pub fn write(self, path: &str) -> Result<(), CliError> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {path}: {e}")))
    }
}
