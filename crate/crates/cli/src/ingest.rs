//! CSV ingestion: one header row, one numeric column, rows in time order.

use std::path::Path;

use secondchange::TimeSeries;

use crate::CliError;

/// Reads the selected column (by name, or by zero-based index when the
/// selector parses as an integer) into a series on the grid t_i = i/n.
/// Non-finite and non-numeric cells are rejected with their line number.
pub fn ingest(path: &Path, column: &str) -> Result<(TimeSeries, String), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::data(format!("bad header in {}: {e}", path.display())))?
        .clone();
    let index = match column.parse::<usize>() {
        Ok(ix) if ix < headers.len() => ix,
        Ok(ix) => {
            return Err(CliError::data(format!(
                "column index {ix} out of range; file has {} columns",
                headers.len()
            )))
        }
        Err(_) => headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| CliError::data(format!("no column named '{column}'")))?,
    };
    let name = headers.get(index).unwrap_or(column).to_string();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        // Data rows start on line 2, after the header.
        let line = row + 2;
        let record =
            record.map_err(|e| CliError::data(format!("parse failure on line {line}: {e}")))?;
        let cell = record
            .get(index)
            .ok_or_else(|| CliError::data(format!("line {line}: missing column {index}")))?;
        let value: f64 = cell
            .trim()
            .parse()
            .map_err(|_| CliError::data(format!("line {line}: non-numeric cell '{cell}'")))?;
        if !value.is_finite() {
            return Err(CliError::data(format!(
                "line {line}: non-finite value '{cell}'"
            )));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    let series =
        TimeSeries::new(values).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((series, name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_row_file_parses_in_order() {
        let f = write_tmp("v\n1\n2\n3\n");
        let (series, name) = ingest(f.path(), "v").unwrap();
        assert_eq!(series.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(series.len(), 3);
        assert_eq!(name, "v");
        // Index selector resolves the same column.
        let (by_index, _) = ingest(f.path(), "0").unwrap();
        assert_eq!(by_index.values(), series.values());
    }

    #[test]
    fn nan_row_errors_with_its_line_number() {
        let f = write_tmp("v\n1\nNaN\n3\n");
        let err = ingest(f.path(), "v").unwrap_err();
        assert!(err.message.contains("line 3"), "{}", err.message);
    }

    #[test]
    fn empty_file_is_rejected() {
        let f = write_tmp("v\n");
        assert!(ingest(f.path(), "v").is_err());
    }
}
