//! Output files. Every CSV starts with a `# config_sha256=` comment line and
//! writes floats with 17 significant digits.

use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::commands::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Round-trip scientific notation.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvOut {
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, hash: &str, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "# config_sha256={hash}").map_err(|e| CliError::io(path, e))?;
        let mut inner = csv::Writer::from_writer(buf);
        inner.write_record(header).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| CliError::Input(e.to_string()))
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads a points CSV whose header must be exactly `x,y,z`.
pub fn read_points(path: &Path) -> Result<Vec<[f64; 3]>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("cannot read points file {}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("points file {}: {e}", path.display())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != ["x", "y", "z"] {
        return Err(CliError::Input(format!(
            "points file {} must start with the header `x,y,z`, found `{}`",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("points file row {}: {e}", row + 1)))?;
        let mut p = [0.0; 3];
        for (i, field) in rec.iter().enumerate() {
            p[i] = field
                .parse()
                .map_err(|_| CliError::Input(format!("points file row {}: `{field}` is not a number", row + 1)))?;
        }
        points.push(p);
    }
    if points.is_empty() {
        return Err(CliError::Input(format!("points file {} has no rows", path.display())));
    }
    Ok(points)
}
