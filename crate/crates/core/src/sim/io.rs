use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::sampler::SimRow;
use crate::error::Result;

/// Writes `# <manifest>` followed by the rows with a header line.
pub fn write_csv(path: impl AsRef<Path>, manifest: &str, rows: &[SimRow]) -> Result<()> {
    let mut file = File::create(path)?;
    for line in manifest.lines() {
        writeln!(file, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`], skipping `#` comment lines.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SimRow>> {
    let reader = BufReader::new(File::open(path)?);
    let mut body = String::new();
    for line in reader.lines() {
        let line = line?;
        if !line.starts_with('#') {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let rows = r.deserialize().collect::<std::result::Result<Vec<SimRow>, _>>()?;
    Ok(rows)
}
