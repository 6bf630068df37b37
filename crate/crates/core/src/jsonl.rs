//! Line-delimited JSON artifacts: one header record followed by body records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_record<W: Write, T: Serialize>(out: &mut W, record: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|error| Error::File {
        path: path.display().to_string(),
        error,
    })
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|error| Error::File {
        path: path.display().to_string(),
        error,
    })
}

/// Reads a header record and all body records. Blank lines are ignored.
pub fn read_all<H, B, R>(reader: R, origin: &str) -> Result<(H, Vec<B>)>
where
    H: DeserializeOwned,
    B: DeserializeOwned,
    R: BufRead,
{
    let mut header = None;
    let mut body = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = |e: serde_json::Error| Error::Format {
            path: origin.to_string(),
            line: idx + 1,
            message: e.to_string(),
        };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(parsed)?);
        } else {
            body.push(serde_json::from_str(&line).map_err(parsed)?);
        }
    }
    let header = header.ok_or_else(|| Error::Format {
        path: origin.to_string(),
        line: 0,
        message: "missing header record".into(),
    })?;
    Ok((header, body))
}

/// Reads body records with no header.
pub fn read_records<B: DeserializeOwned, R: BufRead>(reader: R, origin: &str) -> Result<Vec<B>> {
    let mut body = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        body.push(serde_json::from_str(&line).map_err(|e| Error::Format {
            path: origin.to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?);
    }
    Ok(body)
}
