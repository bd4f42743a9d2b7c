//! Input units: one per non-empty line of a text file, or one per JSONL
//! record. A JSONL record is either a string or an object carrying the text
//! under `text`, `sentence`, or `body`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::CliError;

const TEXT_FIELDS: [&str; 3] = ["text", "sentence", "body"];

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "ndjson")
    )
}

fn unit_from_json(line: &str) -> Result<String, String> {
    match serde_json::from_str::<Value>(line).map_err(|e| e.to_string())? {
        Value::String(s) => Ok(s),
        Value::Object(map) => TEXT_FIELDS
            .iter()
            .find_map(|k| map.get(*k).and_then(Value::as_str))
            .map(str::to_string)
            .ok_or_else(|| format!("record has no string field among {TEXT_FIELDS:?}")),
        _ => Err("expected a string or an object".into()),
    }
}

/// `-` reads standard input as plain text.
pub fn read_units(path: &Path) -> Result<Vec<String>, CliError> {
    let reader: Box<dyn BufRead> = if path == Path::new("-") {
        Box::new(io::stdin().lock())
    } else {
        Box::new(BufReader::new(
            File::open(path).map_err(|e| CliError::io(path, e))?,
        ))
    };
    let json = is_jsonl(path);
    let mut units = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if json {
            let unit = unit_from_json(&line).map_err(|reason| CliError::Input {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            })?;
            units.push(unit);
        } else {
            units.push(line);
        }
    }
    Ok(units)
}

/// Writes to `path`, or to standard output when absent.
pub struct Output {
    path: PathBuf,
    inner: Box<dyn Write>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
                }
                let file = File::create(p).map_err(|e| CliError::io(p, e))?;
                Ok(Self {
                    path: p.to_path_buf(),
                    inner: Box::new(BufWriter::new(file)),
                })
            }
            None => Ok(Self {
                path: PathBuf::from("<stdout>"),
                inner: Box::new(BufWriter::new(io::stdout())),
            }),
        }
    }

    pub fn writer(&mut self) -> &mut dyn Write {
        &mut self.inner
    }

    pub fn json_line<T: serde::Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        serde_json::to_writer(&mut self.inner, value)?;
        self.inner
            .write_all(b"\n")
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn json_document<T: serde::Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut self.inner, value)?;
        self.inner
            .write_all(b"\n")
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.inner.flush().map_err(|e| CliError::io(&self.path, e))
    }
}
