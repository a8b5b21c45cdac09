use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LogEntry, StoreError};

pub const FORMAT: &str = "jcalens-store";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Where the store's log lives. The in-memory state is rebuilt from
/// `load` and kept current by `append`.
pub trait StoreBackend: Send + Sync {
    fn load(&mut self) -> Result<Vec<LogEntry>, StoreError>;
    fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError>;
    /// Replaces the whole log with an equivalent shorter one.
    fn rewrite(&mut self, entries: &[LogEntry]) -> Result<(), StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryBackend {
    entries: Vec<LogEntry>,
}

impl StoreBackend for MemoryBackend {
    fn load(&mut self) -> Result<Vec<LogEntry>, StoreError> {
        Ok(self.entries.clone())
    }

    fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError> {
        self.entries.push(entry.clone());
        Ok(())
    }

    fn rewrite(&mut self, entries: &[LogEntry]) -> Result<(), StoreError> {
        self.entries = entries.to_vec();
        Ok(())
    }
}

/// JSON-lines file: a header line, then one log entry per line.
#[derive(Debug)]
pub struct FileBackend {
    path: PathBuf,
}

impl FileBackend {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        FileBackend { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn header_line() -> String {
        serde_json::to_string(&Header { format: FORMAT.into(), version: VERSION }).expect("header serializes")
    }
}

impl StoreBackend for FileBackend {
    fn load(&mut self) -> Result<Vec<LogEntry>, StoreError> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>()?;
        let Some(first) = lines.first() else { return Ok(Vec::new()) };
        let header: Header = serde_json::from_str(first)
            .map_err(|e| StoreError::Corrupt { line: 1, message: format!("bad header: {e}") })?;
        if header.format != FORMAT {
            return Err(StoreError::Corrupt { line: 1, message: format!("not a store file: {}", header.format) });
        }
        if header.version != VERSION {
            return Err(StoreError::UnsupportedVersion(header.version));
        }
        let mut entries = Vec::new();
        let mut torn = false;
        for (ix, line) in lines.iter().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(e) => entries.push(e),
                // an interrupted append leaves a partial last line
                Err(_) if ix == lines.len() - 1 => torn = true,
                Err(e) => return Err(StoreError::Corrupt { line: ix + 1, message: e.to_string() }),
            }
        }
        if torn {
            log::warn!("{}: ignoring incomplete last entry", self.path.display());
            self.rewrite(&entries)?;
        }
        Ok(entries)
    }

    fn append(&mut self, entry: &LogEntry) -> Result<(), StoreError> {
        let fresh = fs::metadata(&self.path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut buf = String::new();
        if fresh {
            buf.push_str(&Self::header_line());
            buf.push('\n');
        }
        buf.push_str(&serde_json::to_string(entry)?);
        buf.push('\n');
        f.write_all(buf.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    fn rewrite(&mut self, entries: &[LogEntry]) -> Result<(), StoreError> {
        // write beside the target, then rename over it
        let mut name = self.path.file_name().unwrap_or_default().to_os_string();
        name.push(format!(".{}.tmp", std::process::id()));
        let tmp = self.path.with_file_name(name);
        let mut buf = Self::header_line();
        buf.push('\n');
        for e in entries {
            buf.push_str(&serde_json::to_string(e)?);
            buf.push('\n');
        }
        let written = File::create(&tmp).and_then(|mut f| {
            f.write_all(buf.as_bytes())?;
            f.sync_data()
        });
        if let Err(e) = written.and_then(|()| fs::rename(&tmp, &self.path)) {
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        Ok(())
    }
}
