use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(Error::at_path(dir))?;
    tmp.write_all(bytes).map_err(Error::at_path(path))?;
    tmp.as_file().sync_all().map_err(Error::at_path(path))?;
    tmp.persist(path).map_err(|e| Error::Path {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(Error::at_path(path))
}
