//! Atomic file output: write to a temp file in the target directory, then rename.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub fn write_atomic<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf, CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.join(name).display()));
    fs::create_dir_all(dir).map_err(io)?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(io)?;
    }
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| io(e.error))?;
    Ok(target)
}

/// Writes rows of already formatted fields under `header`.
pub fn write_table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    write_atomic(dir, name, |w| {
        let mut c = csv::Writer::from_writer(w);
        let err = |e: csv::Error| CliError::Io(e.to_string());
        c.write_record(header).map_err(err)?;
        for r in rows {
            c.write_record(r).map_err(err)?;
        }
        c.flush().map_err(|e| CliError::Io(e.to_string()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_table(dir.path(), "a.csv", &["x"], &[vec!["1".into()]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x\n1\n");
        write_table(dir.path(), "a.csv", &["x"], &[vec!["2".into()]]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "x\n2\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn failed_body_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_atomic(dir.path(), "b.csv", |_| Err(CliError::Io("boom".into())));
        assert!(r.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
