//! Atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::CliError;

/// Output directory whose files appear only once fully written.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `name` through a temporary sibling and a rename.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let target = self.path(name);
        let tmp = self.dir.join(format!(".{name}.tmp{}", std::process::id()));
        let res = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &target)
        })();
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            return Err(CliError::Data(format!("cannot write {}: {e}", target.display())));
        }
        Ok(target)
    }

    pub fn write_json<S: serde::Serialize>(&self, name: &str, value: &S) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(&dir.path().join("a/b")).unwrap();
        out.write("x.txt", b"one").unwrap();
        out.write("x.txt", b"two").unwrap();
        assert_eq!(fs::read(out.path("x.txt")).unwrap(), b"two");
        let names: Vec<_> = fs::read_dir(dir.path().join("a/b")).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 1);
    }
}
