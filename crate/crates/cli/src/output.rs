use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{runtime, CliError};

/// Outputs are written under a hidden directory inside the output directory
/// and renamed into place on `commit`. Nothing is visible before then.
pub struct Staging {
    root: PathBuf,
    tmp: tempfile::TempDir,
    files: Vec<PathBuf>,
}

impl Staging {
    pub fn new(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(runtime(format!("creating {}", root.display())))?;
        let tmp = tempfile::Builder::new()
            .prefix(".rex-staging-")
            .tempdir_in(root)
            .map_err(runtime("creating staging directory"))?;
        Ok(Self {
            root: root.to_path_buf(),
            tmp,
            files: Vec::new(),
        })
    }

    /// Writes `rel` (relative to the output directory) through `fill`.
    pub fn write(
        &mut self,
        rel: impl AsRef<Path>,
        fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let rel = rel.as_ref();
        let path = self.tmp.path().join(rel);
        let ctx = || format!("writing {}", rel.display());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(runtime(ctx()))?;
        }
        let mut out = BufWriter::new(fs::File::create(&path).map_err(runtime(ctx()))?);
        fill(&mut out).map_err(runtime(ctx()))?;
        out.flush().map_err(runtime(ctx()))?;
        self.files.push(rel.to_path_buf());
        Ok(())
    }

    pub fn write_str(&mut self, rel: impl AsRef<Path>, text: &str) -> Result<(), CliError> {
        self.write(rel, |w| w.write_all(text.as_bytes()))
    }

    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut done = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let dest = self.root.join(rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent).map_err(runtime(format!("creating {}", parent.display())))?;
            }
            fs::rename(self.tmp.path().join(rel), &dest)
                .map_err(runtime(format!("moving {} into place", rel.display())))?;
            done.push(dest);
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invisible_until_commit() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Staging::new(dir.path()).unwrap();
        s.write_str("a/b.txt", "hello").unwrap();
        assert!(!dir.path().join("a/b.txt").exists());
        let files = s.commit().unwrap();
        assert_eq!(files, [dir.path().join("a/b.txt")]);
        assert_eq!(fs::read_to_string(dir.path().join("a/b.txt")).unwrap(), "hello");
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".rex"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn dropped_staging_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Staging::new(dir.path()).unwrap();
            s.write_str("x.txt", "partial").unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
