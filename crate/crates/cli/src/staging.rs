//! Output files are written under temporary names and renamed into place
//! only once every output of a command has been written, so a failing run
//! leaves no partial results behind.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;

#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Staged {
    pub fn new() -> Self {
        Staged::default()
    }

    /// Writes `target` through `fill` into a sibling temporary file.
    pub fn write<F>(&mut self, target: &Path, fill: F) -> anyhow::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
    {
        let name = target
            .file_name()
            .with_context(|| format!("output path {} has no file name", target.display()))?;
        let tmp = target.with_file_name(format!(".{}.partial", name.to_string_lossy()));
        self.files.push((tmp.clone(), target.to_path_buf()));
        let file = File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        let mut w = BufWriter::new(file);
        fill(&mut w).with_context(|| format!("writing {}", target.display()))?;
        w.flush().with_context(|| format!("writing {}", target.display()))?;
        Ok(())
    }

    pub fn commit(mut self) -> anyhow::Result<Vec<PathBuf>> {
        for (tmp, target) in &self.files {
            fs::rename(tmp, target).with_context(|| format!("cannot move output into {}", target.display()))?;
        }
        self.committed = true;
        Ok(self.files.iter().map(|(_, t)| t.clone()).collect())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            for (tmp, target) in &self.files {
                let _ = fs::remove_file(tmp);
                let _ = fs::remove_file(target);
            }
        }
    }
}
