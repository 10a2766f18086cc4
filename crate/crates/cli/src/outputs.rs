//! Staged command outputs.
//!
//! Commands never write final files directly: each output is staged under a
//! temporary sibling name, and only an explicit [`Outputs::commit`] renames
//! everything into place. If a command errors first, the stage is dropped and
//! its temporaries removed, so a failed run leaves no partial outputs behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct Outputs {
    /// `(temporary, final)` pairs, committed in staging order.
    staged: Vec<(PathBuf, PathBuf)>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs {
            staged: Vec::new(),
            committed: false,
        }
    }

    /// Registers `target` as an output and returns the temporary path to
    /// write it to. The parent directory is created on demand.
    pub fn stage(&mut self, target: PathBuf) -> Result<PathBuf> {
        let parent = target.parent().unwrap_or_else(|| Path::new("."));
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create output directory {}", parent.display()))?;
        let file_name = target
            .file_name()
            .with_context(|| format!("output path {} has no file name", target.display()))?;
        let temporary = parent.join(format!(".tmp-{}", file_name.to_string_lossy()));
        self.staged.push((temporary.clone(), target));
        Ok(temporary)
    }

    /// Moves every staged file into place and returns the final paths.
    /// Callers must have written all staged temporaries first.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut finished = Vec::with_capacity(self.staged.len());
        for (temporary, target) in &self.staged {
            fs::rename(temporary, target).with_context(|| {
                format!(
                    "cannot move staged output {} to {}",
                    temporary.display(),
                    target.display()
                )
            })?;
            finished.push(target.clone());
        }
        self.committed = true;
        Ok(finished)
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for (temporary, _) in &self.staged {
            // Best-effort cleanup; the file may never have been written.
            let _ = fs::remove_file(temporary);
        }
    }
}
