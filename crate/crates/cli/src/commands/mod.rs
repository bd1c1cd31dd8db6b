//! Subcommand implementations.

pub mod benchmark;
pub mod evaluate;
pub mod perturb;
pub mod train_source;
pub mod transfer;

use std::path::Path;

use mmlearn::Result;

pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}
