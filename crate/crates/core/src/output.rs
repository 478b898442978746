use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Writes every file beside its destination first and renames them into
/// place only after all writes succeeded.
pub(crate) fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut staged = Vec::new();
    let mut outcome = Ok(());
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, body) {
            outcome = Err(Error::file(&tmp, e));
            break;
        }
        staged.push((tmp, dir.join(name)));
    }
    if outcome.is_ok() {
        for (tmp, dest) in &staged {
            if let Err(e) = fs::rename(tmp, dest) {
                outcome = Err(Error::file(dest, e));
                break;
            }
        }
    }
    if let Err(e) = outcome {
        for (tmp, _) in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}
