use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Where results go: an output directory, stdout, or both.
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub stdout: bool,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>, stdout: bool) -> Result<Self> {
        if dir.is_none() && !stdout {
            return Err(crate::CliError::Usage("give --out <dir> or --stdout".into()).into());
        }
        Ok(Self { dir, stdout })
    }

    /// Writes `name` into the output directory, if any.
    pub fn file(&self, name: &str, bytes: &[u8]) -> Result<Option<PathBuf>> {
        match &self.dir {
            Some(d) => {
                let p = d.join(name);
                write_atomic(&p, bytes)?;
                Ok(Some(p))
            }
            None => Ok(None),
        }
    }

    /// The command's main result: written to the directory and, in stdout
    /// mode, printed.
    pub fn primary(&self, name: &str, text: &str) -> Result<()> {
        if let Some(p) = self.file(name, text.as_bytes())? {
            self.note(&format!("wrote {}", p.display()));
        }
        if self.stdout {
            print!("{text}");
        }
        Ok(())
    }

    /// Human-readable summary line; kept off stdout in stdout mode.
    pub fn note(&self, line: &str) {
        if self.stdout {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    }
}
