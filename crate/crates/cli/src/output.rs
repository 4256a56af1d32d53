//! Output files: a provenance comment line, then data. Files are written
//! under temporary names and renamed only when the whole command succeeds.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn config_hash(canonical: &str) -> String {
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Artifacts {
    dir: PathBuf,
    header: String,
    pending: Vec<(PathBuf, PathBuf)>,
}

impl Artifacts {
    pub fn new(dir: &Path, hash: &str, seed: u64) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            header: format!("# config_sha256={hash} seed={seed} version={}", slowrec::VERSION),
            pending: Vec::new(),
        })
    }

    /// Open `name` for writing; the header line is already in place.
    pub fn create(&mut self, name: &str) -> io::Result<BufWriter<File>> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.partial"));
        let mut w = BufWriter::new(File::create(&tmp)?);
        writeln!(w, "{}", self.header)?;
        self.pending.push((tmp, target));
        Ok(w)
    }

    pub fn commit(mut self) -> io::Result<Vec<PathBuf>> {
        let mut done = Vec::new();
        for (tmp, target) in std::mem::take(&mut self.pending) {
            fs::rename(&tmp, &target)?;
            done.push(target);
        }
        Ok(done)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        for (tmp, _) in &self.pending {
            let _ = fs::remove_file(tmp);
        }
    }
}
