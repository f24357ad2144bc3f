//! Output staging. Every file is rendered in memory first and only written
//! once the whole command has succeeded, each through a temporary file that
//! is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliResult;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// The comment line every output carries.
pub fn provenance(command: &str, hash: &str) -> String {
    format!("taskinfo {TOOL_VERSION} {command} config-sha256={hash}")
}

pub struct Outputs {
    dir: PathBuf,
    stamp: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &str, hash: &str) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            stamp: provenance(command, hash),
            files: Vec::new(),
        }
    }

    pub fn stamp(&self) -> &str {
        &self.stamp
    }

    /// A table whose first line is a column header: the comment goes on top.
    pub fn table(&mut self, name: &str, body: Vec<u8>) {
        let mut out = format!("# {}\n", self.stamp).into_bytes();
        out.extend(body);
        self.files.push((name.to_string(), out));
    }

    /// A file whose first line is a format header that readers require
    /// first: the comment goes right after it.
    pub fn headed(&mut self, name: &str, body: Vec<u8>) {
        let split = body.iter().position(|&b| b == b'\n').map_or(body.len(), |i| i + 1);
        let mut out = body[..split].to_vec();
        out.extend(format!("# {}\n", self.stamp).bytes());
        out.extend(&body[split..]);
        self.files.push((name.to_string(), out));
    }

    /// Content that already embeds the stamp, such as SVG or JSON.
    pub fn raw(&mut self, name: &str, body: Vec<u8>) {
        self.files.push((name.to_string(), body));
    }

    pub fn commit(self) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir)?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let target = self.dir.join(&name);
            let tmp = self.dir.join(format!(".{name}.tmp"));
            {
                let mut f = fs::File::create(&tmp)?;
                f.write_all(&bytes)?;
                f.sync_all()?;
            }
            fs::rename(&tmp, &target)?;
            written.push(target);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamps_and_commits() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::new(dir.path(), "gen-task", "abc");
        o.table("a.csv", b"x,y\n1,2\n".to_vec());
        o.headed("b.csv", b"# fmt v1\n1,2\n".to_vec());
        let paths = o.commit().unwrap();
        let a = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(a, format!("# taskinfo {TOOL_VERSION} gen-task config-sha256=abc\nx,y\n1,2\n"));
        let b = fs::read_to_string(&paths[1]).unwrap();
        assert!(b.starts_with("# fmt v1\n# taskinfo "));
        assert!(b.ends_with("abc\n1,2\n"));
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
