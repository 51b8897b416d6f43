use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Files collected during a command and written once it has finished.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, data: Vec<u8>) {
        self.files.push((name.into(), data));
    }

    pub fn add_json(&mut self, name: impl Into<String>, v: &serde_json::Value) {
        let mut data = serde_json::to_vec_pretty(v).expect("serializable json");
        data.push(b'\n');
        self.add(name, data);
    }

    /// Write each file to a temporary sibling and rename it into place.
    pub fn commit(self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, data) in self.files {
            let path = dir.join(&name);
            let tmp = dir.join(format!(".{name}.tmp"));
            {
                let mut f = fs::File::create(&tmp)?;
                f.write_all(&data)?;
                f.sync_all()?;
            }
            fs::rename(&tmp, &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// 17 significant digits, round-trip exact.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}
