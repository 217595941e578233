//! Deterministic CSV/JSON emission and the run manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutputDir {
    dir: PathBuf,
    files: Vec<(String, String)>,
    figures: Vec<(String, String)>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir { dir: dir.to_path_buf(), files: Vec::new(), figures: Vec::new() })
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        headers: &[&str],
        rows: impl Iterator<Item = Vec<f64>>,
    ) -> anyhow::Result<()> {
        let mut text = String::new();
        text.push_str(&headers.join(","));
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.files.push((name.to_string(), hex));
        Ok(())
    }

    /// Tag an output file with the figure it reproduces.
    pub fn tag_figure(&mut self, name: &str, figure: &str) {
        self.figures.push((name.to_string(), figure.to_string()));
    }

    pub fn write_manifest(&mut self, command: &str) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct Entry {
            name: String,
            sha256: String,
        }
        #[derive(Serialize)]
        struct FigureTag {
            file: String,
            figure: String,
        }
        #[derive(Serialize)]
        struct Manifest {
            command: String,
            files: Vec<Entry>,
            figures: Vec<FigureTag>,
        }
        let mut files: Vec<Entry> = self
            .files
            .iter()
            .map(|(name, sha256)| Entry { name: name.clone(), sha256: sha256.clone() })
            .collect();
        files.sort_by(|a, b| a.name.cmp(&b.name));
        let manifest = Manifest {
            command: command.to_string(),
            files,
            figures: self
                .figures
                .iter()
                .map(|(file, figure)| FigureTag { file: file.clone(), figure: figure.clone() })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}
