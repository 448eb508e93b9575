//! CSV grids, JSON reports and the checksum manifest.
//!
//! Grid files share one schema, `theta,phi,value_re,value_im,channel`, with
//! one row per node in θ-major order and one file per quantity. Floats are
//! written in shortest round-trip form, so reruns are byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chiral_berry::{Complex64, ComplexMat3, ComplexVec3, SphereGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
struct GridRow<'a> {
    theta: f64,
    phi: f64,
    value_re: f64,
    value_im: f64,
    channel: &'a str,
}

#[derive(Debug, Serialize)]
struct VectorRow<'a> {
    component: &'a str,
    value_re: f64,
    value_im: f64,
    channel: &'a str,
}

#[derive(Debug, Serialize)]
struct TensorRow<'a> {
    row: &'a str,
    col: &'a str,
    value_re: f64,
    value_im: f64,
    channel: &'a str,
}

const AXES: [&str; 3] = ["x", "y", "z"];

/// Files written during one command, relative to the output directory.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(OutputSet { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn writer(&mut self, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
        self.files.push(name.to_string());
        csv::Writer::from_path(self.dir.join(name)).map_err(csv_error)
    }

    pub fn grid(&mut self, name: &str, grid: &SphereGrid, values: &[Complex64], channel: &str) -> Result<(), CliError> {
        let mut w = self.writer(name)?;
        for (p, v) in grid.points().zip(values) {
            w.serialize(GridRow { theta: p.theta, phi: p.phi, value_re: v.re, value_im: v.im, channel })
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `component,value_re,value_im,channel` for named vectors.
    pub fn vectors(&mut self, name: &str, vectors: &[(&str, ComplexVec3)]) -> Result<(), CliError> {
        let mut w = self.writer(name)?;
        for (channel, v) in vectors {
            for (axis, c) in AXES.iter().zip(v.0) {
                w.serialize(VectorRow { component: axis, value_re: c.re, value_im: c.im, channel })
                    .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `row,col,value_re,value_im,channel` for named 3×3 tensors.
    pub fn tensors(&mut self, name: &str, tensors: &[(&str, ComplexMat3)]) -> Result<(), CliError> {
        let mut w = self.writer(name)?;
        for (channel, t) in tensors {
            for (i, row) in AXES.iter().enumerate() {
                for (j, col) in AXES.iter().enumerate() {
                    let c = t.0[i][j];
                    w.serialize(TensorRow { row, col, value_re: c.re, value_im: c.im, channel })
                        .map_err(csv_error)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Arbitrary serializable rows with a header from the first record.
    pub fn rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = self.writer(name)?;
        for r in rows {
            w.serialize(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.files.push(name.to_string());
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }

    /// Writes `manifest.json` listing every file with its SHA-256.
    pub fn finish(self, command: &str, config_hash: &str, seed: u64) -> Result<ResultManifest, CliError> {
        let mut entries = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name))?;
            entries.push(FileEntry { path: name.clone(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        let run_id = sha256_hex(format!("{command}\n{config_hash}\n{seed}").as_bytes())[..16].to_string();
        let manifest = ResultManifest {
            run_id,
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            files: entries,
        };
        let mut f = fs::File::create(self.dir.join(MANIFEST))?;
        serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| CliError::Config(e.to_string()))?;
        f.write_all(b"\n")?;
        Ok(manifest)
    }
}

pub const MANIFEST: &str = "manifest.json";

fn csv_error(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::Io(io),
        other => CliError::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Index of one run's outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultManifest {
    /// Derived from command, config hash and seed; equal across reruns.
    pub run_id: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
    pub files: Vec<FileEntry>,
}

impl ResultManifest {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(dir.join(MANIFEST))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid manifest: {e}")))
    }

    /// Paths whose file is missing or whose checksum differs.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| fs::read(dir.join(&f.path)).map(|b| sha256_hex(&b) != f.sha256).unwrap_or(true))
            .map(|f| f.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_csv_schema_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SphereGrid::uniform(2, 3, 1e-3).unwrap();
        let values: Vec<Complex64> = (0..6).map(|k| Complex64::new(k as f64 * 0.1, -1.0 / 3.0)).collect();
        let mut out = OutputSet::create(dir.path()).unwrap();
        out.grid("g.csv", &grid, &values, "total").unwrap();
        out.vectors("v.csv", &[("antisym", ComplexVec3::from_real([1.0, 2.0, 3.0]))]).unwrap();
        let manifest = out.finish("curvature", "abc", 5).unwrap();

        let text = fs::read_to_string(dir.path().join("g.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("theta,phi,value_re,value_im,channel"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), grid.point(0).theta);
        assert_eq!(first[3].parse::<f64>().unwrap(), -1.0 / 3.0);
        assert_eq!(text.lines().count(), 7);

        let loaded = ResultManifest::load(dir.path()).unwrap();
        assert_eq!(loaded, manifest);
        assert_eq!(loaded.files.len(), 2);
        assert!(loaded.mismatches(dir.path()).is_empty());
        fs::write(dir.path().join("v.csv"), "tampered").unwrap();
        assert_eq!(loaded.mismatches(dir.path()), vec!["v.csv".to_string()]);
    }
}
