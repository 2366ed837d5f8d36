//! Input files and report envelopes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use opspace::{opspace::load_space_with, CMat64, Error, SearchConfig, Space, C64};
use serde::{Deserialize, Serialize};

use crate::Format;

/// Dense matrix file: row-major `[re, im]` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

/// What was run, with which inputs and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SearchConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// JSON document written by every command. Everything except
/// `generated_at` is a function of the manifest and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<R> {
    pub manifest: RunManifest,
    pub report: R,
    pub generated_at: u64,
}

impl<R: Serialize> Envelope<R> {
    pub fn new(manifest: RunManifest, report: R) -> Self {
        let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self { manifest, report, generated_at }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    serde_json::from_str(&read(path)?).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn load_space_file(path: &Path, rank_tol: f64) -> Result<Space, Error> {
    load_space_with(&read(path)?, rank_tol).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn cz(z: &[f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

pub fn load_matrix(path: &Path) -> Result<CMat64, Error> {
    let m: MatrixFile = parse(path)?;
    CMat64::from_row_major(m.rows, m.cols, m.entries.iter().map(cz).collect())
}

pub fn load_map(path: &Path) -> Result<DMatrix<C64>, Error> {
    let m: MatrixFile = parse(path)?;
    if m.entries.len() != m.rows * m.cols {
        return Err(Error::Shape(format!("{}: expected {} entries", path.display(), m.rows * m.cols)));
    }
    Ok(DMatrix::from_row_iterator(m.rows, m.cols, m.entries.iter().map(cz)))
}

pub fn load_tensor(path: &Path) -> Result<Vec<Vec<Vec<C64>>>, Error> {
    let t: Vec<Vec<Vec<[f64; 2]>>> = parse(path)?;
    Ok(t.iter().map(|r| r.iter().map(|c| c.iter().map(cz).collect()).collect()).collect())
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(format!("{}: {e}", dir.display())))?;
            }
            fs::write(p, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
