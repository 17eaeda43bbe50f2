use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use semcode::dataio::{write_sidecar, ArtifactMeta};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, ErrorKind};

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(ErrorKind::Io, format!("io error on {}: {e}", path.display()))
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_error(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes)
        .map_err(|_| CliError::new(ErrorKind::Parse, format!("{} is not valid UTF-8", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| {
        CliError::new(
            ErrorKind::Parse,
            format!("parse error in {} at line {}: {e}", path.display(), e.line()),
        )
    })
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

pub fn float(v: f64) -> String {
    format!("{v}")
}

/// Rows rendered as CSV with `\n` line endings.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Collects the inputs of a command so every artifact it writes records
/// their digests next to the resolved configuration.
pub struct Artifacts<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    inputs: Vec<(String, Vec<u8>)>,
    pub written: Vec<PathBuf>,
}

impl<'a> Artifacts<'a> {
    pub fn new(cfg: &'a RunConfig, seed: u64) -> Self {
        Self {
            cfg,
            seed,
            inputs: Vec::new(),
            written: Vec::new(),
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn input(&mut self, role: &str, bytes: &[u8]) {
        self.inputs.push((role.to_string(), bytes.to_vec()));
    }

    pub fn write(&mut self, path: &Path, artifact: &str, bytes: &[u8]) -> CliResult<()> {
        std::fs::write(path, bytes).map_err(|e| io_error(path, e))?;
        let mut meta = ArtifactMeta::new(artifact, self.seed, self.cfg);
        for (role, data) in &self.inputs {
            meta = meta.with_input(role.clone(), data);
        }
        write_sidecar(path, &meta)?;
        log::info!("wrote {}", path.display());
        self.written.push(path.to_path_buf());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let b = csv_bytes(&["a", "b"], &[vec!["1".into(), float(0.5)], vec!["x,y".into(), float(1e-7)]]);
        assert_eq!(String::from_utf8(b).unwrap(), "a,b\n1,0.5\n\"x,y\",0.0000001\n");
    }
}
