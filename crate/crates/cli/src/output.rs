//! Artifact writer. Every file starts with the version string and the echoed
//! configuration: `#` comment lines for CSV, top-level keys for JSON.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mu2_core::field::Field;
use mu2_core::mesh::Mesh;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Artifacts {
    dir: PathBuf,
    preamble: Vec<String>,
    config: serde_json::Value,
}

impl Artifacts {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out)?;
        Ok(Self { dir: cfg.out.clone(), preamble: cfg.preamble(), config: serde_json::to_value(cfg).expect("config serializes") })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn open(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn header(&self, out: &mut impl Write) -> Result<(), CliError> {
        for line in &self.preamble {
            writeln!(out, "# {line}")?;
        }
        Ok(())
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut out = self.open(name)?;
        self.header(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn field(&self, name: &str, mesh: &Mesh, f: &Field) -> Result<(), CliError> {
        let out = self.open(name)?;
        f.write_csv(mesh, &self.preamble, out)?;
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, data: &T) -> Result<(), CliError> {
        let doc = json!({ "version": mu2_core::VERSION, "config": self.config, "data": data });
        let mut out = self.open(name)?;
        serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Numerical(format!("JSON: {e}")))?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}
