//! Artifact writing. Every CSV starts with `#` metadata lines (build id,
//! command, seed, workers, flagged samples, compact config echo) followed by
//! the column header; every JSON file has the same fields at the top level.

use crate::config::RunConfig;
use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

pub const BUILD_ID: &str = concat!("lorentz-", env!("CARGO_PKG_VERSION"));

/// Flagged samples out of a total, as carried by every artifact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flagged {
    pub count: u64,
    pub total: u64,
}

impl Flagged {
    pub fn from_fraction(fraction: f64, total: u64) -> Self {
        Self {
            count: (fraction * total as f64).round() as u64,
            total,
        }
    }

    pub fn none(total: u64) -> Self {
        Self { count: 0, total }
    }
}

/// Writes artifacts of one command into one directory.
pub struct Writer<'a> {
    pub dir: PathBuf,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub written: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    build: &'static str,
    command: &'a str,
    seed: u64,
    workers: usize,
    flagged: Flagged,
    config: Value,
    result: &'a T,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &Path, command: &'a str, config: &'a RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config,
            written: Vec::new(),
        })
    }

    pub fn json<T: Serialize>(
        &mut self,
        name: &str,
        flagged: Flagged,
        result: &T,
    ) -> anyhow::Result<()> {
        let env = Envelope {
            build: BUILD_ID,
            command: self.command,
            seed: self.config.seed,
            workers: self.config.workers,
            flagged,
            config: self.config.echo(),
            result,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    pub fn csv(
        &mut self,
        name: &str,
        flagged: Flagged,
        header: &[&str],
        rows: &[Vec<f64>],
    ) -> anyhow::Result<()> {
        let mut out = Vec::new();
        for line in [
            format!("# build: {BUILD_ID}"),
            format!("# command: {}", self.command),
            format!("# seed: {}", self.config.seed),
            format!("# workers: {}", self.config.workers),
            format!("# flagged: {} of {}", flagged.count, flagged.total),
            format!("# config: {}", serde_json::to_string(&self.config.echo())?),
        ] {
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        self.put(name, &out)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// Writes through a temporary file and a rename, so readers never see a
/// partial artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}
