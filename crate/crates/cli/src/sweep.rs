//! Field sweeps with a hashed manifest, and their resumption.
//!
//! A sweep runs `sweep.command` once per field of `response.eps_grid`, each
//! in its own sub-directory with its own derived seed. The manifest records
//! every cell's seed, size and, once complete, the SHA-256 of each file. It
//! also carries a hash of its own content, so a hand-edited or truncated
//! manifest is detected.

use crate::commands::{self, SWEEPABLE};
use crate::config::{ForceKind, RunConfig};
use crate::output::{file_hash, sha256_hex, write_atomic, BUILD_ID};
use crate::Failure;
use lorentz_core::rng::derive_seed;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "lorentz-sweep/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub epsilon: f64,
    pub dir: String,
    pub seed: u64,
    pub n_collisions: u64,
    pub complete: bool,
    /// File name to SHA-256, filled in when the cell completes.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub build: String,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub cells: Vec<Cell>,
    pub manifest_hash: String,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(
        serde_json::to_string(&cfg.echo())
            .expect("config serializes")
            .as_bytes(),
    )
}

impl Manifest {
    fn content_hash(&self) -> String {
        let body = Manifest {
            manifest_hash: String::new(),
            ..self.clone()
        };
        sha256_hex(
            serde_json::to_string(&body)
                .expect("manifest serializes")
                .as_bytes(),
        )
    }

    fn save(&mut self, dir: &Path) -> anyhow::Result<()> {
        self.manifest_hash = self.content_hash();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&dir.join(MANIFEST), text.as_bytes())
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path)
            .map_err(|e| Failure::Corrupt(format!("cannot read {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Failure::Corrupt(format!("{} does not parse: {e}", path.display())))?;
        if m.format != FORMAT {
            return Err(Failure::Corrupt(format!("unknown manifest format `{}`", m.format)).into());
        }
        if m.content_hash() != m.manifest_hash {
            return Err(
                Failure::Corrupt(format!("{}: content hash mismatch", path.display())).into(),
            );
        }
        if m.config_hash != config_hash(&m.config) {
            return Err(
                Failure::Corrupt(format!("{}: config hash mismatch", path.display())).into(),
            );
        }
        Ok(m)
    }

    /// Config of one cell: the sweep config at that field and derived seed.
    pub fn cell_config(&self, cell: &Cell) -> RunConfig {
        let mut c = self.config.clone();
        c.force.epsilon = cell.epsilon;
        c.seed = cell.seed;
        c
    }
}

fn validate(cfg: &RunConfig) -> anyhow::Result<()> {
    let cmd = cfg.sweep.command.as_str();
    if !SWEEPABLE.contains(&cmd) {
        return Err(Failure::Validation(format!(
            "sweep.command `{cmd}` cannot be swept (one of: {})",
            SWEEPABLE.join(", ")
        ))
        .into());
    }
    let grid = &cfg.response.eps_grid;
    if grid.is_empty() || grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(
            Failure::Validation("response.eps_grid needs finite fields >= 0".into()).into(),
        );
    }
    let mut names: Vec<String> = grid.iter().map(|e| format!("{e}")).collect();
    names.sort();
    names.dedup();
    if names.len() != grid.len() {
        return Err(Failure::Validation("response.eps_grid has repeated fields".into()).into());
    }
    if cfg.force.kind == ForceKind::Zero && grid.iter().any(|e| *e != 0.0) {
        return Err(Failure::Validation(
            "force.kind = zero cannot be swept over nonzero fields".into(),
        )
        .into());
    }
    Ok(())
}

/// Starts a sweep in `dir`, running at most `max_cells` cells now.
pub fn sweep(cfg: &RunConfig, dir: &Path, max_cells: Option<usize>) -> anyhow::Result<Vec<String>> {
    validate(cfg)?;
    if dir.join(MANIFEST).exists() {
        return Err(Failure::Validation(format!(
            "{} already holds a sweep; use `resume`",
            dir.display()
        ))
        .into());
    }
    fs::create_dir_all(dir)?;
    let cells = cfg
        .response
        .eps_grid
        .iter()
        .enumerate()
        .map(|(i, &epsilon)| Cell {
            epsilon,
            dir: format!("eps_{epsilon}"),
            seed: derive_seed(cfg.seed, i as u64),
            n_collisions: cfg.run.n_collisions,
            complete: false,
            files: BTreeMap::new(),
        })
        .collect();
    let mut m = Manifest {
        format: FORMAT.into(),
        build: BUILD_ID.into(),
        command: cfg.sweep.command.clone(),
        config: cfg.clone(),
        config_hash: config_hash(cfg),
        cells,
        manifest_hash: String::new(),
    };
    m.save(dir)?;
    run_cells(&mut m, dir, max_cells)
}

/// Continues the sweep in `dir`. With `expected`, refuses to run unless it
/// is the config the sweep was started with.
pub fn resume(
    dir: &Path,
    expected: Option<&RunConfig>,
    max_cells: Option<usize>,
) -> anyhow::Result<Vec<String>> {
    let mut m = Manifest::load(dir)?;
    if let Some(cfg) = expected {
        if config_hash(cfg) != m.config_hash {
            return Err(Failure::Validation(format!(
                "config mismatch: the sweep in {} was started with a different config",
                dir.display()
            ))
            .into());
        }
    }
    for cell in m.cells.iter().filter(|c| c.complete) {
        for (name, hash) in &cell.files {
            let path = dir.join(&cell.dir).join(name);
            let actual = file_hash(&path).map_err(|e| Failure::Corrupt(format!("{e:#}")))?;
            if &actual != hash {
                return Err(Failure::Corrupt(format!(
                    "{} changed since it was recorded",
                    path.display()
                ))
                .into());
            }
        }
    }
    run_cells(&mut m, dir, max_cells)
}

fn run_cells(
    m: &mut Manifest,
    dir: &Path,
    max_cells: Option<usize>,
) -> anyhow::Result<Vec<String>> {
    let mut ran = Vec::new();
    for i in 0..m.cells.len() {
        if m.cells[i].complete {
            continue;
        }
        if max_cells.is_some_and(|n| ran.len() >= n) {
            break;
        }
        let cell_cfg = m.cell_config(&m.cells[i]);
        let cell_dir = dir.join(&m.cells[i].dir);
        let written = commands::run(&m.command, &cell_cfg, &cell_dir)?;
        let mut files = BTreeMap::new();
        for p in written {
            let name = p
                .file_name()
                .expect("artifact has a name")
                .to_string_lossy()
                .into_owned();
            files.insert(name, file_hash(&p)?);
        }
        m.cells[i].files = files;
        m.cells[i].complete = true;
        m.save(dir)?;
        ran.push(m.cells[i].dir.clone());
    }
    Ok(ran)
}
