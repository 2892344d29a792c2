//! Run configuration: one JSON tree, every field defaulted.

use anyhow::{anyhow, bail, Context};
use lorentz_core::dynamics::{Billiard, ForceModel};
use lorentz_core::geometry::{Disc, Table};
use lorentz_core::measure::{MapObservable, RunSpec};
use lorentz_core::response::{family_member, JacobianConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::f64::consts::PI;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub table: TableConfig,
    pub force: ForceConfig,
    pub integrator: IntegratorConfig,
    pub run: RunSizes,
    pub histogram: HistogramConfig,
    pub response: ResponseConfig,
    pub horizon: HorizonConfig,
    pub sweep: SweepConfig,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            table: TableConfig::default(),
            force: ForceConfig::default(),
            integrator: IntegratorConfig::default(),
            run: RunSizes::default(),
            histogram: HistogramConfig::default(),
            response: ResponseConfig::default(),
            horizon: HorizonConfig::default(),
            sweep: SweepConfig::default(),
            seed: 0,
            workers: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub discs: Vec<DiscConfig>,
    pub horizon_bound: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            discs: vec![
                DiscConfig {
                    x: 0.0,
                    y: 0.0,
                    r: 0.4,
                },
                DiscConfig {
                    x: 0.5,
                    y: 0.5,
                    r: 0.2,
                },
            ],
            horizon_bound: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    Zero,
    Thermostat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceConfig {
    pub kind: ForceKind,
    pub epsilon: f64,
    pub direction_deg: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        Self {
            kind: ForceKind::Thermostat,
            epsilon: 0.01,
            direction_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSizes {
    pub n_collisions: u64,
    pub burn_in: u64,
    /// When set, overrides `n_collisions` for the flow-time estimators
    /// (theta/spatial density, velocity field, current).
    pub flow_time: Option<f64>,
    pub n_batches: u64,
}

impl Default for RunSizes {
    fn default() -> Self {
        Self {
            n_collisions: 1_000_000,
            burn_in: 1_000,
            flow_time: None,
            n_batches: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramConfig {
    pub bins: usize,
    pub theta_bins: usize,
    pub grid: usize,
    /// Velocity-field cells with fewer time samples are reported as missing.
    pub min_samples: u64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            bins: 50,
            theta_bins: 64,
            grid: 50,
            min_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseConfig {
    pub eps_grid: Vec<f64>,
    pub n_samples: u64,
    pub k_max: usize,
    pub delta_fd: f64,
    pub grazing_cos: f64,
    pub richardson_rel: f64,
    /// Observables of the Kawasaki check.
    pub observables: Vec<String>,
    /// Observable of the linear-response fit.
    pub observable: String,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        let j = JacobianConfig::default();
        Self {
            eps_grid: vec![0.002, 0.005, 0.01, 0.02],
            n_samples: 100_000,
            k_max: 30,
            delta_fd: j.delta_fd,
            grazing_cos: j.grazing_cos,
            richardson_rel: j.richardson_rel,
            observables: vec!["cos_phi".into(), "dx".into(), "sin_phi".into()],
            observable: "dx".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonConfig {
    pub n_origins: usize,
    pub n_directions: usize,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            n_origins: 64,
            n_directions: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Command run in every cell of the sweep.
    pub command: String,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            command: "current".into(),
        }
    }
}

/// Field descriptions for `config-schema`.
const DOCS: &[(&str, &str)] = &[
    (
        "table.discs",
        "scatterers in the unit cell: list of {x, y, r}",
    ),
    ("table.horizon_bound", "upper bound L on free flight length"),
    (
        "force.kind",
        "\"zero\" (free flight) or \"thermostat\" (Gaussian isokinetic thermostat)",
    ),
    ("force.epsilon", "field strength ε >= 0"),
    (
        "force.direction_deg",
        "field direction in degrees, counterclockwise from +x",
    ),
    (
        "integrator.tol",
        "local error tolerance of the curved-flight integrator",
    ),
    (
        "run.n_collisions",
        "collisions after burn-in, summed over workers",
    ),
    ("run.burn_in", "collisions discarded by each worker"),
    (
        "run.flow_time",
        "if set, total flow time for time-sampled estimators (replaces n_collisions)",
    ),
    ("run.n_batches", "batches for batch-means error bars"),
    ("histogram.bins", "bins of the phi and r densities"),
    ("histogram.theta_bins", "bins of the theta density"),
    ("histogram.grid", "cells per side of spatial grids"),
    (
        "histogram.min_samples",
        "velocity-field cells with fewer time samples are reported as NaN",
    ),
    (
        "response.eps_grid",
        "fields of linear-response, conductivity and sweep",
    ),
    (
        "response.n_samples",
        "equilibrium samples of the Kawasaki series",
    ),
    ("response.k_max", "largest series index"),
    (
        "response.delta_fd",
        "finite-difference step of the Jacobian",
    ),
    (
        "response.grazing_cos",
        "samples with cos(phi) below this are flagged",
    ),
    (
        "response.richardson_rel",
        "allowed relative change of det DF when halving delta_fd",
    ),
    (
        "response.observables",
        "observables of the kawasaki command",
    ),
    (
        "response.observable",
        "observable of the linear-response fit",
    ),
    ("horizon.n_origins", "probe origins of check-horizon"),
    ("horizon.n_directions", "probe directions per origin"),
    (
        "sweep.command",
        "command run for each field of response.eps_grid",
    ),
    ("seed", "64-bit master seed"),
    (
        "workers",
        "worker threads; results depend on (seed, workers)",
    ),
    (
        "output_dir",
        "directory for artifacts (overridden by --out)",
    ),
];

/// Flattened list of fields with type, default and description.
pub fn schema() -> Value {
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
    let mut fields = Vec::new();
    for (path, doc) in DOCS {
        let default = lookup(&defaults, path).cloned().unwrap_or(Value::Null);
        let ty = match &default {
            Value::Null => "number or null",
            Value::Bool(_) => "boolean",
            Value::Number(n) if n.is_u64() => "integer",
            Value::Number(_) => "number",
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        fields.push(
            serde_json::json!({ "path": path, "type": ty, "default": default, "description": doc }),
        );
    }
    serde_json::json!({ "defaults": defaults, "fields": fields })
}

fn lookup<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |v, k| v.get(k))
}

/// Sets `path` (dotted) to `raw`, parsed as JSON when possible and as a
/// string otherwise.
pub fn apply_override(tree: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = tree;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| {
            anyhow!(
                "override `{path}`: `{}` is not an object",
                keys[..i].join(".")
            )
        })?;
        if i + 1 == keys.len() {
            if !obj.contains_key(*k) {
                bail!("override `{path}`: unknown key `{k}`");
            }
            obj.insert((*k).to_string(), value);
            return Ok(());
        }
        node = obj
            .get_mut(*k)
            .ok_or_else(|| anyhow!("override `{path}`: unknown key `{k}`"))?;
    }
    bail!("empty override key")
}

/// `base` with overrides applied in order, validated.
pub fn with_overrides(base: &RunConfig, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut tree = serde_json::to_value(base)?;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(tree).context("config after overrides")?;
    cfg.validate()?;
    Ok(cfg)
}

/// Defaults listing for `--help`.
pub fn help_text() -> String {
    let schema = schema();
    let mut out = String::from("Config fields (dotted path = default):\n");
    for f in schema["fields"].as_array().expect("fields") {
        out.push_str(&format!(
            "  {} = {}\n      {}\n",
            f["path"].as_str().unwrap_or_default(),
            f["default"],
            f["description"].as_str().unwrap_or_default()
        ));
    }
    out.push_str("\nExit status: 0 ok, 2 invalid input, 3 dynamics failure or corrupt sweep manifest, 4 horizon violation, 64 unknown command.\n");
    out
}

impl RunConfig {
    /// Reads an optional config file, then applies overrides in order.
    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> anyhow::Result<Self> {
        let base: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        with_overrides(&base, overrides)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.workers == 0 {
            bail!("workers must be >= 1");
        }
        if !(self.force.epsilon >= 0.0 && self.force.epsilon.is_finite()) {
            bail!("force.epsilon must be finite and >= 0");
        }
        if self.force.kind == ForceKind::Zero && self.force.epsilon != 0.0 {
            bail!("force.kind = zero takes no epsilon");
        }
        self.table()?;
        self.jacobian().validate()?;
        self.map_observables()?;
        MapObservable::parse(&self.response.observable)?;
        Ok(())
    }

    pub fn table(&self) -> anyhow::Result<Table> {
        let discs = self
            .table
            .discs
            .iter()
            .map(|d| Disc::new(d.x, d.y, d.r))
            .collect();
        Ok(Table::new(discs, self.table.horizon_bound)?)
    }

    /// Family model at the configured field direction, any strength.
    fn family(&self) -> ForceModel {
        match self.force.kind {
            ForceKind::Zero => ForceModel::Zero,
            ForceKind::Thermostat => ForceModel::Thermostat {
                epsilon: self.force.epsilon,
                direction: self.force.direction_deg * PI / 180.0,
            },
        }
    }

    /// Billiard of the model family; its own member is at `force.epsilon`.
    pub fn family_billiard(&self) -> anyhow::Result<Billiard> {
        Ok(Billiard::new(
            self.table()?,
            self.family(),
            self.integrator.tol,
        )?)
    }

    /// The dynamics actually run: exact straight flights at zero field.
    pub fn billiard(&self) -> anyhow::Result<Billiard> {
        let f = self.family_billiard()?;
        Ok(family_member(&f, self.force.epsilon))
    }

    pub fn run_spec(&self) -> RunSpec {
        RunSpec {
            n_collisions: self.run.n_collisions,
            burn_in: self.run.burn_in,
            seed: self.seed,
            workers: self.workers,
            n_batches: self.run.n_batches,
        }
    }

    /// Run sizes for time-sampled estimators: `flow_time` converted with the
    /// equilibrium mean free time `π|𝒟|/|∂𝒟|` when given.
    pub fn flow_run_spec(&self) -> anyhow::Result<RunSpec> {
        let mut spec = self.run_spec();
        if let Some(t) = self.run.flow_time {
            if !(t > 0.0 && t.is_finite()) {
                bail!("run.flow_time must be positive");
            }
            let table = self.table()?;
            let tau = PI * table.domain_area() / table.boundary_length();
            spec.n_collisions = (t / tau).ceil() as u64;
        }
        Ok(spec)
    }

    pub fn jacobian(&self) -> JacobianConfig {
        JacobianConfig {
            delta_fd: self.response.delta_fd,
            grazing_cos: self.response.grazing_cos,
            richardson_rel: self.response.richardson_rel,
        }
    }

    pub fn map_observables(&self) -> anyhow::Result<Vec<MapObservable>> {
        self.response
            .observables
            .iter()
            .map(|n| Ok(MapObservable::parse(n)?))
            .collect()
    }

    /// Echo of the config as embedded in artifacts.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let c: RunConfig =
            serde_json::from_str(r#"{"force": {"epsilon": 0.02}, "seed": 5}"#).unwrap();
        assert_eq!(c.force.epsilon, 0.02);
        assert_eq!(c.force.kind, ForceKind::Thermostat);
        assert_eq!(c.seed, 5);
        assert_eq!(c.run, RunSizes::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"forse": {}}"#).is_err());
    }

    #[test]
    fn overrides() {
        let mut t = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut t, "force.epsilon=0").unwrap();
        apply_override(&mut t, "response.eps_grid=[0.01,0.02]").unwrap();
        apply_override(&mut t, "sweep.command=phi-density").unwrap();
        let c: RunConfig = serde_json::from_value(t.clone()).unwrap();
        assert_eq!(c.force.epsilon, 0.0);
        assert_eq!(c.response.eps_grid, vec![0.01, 0.02]);
        assert_eq!(c.sweep.command, "phi-density");
        assert!(apply_override(&mut t, "force.epsilon").is_err());
        assert!(apply_override(&mut t, "force.strength=1").is_err());
        assert!(apply_override(&mut t, "seed.x=1").is_err());
    }

    #[test]
    fn zero_field_runs_straight_flights() {
        let mut c = RunConfig::default();
        c.force.epsilon = 0.0;
        assert!(c.billiard().unwrap().model.is_free());
        assert!(c
            .family_billiard()
            .unwrap()
            .model
            .field_direction()
            .is_some());
    }

    #[test]
    fn flow_time_uses_the_mean_free_time() {
        let mut c = RunConfig::default();
        c.run.flow_time = Some(1000.0);
        let n = c.flow_run_spec().unwrap().n_collisions;
        // τ̄ = π·0.371681/(2π·0.6) ≈ 0.30973
        assert_eq!(n, (1000.0f64 / 0.309734).ceil() as u64);
    }
}
