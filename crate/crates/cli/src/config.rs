//! Run configuration: documented defaults, JSON config files, dotted-path
//! overrides and the command-line flags, merged in that order.

use std::path::{Path, PathBuf};

use mu2_core::bubbles::{default_epsilon_grid, fit_epsilon_grid, BubbleCenter};
use mu2_core::exec::Execution;
use mu2_core::geometry::GeometrySpec;
use mu2_core::inequalities::{BatteryConfig, SUITES};
use mu2_core::mesh::MeshSpec;
use mu2_core::optimize::{Method, OptimizerParams, Start};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Spectrum,
    Mu2,
    Bubbles,
    Verify,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Mu2 => "mu2",
            CommandKind::Bubbles => "bubbles",
            CommandKind::Verify => "verify",
        }
    }
}

/// Weight used by `spectrum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum USpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// A field CSV written on the configured mesh.
    File { path: PathBuf },
    Bubble { epsilon: f64, delta: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleConfig {
    pub delta: f64,
    pub center: BubbleCenter,
    /// exponent of the `∫ v_ε^p` column of the sweep
    pub p: f64,
    /// exponents for the norm-scaling fits; defaults to `1`, `n/(n−2)`, `N−1`
    pub fit_exponents: Option<Vec<f64>>,
    pub slope_tol: f64,
}

impl Default for BubbleConfig {
    fn default() -> Self {
        Self { delta: 0.5, center: BubbleCenter::Start, p: 1.0, fit_exponents: None, slope_tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub geometry: Option<GeometrySpec>,
    pub mesh: MeshSpec,
    /// element counts for the `spectrum` convergence table
    pub mesh_sizes: Vec<usize>,
    pub u: USpec,
    pub k: usize,
    pub optimizer: OptimizerParams,
    pub method: Method,
    /// multistart set; defaults to constant, two-bubble and random starts
    pub starts: Option<Vec<Start>>,
    pub bubbles: BubbleConfig,
    pub epsilon_grid: Vec<f64>,
    pub fit_grid: Vec<f64>,
    pub suites: Vec<String>,
    pub battery: BatteryConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            geometry: None,
            mesh: MeshSpec::PoleGraded { elements: 200, core: 3e-3 },
            mesh_sizes: vec![100, 200, 400],
            u: USpec::Constant { value: 1.0 },
            k: 2,
            optimizer: OptimizerParams::default(),
            method: Method::FixedPoint,
            starts: None,
            bubbles: BubbleConfig::default(),
            epsilon_grid: default_epsilon_grid(),
            fit_grid: fit_epsilon_grid(),
            suites: SUITES.iter().map(|s| s.to_string()).collect(),
            battery: BatteryConfig::default(),
            seed: 42,
            out: PathBuf::from("out"),
            execution: Execution::Parallel,
        }
    }
}

impl RunConfig {
    pub fn for_command(cmd: CommandKind) -> Self {
        let mut cfg = Self { command: cmd.name().to_string(), ..Self::default() };
        match cmd {
            CommandKind::Spectrum => cfg.mesh = MeshSpec::Uniform { elements: 400 },
            CommandKind::Mu2 => {}
            CommandKind::Bubbles => cfg.mesh = MeshSpec::PoleGraded { elements: 800, core: 3e-4 },
            CommandKind::Verify => {
                cfg.mesh = MeshSpec::PoleGraded { elements: 400, core: 3e-3 };
                cfg.geometry = Some(GeometrySpec::Sphere { n: 3, radius: 1.0 });
            }
        }
        cfg
    }

    pub fn geometry(&self) -> Result<&GeometrySpec, CliError> {
        self.geometry
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing required field `geometry` for `{}`", self.command)))
    }

    pub fn preamble(&self) -> Vec<String> {
        vec![
            mu2_core::VERSION.to_string(),
            format!("config: {}", serde_json::to_string(self).expect("config serializes")),
        ]
    }
}

pub struct Flags<'a> {
    pub config: Option<&'a Path>,
    pub overrides: &'a [String],
    pub seed: Option<u64>,
    pub mesh: Option<usize>,
    pub out: Option<&'a Path>,
}

pub fn load(cmd: CommandKind, flags: &Flags) -> Result<RunConfig, CliError> {
    let mut value = serde_json::to_value(RunConfig::for_command(cmd)).expect("defaults serialize");
    if let Some(path) = flags.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
        merge(&mut value, file);
    }
    for item in flags.overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{item}` is not of the form key.path=value")))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, path, v)?;
    }
    if let Some(seed) = flags.seed {
        value["seed"] = seed.into();
    }
    if let Some(m) = flags.mesh {
        value["mesh"]["elements"] = m.into();
    }
    if let Some(out) = flags.out {
        value["out"] = out.to_string_lossy().into_owned().into();
    }
    value["command"] = cmd.name().into();

    let mut cfg: RunConfig =
        serde_json::from_value(value.clone()).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    let canonical = serde_json::to_value(&cfg).expect("config serializes");
    if let Some(key) = unknown_key(&value, &canonical, "") {
        return Err(CliError::Config(format!("unknown configuration field `{key}`")));
    }
    cfg.battery.seed = cfg.seed;
    Ok(cfg)
}

const TAGS: [&str; 4] = ["kind", "grading", "type", "at"];

/// Recursive object merge; a tagged object whose tag changes is replaced
/// wholesale so stale variant fields do not leak through.
fn merge(base: &mut Value, incoming: Value) {
    match (base, incoming) {
        (Value::Object(b), Value::Object(inc)) => {
            let retagged = TAGS.iter().any(|t| matches!((b.get(*t), inc.get(*t)), (Some(x), Some(y)) if x != y));
            if retagged {
                *b = inc;
                return;
            }
            for (k, v) in inc {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut cur = root;
    for key in &keys[..keys.len() - 1] {
        cur = match cur {
            Value::Array(items) => {
                let i: usize = key.parse().map_err(|_| CliError::Config(format!("`{key}` in `{path}` is not an index")))?;
                items.get_mut(i).ok_or_else(|| CliError::Config(format!("index {i} out of range in `{path}`")))?
            }
            other => {
                if other.is_null() {
                    *other = Value::Object(Map::new());
                }
                other
                    .as_object_mut()
                    .ok_or_else(|| CliError::Config(format!("`{path}` descends into a non-object")))?
                    .entry(key.to_string())
                    .or_insert(Value::Null)
            }
        };
    }
    let last = keys[keys.len() - 1];
    match cur {
        Value::Array(items) => {
            let i: usize = last.parse().map_err(|_| CliError::Config(format!("`{last}` in `{path}` is not an index")))?;
            *items.get_mut(i).ok_or_else(|| CliError::Config(format!("index {i} out of range in `{path}`")))? = v;
        }
        other => {
            if other.is_null() {
                *other = Value::Object(Map::new());
            }
            let obj = other
                .as_object_mut()
                .ok_or_else(|| CliError::Config(format!("`{path}` descends into a non-object")))?;
            if let Some(slot) = obj.get_mut(last) {
                merge(slot, v);
            } else {
                obj.insert(last.to_string(), v);
            }
        }
    }
    Ok(())
}

/// First key present in `input` that did not survive the round trip.
fn unknown_key(input: &Value, canonical: &Value, prefix: &str) -> Option<String> {
    match (input, canonical) {
        (Value::Object(a), Value::Object(b)) => a.iter().find_map(|(k, v)| {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            match b.get(k) {
                Some(w) => unknown_key(v, w, &path),
                None => Some(path),
            }
        }),
        (Value::Array(a), Value::Array(b)) => {
            a.iter().zip(b).enumerate().find_map(|(i, (v, w))| unknown_key(v, w, &format!("{prefix}.{i}")))
        }
        _ => None,
    }
}
