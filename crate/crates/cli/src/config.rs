//! TOML scenario files and `key=value` overrides.

use lexdyn::control::{ControlOptions, ControllerKind, Formulation, Method, Model, TaskKind, TaskSpec};
use lexdyn::hlsp::{Relation, SolverOptions};
use lexdyn::robot_model::{Link, PlanarChain};
use lexdyn::sim::Scenario;
use nalgebra::{DVector, Vector2};
use serde::Deserialize;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub chain: Option<ChainConfig>,
    pub pointmass: Option<PointMassConfig>,
    #[serde(default)]
    pub tasks: Vec<TaskConfig>,
    pub run: RunConfig,
    pub solver: Option<SolverConfig>,
    pub control: Option<ControlConfig>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub lengths: Vec<f64>,
    pub masses: Vec<f64>,
    /// Point-mass position along each link; the tip when omitted.
    pub com_offsets: Option<Vec<f64>>,
    pub gravity: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PointMassConfig {
    pub mass: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Target {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub level: usize,
    pub kind: String,
    pub relation: Option<String>,
    pub augmentable: Option<bool>,
    pub joints: Option<Vec<usize>>,
    pub joint: Option<usize>,
    pub limit: Option<f64>,
    pub rho: Option<f64>,
    pub target: Option<Target>,
    pub kp: Option<f64>,
    pub kv: Option<f64>,
    pub controller: Option<String>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub gain: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dt: f64,
    pub duration: f64,
    pub formulation: String,
    pub method: String,
    pub mu: Option<f64>,
    /// Recorded only; every shipped run is deterministic.
    pub seed: Option<u64>,
    pub q0: Vec<f64>,
    pub qd0: Option<Vec<f64>>,
    /// Fill `solve_us`; off keeps logs byte-reproducible.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub rank_threshold: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub epsilon: Option<f64>,
    pub nu_factor: Option<f64>,
    pub forced_gn_cycles: Option<usize>,
}

/// Parses `text`, applies `overrides` in order and checks the result.
pub fn load(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let mut table: Table = toml::from_str(text)?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    Ok(ScenarioConfig::deserialize(Value::Table(table))?)
}

fn override_value(raw: &str) -> Value {
    // bare words such as GN are taken as strings
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// `section.key=value`, `tasks.<index>.key=value` or `section.key.<index>=value`.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), ConfigError> {
    let bad = |msg: &str| ConfigError::Override(spec.to_string(), msg.to_string());
    let (path, raw) = spec.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(bad("empty key"));
    }
    let value = override_value(raw.trim());
    if keys.len() == 1 {
        table.insert(keys[0].to_string(), value);
        return Ok(());
    }
    let mut slot = table.entry(keys[0].to_string()).or_insert_with(|| Value::Table(Table::new()));
    for (i, key) in keys.iter().enumerate().skip(1) {
        let last = i + 1 == keys.len();
        slot = match slot {
            Value::Table(t) if last => {
                t.insert(key.to_string(), value);
                return Ok(());
            }
            Value::Table(t) => t.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new())),
            Value::Array(a) => {
                let idx: usize = key.parse().map_err(|_| bad("array index expected"))?;
                let len = a.len();
                let item = a.get_mut(idx).ok_or_else(|| bad(&format!("index {idx} out of range ({len} entries)")))?;
                if last {
                    *item = value;
                    return Ok(());
                }
                item
            }
            _ => return Err(bad("path goes through a scalar")),
        };
    }
    unreachable!("the last key returns")
}

fn keyword(s: &str) -> String {
    s.to_ascii_lowercase().replace(['-', '_'], "")
}

fn parse_relation(s: &str) -> Result<Relation, ConfigError> {
    match keyword(s).as_str() {
        "equal" | "eq" => Ok(Relation::Equal),
        "upper" | "le" => Ok(Relation::Upper),
        "lower" | "ge" => Ok(Relation::Lower),
        _ => invalid(format!("unknown relation `{s}`")),
    }
}

pub fn parse_formulation(s: &str) -> Result<Formulation, ConfigError> {
    match keyword(s).as_str() {
        "acc" => Ok(Formulation::Acc),
        "vel" => Ok(Formulation::Vel),
        _ => invalid(format!("unknown formulation `{s}`")),
    }
}

pub fn parse_method(s: &str, mu: Option<f64>) -> Result<Method<f64>, ConfigError> {
    match keyword(s).as_str() {
        "gn" => Ok(Method::Gn),
        "newtonah" | "nah" => Ok(Method::NewtonAh),
        "lm" => match mu {
            Some(mu) if mu >= 0.0 && mu.is_finite() => Ok(Method::Lm(mu)),
            Some(mu) => invalid(format!("run.mu must be non-negative, got {mu}")),
            None => invalid("method lm needs run.mu"),
        },
        _ => invalid(format!("unknown method `{s}`")),
    }
}

fn parse_controller(s: Option<&str>) -> Result<ControllerKind, ConfigError> {
    match s.map(keyword).as_deref() {
        None | Some("pd") => Ok(ControllerKind::Pd),
        Some("p") => Ok(ControllerKind::P),
        Some(other) => invalid(format!("unknown controller `{other}`")),
    }
}

impl TaskConfig {
    fn present(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut mark = |on: bool, name| {
            if on {
                out.push(name)
            }
        };
        mark(self.joints.is_some(), "joints");
        mark(self.joint.is_some(), "joint");
        mark(self.limit.is_some(), "limit");
        mark(self.rho.is_some(), "rho");
        mark(self.target.is_some(), "target");
        mark(self.kp.is_some(), "kp");
        mark(self.kv.is_some(), "kv");
        mark(self.controller.is_some(), "controller");
        mark(self.lower.is_some(), "lower");
        mark(self.upper.is_some(), "upper");
        mark(self.gain.is_some(), "gain");
        out
    }

    fn need(&self, v: Option<f64>, name: &str) -> Result<f64, ConfigError> {
        v.ok_or_else(|| ConfigError::Invalid(format!("task `{}` needs `{name}`", self.kind)))
    }

    pub fn to_spec(&self) -> Result<TaskSpec<f64>, ConfigError> {
        let (kind, allowed): (TaskKind<f64>, &[&str]) = match keyword(&self.kind).as_str() {
            "eom" => (TaskKind::Eom, &[]),
            "torquereg" => (TaskKind::TorqueReg { joints: self.joints.clone().unwrap_or_default() }, &["joints"]),
            "torquelimit" => (TaskKind::TorqueLimit { limit: self.need(self.limit, "limit")? }, &["limit"]),
            "velocityreg" => (TaskKind::VelocityReg, &[]),
            "trustregion" => (TaskKind::TrustRegion { rho: self.need(self.rho, "rho")? }, &["rho"]),
            "tipposition" => {
                let target = match &self.target {
                    Some(Target::Vector(v)) if v.len() == 2 => v.clone(),
                    _ => return invalid("task `tip-position` needs a two-entry `target`"),
                };
                (
                    TaskKind::TipPosition {
                        target,
                        kp: self.need(self.kp, "kp")?,
                        kv: self.kv.unwrap_or(0.0),
                        controller: parse_controller(self.controller.as_deref())?,
                    },
                    &["target", "kp", "kv", "controller"],
                )
            }
            "jointtarget" => {
                let target = match &self.target {
                    Some(Target::Scalar(v)) => *v,
                    _ => return invalid("task `joint-target` needs a scalar `target`"),
                };
                let joint = self.joint.ok_or_else(|| ConfigError::Invalid("task `joint-target` needs `joint`".into()))?;
                (
                    TaskKind::JointTarget {
                        joint,
                        target,
                        kp: self.need(self.kp, "kp")?,
                        kv: self.kv.unwrap_or(0.0),
                        controller: parse_controller(self.controller.as_deref())?,
                    },
                    &["joint", "target", "kp", "kv", "controller"],
                )
            }
            "combox" => (
                TaskKind::ComBox { lower: self.need(self.lower, "lower")?, upper: self.need(self.upper, "upper")?, gain: self.gain },
                &["lower", "upper", "gain"],
            ),
            _ => return invalid(format!("unknown task kind `{}`", self.kind)),
        };
        if let Some(extra) = self.present().into_iter().find(|k| !allowed.contains(k)) {
            return invalid(format!("task `{}` does not take `{extra}`", self.kind));
        }
        let mut spec = TaskSpec::new(self.level, kind);
        if let Some(r) = &self.relation {
            spec = spec.with_relation(parse_relation(r)?);
        }
        if self.augmentable.unwrap_or(false) {
            spec = spec.augmentable();
        }
        spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(spec)
    }
}

impl ScenarioConfig {
    fn model(&self) -> Result<Model<f64>, ConfigError> {
        match (&self.chain, &self.pointmass) {
            (Some(c), None) => {
                let n = c.lengths.len();
                if c.masses.len() != n {
                    return invalid(format!("chain has {n} lengths but {} masses", c.masses.len()));
                }
                let offsets = c.com_offsets.clone().unwrap_or_else(|| c.lengths.clone());
                if offsets.len() != n {
                    return invalid(format!("chain has {n} lengths but {} com offsets", offsets.len()));
                }
                let links = (0..n).map(|i| Link { length: c.lengths[i], mass: c.masses[i], com_offset: offsets[i] }).collect();
                let g = c.gravity.unwrap_or([0.0, -9.81]);
                PlanarChain::new(links, Vector2::new(g[0], g[1]))
                    .map(Model::Chain)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            (None, Some(p)) if p.mass > 0.0 => Ok(Model::PointMass { mass: p.mass }),
            (None, Some(_)) => invalid("point mass must be positive"),
            (Some(_), Some(_)) => invalid("give either [chain] or [pointmass], not both"),
            (None, None) => invalid("missing [chain] or [pointmass]"),
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario<f64>, ConfigError> {
        let model = self.model()?;
        let n = model.dof();
        let run = &self.run;
        if run.q0.len() != n {
            return invalid(format!("run.q0 needs {n} entries"));
        }
        let qd0 = run.qd0.clone().unwrap_or_else(|| vec![0.0; n]);
        if qd0.len() != n {
            return invalid(format!("run.qd0 needs {n} entries"));
        }
        if self.tasks.is_empty() {
            return invalid("no tasks");
        }
        let tasks = self.tasks.iter().map(TaskConfig::to_spec).collect::<Result<Vec<_>, _>>()?;
        let mut solver = SolverOptions::default();
        if let Some(s) = &self.solver {
            solver.tolerance = s.tolerance.unwrap_or(solver.tolerance);
            solver.max_iterations = s.max_iterations.unwrap_or(solver.max_iterations);
            solver.rank_threshold = s.rank_threshold.unwrap_or(solver.rank_threshold);
        }
        let mut control = ControlOptions::default();
        if let Some(c) = &self.control {
            control.epsilon = c.epsilon.unwrap_or(control.epsilon);
            control.nu_factor = c.nu_factor.unwrap_or(control.nu_factor);
            control.forced_gn_cycles = c.forced_gn_cycles.unwrap_or(control.forced_gn_cycles);
        }
        let scenario = Scenario {
            model,
            tasks,
            dt: run.dt,
            duration: run.duration,
            formulation: parse_formulation(&run.formulation)?,
            method: parse_method(&run.method, run.mu)?,
            q0: DVector::from_vec(run.q0.clone()),
            qd0: DVector::from_vec(qd0),
            solver,
            control,
        };
        scenario.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(scenario)
    }
}
