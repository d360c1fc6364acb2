//! Run configuration: a versioned JSON document layered over built-in defaults,
//! then environment overrides, then command-line flags.

use std::path::Path;

use covert_nav::rl::{CqlParams, DatasetParams};
use covert_nav::sim::{SceneParams, SimParams};
use covert_nav::worldgen::{Scenario, MIN_EXTENT};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Environment variables starting with this prefix override config keys. Nested
/// keys are joined with `__`, e.g. `COVERTNAV__CQL__EPOCHS=50`.
pub const ENV_PREFIX: &str = "COVERTNAV__";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub scenario: Scenario,
    pub extent_x: f64,
    pub extent_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub scenarios: Vec<Scenario>,
    pub worlds_per_scenario: usize,
    pub extent: f64,
    pub params: DatasetParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub scenarios: Vec<Scenario>,
    pub trials: usize,
    pub extent: f64,
    /// World redraws per trial before the scenario is declared infeasible.
    pub max_attempts: usize,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub world: WorldConfig,
    pub scene: SceneParams,
    pub sim: SimParams,
    pub dataset: DatasetConfig,
    pub cql: CqlParams,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            world: WorldConfig {
                scenario: Scenario::Mixed,
                extent_x: 50.0,
                extent_y: 50.0,
            },
            scene: SceneParams::default(),
            sim: SimParams::default(),
            dataset: DatasetConfig {
                scenarios: Scenario::ALL.to_vec(),
                worlds_per_scenario: 3,
                extent: 50.0,
                params: DatasetParams::default(),
            },
            cql: CqlParams::default(),
            eval: EvalConfig {
                scenarios: Scenario::ALL.to_vec(),
                trials: 10,
                extent: 50.0,
                max_attempts: 10,
                parallelism: 1,
            },
        }
    }
}

/// Recursively copies `overlay` onto `base`. Objects merge key by key; any
/// other value replaces what was there.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
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

fn set_path(root: &mut Value, path: &[String], value: Value) -> Result<(), CliError> {
    let mut node = root;
    for (k, key) in path.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{} is not an object", path[..k].join("."))))?;
        if k + 1 == path.len() {
            obj.insert(key.clone(), value);
            return Ok(());
        }
        node = obj.entry(key.clone()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Config("empty override path".into()))
}

/// Applies `COVERTNAV__A__B=value` pairs. Values are parsed as JSON when they
/// parse, and taken as strings otherwise.
pub fn apply_env<I: IntoIterator<Item = (String, String)>>(root: &mut Value, vars: I) -> Result<(), CliError> {
    let mut pairs: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("malformed override variable {key}")));
        }
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        set_path(root, &path, value)?;
    }
    Ok(())
}

impl RunConfig {
    /// Builds the effective config: defaults, then the optional file, then the
    /// given environment variables. The result is validated.
    pub fn load<I>(file: Option<&Path>, env: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut root = serde_json::to_value(Self::default()).expect("default config serializes");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let user: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if !user.is_object() {
                return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
            }
            match user.get("version") {
                Some(v) if v.as_u64() == Some(CONFIG_VERSION as u64) => {}
                Some(v) => return Err(CliError::Config(format!("unsupported config version {v}"))),
                None => return Err(CliError::Config(format!("{}: missing \"version\"", path.display()))),
            }
            merge(&mut root, user);
        }
        apply_env(&mut root, env)?;
        Self::from_value(root)
    }

    pub fn from_value(value: Value) -> Result<Self, CliError> {
        let config: Self = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut v = Checker::default();
        v.check("version", self.version == CONFIG_VERSION, "must be 1");
        v.at_least("world.extent_x", self.world.extent_x, MIN_EXTENT);
        v.at_least("world.extent_y", self.world.extent_y, MIN_EXTENT);

        let s = &self.scene;
        v.positive("scene.cell_size", s.cell_size);
        v.positive("scene.h_max", s.h_max);
        v.at_least("scene.concealment_height", s.concealment_height, 0.0);
        v.positive("scene.goal_range[0]", s.goal_range.0);
        v.check("scene.goal_range", s.goal_range.0 <= s.goal_range.1, "lower bound exceeds upper bound");
        v.unit("scene.patrol_fraction", s.patrol_fraction);
        v.check("scene.patrol_period", s.patrol_period >= 1, "must be at least 1");
        v.positive("scene.threat_visibility.eye_height", s.threat_visibility.eye_height);
        v.positive("scene.threat_visibility.max_range", s.threat_visibility.max_range);
        v.at_least("scene.threat_standoff", s.threat_standoff, 0.0);
        v.at_least("scene.cloud.noise_sigma", s.cloud.noise_sigma, 0.0);
        v.positive("scene.cloud.ground_density", s.cloud.ground_density);
        v.positive("scene.cluster.link_radius", s.cluster.link_radius);
        v.check("scene.cluster.min_points", s.cluster.min_points >= 1, "must be at least 1");
        v.finite("scene.cluster.ground_band", s.cluster.ground_band);
        v.at_least("scene.cover_thresholds.h_min", s.cover_thresholds.h_min, 0.0);
        v.at_least("scene.cover_thresholds.d_min", s.cover_thresholds.d_min, 0.0);
        v.at_least("scene.cover_thresholds.v_min", s.cover_thresholds.v_min, 0.0);
        v.check("scene.max_tries", s.max_tries >= 1, "must be at least 1");

        let m = &self.sim;
        v.positive("sim.dt", m.dt);
        v.positive("sim.goal_radius", m.goal_radius);
        v.check("sim.detection_persistence", m.detection_persistence >= 1, "must be at least 1");
        v.unit("sim.cover_threshold", m.cover_threshold);
        v.positive("sim.timeout_factor", m.timeout_factor);
        v.check("sim.min_timeout_steps", m.min_timeout_steps >= 1, "must be at least 1");
        v.check("sim.threat.vantage_capacity", m.threat.vantage_capacity >= 1, "must be at least 1");
        v.unit("sim.threat.mass_floor", m.threat.mass_floor);
        v.unit("sim.threat.discount", m.threat.discount);
        v.positive("sim.threat.visibility.eye_height", m.threat.visibility.eye_height);
        v.positive("sim.threat.visibility.max_range", m.threat.visibility.max_range);
        v.unit("sim.observation.detection_prob", m.observation.detection_prob);
        v.unit("sim.observation.false_alarm_prob", m.observation.false_alarm_prob);
        v.check("sim.observation.false_alarm_prob", m.observation.false_alarm_prob < 1.0, "must be below 1");
        v.positive("sim.observation.sensor_range", m.observation.sensor_range);
        v.positive("sim.observation.sensor_height", m.observation.sensor_height);
        v.unit("sim.prior_weight", m.prior_weight);
        v.at_least("sim.prior_sigma_cells", m.prior_sigma_cells, 0.0);
        v.unit("sim.belief_diffusion", m.belief_diffusion);
        v.at_least("sim.threat_cost_weight", m.threat_cost_weight, 0.0);
        v.positive("sim.waypoint_lookahead", m.waypoint_lookahead);
        v.at_least("sim.features.lookahead", m.features.lookahead, 0.0);
        for (name, edges) in [
            ("sim.features.cover_edges", &m.features.cover_edges[..]),
            ("sim.features.threat_edges", &m.features.threat_edges[..]),
            ("sim.features.distance_edges", &m.features.distance_edges[..]),
        ] {
            v.check(
                name,
                edges.iter().all(|e| e.is_finite()) && edges.windows(2).all(|w| w[0] < w[1]),
                "must be finite and strictly increasing",
            );
        }
        for (name, w) in [
            ("sim.rewards.cover", m.rewards.cover),
            ("sim.rewards.threat", m.rewards.threat),
            ("sim.rewards.goal", m.rewards.goal),
            ("sim.rewards.collision", m.rewards.collision),
        ] {
            v.at_least(name, w, 0.0);
        }

        let d = &self.dataset;
        v.check("dataset.scenarios", !d.scenarios.is_empty(), "must not be empty");
        v.check("dataset.worlds_per_scenario", d.worlds_per_scenario >= 1, "must be at least 1");
        v.at_least("dataset.extent", d.extent, MIN_EXTENT);
        let weights = &d.params.behavior_weights;
        v.check(
            "dataset.params.behavior_weights",
            weights.iter().all(|w| w.1.is_finite() && w.1 >= 0.0) && weights.iter().map(|w| w.1).sum::<f64>() > 0.0,
            "weights must be non-negative with a positive sum",
        );
        v.unit("dataset.params.epsilon", d.params.epsilon);
        v.unit("dataset.params.unmasked_rate", d.params.unmasked_rate);

        if let Err(e) = self.cql.validate() {
            v.errors.push(format!("cql: {e}"));
        }

        let e = &self.eval;
        v.check("eval.scenarios", !e.scenarios.is_empty(), "must not be empty");
        v.check("eval.trials", e.trials >= 1, "must be at least 1");
        v.at_least("eval.extent", e.extent, MIN_EXTENT);
        v.check("eval.max_attempts", e.max_attempts >= 1, "must be at least 1");
        v.check("eval.parallelism", e.parallelism >= 1, "must be at least 1");

        if v.errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v.errors.join("; ")))
        }
    }
}

#[derive(Default)]
struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn check(&mut self, name: &str, ok: bool, why: &str) {
        if !ok {
            self.errors.push(format!("{name} {why}"));
        }
    }

    fn finite(&mut self, name: &str, x: f64) {
        self.check(name, x.is_finite(), "must be finite");
    }

    fn positive(&mut self, name: &str, x: f64) {
        self.check(name, x.is_finite() && x > 0.0, "must be positive and finite");
    }

    fn at_least(&mut self, name: &str, x: f64, lo: f64) {
        if !(x.is_finite() && x >= lo) {
            self.errors.push(format!("{name} must be finite and at least {lo}, got {x}"));
        }
    }

    fn unit(&mut self, name: &str, x: f64) {
        self.check(name, (0.0..=1.0).contains(&x), "must lie in [0, 1]");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::load(None, env(&[])).unwrap();
        assert_eq!(c, RunConfig::default());
        let again = RunConfig::from_value(serde_json::from_str(&c.to_json()).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn env_overrides_nested_keys() {
        let c = RunConfig::load(None, env(&[("COVERTNAV__CQL__EPOCHS", "7"), ("COVERTNAV__WORLD__SCENARIO", "forest"), ("OTHER", "1")]))
            .unwrap();
        assert_eq!(c.cql.epochs, 7);
        assert_eq!(c.world.scenario, Scenario::Forest);
    }

    #[test]
    fn unknown_keys_and_bad_ranges_are_rejected() {
        assert!(matches!(
            RunConfig::load(None, env(&[("COVERTNAV__CQL__EPOCS", "7")])),
            Err(CliError::Config(_))
        ));
        let err = RunConfig::load(None, env(&[("COVERTNAV__SIM__DT", "-1")])).unwrap_err();
        assert!(err.to_string().contains("sim.dt"), "{err}");
    }

    #[test]
    fn merge_keeps_unlisted_fields() {
        let mut base = serde_json::json!({"a": {"b": 1, "c": 2}, "d": 3});
        merge(&mut base, serde_json::json!({"a": {"c": 5}}));
        assert_eq!(base, serde_json::json!({"a": {"b": 1, "c": 5}, "d": 3}));
    }
}
