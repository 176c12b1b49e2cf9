//! Flat key-value run configuration: a JSON object file plus `--set`
//! overrides, resolved against the keys a subcommand needs.

use std::fmt;
use std::path::{Path, PathBuf};

use cipre_core::harness::{ExperimentConfig, Scheme};
use cipre_core::model::ModulationSpec;
use serde_json::{Map, Value};

pub const KEYS: [&str; 11] = [
    "n_tx",
    "n_users",
    "modulation",
    "n0",
    "gamma_db",
    "power_budget_db",
    "delta_sq",
    "trials",
    "seed",
    "schemes",
    "out_dir",
];

pub const MODULATIONS: [&str; 3] = ["bpsk", "qpsk", "8psk"];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw key-value pairs after merging the file and overrides.
#[derive(Debug, Clone, Default)]
pub struct RawConfig(pub Map<String, Value>);

impl RawConfig {
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self, ConfigError> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => return err(format!("config {} must be a JSON object", p.display())),
                    Err(e) => return err(format!("config {} is not valid JSON: {e}", p.display())),
                }
            }
            None => Map::new(),
        };
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--set expects key=value, got {s:?}")))?;
            map.insert(k.trim().to_string(), parse_value(v.trim()));
        }
        let unknown: Vec<&String> = map.keys().filter(|k| !KEYS.contains(&k.as_str())).collect();
        if !unknown.is_empty() {
            return err(format!(
                "unknown config key(s): {}; allowed keys are {}",
                unknown.iter().map(|k| format!("{k:?}")).collect::<Vec<_>>().join(", "),
                KEYS.join(", ")
            ));
        }
        Ok(Self(map))
    }

    /// Fails listing every key in `required` that is absent.
    pub fn require(&self, required: &[&str]) -> Result<(), ConfigError> {
        let missing: Vec<&str> = required.iter().copied().filter(|k| !self.0.contains_key(*k)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            err(format!("missing required config key(s): {}", missing.join(", ")))
        }
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key).map(|v| as_usize(key, v)).transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| as_f64(key, v)).transpose()
    }

    fn list<T>(
        &self,
        key: &str,
        each: impl Fn(&str, &Value) -> Result<T, ConfigError>,
    ) -> Result<Option<Vec<T>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(xs)) if xs.is_empty() => err(format!("{key} must not be empty")),
            Some(Value::Array(xs)) => xs.iter().map(|x| each(key, x)).collect::<Result<_, _>>().map(Some),
            Some(v) => Ok(Some(vec![each(key, v)?])),
        }
    }

    pub fn out_dir(&self) -> Result<Option<PathBuf>, ConfigError> {
        match self.get("out_dir") {
            None => Ok(None),
            Some(Value::String(s)) if !s.is_empty() => Ok(Some(PathBuf::from(s))),
            Some(v) => err(format!("out_dir must be a non-empty path string, got {v}")),
        }
    }

    /// Builds the experiment description; keys not present keep their
    /// defaults.
    pub fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let modulation = match self.get("modulation") {
            None => ModulationSpec::qpsk(),
            Some(Value::String(s)) if MODULATIONS.contains(&s.as_str()) => {
                ModulationSpec::parse(s).map_err(|e| ConfigError(e.to_string()))?
            }
            Some(v) => {
                return err(format!(
                    "unsupported modulation {v}; expected one of {}",
                    MODULATIONS.join(", ")
                ))
            }
        };
        let n_tx = self.list("n_tx", as_usize)?.unwrap_or_else(|| vec![4]);
        let mut cfg = ExperimentConfig::new(n_tx[0], self.usize("n_users")?.unwrap_or(4), modulation);
        cfg.n_tx = n_tx;
        if let Some(x) = self.f64("n0")? {
            cfg.n0 = x;
        }
        if let Some(x) = self.list("gamma_db", as_f64)? {
            cfg.gamma_db = x;
        }
        if let Some(x) = self.list("power_budget_db", as_f64)? {
            cfg.power_budget_db = x;
        }
        if let Some(x) = self.list("delta_sq", as_f64)? {
            cfg.delta_sq = x;
        }
        if let Some(x) = self.usize("trials")? {
            cfg.trials = x;
        }
        if let Some(x) = self.get("seed") {
            cfg.seed = as_u64("seed", x)?;
        }
        if let Some(x) = self.list("schemes", as_scheme)? {
            cfg.schemes = x;
        }
        Ok(cfg)
    }
}

/// JSON when it parses, a comma-separated list when it contains commas,
/// otherwise a plain string.
pub fn parse_value(s: &str) -> Value {
    if let Ok(v) = serde_json::from_str(s) {
        return v;
    }
    if s.contains(',') {
        return Value::Array(s.split(',').map(|p| parse_value(p.trim())).collect());
    }
    Value::String(s.to_string())
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError(format!("{key} expects a number, got {v}")))
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    v.as_u64()
        .ok_or_else(|| ConfigError(format!("{key} expects a nonnegative integer, got {v}")))
}

fn as_usize(key: &str, v: &Value) -> Result<usize, ConfigError> {
    as_u64(key, v).map(|x| x as usize)
}

fn as_scheme(key: &str, v: &Value) -> Result<Scheme, ConfigError> {
    let s = v
        .as_str()
        .ok_or_else(|| ConfigError(format!("{key} expects scheme names, got {v}")))?;
    s.parse().map_err(|_| {
        ConfigError(format!(
            "unknown scheme {s:?} in {key}; expected one of {}",
            Scheme::ALL.map(|x| x.name()).join(", ")
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_values() {
        assert_eq!(parse_value("3"), Value::from(3));
        assert_eq!(parse_value("[0,5]"), serde_json::json!([0, 5]));
        assert_eq!(parse_value("0,5"), serde_json::json!([0, 5]));
        assert_eq!(parse_value("qpsk"), Value::from("qpsk"));
        assert_eq!(
            parse_value("ci-relaxed,conventional"),
            serde_json::json!(["ci-relaxed", "conventional"])
        );
    }

    #[test]
    fn scalars_promote_to_lists() {
        let raw = RawConfig::load(None, &["gamma_db=10".into(), "n_tx=5".into()]).unwrap();
        let cfg = raw.experiment().unwrap();
        assert_eq!(cfg.gamma_db, vec![10.0]);
        assert_eq!(cfg.n_tx, vec![5]);
    }

    #[test]
    fn rejects_other_modulations() {
        let raw = RawConfig::load(None, &["modulation=16psk".into()]).unwrap();
        let e = raw.experiment().unwrap_err();
        assert!(e.0.contains("16psk"), "{e}");
    }
}
