//! Flat key-value configuration documents.
//!
//! The document is TOML; dotted keys (`sphere.mass_kg = 5.5e-15`) and tables
//! (`[sphere]` / `mass_kg = ...`) are equivalent. Keys not listed in
//! [`CONFIG_KEYS`] are rejected. Missing keys keep the value of the base
//! configuration.

use super::{ConstantsSet, ExperimentConfig, ValidationReport};
use thiserror::Error;

/// Every recognised key, in documentation order.
pub const CONFIG_KEYS: [&str; 14] = [
    "constants.name",
    "sphere.mass_kg",
    "sphere.radius_m",
    "weights.beta_plus_sq",
    "protocol.T1_s",
    "protocol.T2_s",
    "protocol.T3_s",
    "protocol.T4_s",
    "protocol.T5_s",
    "protocol.B0_T",
    "protocol.B0_grad_T_per_m",
    "initial.sqrtQ0_m",
    "nuclear_correction",
    // accepted for documentation symmetry; must agree with beta_plus_sq
    "weights.beta_minus_sq",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config document: {0}")]
    Syntax(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` expects {expected}")]
    Type { key: String, expected: &'static str },
    #[error("unknown constants set `{0}` (expected `paper` or `codata`)")]
    UnknownConstants(String),
    #[error("{0}")]
    Invalid(ValidationReport),
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64, ConfigError> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(ConfigError::Type {
            key: key.to_string(),
            expected: "a number",
        }),
    }
}

/// Applies the keys of `doc` on top of `base` and validates the result.
pub fn apply_overrides(base: ExperimentConfig, doc: &str) -> Result<ExperimentConfig, ConfigError> {
    let table: toml::Table = doc
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut entries = Vec::new();
    flatten("", &table, &mut entries);

    let mut cfg = base;
    let mut beta_minus = None;
    for (key, value) in &entries {
        let key = key.as_str();
        match key {
            "constants.name" => {
                let name = value.as_str().ok_or_else(|| ConfigError::Type {
                    key: key.into(),
                    expected: "a string",
                })?;
                cfg.constants = ConstantsSet::by_name(name)
                    .ok_or_else(|| ConfigError::UnknownConstants(name.into()))?;
            }
            "nuclear_correction" => {
                cfg.nuclear_correction = value.as_bool().ok_or_else(|| ConfigError::Type {
                    key: key.into(),
                    expected: "a boolean",
                })?;
            }
            "weights.beta_minus_sq" => beta_minus = Some(as_f64(key, value)?),
            _ => {
                let x = as_f64(key, value).map_err(|e| match e {
                    ConfigError::Type { .. } if !CONFIG_KEYS.contains(&key) => {
                        ConfigError::UnknownKey(key.into())
                    }
                    e => e,
                })?;
                match key {
                    "sphere.mass_kg" => cfg.sphere.mass = x,
                    "sphere.radius_m" => cfg.sphere.radius = x,
                    "weights.beta_plus_sq" => {
                        cfg.weights.beta_plus_sq = x;
                        cfg.weights.beta_minus_sq = 1.0 - x;
                    }
                    "protocol.T1_s" => cfg.protocol.t1 = x,
                    "protocol.T2_s" => cfg.protocol.t2 = x,
                    "protocol.T3_s" => cfg.protocol.t3 = x,
                    "protocol.T4_s" => cfg.protocol.t4 = x,
                    "protocol.T5_s" => cfg.protocol.t5 = x,
                    "protocol.B0_T" => cfg.protocol.b0 = x,
                    "protocol.B0_grad_T_per_m" => cfg.protocol.b0_grad = x,
                    "initial.sqrtQ0_m" => cfg.initial.q0 = x * x,
                    _ => return Err(ConfigError::UnknownKey(key.into())),
                }
            }
        }
    }
    if let Some(m) = beta_minus {
        cfg.weights.beta_minus_sq = m;
    }
    cfg.checked().map_err(ConfigError::Invalid)
}

/// Parses a config document on top of the baseline experiment with the
/// `paper` constants set.
pub fn parse_config(doc: &str) -> Result<ExperimentConfig, ConfigError> {
    apply_overrides(ExperimentConfig::baseline(ConstantsSet::paper()), doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
constants.name = "codata"
sphere.mass_kg = 5.5e-15
sphere.radius_m = 1e-6
weights.beta_plus_sq = 0.3333333333333333
protocol.T1_s = 0.25
protocol.T2_s = 0.5
protocol.T3_s = 1.5
protocol.T4_s = 1.75
protocol.T5_s = 2.0
protocol.B0_T = 0.0
protocol.B0_grad_T_per_m = 1e6
initial.sqrtQ0_m = 1e-9
nuclear_correction = false
"#;

    #[test]
    fn full_document() {
        let cfg = parse_config(FULL).unwrap();
        assert_eq!(cfg.constants.name, "codata");
        assert_eq!(cfg.protocol.t5, 2.0);
        assert!((cfg.initial.q0 - 1e-18).abs() < 1e-30);
        assert!(!cfg.nuclear_correction);
    }

    #[test]
    fn table_form_is_equivalent() {
        let doc = "[sphere]\nmass_kg = 1e-14\n[protocol]\nB0_T = 0.1\n";
        let cfg = parse_config(doc).unwrap();
        assert_eq!(cfg.sphere.mass, 1e-14);
        assert_eq!(cfg.protocol.b0, 0.1);
    }

    #[test]
    fn unknown_key_is_hard_error() {
        let err = parse_config("sphere.colour = 3").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "sphere.colour"));
        let err = parse_config("gravity = \"on\"").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(_)));
    }

    #[test]
    fn wrong_type() {
        let err = parse_config("sphere.mass_kg = \"heavy\"").unwrap_err();
        assert!(matches!(err, ConfigError::Type { .. }));
        let err = parse_config("nuclear_correction = 1").unwrap_err();
        assert!(matches!(err, ConfigError::Type { .. }));
    }

    #[test]
    fn invalid_values_surface_report() {
        let err = parse_config("protocol.T5_s = 2.1").unwrap_err();
        match err {
            ConfigError::Invalid(r) => assert!(!r.is_ok()),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_constants() {
        let err = parse_config("constants.name = \"cgs\"").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownConstants(_)));
    }

    #[test]
    fn empty_document_is_baseline() {
        let cfg = parse_config("").unwrap();
        assert_eq!(
            cfg,
            ExperimentConfig::baseline(ConstantsSet::paper())
                .checked()
                .unwrap()
        );
    }
}
