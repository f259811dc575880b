//! TOML run configuration.
//!
//! ```toml
//! [plant]
//! alpha = 11.0
//! beta = 21.0
//! gamma = 31.0
//!
//! [design]
//! mu_c = 0.26820...
//! kappa_c = 15.0
//! mu_o = 0.01929...
//! kappa_o = 35.0
//!
//! [gains]                  # optional
//! method = "pole-placement" # or "paper"
//! theta_minus = -0.1316     # default -2 tau
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gains::GainMethod;
use crate::params::{validate_config, ParamError, SystemParams, Violation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainsConfig {
    pub method: GainMethod,
    /// Lower integration limit of the observer gain formula; `None` means `-2 tau`.
    pub theta_minus: Option<f64>,
}

impl Default for GainsConfig {
    fn default() -> Self {
        GainsConfig {
            method: GainMethod::PolePlacement,
            theta_minus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: SystemParams<f64>,
    pub gains: GainsConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed TOML: {0}")]
    Parse(String),
    #[error(transparent)]
    Invalid(#[from] ParamError),
}

impl ConfigError {
    /// Every individual violation, for diagnostics.
    pub fn violations(&self) -> Vec<String> {
        match self {
            ConfigError::Invalid(e) => e.violations().iter().map(|v| v.to_string()).collect(),
            other => vec![other.to_string()],
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGains {
    method: Option<GainMethod>,
    theta_minus: Option<f64>,
}

impl RunConfig {
    pub fn reference() -> Self {
        RunConfig {
            params: SystemParams::reference(),
            gains: GainsConfig::default(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut flat = BTreeMap::new();
        let mut violations = Vec::new();
        let mut gains = GainsConfig::default();
        for (section, value) in &doc {
            match (section.as_str(), value) {
                ("plant" | "design", toml::Value::Table(t)) => {
                    for (k, v) in t {
                        match as_f64(v) {
                            Some(x) => {
                                flat.insert(k.clone(), x);
                            }
                            None => violations.push(Violation::OutOfRange {
                                key: k.clone(),
                                value: f64::NAN,
                                expected: "a number",
                            }),
                        }
                    }
                }
                ("gains", toml::Value::Table(t)) => {
                    let raw: RawGains = toml::Value::Table(t.clone())
                        .try_into()
                        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
                    if let Some(m) = raw.method {
                        gains.method = m;
                    }
                    if let Some(th) = raw.theta_minus {
                        if !(th.is_finite() && th < 0.0) {
                            violations.push(Violation::OutOfRange {
                                key: "theta_minus".into(),
                                value: th,
                                expected: "< 0",
                            });
                        }
                        gains.theta_minus = Some(th);
                    }
                }
                _ => violations.push(Violation::Unknown(section.clone())),
            }
        }
        let params = match validate_config::<f64>(&flat) {
            Ok(p) if violations.is_empty() => p,
            Ok(_) => return Err(ParamError::Invalid(violations).into()),
            Err(e) => {
                violations.extend(e.violations().iter().cloned());
                return Err(ParamError::Invalid(violations).into());
            }
        };
        Ok(RunConfig { params, gains })
    }

    /// Serializes back to TOML with full precision.
    pub fn to_toml_string(&self) -> String {
        let p = &self.params;
        let mut s = format!(
            "[plant]\nalpha = {:?}\nbeta = {:?}\ngamma = {:?}\n\n[design]\nmu_c = {:?}\nkappa_c = {:?}\nmu_o = {:?}\nkappa_o = {:?}\n\n[gains]\nmethod = \"{}\"\n",
            p.alpha, p.beta, p.gamma, p.mu_c, p.kappa_c, p.mu_o, p.kappa_o, self.gains.method
        );
        if let Some(th) = self.gains.theta_minus {
            s.push_str(&format!("theta_minus = {th:?}\n"));
        }
        s
    }
}

fn as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_roundtrip() {
        let cfg = RunConfig::reference();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn integers_are_floats() {
        let text = "[plant]\nalpha = 11\nbeta = 21\ngamma = 31\n[design]\nmu_c = 0.5\nkappa_c = 15\nmu_o = 0.25\nkappa_o = 35\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.params.alpha, 11.0);
        assert_eq!(cfg.gains.method, GainMethod::PolePlacement);
    }

    #[test]
    fn collects_all_problems() {
        let text = "[plant]\nalpha = -1\nbeta = 21\ngamma = \"x\"\n[design]\nmu_c = 2.0\n[extra]\nfoo = 1\n";
        let err = RunConfig::from_toml_str(text).unwrap_err();
        let msgs = err.violations();
        assert!(msgs.iter().any(|m| m.contains("extra")));
        assert!(msgs.iter().any(|m| m.contains("alpha")));
        assert!(msgs.iter().any(|m| m.contains("mu_c")));
        assert!(msgs.iter().any(|m| m.contains("kappa_o")));
    }

    #[test]
    fn gains_section() {
        let mut cfg = RunConfig::reference();
        cfg.gains.method = GainMethod::Paper;
        cfg.gains.theta_minus = Some(-0.2);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back.gains, cfg.gains);
        let bad = cfg.to_toml_string().replace("\"paper\"", "\"magic\"");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn malformed_toml() {
        assert!(matches!(
            RunConfig::from_toml_str("[plant\nalpha="),
            Err(ConfigError::Parse(_))
        ));
    }
}
