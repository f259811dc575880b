//! Plant and design parameters, their derived quantities, and validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Real;

/// Keys accepted by [`validate_config`], in canonical order.
pub const PARAM_KEYS: [&str; 7] = [
    "alpha", "beta", "gamma", "mu_c", "kappa_c", "mu_o", "kappa_o",
];

/// Physical plant coefficients plus the controller and observer design knobs.
///
/// `mu_c`/`kappa_c` shape the desired closed-loop delay dynamics of the state
/// feedback, `mu_o`/`kappa_o` those of the observer error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub mu_c: T,
    pub kappa_c: T,
    pub mu_o: T,
    pub kappa_o: T,
}

/// Quantities computed from [`SystemParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams<T> {
    /// Wave travel time across the unit interval, `(alpha*beta)^(-1/2)`.
    pub tau: T,
    /// Observer boundary-injection coefficient.
    pub rho: T,
    /// Coefficient of the unbounded part of the state feedback, `u = k_ring*w1(1) + ...`.
    pub k_ring: T,
    /// Feedforward scale. Stored for completeness; the reference input is zero
    /// in every closed-loop computation, so it never multiplies anything.
    pub varkappa: T,
}

/// One reason a parameter set was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Missing(String),
    Unknown(String),
    OutOfRange {
        key: String,
        value: f64,
        expected: &'static str,
    },
}

impl Violation {
    /// Name of the offending key.
    pub fn key(&self) -> &str {
        match self {
            Violation::Missing(k) | Violation::Unknown(k) => k,
            Violation::OutOfRange { key, .. } => key,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing(k) => write!(f, "missing key `{k}`"),
            Violation::Unknown(k) => write!(f, "unknown key `{k}`"),
            Violation::OutOfRange {
                key,
                value,
                expected,
            } => write!(f, "`{key}` = {value} is out of range (expected {expected})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameters: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ParamError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ParamError::Invalid(v) => v,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl<T: Real> SystemParams<T> {
    /// Builds and validates a parameter set.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: T,
        beta: T,
        gamma: T,
        mu_c: T,
        kappa_c: T,
        mu_o: T,
        kappa_o: T,
    ) -> Result<Self, ParamError> {
        let p = SystemParams {
            alpha,
            beta,
            gamma,
            mu_c,
            kappa_c,
            mu_o,
            kappa_o,
        };
        p.validate()?;
        Ok(p)
    }

    /// The reference parameter set: alpha=11, beta=21, gamma=31,
    /// mu_c=exp(-20 tau), kappa_c=15, mu_o=exp(-60 tau), kappa_o=35.
    pub fn reference() -> Self {
        let alpha = T::lit(11.0);
        let beta = T::lit(21.0);
        let tau = T::one() / (alpha * beta).sqrt();
        SystemParams {
            alpha,
            beta,
            gamma: T::lit(31.0),
            mu_c: (-T::lit(20.0) * tau).exp(),
            kappa_c: T::lit(15.0),
            mu_o: (-T::lit(60.0) * tau).exp(),
            kappa_o: T::lit(35.0),
        }
    }

    /// Values in [`PARAM_KEYS`] order.
    pub fn values(&self) -> [T; 7] {
        [
            self.alpha,
            self.beta,
            self.gamma,
            self.mu_c,
            self.kappa_c,
            self.mu_o,
            self.kappa_o,
        ]
    }

    /// Collects every invariant violation (not just the first).
    pub fn validate(&self) -> Result<(), ParamError> {
        let mut out = Vec::new();
        for (key, value) in PARAM_KEYS.iter().zip(self.values()) {
            if let Some(expected) = range_violation(key, value) {
                out.push(Violation::OutOfRange {
                    key: key.to_string(),
                    value: value.into(),
                    expected,
                });
            }
        }
        if out.is_empty() && !(self.alpha * self.beta).is_finite() {
            out.push(Violation::OutOfRange {
                key: "alpha".into(),
                value: self.alpha.into(),
                expected: "alpha*beta finite",
            });
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(ParamError::Invalid(out))
        }
    }

    /// Computes tau, rho, k_ring and the (inert) feedforward scale.
    pub fn derive(&self) -> Result<DerivedParams<T>, ParamError> {
        self.validate()?;
        let tau = T::one() / (self.alpha * self.beta).sqrt();
        let bt = self.beta * tau;
        let rho = bt * (self.mu_o - T::one()) / (self.mu_o + T::one());
        let k_ring = bt * (self.mu_c - T::one()) / (self.mu_c + T::one());
        // (bt - rho) appears as a divisor in the adjoint normalisation.
        if (bt - rho).abs() <= T::eps() * bt {
            return Err(ParamError::Invalid(vec![Violation::OutOfRange {
                key: "mu_o".into(),
                value: self.mu_o.into(),
                expected: "rho != beta*tau",
            }]));
        }
        Ok(DerivedParams {
            tau,
            rho,
            k_ring,
            varkappa: T::one(),
        })
    }
}

fn range_violation<T: Real>(key: &str, v: T) -> Option<&'static str> {
    if !v.is_finite() {
        return Some("a finite number");
    }
    let zero = T::zero();
    match key {
        "alpha" | "beta" if v <= zero => Some("> 0"),
        "gamma" if v == zero => Some("!= 0"),
        "kappa_c" | "kappa_o" if v <= zero => Some("> 0"),
        "mu_c" | "mu_o" if v <= zero || v > T::one() => Some("0 < mu <= 1"),
        _ => None,
    }
}

/// Free function form of [`SystemParams::derive`].
pub fn derive<T: Real>(params: &SystemParams<T>) -> Result<DerivedParams<T>, ParamError> {
    params.derive()
}

/// Validates a flat key/value map. Reports every missing, unknown, and
/// out-of-range key at once.
pub fn validate_config<T: Real>(raw: &BTreeMap<String, f64>) -> Result<SystemParams<T>, ParamError> {
    let mut violations = Vec::new();
    for key in raw.keys() {
        if !PARAM_KEYS.contains(&key.as_str()) {
            violations.push(Violation::Unknown(key.clone()));
        }
    }
    let mut vals = [T::zero(); 7];
    for (slot, key) in vals.iter_mut().zip(PARAM_KEYS) {
        match raw.get(key) {
            None => violations.push(Violation::Missing(key.to_string())),
            Some(&v) => {
                if let Some(expected) = range_violation(key, v) {
                    violations.push(Violation::OutOfRange {
                        key: key.to_string(),
                        value: v,
                        expected,
                    });
                }
                *slot = T::lit(v);
            }
        }
    }
    if !violations.is_empty() {
        return Err(ParamError::Invalid(violations));
    }
    SystemParams::new(vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6])
}
