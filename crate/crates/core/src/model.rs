//! Model parameters: the physical two-species system, its nondimensional
//! form, competition-regime classification, and config-file ingestion.
//!
//! The physical system describes an invading species `U` on a growing ball
//! `r < H(t)` competing with a resident species `V` on the whole space.
//! Rescaling time, space, and both densities reduces it to a four-parameter
//! dimensionless system for `(u, v)` plus the front coefficient `mu`:
//!
//! ```text
//! u_t - d Δu = r u (1 - u - b v)   on 0 <= r < h(t)
//! v_t -   Δv =   v (1 - v - a u)   on r >= 0
//! h'(t) = -mu u_r(t, h(t))
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Errors from parameter validation and config parsing.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("space dimension N must be at least 1, got {0}")]
    BadDimension(usize),
    #[error("offset leaves carrying level nonpositive: 1 + {name} = {level}")]
    BadOffset { name: &'static str, level: f64 },
    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },
    #[error("config key `{key}`: {message}")]
    ConfigValue { key: String, message: String },
    #[error("config is missing required key `{0}`")]
    MissingKey(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("cannot read config `{path}`: {source}")]
    ConfigIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Positive coefficients of the physical system, before rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Diffusion rate of the invader `U`.
    pub d1: f64,
    /// Diffusion rate of the resident `V`.
    pub d2: f64,
    /// Intrinsic growth rate of `U`.
    pub a1: f64,
    /// Intrinsic growth rate of `V`.
    pub a2: f64,
    /// Intraspecific competition of `U`.
    pub b1: f64,
    /// Interspecific pressure of `U` on `V`.
    pub b2: f64,
    /// Interspecific pressure of `V` on `U`.
    pub c1: f64,
    /// Intraspecific competition of `V`.
    pub c2: f64,
    /// Free-boundary coefficient of the physical Stefan condition.
    pub mu_hat: f64,
    /// Initial front radius.
    pub h0: f64,
}

impl PhysicalParams {
    /// Validates that every field is strictly positive.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("d1", self.d1),
            ("d2", self.d2),
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("mu_hat", self.mu_hat),
            ("H0", self.h0),
        ];
        for (name, value) in fields {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Dimensionless coefficients of the rescaled system.
///
/// `b = 0` is accepted as the decoupled limit in which the invader no longer
/// feels the resident; it is exercised by the scalar reduction tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Relative diffusion `d1/d2` of the invader.
    pub d: f64,
    /// Relative growth `a1/a2` of the invader.
    pub r: f64,
    /// Pressure of the invader on the resident.
    pub a: f64,
    /// Pressure of the resident on the invader.
    pub b: f64,
    /// Rescaled free-boundary coefficient.
    pub mu: f64,
    /// Space dimension of the radially symmetric problem.
    pub n_dim: usize,
}

impl ModelParams {
    pub fn new(d: f64, r: f64, a: f64, b: f64, mu: f64, n_dim: usize) -> Result<Self, ModelError> {
        let m = Self { d, r, a, b, mu, n_dim };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("d", self.d),
            ("r", self.r),
            ("a", self.a),
            ("mu", self.mu),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(ModelError::NonPositive { name: "b", value: self.b });
        }
        if self.n_dim < 1 {
            return Err(ModelError::BadDimension(self.n_dim));
        }
        Ok(())
    }
}

/// Competition regime determined by the interspecific pressures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompetitionRegime {
    /// `a > 1 > b`: the invader is the locally superior competitor.
    SuperiorU,
    /// `a < 1 < b`: the invader is inferior and its invasion always fails.
    InferiorU,
    /// Any other combination (bistable or degenerate cases).
    Other,
}

impl fmt::Display for CompetitionRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CompetitionRegime::SuperiorU => "SuperiorU",
            CompetitionRegime::InferiorU => "InferiorU",
            CompetitionRegime::Other => "Other",
        };
        f.write_str(s)
    }
}

/// Additive offsets to the two carrying levels.
///
/// The perturbed reaction terms read `u(1 + eps_v - u - a v)` for the
/// resident-side equation and `r u(1 + eps_u - u - b v)` for the invader
/// side; zero offsets recover the unperturbed system. Small nonzero offsets
/// produce the bracketing systems used to sandwich the front location.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GrowthOffsets {
    /// Offset to the invader's carrying level.
    pub eps_u: f64,
    /// Offset to the resident's carrying level.
    pub eps_v: f64,
}

impl GrowthOffsets {
    pub const ZERO: GrowthOffsets = GrowthOffsets { eps_u: 0.0, eps_v: 0.0 };

    pub fn new(eps_u: f64, eps_v: f64) -> Result<Self, ModelError> {
        let off = Self { eps_u, eps_v };
        off.validate()?;
        Ok(off)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(1.0 + self.eps_u > 0.0) {
            return Err(ModelError::BadOffset {
                name: "eps_u",
                level: 1.0 + self.eps_u,
            });
        }
        if !(1.0 + self.eps_v > 0.0) {
            return Err(ModelError::BadOffset {
                name: "eps_v",
                level: 1.0 + self.eps_v,
            });
        }
        Ok(())
    }

    /// Carrying level of the invader-side equation.
    pub fn carrying_u(&self) -> f64 {
        1.0 + self.eps_u
    }

    /// Carrying level of the resident-side equation.
    pub fn carrying_v(&self) -> f64 {
        1.0 + self.eps_v
    }
}

/// Nondimensionalization of the physical system plus the rescaled initial
/// front radius `h0 = sqrt(a2/d2) * H0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondimensionalized {
    pub params: ModelParams,
    pub h0: f64,
}

/// Maps physical coefficients to the dimensionless parameter set:
/// `d = d1/d2`, `r = a1/a2`, `a = a1 b2 / (a2 b1)`, `b = a2 c1 / (a1 c2)`,
/// `mu = a1/(b1 d2) * mu_hat`, and `h0 = sqrt(a2/d2) * H0`.
pub fn nondimensionalize(p: &PhysicalParams, n_dim: usize) -> Result<Nondimensionalized, ModelError> {
    p.validate()?;
    let params = ModelParams::new(
        p.d1 / p.d2,
        p.a1 / p.a2,
        (p.a1 * p.b2) / (p.a2 * p.b1),
        (p.a2 * p.c1) / (p.a1 * p.c2),
        p.a1 / (p.b1 * p.d2) * p.mu_hat,
        n_dim,
    )?;
    Ok(Nondimensionalized {
        params,
        h0: (p.a2 / p.d2).sqrt() * p.h0,
    })
}

/// Classifies the competition regime from the interspecific pressures.
pub fn classify(m: &ModelParams) -> CompetitionRegime {
    if m.a > 1.0 && m.b < 1.0 {
        CompetitionRegime::SuperiorU
    } else if m.a < 1.0 && m.b > 1.0 {
        CompetitionRegime::InferiorU
    } else {
        CompetitionRegime::Other
    }
}

/// Parsed flat `key = value` configuration.
///
/// One assignment per line; `#` starts a comment; blank lines are ignored.
/// Keys are tracked so unknown or unused keys can be rejected by the caller.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ModelError::ConfigSyntax {
                    line: line_no,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ModelError::ConfigSyntax {
                    line: line_no,
                    message: "empty key or value".to_string(),
                });
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(ModelError::ConfigSyntax {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::ConfigIo {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ModelError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|e| ModelError::ConfigValue {
                    key: key.to_string(),
                    message: format!("`{v}` is not a number: {e}"),
                }),
        }
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, ModelError> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ModelError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|e| ModelError::ConfigValue {
                    key: key.to_string(),
                    message: format!("`{v}` is not a nonnegative integer: {e}"),
                }),
        }
    }

    /// Comma-separated list of floats, e.g. `mu_list = 0.1, 1, 10`.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ModelError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    let part = part.trim();
                    if part.is_empty() {
                        continue;
                    }
                    out.push(part.parse::<f64>().map_err(|e| ModelError::ConfigValue {
                        key: key.to_string(),
                        message: format!("`{part}` is not a number: {e}"),
                    })?);
                }
                if out.is_empty() {
                    return Err(ModelError::ConfigValue {
                        key: key.to_string(),
                        message: "empty list".to_string(),
                    });
                }
                Ok(Some(out))
            }
        }
    }

    fn require_f64(&self, key: &str) -> Result<f64, ModelError> {
        self.get_f64(key)?
            .ok_or_else(|| ModelError::MissingKey(key.to_string()))
    }

    /// Extracts model parameters, preferring a physical block when present.
    ///
    /// If any physical key (`d1`, `d2`, `a1`, `a2`, `b1`, `b2`, `c1`, `c2`,
    /// `mu_hat`) appears, the full physical block is required and takes
    /// precedence over the dimensionless keys; `H0` is then rescaled into the
    /// returned initial radius. Otherwise `d`, `r`, `a`, `b`, `mu` are read
    /// directly and `h0` is passed through.
    pub fn model_params(&self) -> Result<Nondimensionalized, ModelError> {
        const PHYSICAL: [&str; 9] = ["d1", "d2", "a1", "a2", "b1", "b2", "c1", "c2", "mu_hat"];
        let n_dim = self.get_usize("N")?.unwrap_or(1);
        if n_dim < 1 {
            return Err(ModelError::BadDimension(n_dim));
        }
        if PHYSICAL.iter().any(|k| self.contains(k)) {
            let p = PhysicalParams {
                d1: self.require_f64("d1")?,
                d2: self.require_f64("d2")?,
                a1: self.require_f64("a1")?,
                a2: self.require_f64("a2")?,
                b1: self.require_f64("b1")?,
                b2: self.require_f64("b2")?,
                c1: self.require_f64("c1")?,
                c2: self.require_f64("c2")?,
                mu_hat: self.require_f64("mu_hat")?,
                h0: self.get_f64_or("H0", 1.0)?,
            };
            nondimensionalize(&p, n_dim)
        } else {
            let params = ModelParams::new(
                self.require_f64("d")?,
                self.require_f64("r")?,
                self.require_f64("a")?,
                self.require_f64("b")?,
                self.require_f64("mu")?,
                n_dim,
            )?;
            Ok(Nondimensionalized {
                params,
                h0: self.get_f64_or("h0", 1.0)?,
            })
        }
    }
}
