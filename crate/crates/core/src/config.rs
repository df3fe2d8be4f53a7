//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment.  Unknown keys are errors, as are duplicates.
//!
//! Recognized keys: `a`, `b`, `d`, `eps1`, `eps2_re`, `eps2_im`, `eps3_re`,
//! `eps3_im`, `loss_fraction`, `n_max`, `cells_N`.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{CavitySpec, ModelError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: cannot parse value `{value}` for `{key}`")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: CavitySpec,
    pub loss_fraction: f64,
    pub n_max: usize,
}

impl RunConfig {
    /// Canonical `key=value` rendering of the resolved configuration, one key
    /// per line in fixed order.  Used for content digests: identical resolved
    /// configurations produce identical canonical text.
    pub fn canonical_string(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        for (k, v) in [
            ("a", s.a),
            ("b", s.b),
            ("d", s.d),
            ("eps1", s.eps1),
            ("eps2_im", s.eps2.im),
            ("eps2_re", s.eps2.re),
            ("eps3_im", s.eps3.im),
            ("eps3_re", s.eps3.re),
            ("loss_fraction", self.loss_fraction),
        ] {
            out.push_str(&format!("{k}={v:.17e}\n"));
        }
        out.push_str(&format!("n_max={}\n", self.n_max));
        match s.cells {
            Some(n) => out.push_str(&format!("cells_N={n}\n")),
            None => out.push_str("cells_N=\n"),
        }
        out
    }
}

const KEYS: [&str; 11] = [
    "a",
    "b",
    "d",
    "eps1",
    "eps2_re",
    "eps2_im",
    "eps3_re",
    "eps3_im",
    "loss_fraction",
    "n_max",
    "cells_N",
];

/// Parse a configuration from text.  Required keys: `a`, `b`, `d`, `eps1`,
/// `eps2_re`.  `eps3_re` defaults to `eps1` (empty cavity), imaginary parts
/// and `loss_fraction` default to zero, `n_max` to 3.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut seen: Vec<(&str, f64)> = Vec::new();
    let mut cells: Option<u32> = None;
    let mut n_max: Option<usize> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| ConfigError::Malformed {
                line,
                text: stripped.to_string(),
            })?;
        let key = key.trim();
        let value = value.trim();
        let canonical =
            KEYS.iter()
                .find(|k| **k == key)
                .ok_or_else(|| ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })?;
        let dup = match *canonical {
            "n_max" => n_max.is_some(),
            "cells_N" => cells.is_some(),
            k => seen.iter().any(|(s, _)| *s == k),
        };
        if dup {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        match *canonical {
            "n_max" => {
                n_max = Some(value.parse::<usize>().map_err(|_| ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    value: value.to_string(),
                })?);
            }
            "cells_N" => {
                cells = Some(value.parse::<u32>().map_err(|_| ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    value: value.to_string(),
                })?);
            }
            k => {
                let v = value.parse::<f64>().map_err(|_| ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    value: value.to_string(),
                })?;
                seen.push((k, v));
            }
        }
    }

    let get = |k: &'static str| seen.iter().find(|(s, _)| *s == k).map(|(_, v)| *v);
    let require = |k: &'static str| get(k).ok_or(ConfigError::MissingKey(k));

    let a = require("a")?;
    let b = require("b")?;
    let d = require("d")?;
    let eps1 = require("eps1")?;
    let eps2 = Complex64::new(require("eps2_re")?, get("eps2_im").unwrap_or(0.0));
    let eps3 = Complex64::new(
        get("eps3_re").unwrap_or(eps1),
        get("eps3_im").unwrap_or(0.0),
    );
    let loss_fraction = get("loss_fraction").unwrap_or(0.0);
    if loss_fraction < 0.0 || loss_fraction.is_nan() {
        return Err(ConfigError::Model(ModelError::InvalidLossFraction(
            loss_fraction,
        )));
    }

    let spec = CavitySpec::new(a, b, d, eps1, eps2, eps3, cells)?.normalized();
    Ok(RunConfig {
        spec,
        loss_fraction,
        n_max: n_max.unwrap_or(3),
    })
}
