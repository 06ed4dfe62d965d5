//! Optional TOML configuration file and the flag > file > default
//! precedence rule.
//!
//! The file holds one flat `[defaults]` table whose keys mirror the long
//! command-line flags, e.g.
//!
//! ```toml
//! [defaults]
//! kernel = "matern"
//! dmax = 3
//! frc = [4.0, 8.0, 16.0, 32.0, 64.0]
//! gamma = [0.2, 0.1, 0.01, 0.005, 0.0]
//! crit-tol = 1e-4
//! ```

use std::path::Path;

use serde::Deserialize;

use rkhs_meta::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Defaults {
    pub kernel: Option<String>,
    pub dmax: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub crit_tol: Option<f64>,
    pub par_tol: Option<f64>,
    pub frc: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

pub fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))
        }
    }
}

/// flag > config file > built-in default.
pub fn resolve<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// flag > config file, for settings with no built-in default.
pub fn resolve_required<T: Clone>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| Error::InvalidArgument(format!("missing required setting --{name}")))
}
