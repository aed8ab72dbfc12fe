//! TOML experiment files whose keys mirror the `run` flags, e.g.
//!
//! ```toml
//! experiment = "ogd_small_window"
//! T = 100000
//! tau = 200
//! M = "0:180:20"        # or M = [0, 20, 40]
//! reps = 1000
//! seed = 7
//! out = "fig4.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ExperimentConfig, ExperimentKind, GeometryChoice};
use crate::error::{invalid, Error, Result};

/// Parses `a:b:step` (inclusive of `b` when reached) or a single integer.
pub fn parse_window_spec(spec: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("bad window value '{s}' in '{spec}'")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step == 0 || a > b {
                return Err(invalid(format!("range '{spec}' needs a <= b and step > 0")));
            }
            Ok((a..=b).step_by(step).collect())
        }
        _ => Err(invalid(format!("window '{spec}' is neither an integer nor a:b:step"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WindowsField {
    List(Vec<usize>),
    Single(usize),
    Spec(String),
}

/// Raw file contents; every key is optional except `experiment`, `T`
/// and `tau`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    experiment: String,
    #[serde(rename = "T")]
    horizon: usize,
    tau: usize,
    #[serde(rename = "M")]
    windows: Option<WindowsField>,
    reps: Option<usize>,
    seed: Option<u64>,
    geometry: Option<String>,
    #[serde(alias = "eta_f")]
    eta_f: Option<f64>,
    #[serde(alias = "eta_s")]
    eta_s: Option<f64>,
    block: Option<usize>,
    gap: Option<usize>,
    #[serde(alias = "trace_stride")]
    trace_stride: Option<usize>,
    out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Experiment configuration and output path.
    pub fn into_config(self) -> Result<(ExperimentConfig, Option<PathBuf>)> {
        let kind: ExperimentKind = self.experiment.parse()?;
        let mut cfg = ExperimentConfig::new(kind, self.horizon, self.tau);
        if let Some(w) = self.windows {
            cfg.windows = match w {
                WindowsField::List(v) => v,
                WindowsField::Single(m) => vec![m],
                WindowsField::Spec(s) => parse_window_spec(&s)?,
            };
        }
        if let Some(r) = self.reps {
            cfg.reps = r;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(g) = self.geometry {
            cfg.geometry = g.parse::<GeometryChoice>()?;
        }
        cfg.eta_first = self.eta_f;
        cfg.eta_second = self.eta_s;
        cfg.block_size = self.block;
        cfg.gap = self.gap;
        if let Some(s) = self.trace_stride {
            cfg.trace_stride = s;
        }
        Ok((cfg, self.out))
    }
}
