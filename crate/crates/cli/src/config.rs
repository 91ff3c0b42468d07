//! Run configuration: a section-headed `key = value` file, overridden by
//! command-line flags.
//!
//! ```text
//! [domain]
//! dim = 2
//! grid = 32
//! horizon = 1.0
//! steps = 32
//! omega = 0.3, 0.7
//! omega0 = 0.4, 0.6
//!
//! [carleman]
//! s = 1, 2, 4, 8, 16
//! ```

use std::path::{Path, PathBuf};

use ini::Ini;
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainConfig {
    pub dim: usize,
    pub grid: usize,
    pub horizon: f64,
    pub steps: usize,
    pub omega: Vec<f64>,
    pub omega0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightsConfig {
    pub lambda: f64,
    pub eta: String,
    pub peak: Option<f64>,
    /// Constant `c₀` of the stationary weight.
    pub c0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardConfig {
    pub problem: String,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarlemanConfig {
    pub s: Vec<f64>,
    pub m: u32,
    pub problem: String,
    /// `one` or `box:x0,y0,x1,y1`.
    pub g: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityConfig {
    pub sources: usize,
    pub m_bound: f64,
    pub amplitude: f64,
    pub family: String,
    pub bumps: usize,
    pub coefficients: f64,
    /// Interior observation window as fractions of `T`.
    pub window: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionConfig {
    pub amplitude: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExamplesConfig {
    pub grid: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub plots: bool,
    pub domain: DomainConfig,
    pub weights: WeightsConfig,
    pub forward: ForwardConfig,
    pub carleman: CarlemanConfig,
    pub stability: StabilityConfig,
    pub obstruction: ObstructionConfig,
    pub examples: ExamplesConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            plots: false,
            domain: DomainConfig { dim: 2, grid: 32, horizon: 1.0, steps: 32, omega: vec![0.3, 0.7], omega0: vec![0.4, 0.6] },
            weights: WeightsConfig { lambda: 1.0, eta: "analytic".into(), peak: None, c0: 0.0 },
            forward: ForwardConfig { problem: "oscillating".into(), tolerance: 1e-10 },
            carleman: CarlemanConfig { s: vec![1.0, 2.0, 4.0, 8.0, 16.0], m: 0, problem: "mix-1".into(), g: "one".into() },
            stability: StabilityConfig {
                sources: 20,
                m_bound: 5.0,
                amplitude: 1.0,
                family: "cosine:1".into(),
                bumps: 2,
                coefficients: 0.2,
                window: None,
            },
            obstruction: ObstructionConfig { amplitude: 1.0, radius: 0.08 },
            examples: ExamplesConfig { grid: 16, steps: 8 },
        }
    }
}

fn bad(section: &str, key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("[{section}] {key} = '{value}': expected {what}"))
}

fn num<T: std::str::FromStr>(section: &str, key: &str, value: &str, what: &str) -> Result<T, CliError> {
    value.trim().parse().map_err(|_| bad(section, key, value, what))
}

/// Comma-separated reals.
pub fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", x.trim())))
        .collect()
}

fn list(section: &str, key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    parse_list(value).map_err(|_| bad(section, key, value, "a comma-separated list of numbers"))
}

fn boolean(section: &str, key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(section, key, value, "true or false")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        for (section, props) in ini.iter() {
            let name = section.unwrap_or("");
            for (key, value) in props.iter() {
                cfg.set(name, key, value)?;
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), CliError> {
        let s = section;
        match (section, key) {
            ("", "seed") => self.seed = num(s, key, v, "an unsigned integer")?,
            ("output", "dir") => self.out = PathBuf::from(v.trim()),
            ("output", "plots") => self.plots = boolean(s, key, v)?,
            ("domain", "dim") => self.domain.dim = num(s, key, v, "2 or 3")?,
            ("domain", "grid") => self.domain.grid = num(s, key, v, "a cell count")?,
            ("domain", "horizon") => self.domain.horizon = num(s, key, v, "a positive real")?,
            ("domain", "steps") => self.domain.steps = num(s, key, v, "a step count")?,
            ("domain", "omega") => self.domain.omega = list(s, key, v)?,
            ("domain", "omega0") => self.domain.omega0 = list(s, key, v)?,
            ("weights", "lambda") => self.weights.lambda = num(s, key, v, "a real")?,
            ("weights", "eta") => self.weights.eta = v.trim().to_string(),
            ("weights", "peak") => self.weights.peak = Some(num(s, key, v, "a real")?),
            ("weights", "c0") => self.weights.c0 = num(s, key, v, "a real")?,
            ("forward", "problem") => self.forward.problem = v.trim().to_string(),
            ("forward", "tolerance") => self.forward.tolerance = num(s, key, v, "a real")?,
            ("carleman", "s") => self.carleman.s = list(s, key, v)?,
            ("carleman", "m") => self.carleman.m = num(s, key, v, "0 or a positive integer")?,
            ("carleman", "problem") => self.carleman.problem = v.trim().to_string(),
            ("carleman", "g") => self.carleman.g = v.trim().to_string(),
            ("stability", "sources") => self.stability.sources = num(s, key, v, "a source count")?,
            ("stability", "m_bound") => self.stability.m_bound = num(s, key, v, "a real")?,
            ("stability", "amplitude") => self.stability.amplitude = num(s, key, v, "a real")?,
            ("stability", "family") => self.stability.family = v.trim().to_string(),
            ("stability", "bumps") => self.stability.bumps = num(s, key, v, "a bump count")?,
            ("stability", "coefficients") => self.stability.coefficients = num(s, key, v, "a real")?,
            ("stability", "window") => {
                let w = list(s, key, v)?;
                if w.len() != 2 {
                    return Err(bad(s, key, v, "two fractions start, end"));
                }
                self.stability.window = Some((w[0], w[1]));
            }
            ("obstruction", "amplitude") => self.obstruction.amplitude = num(s, key, v, "a real")?,
            ("obstruction", "radius") => self.obstruction.radius = num(s, key, v, "a real")?,
            ("examples", "grid") => self.examples.grid = num(s, key, v, "a cell count")?,
            ("examples", "steps") => self.examples.steps = num(s, key, v, "a step count")?,
            _ => {
                let where_ = if section.is_empty() { "the top level".to_string() } else { format!("section [{section}]") };
                return Err(CliError::Config(format!("unknown key '{key}' in {where_}")));
            }
        }
        Ok(())
    }

    /// Checks what every subcommand relies on.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.domain;
        if d.dim != 2 && d.dim != 3 {
            return Err(CliError::Config(format!("domain dim must be 2 or 3, got {}", d.dim)));
        }
        for (name, b) in [("omega", &d.omega), ("omega0", &d.omega0)] {
            if b.len() != 2 && b.len() != 2 * d.dim {
                return Err(CliError::Config(format!("{name} needs 2 values (lo, hi) or {} (lo per axis, hi per axis)", 2 * d.dim)));
            }
        }
        let s = &self.carleman.s;
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("carleman s list must be strictly ascending".into()));
        }
        if let Some((a, b)) = self.stability.window {
            if !(0.0 <= a && a < b && b <= 1.0) {
                return Err(CliError::Config("stability window must satisfy 0 <= start < end <= 1".into()));
            }
        }
        Ok(())
    }

    /// `(lo, hi)` per axis for a region given as a cube or per-axis list.
    pub fn region(values: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
        if values.len() == 2 {
            (vec![values[0]; dim], vec![values[1]; dim])
        } else {
            (values[..dim].to_vec(), values[dim..].to_vec())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_lists() {
        let cfg = RunConfig::parse(
            "seed = 7\n[domain]\ngrid = 24\nomega = 0.2, 0.8\n# comment\n[carleman]\ns = 1, 2, 4, 8\n[stability]\nwindow = 0.25, 0.75\n[output]\nplots = yes\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.domain.grid, 24);
        assert_eq!(cfg.domain.omega, vec![0.2, 0.8]);
        assert_eq!(cfg.carleman.s, vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(cfg.stability.window, Some((0.25, 0.75)));
        assert!(cfg.plots);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("[domain]\ncells = 3\n").unwrap_err();
        assert!(err.to_string().contains("unknown key 'cells' in section [domain]"), "{err}");
    }

    #[test]
    fn malformed_value_rejected() {
        let err = RunConfig::parse("[domain]\ngrid = many\n").unwrap_err();
        assert!(err.to_string().contains("[domain] grid = 'many'"), "{err}");
    }

    #[test]
    fn descending_s_rejected() {
        let cfg = RunConfig::parse("[carleman]\ns = 4, 2, 8, 16\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn per_axis_region() {
        assert_eq!(RunConfig::region(&[0.1, 0.2, 0.5, 0.6], 2), (vec![0.1, 0.2], vec![0.5, 0.6]));
        assert_eq!(RunConfig::region(&[0.3, 0.7], 3), (vec![0.3; 3], vec![0.7; 3]));
    }
}
