//! Experiment configuration: a TOML file with `[model]`, `[grid]`,
//! `[analysis]` and `[io]` tables. Every key has a default, so an empty file
//! is a valid configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use entrosc_core::dynamics::{max_stable_dt, ModelParams, DEFAULT_CFL, ETA_MAX};
use entrosc_core::field::{DiffScheme, Grid};

use crate::error::CliError;
use crate::report::Format;

/// Largest weight parameter admitted for the decay functional: the weight's
/// log-derivative is at most `2δ`, and the functional needs
/// `δ <= 1 / (40 · 2)`.
pub const DELTA_MAX: f64 = 1.0 / 80.0;

/// One rejected configuration value.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    #[default]
    Fd4,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub eta: f64,
    pub eta0: f64,
    pub alpha: f64,
    pub mu_f1: f64,
    /// Time step; the largest stable step when absent.
    pub dt: Option<f64>,
    pub scheme: SchemeName,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            eta: 0.1,
            eta0: ETA_MAX,
            alpha: 0.25,
            mu_f1: 0.05,
            dt: None,
            scheme: SchemeName::Fd4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            x_min: -40.0,
            x_max: 40.0,
            n: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Weight parameter of the decay functional.
    pub delta: f64,
    /// Weight parameter of windowed norms.
    pub window_delta: f64,
    pub k_star: f64,
    /// Constant in the decay rate `γ = min(η⁻², k*²/c_nu)/320`.
    pub c_nu: f64,
    pub eps_list: Vec<f64>,
    pub lengths: Vec<f64>,
    pub burn_in: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Horizon of the topological-entropy bundle.
    #[serde(alias = "T")]
    pub horizon: f64,
    pub tau_step: f64,
    /// Shrink constant of the ball-growth check.
    pub shrink_const: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            delta: DELTA_MAX,
            window_delta: 0.5,
            k_star: 10.0,
            c_nu: 1.0,
            eps_list: vec![0.2, 0.1, 0.05],
            lengths: vec![10.0, 20.0, 40.0],
            burn_in: 200.0,
            ensemble_size: 32,
            seed: 1,
            horizon: 10.0,
            tau_step: 1.0,
            shrink_const: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub format: Format,
    /// Ensemble to analyse instead of generating one.
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub analysis: AnalysisSection,
    pub io: IoSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(Grid::new(self.grid.x_min, self.grid.x_max, self.grid.n)?)
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let grid = self.grid()?;
        let scheme = match self.model.scheme {
            SchemeName::Fd4 => DiffScheme::FiniteDifference4,
            SchemeName::Spectral => DiffScheme::Spectral,
        };
        let p = ModelParams {
            eta: self.model.eta,
            eta0: self.model.eta0,
            alpha: self.model.alpha,
            mu_f1: self.model.mu_f1,
            dt: self
                .model
                .dt
                .unwrap_or_else(|| max_stable_dt(self.model.eta, grid.dx(), DEFAULT_CFL)),
            scheme,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        let mut reject = |field: &str, message: String| {
            errors.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        let m = &self.model;
        if !(m.eta0 > 0.0 && m.eta0 <= ETA_MAX) {
            reject(
                "model.eta0",
                format!("{} violates 0 < η₀ ≤ 1/√40 ≈ {ETA_MAX:.6}", m.eta0),
            );
        }
        if !(m.eta > 0.0 && m.eta < m.eta0.min(ETA_MAX)) {
            reject(
                "model.eta",
                format!(
                    "{} violates 0 < η < η₀ ≤ 1/√40 ≈ {ETA_MAX:.6} (η₀ = {})",
                    m.eta, m.eta0
                ),
            );
        }
        if !(m.alpha > 0.0 && m.alpha <= 0.5) {
            reject("model.alpha", format!("{} violates 0 < α ≤ 1/2", m.alpha));
        }
        if !(m.mu_f1 > 0.0 && m.mu_f1.is_finite()) {
            reject("model.mu_f1", format!("{} must be positive", m.mu_f1));
        }

        let g = &self.grid;
        let grid_ok = g.x_max > g.x_min && g.n >= 8 && g.n % 2 == 0;
        if !grid_ok {
            reject(
                "grid",
                format!(
                    "need x_max > x_min and an even n >= 8, got [{}, {}] with n = {}",
                    g.x_min, g.x_max, g.n
                ),
            );
        }
        if let (true, Some(dt)) = (grid_ok && m.eta > 0.0, m.dt) {
            let dx = (g.x_max - g.x_min) / g.n as f64;
            let limit = max_stable_dt(m.eta, dx, DEFAULT_CFL);
            if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
                reject(
                    "model.dt",
                    format!("{dt} violates 0 < dt ≤ min(η·dx/2, η²/2) = {limit:.6e}"),
                );
            }
        }

        let a = &self.analysis;
        if !(a.c_nu > 0.0 && a.c_nu.is_finite()) {
            reject("analysis.c_nu", format!("{} must be positive", a.c_nu));
        }
        if !(a.delta > 0.0 && a.delta <= DELTA_MAX) {
            reject(
                "analysis.delta",
                format!(
                    "{} violates 0 < δ ≤ 1/(40·sup|h′/h|/δ) = 1/80 (the weight's log-derivative is at most 2δ)",
                    a.delta
                ),
            );
        }
        if !(a.window_delta > 0.0 && a.window_delta <= 0.5) {
            reject(
                "analysis.window_delta",
                format!("{} violates 0 < δ ≤ 1/2 for the weight", a.window_delta),
            );
        }
        if !(a.k_star > 0.0 && a.k_star.is_finite()) {
            reject("analysis.k_star", format!("{} must be positive", a.k_star));
        }
        if a.eps_list.is_empty() || a.eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            reject(
                "analysis.eps_list",
                format!("{:?}: need a non-empty list of radii in (0, 1)", a.eps_list),
            );
        }
        if a.lengths.is_empty() || a.lengths[0] <= 0.0 || a.lengths.windows(2).any(|w| w[1] <= w[0]) {
            reject(
                "analysis.lengths",
                format!("{:?}: need strictly increasing positive half-widths", a.lengths),
            );
        } else if grid_ok {
            let largest = *a.lengths.last().expect("non-empty");
            if -largest < g.x_min || largest > g.x_max {
                reject(
                    "analysis.lengths",
                    format!(
                        "window [-{largest}, {largest}] leaves the domain [{}, {}]",
                        g.x_min, g.x_max
                    ),
                );
            }
        }
        if !(a.burn_in >= 0.0 && a.burn_in.is_finite()) {
            reject("analysis.burn_in", format!("{} must be >= 0", a.burn_in));
        }
        if a.ensemble_size == 0 {
            reject("analysis.ensemble_size", "must be at least 1".to_string());
        }
        let ratio = a.horizon / a.tau_step;
        if !(a.tau_step > 0.0 && ratio >= 1.0 && (ratio - ratio.round()).abs() <= 1e-9 * ratio) {
            reject(
                "analysis.horizon",
                format!(
                    "T = {} must be a positive integer multiple of tau_step = {}",
                    a.horizon, a.tau_step
                ),
            );
        }
        if !(a.shrink_const >= 0.0 && a.shrink_const.is_finite()) {
            reject("analysis.shrink_const", format!("{} must be >= 0", a.shrink_const));
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::InvalidConfig(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rejected_fields(text: &str) -> Vec<String> {
        match ExperimentConfig::from_toml(text) {
            Err(CliError::InvalidConfig(errors)) => errors.into_iter().map(|e| e.field).collect(),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let p = cfg.model_params().unwrap();
        assert_eq!(p.scheme, DiffScheme::FiniteDifference4);
        assert!((p.dt - 0.5 * 0.1 * 80.0 / 4096.0).abs() < 1e-15);
    }

    #[test]
    fn all_violations_are_reported() {
        let fields = rejected_fields(
            "[model]\neta = 0.2\n[analysis]\ndelta = 0.02\neps_list = []\nhorizon = 2.5\ntau_step = 1.0\n",
        );
        assert_eq!(
            fields,
            vec!["model.eta", "analysis.delta", "analysis.eps_list", "analysis.horizon"]
        );
    }

    #[test]
    fn messages_cite_the_constraint() {
        let err = ExperimentConfig::from_toml("[model]\neta = 0.16\n").unwrap_err();
        assert!(err.to_string().contains("η < η₀ ≤ 1/√40"));
        let err = ExperimentConfig::from_toml("[analysis]\ndelta = 0.0126\n").unwrap_err();
        assert!(err.to_string().contains("δ ≤ 1/(40·sup|h′/h|/δ) = 1/80"));
    }

    #[test]
    fn unknown_keys_and_bad_steps() {
        assert!(matches!(
            ExperimentConfig::from_toml("[model]\netta = 0.1\n"),
            Err(CliError::ParseConfig(_))
        ));
        assert_eq!(rejected_fields("[model]\ndt = 0.01\n"), vec!["model.dt"]);
        assert_eq!(rejected_fields("[analysis]\nlengths = [10.0, 50.0]\n"), vec!["analysis.lengths"]);
    }

    #[test]
    fn horizon_alias() {
        let cfg = ExperimentConfig::from_toml("[analysis]\nT = 4.0\ntau_step = 0.5\n").unwrap();
        assert_eq!(cfg.analysis.horizon, 4.0);
    }
}
