//! Experiment configuration files.
//!
//! A config file is a parameter file (`[market]`, `[regimes]`, `[chain]`)
//! with an optional `[run]` table. Parameter sections may be omitted
//! together, in which case the experiment's built-in parameters are used.
//!
//! ```toml
//! [run]
//! seed = 7
//! dt = 0.001
//! n_paths = 20000
//! ```

use serde::{Deserialize, Serialize};

use convlab_core::model::{validate_params, ChainSection, MarketSection, ParamsFile, RegimeSection};
use convlab_core::ModelParams;

use crate::{CliError, Result};

/// Named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Custom,
}

impl Experiment {
    pub const NAMED: [Experiment; 4] = [Experiment::Fig1, Experiment::Fig2, Experiment::Fig3, Experiment::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Custom => "custom",
        }
    }

    fn preset(self) -> Option<ModelParams> {
        use convlab_core::model::presets;
        match self {
            Experiment::Fig1 => Some(presets::fig1()),
            Experiment::Fig2 => Some(presets::fig2()),
            Experiment::Fig3 => Some(presets::fig3()),
            Experiment::Fig4 => Some(presets::fig4()),
            Experiment::Custom => None,
        }
    }

    /// Defaulted settings, recorded as assumptions in run metadata.
    pub fn assumptions(self) -> Vec<&'static str> {
        match self {
            Experiment::Fig1 => vec!["T = 1 and dt = 1e-3 (assumed)", "chain starts in regime 1; x0 = 0.01"],
            Experiment::Fig2 => vec!["x-grid [-1, 1] and time-to-go grid (0, 2] with 50 points each"],
            Experiment::Fig3 => vec![
                "b1 = 0.3, b2 = 0.2 (assumed, same as fig1)",
                "T = 1 and dt = 1e-3; chain and filter start in regime 2 (p0 = 0)",
            ],
            Experiment::Fig4 => vec![
                "b1 = 0.3, b2 = 0.2 (assumed, same as fig1)",
                "T = 1 and x = x0 = 0.05; loss surface written on a grid thinned to at most 101 x 101 nodes",
            ],
            Experiment::Custom => vec![],
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [
            Experiment::Fig1,
            Experiment::Fig2,
            Experiment::Fig3,
            Experiment::Fig4,
            Experiment::Custom,
        ]
        .into_iter()
        .find(|e| e.name() == s)
        .ok_or_else(|| format!("unknown experiment `{s}` (expected fig1, fig2, fig3, fig4 or custom)"))
    }
}

/// Grid and simulation settings. Unset values take per-experiment
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    market: Option<MarketSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regimes: Option<RegimeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain: Option<ChainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    run: Option<RunSection>,
}

/// Fully resolved settings for one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: ModelParams,
    pub seed: u64,
    pub dt: f64,
    pub n_t: usize,
    pub n_p: usize,
    pub n_paths: usize,
    pub x0: f64,
    pub w0: f64,
    /// Initial law of the chain, also the filter's starting point.
    pub p0: Vec<f64>,
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {reason}"))
}

impl ExperimentConfig {
    /// Built-in configuration of a named experiment.
    pub fn named(experiment: Experiment) -> Result<Self> {
        Self::resolve(experiment, None, RunSection::default())
    }

    /// Reads a config file; parameter sections override the experiment's
    /// built-in parameters and `[run]` overrides its defaults.
    pub fn from_toml_str(experiment: Experiment, text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let params = match (file.market, file.regimes, file.chain) {
            (Some(market), Some(regimes), Some(chain)) => {
                Some(ModelParams::from(ParamsFile { market, regimes, chain }))
            }
            (None, None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "[market], [regimes] and [chain] must be given together".into(),
                ))
            }
        };
        Self::resolve(experiment, params, file.run.unwrap_or_default())
    }

    pub fn from_path(experiment: Experiment, path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(experiment, &text)
    }

    fn resolve(experiment: Experiment, params: Option<ModelParams>, run: RunSection) -> Result<Self> {
        let params = match params.or_else(|| experiment.preset()) {
            Some(p) => validate_params(p)?,
            None => {
                return Err(CliError::Config(
                    "custom experiment needs parameter sections in --config".into(),
                ))
            }
        };
        let k = params.k();
        let p0 = run.p0.unwrap_or_else(|| params.generator.initial.clone());
        let total: f64 = p0.iter().sum();
        if p0.len() != k || p0.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(config_error(
                "run.p0",
                format!("must be a probability vector of length {k}"),
            ));
        }
        let default_x0 = match experiment {
            Experiment::Fig1 => 0.01,
            Experiment::Fig2 => 0.5,
            Experiment::Fig3 | Experiment::Fig4 => 0.05,
            Experiment::Custom => 0.0,
        };
        let cfg = Self {
            experiment,
            seed: run.seed.unwrap_or(7),
            dt: run.dt.unwrap_or(1e-3),
            n_t: run.n_t.unwrap_or(2000),
            n_p: run.n_p.unwrap_or(200),
            n_paths: run.n_paths.unwrap_or(20_000),
            x0: run.x0.unwrap_or(default_x0),
            w0: run.w0.unwrap_or(1.0),
            p0,
            params,
        };
        if !(cfg.dt > 0.0 && cfg.dt < cfg.params.horizon) {
            return Err(config_error("run.dt", "must lie in (0, T)"));
        }
        if cfg.n_t < 10 {
            return Err(config_error("run.n_t", "must be at least 10"));
        }
        if cfg.n_p < 50 {
            return Err(config_error("run.n_p", "must be at least 50"));
        }
        if cfg.n_paths < 100 {
            return Err(config_error("run.n_paths", "must be at least 100"));
        }
        if !(cfg.w0 > 0.0) {
            return Err(config_error("run.w0", "must be positive"));
        }
        if !cfg.x0.is_finite() {
            return Err(config_error("run.x0", "must be finite"));
        }
        Ok(cfg)
    }

    /// Config file that reproduces this run exactly.
    pub fn to_toml_string(&self) -> Result<String> {
        let ParamsFile { market, regimes, chain } = ParamsFile::from(&self.params);
        let file = ConfigFile {
            market: Some(market),
            regimes: Some(regimes),
            chain: Some(chain),
            run: Some(RunSection {
                seed: Some(self.seed),
                dt: Some(self.dt),
                n_t: Some(self.n_t),
                n_p: Some(self.n_p),
                n_paths: Some(self.n_paths),
                x0: Some(self.x0),
                w0: Some(self.w0),
                p0: Some(self.p0.clone()),
            }),
        };
        toml::to_string(&file).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_defaults() {
        let c = ExperimentConfig::named(Experiment::Fig2).unwrap();
        assert_eq!(c.params, convlab_core::model::presets::fig2());
        assert_eq!(c.x0, 0.5);
        assert_eq!(c.dt, 1e-3);
        assert!(ExperimentConfig::named(Experiment::Custom).is_err());
    }

    #[test]
    fn round_trip_through_toml() {
        let mut c = ExperimentConfig::named(Experiment::Fig3).unwrap();
        c.seed = 99;
        c.x0 = -0.25;
        let text = c.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(Experiment::Fig3, &text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn run_only_file_keeps_preset_parameters() {
        let c = ExperimentConfig::from_toml_str(Experiment::Fig1, "[run]\nseed = 3\nn_paths = 500\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.n_paths, 500);
        assert_eq!(c.params, convlab_core::model::presets::fig1());
    }

    #[test]
    fn errors_name_their_field() {
        let e = ExperimentConfig::from_toml_str(Experiment::Fig1, "[run]\nn_p = 10\n").unwrap_err();
        assert!(e.to_string().contains("run.n_p"), "{e}");
        let e = ExperimentConfig::from_toml_str(Experiment::Fig1, "[run]\np0 = [0.5]\n").unwrap_err();
        assert!(e.to_string().contains("run.p0"), "{e}");
        let e = ExperimentConfig::from_toml_str(Experiment::Fig1, "[run]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let mut p = ExperimentConfig::named(Experiment::Fig1)
            .unwrap()
            .to_toml_string()
            .unwrap();
        p = p.replace("sigma_m = 0.35", "sigma_m = -0.35");
        let e = ExperimentConfig::from_toml_str(Experiment::Fig1, &p).unwrap_err();
        assert!(e.to_string().contains("market.sigma_m"), "{e}");
        assert!(e.is_config());
    }

    #[test]
    fn partial_parameter_sections_are_rejected() {
        let e =
            ExperimentConfig::from_toml_str(Experiment::Custom, "[chain]\nQ = [[0.0]]\ninitial = [1.0]\n").unwrap_err();
        assert!(e.to_string().contains("together"));
    }
}
