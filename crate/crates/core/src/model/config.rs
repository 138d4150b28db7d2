//! TOML parameter files.
//!
//! ```toml
//! [market]
//! r = 0.02
//! mu_m = 0.05
//! sigma_m = 0.35
//! beta1 = 1.2
//! beta2 = 1.05
//! sigma = 0.3
//! b1 = 0.3
//! b2 = 0.2
//! T = 1.0
//!
//! [regimes]
//! lambda1 = [0.5, -0.3]
//! lambda2 = [-0.2, 0.6]
//! alpha1 = [0.0, 0.0]
//! alpha2 = [0.0, 0.0]
//!
//! [chain]
//! Q = [[-0.01, 0.01], [0.02, -0.02]]
//! initial = [1.0, 0.0]
//! ```

use serde::{Deserialize, Serialize};

use super::{validate_params, GeneratorMatrix, ModelParams, RegimeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub r: f64,
    pub mu_m: f64,
    pub sigma_m: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub sigma: f64,
    pub b1: f64,
    pub b2: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

/// On-disk layout of a parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub market: MarketSection,
    pub regimes: RegimeSection,
    pub chain: ChainSection,
}

impl From<ParamsFile> for ModelParams {
    fn from(f: ParamsFile) -> Self {
        let m = f.market;
        ModelParams {
            r: m.r,
            mu_m: m.mu_m,
            sigma_m: m.sigma_m,
            beta1: m.beta1,
            beta2: m.beta2,
            sigma: m.sigma,
            b1: m.b1,
            b2: m.b2,
            horizon: m.horizon,
            regimes: RegimeTable {
                lambda1: f.regimes.lambda1,
                lambda2: f.regimes.lambda2,
                alpha1: f.regimes.alpha1,
                alpha2: f.regimes.alpha2,
            },
            generator: GeneratorMatrix::new(f.chain.q, f.chain.initial),
        }
    }
}

impl From<&ModelParams> for ParamsFile {
    fn from(p: &ModelParams) -> Self {
        ParamsFile {
            market: MarketSection {
                r: p.r,
                mu_m: p.mu_m,
                sigma_m: p.sigma_m,
                beta1: p.beta1,
                beta2: p.beta2,
                sigma: p.sigma,
                b1: p.b1,
                b2: p.b2,
                horizon: p.horizon,
            },
            regimes: RegimeSection {
                lambda1: p.regimes.lambda1.clone(),
                lambda2: p.regimes.lambda2.clone(),
                alpha1: p.regimes.alpha1.clone(),
                alpha2: p.regimes.alpha2.clone(),
            },
            chain: ChainSection {
                q: p.generator.q.clone(),
                initial: p.generator.initial.clone(),
            },
        }
    }
}

impl ModelParams {
    /// Parses and validates a parameter file.
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let file: ParamsFile = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        validate_params(file.into())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ParamsFile::from(self)).expect("parameter file serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    const FIG1: &str = r#"
[market]
r = 0.02
mu_m = 0.05
sigma_m = 0.35
beta1 = 1.2
beta2 = 1.05
sigma = 0.3
b1 = 0.3
b2 = 0.2
T = 1.0

[regimes]
lambda1 = [0.5, -0.3]
lambda2 = [-0.2, 0.6]
alpha1 = [0.0, 0.0]
alpha2 = [0.0, 0.0]

[chain]
Q = [[-0.01, 0.01], [0.02, -0.02]]
initial = [1.0, 0.0]
"#;

    #[test]
    fn parses_documented_layout() {
        assert_eq!(ModelParams::from_toml_str(FIG1).unwrap(), presets::fig1());
    }

    #[test]
    fn round_trips_through_toml() {
        let p = presets::fig4();
        assert_eq!(ModelParams::from_toml_str(&p.to_toml_string()).unwrap(), p);
    }

    #[test]
    fn missing_and_invalid_fields_are_reported() {
        let missing = FIG1.replace("sigma = 0.3\n", "");
        let err = ModelParams::from_toml_str(&missing).unwrap_err().to_string();
        assert!(err.contains("sigma"), "{err}");

        let bad = FIG1.replace("sigma_m = 0.35", "sigma_m = -1.0");
        let err = ModelParams::from_toml_str(&bad).unwrap_err().to_string();
        assert!(err.starts_with("market.sigma_m"), "{err}");
    }
}
