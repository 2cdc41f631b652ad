use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{custom::CustomModel, DiffusionModel, OriginBoundary, PowerLawFamily};
use crate::error::{Error, Result};

/// Serializable description of a model, e.g.
/// `{"family": "gbm", "params": {"lambda": 1.0, "sigma": 1.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Bessel {
        delta: f64,
    },
    SquaredBessel {
        delta: f64,
    },
    Gbm {
        lambda: f64,
        sigma: f64,
    },
    Explosive {
        lambda: f64,
        kappa: f64,
        p: f64,
    },
    PowerLaw {
        alpha: f64,
        beta: f64,
        mu: f64,
        nu: f64,
    },
    Custom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        drift: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diffusion: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        speed: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<OriginBoundary>,
    },
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("model file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model specs always serialize")
    }

    pub fn build(&self) -> Result<DiffusionModel> {
        match self {
            ModelSpec::Bessel { delta } => DiffusionModel::bessel(*delta),
            ModelSpec::SquaredBessel { delta } => DiffusionModel::squared_bessel(*delta),
            ModelSpec::Gbm { lambda, sigma } => DiffusionModel::gbm(*lambda, *sigma),
            ModelSpec::Explosive { lambda, kappa, p } => DiffusionModel::explosive(*lambda, *kappa, *p),
            ModelSpec::PowerLaw { alpha, beta, mu, nu } => {
                DiffusionModel::power_law(PowerLawFamily::new(*alpha, *beta, *mu, *nu)?)
            }
            ModelSpec::Custom { name, drift, diffusion, scale, speed, origin } => {
                let custom = CustomModel::new(
                    name.as_deref(),
                    drift.as_deref(),
                    diffusion.as_deref(),
                    scale.as_deref(),
                    speed.as_deref(),
                    *origin,
                )?;
                Ok(DiffusionModel::from_custom(custom, self.clone()))
            }
        }
    }
}
