use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdaptivityDemoModel, AffineModel, CircularModel, CorrelationModel, FactorConstraint, FactorModel};
use crate::error::{Error, Result};
use crate::numcore::SymMatrix;

/// JSON model descriptor, e.g. `{"family": "toeplitz", "p": 4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Unrestricted {
        p: usize,
    },
    Exchangeable {
        p: usize,
    },
    Toeplitz {
        p: usize,
    },
    Circular,
    Factor {
        p: usize,
        q: usize,
        #[serde(default)]
        constraint: FactorConstraint,
    },
    AdaptivityDemo,
    /// R(θ) = I + Σ θ_m G_m; each generator is a p×p nested array.
    CustomAffine {
        p: usize,
        generators: Vec<Vec<Vec<f64>>>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn CorrelationModel>> {
        Ok(match self {
            ModelSpec::Unrestricted { p } => Box::new(AffineModel::unrestricted(*p)?),
            ModelSpec::Exchangeable { p } => Box::new(AffineModel::exchangeable(*p)?),
            ModelSpec::Toeplitz { p } => Box::new(AffineModel::toeplitz(*p)?),
            ModelSpec::Circular => Box::new(CircularModel),
            ModelSpec::Factor { p, q, constraint } => Box::new(FactorModel::new(*p, *q, *constraint)?),
            ModelSpec::AdaptivityDemo => Box::new(AdaptivityDemoModel),
            ModelSpec::CustomAffine { p, generators } => {
                let mut gens = Vec::with_capacity(generators.len());
                for (m, rows) in generators.iter().enumerate() {
                    let field = format!("generators[{m}]");
                    if rows.len() != *p || rows.iter().any(|r| r.len() != *p) {
                        return Err(Error::config(field, format!("expected a {p}x{p} matrix")));
                    }
                    let g = SymMatrix::from_rows(rows).map_err(|e| Error::config(field, e.to_string()))?;
                    gens.push(g);
                }
                Box::new(AffineModel::custom(*p, gens)?)
            }
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Unrestricted { .. } => "unrestricted",
            ModelSpec::Exchangeable { .. } => "exchangeable",
            ModelSpec::Toeplitz { .. } => "toeplitz",
            ModelSpec::Circular => "circular",
            ModelSpec::Factor { .. } => "factor",
            ModelSpec::AdaptivityDemo => "adaptivity_demo",
            ModelSpec::CustomAffine { .. } => "custom_affine",
        }
    }
}

/// Best-effort name of the field a serde error refers to.
fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return if marker == "unknown variant `" {
                    "family".into()
                } else {
                    name.to_string()
                };
            }
        }
    }
    if msg.contains("family") {
        "family".into()
    } else {
        "model".into()
    }
}
