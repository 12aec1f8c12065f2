//! JSON model files.
//!
//! ```json
//! {
//!   "target":   { "kind": "finite", "mass": [2, 1] },
//!   "proposal": { "kind": "finite", "matrix": [[0, 1], [1, 0]] },
//!   "weights":  { "kind": "independent-finite",
//!                 "atoms": [ [[1, 1]], [[0, "3/4"], [4, "1/4"]] ] },
//!   "phi": [ { "label": "phi", "values": ["-1/2", 1] } ]
//! }
//! ```
//!
//! Atoms are `[w, p]` pairs; exchangeable models list their tuples under
//! `"tuples"` instead. Any number may be written as a fraction string.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AtomTable, FiniteModel, FiniteProposal, FiniteTarget, Scalar, TupleSet, WeightModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Finite {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
        mass: Vec<Scalar>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProposalConfig {
    Finite { matrix: Vec<Vec<Scalar>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightsConfig {
    IndependentFinite { atoms: Vec<Vec<[Scalar; 2]>> },
    ExchangeableFinite { tuples: Vec<Vec<Vec<Scalar>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub label: String,
    pub values: Vec<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub target: TargetConfig,
    pub proposal: ProposalConfig,
    pub weights: WeightsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phi: Vec<PhiConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model file serializes")
    }

    pub fn build(&self) -> Result<FiniteModel> {
        let TargetConfig::Finite { labels, mass } = &self.target;
        let labels = match labels {
            Some(l) => l.clone(),
            None => (1..=mass.len()).map(|i| i.to_string()).collect(),
        };
        let target = FiniteTarget::new(labels, mass.clone())?;
        let ProposalConfig::Finite { matrix } = &self.proposal;
        let proposal = FiniteProposal::new(matrix.clone())?;
        let weights = match &self.weights {
            WeightsConfig::IndependentFinite { atoms } => WeightModel::IndependentFinite(
                atoms
                    .iter()
                    .map(|row| AtomTable::new(row.iter().map(|[w, p]| (*w, *p)).collect()))
                    .collect::<Result<_>>()?,
            ),
            WeightsConfig::ExchangeableFinite { tuples } => WeightModel::ExchangeableFinite(
                tuples
                    .iter()
                    .map(|set| TupleSet::new(set.clone()))
                    .collect::<Result<_>>()?,
            ),
        };
        let model = FiniteModel::new(target, proposal, weights)?;
        for phi in &self.phi {
            if phi.values.len() != model.num_states() {
                return Err(Error::InvalidModel(format!(
                    "test function `{}` has {} values for {} states",
                    phi.label,
                    phi.values.len(),
                    model.num_states()
                )));
            }
        }
        Ok(model)
    }

    /// Test functions as `(label, values)`.
    pub fn test_functions(&self) -> Vec<(String, Vec<f64>)> {
        self.phi
            .iter()
            .map(|p| {
                (
                    p.label.clone(),
                    p.values.iter().map(Scalar::value).collect(),
                )
            })
            .collect()
    }

    pub fn from_model(model: &FiniteModel) -> Self {
        let target = TargetConfig::Finite {
            labels: Some(model.target.labels().to_vec()),
            mass: model.target.masses().to_vec(),
        };
        let proposal = ProposalConfig::Finite {
            matrix: model.proposal.rows().to_vec(),
        };
        let weights = match &model.weights {
            WeightModel::IndependentFinite(t) => WeightsConfig::IndependentFinite {
                atoms: t
                    .iter()
                    .map(|tab| tab.atoms().iter().map(|&(w, p)| [w, p]).collect())
                    .collect(),
            },
            WeightModel::ExchangeableFinite(t) => WeightsConfig::ExchangeableFinite {
                tuples: t.iter().map(|set| set.tuples().to_vec()).collect(),
            },
        };
        Self {
            target,
            proposal,
            weights,
            phi: Vec::new(),
            s: None,
            m: None,
        }
    }
}

/// SHA-256 of the compact JSON form of a model file, hex encoded.
pub fn model_hash(file: &ModelFile) -> String {
    hex::encode(Sha256::digest(file.to_json().as_bytes()))
}
