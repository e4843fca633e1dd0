//! Versioned JSON persistence for [`Mlp`].
//!
//! Weights are written row-major (one inner array per output unit). Numbers go
//! through the shortest round-trip decimal representation, so a reload is
//! bit-identical.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Activation, Mlp};
use crate::error::{Error, Result};

pub const MLP_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MlpDocument {
    pub schema_version: u32,
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&Mlp> for MlpDocument {
    fn from(net: &Mlp) -> Self {
        let weights = net
            .weights()
            .iter()
            .map(|w| w.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect();
        MlpDocument {
            schema_version: MLP_SCHEMA_VERSION,
            layer_dims: net.layer_dims().to_vec(),
            activation: net.activation(),
            weights,
            biases: net.biases().iter().map(|b| b.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<MlpDocument> for Mlp {
    type Error = Error;

    fn try_from(doc: MlpDocument) -> Result<Mlp> {
        if doc.schema_version != MLP_SCHEMA_VERSION {
            return Err(Error::invalid(format!("unsupported network schema version {}", doc.schema_version)));
        }
        let mut weights = Vec::with_capacity(doc.weights.len());
        for rows in &doc.weights {
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(Error::invalid("ragged weight matrix"));
            }
            weights.push(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()));
        }
        let biases = doc.biases.into_iter().map(DVector::from_vec).collect();
        let net = Mlp::from_parts(weights, biases, doc.activation)?;
        if net.layer_dims() != doc.layer_dims.as_slice() {
            return Err(Error::invalid("layer_dims disagree with the stored weights"));
        }
        Ok(net)
    }
}

impl Mlp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MlpDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Mlp> {
        serde_json::from_str::<MlpDocument>(text)?.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mlp> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Mlp::from_json(&text)
    }
}
