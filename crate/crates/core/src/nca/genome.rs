//! Per-cell network parameters and their JSON file format.
//!
//! A genome file is a single JSON object:
//!
//! ```json
//! {
//!   "id": 17,
//!   "parent_id": 3,
//!   "weights": [[w00, ..., w09], ..., [w40, ..., w49]],
//!   "bias": [b0, b1, b2, b3, b4]
//! }
//! ```
//!
//! `weights` holds 5 rows (one per output: up, down, left, right, signal) of
//! 10 input weights each, ordered like [`cell_inputs`](super::cell_inputs).
//! Numbers are written with shortest round-trip formatting, so a saved genome
//! reloads bit-identically.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_INPUTS: usize = 10;
pub const NUM_OUTPUTS: usize = 5;
pub const NUM_PARAMS: usize = NUM_OUTPUTS * NUM_INPUTS + NUM_OUTPUTS;

/// Parameters of the single-layer network shared by every live cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genome {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub weights: [[f64; NUM_INPUTS]; NUM_OUTPUTS],
    pub bias: [f64; NUM_OUTPUTS],
}

impl Genome {
    pub fn zeros(id: u64) -> Self {
        Genome {
            id,
            parent_id: None,
            weights: [[0.0; NUM_INPUTS]; NUM_OUTPUTS],
            bias: [0.0; NUM_OUTPUTS],
        }
    }

    /// Builds a genome from a flat parameter vector: the 50 weights in
    /// row-major order followed by the 5 biases.
    pub fn from_params(id: u64, parent_id: Option<u64>, params: &[f64]) -> Result<Self> {
        if params.len() != NUM_PARAMS {
            return Err(Error::InvalidGenome(format!(
                "expected {NUM_PARAMS} parameters, got {}",
                params.len()
            )));
        }
        let mut genome = Genome::zeros(id);
        genome.parent_id = parent_id;
        for (i, &p) in params.iter().enumerate() {
            *genome.param_mut(i) = p;
        }
        genome.validate()?;
        Ok(genome)
    }

    pub fn params(&self) -> Vec<f64> {
        (0..NUM_PARAMS).map(|i| self.param(i)).collect()
    }

    pub fn param(&self, index: usize) -> f64 {
        let w = NUM_OUTPUTS * NUM_INPUTS;
        if index < w {
            self.weights[index / NUM_INPUTS][index % NUM_INPUTS]
        } else {
            self.bias[index - w]
        }
    }

    pub fn param_mut(&mut self, index: usize) -> &mut f64 {
        let w = NUM_OUTPUTS * NUM_INPUTS;
        if index < w {
            &mut self.weights[index / NUM_INPUTS][index % NUM_INPUTS]
        } else {
            &mut self.bias[index - w]
        }
    }

    /// Checks that every parameter is finite and inside [-1, 1].
    pub fn validate(&self) -> Result<()> {
        for i in 0..NUM_PARAMS {
            let p = self.param(i);
            if !p.is_finite() {
                return Err(Error::InvalidGenome(format!(
                    "genome {}: parameter {i} is not finite ({p})",
                    self.id
                )));
            }
            if !(-1.0..=1.0).contains(&p) {
                return Err(Error::InvalidGenome(format!(
                    "genome {}: parameter {i} = {p} lies outside [-1, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("genome serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let genome = Genome::from_json(&text).map_err(|e| Error::json(path, e))?;
        genome.validate()?;
        Ok(genome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_params_follow_weights_then_bias() {
        let params: Vec<f64> = (0..NUM_PARAMS).map(|i| i as f64 / 100.0).collect();
        let g = Genome::from_params(1, None, &params).unwrap();
        assert_eq!(g.weights[0][0], 0.0);
        assert_eq!(g.weights[1][3], 0.13);
        assert_eq!(g.weights[4][9], 0.49);
        assert_eq!(g.bias[0], 0.50);
        assert_eq!(g.bias[4], 0.54);
        assert_eq!(g.params(), params);
    }

    #[test]
    fn rejects_out_of_range_and_non_finite() {
        let mut g = Genome::zeros(0);
        g.bias[2] = 1.5;
        assert!(matches!(g.validate(), Err(Error::InvalidGenome(_))));
        g.bias[2] = f64::NAN;
        assert!(matches!(g.validate(), Err(Error::InvalidGenome(_))));
        assert!(Genome::from_params(0, None, &[0.0; 3]).is_err());
    }

    #[test]
    fn json_schema_is_strict() {
        let text = r#"{"id": 4, "parent_id": null,
            "weights": [[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0],
                        [0,0,0,0,0,0,0,0,0,0],[0,0,0,0,0,0,0,0,0,0.25]],
            "bias": [1, -1, 0, 0, 0.5]}"#;
        let g = Genome::from_json(text).unwrap();
        assert_eq!(g.id, 4);
        assert_eq!(g.parent_id, None);
        assert_eq!(g.weights[4][9], 0.25);
        assert_eq!(g.bias, [1.0, -1.0, 0.0, 0.0, 0.5]);

        let extra = text.replace("\"id\": 4", "\"id\": 4, \"age\": 3");
        assert!(Genome::from_json(&extra).is_err());
        let short_bias = text.replace("[1, -1, 0, 0, 0.5]", "[1, -1, 0, 0]");
        assert!(Genome::from_json(&short_bias).is_err());
    }
}
