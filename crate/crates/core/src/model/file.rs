//! JSON model file. Labels in the file are 1-based.

use serde::{Deserialize, Serialize};

use super::{
    validate_model, BlockProportions, BlockSizes, BlockStructure, InteractionModel, ModelSpec,
    StateSpace,
};
use crate::error::{ModelError, ValidationErrors};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub state_space: StateSpaceFile,
    pub interaction: InteractionFile,
    pub blocks: BlocksFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpaceFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionFile {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub beta: f64,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksFile {
    pub r: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite_sizes: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_proportions: Option<Vec<[f64; 3]>>,
}

impl ModelFile {
    pub fn into_spec(self) -> Result<ModelSpec, ValidationErrors> {
        let k = self.state_space.k;
        let mut errors = Vec::new();

        let mut edges = Vec::with_capacity(self.state_space.edges.len());
        for [a, b] in self.state_space.edges {
            if a == 0 || b == 0 {
                errors.push(ModelError::BadParameter(format!(
                    "edge [{a}, {b}]: states are labelled 1..=K"
                )));
            } else {
                edges.push((a - 1, b - 1));
            }
        }

        if self.interaction.w.len() != k || self.interaction.w.iter().any(|row| row.len() != k) {
            errors.push(ModelError::SizeMismatch(format!("W must be {k}x{k}")));
        }
        let v = self.interaction.v.unwrap_or_else(|| vec![0.0; k]);

        let sizes = self.blocks.finite_sizes.map(|s| {
            s.into_iter()
                .map(|[c, p]| BlockSizes {
                    central: c,
                    peripheral: p,
                })
                .collect::<Vec<_>>()
        });
        let props = self.blocks.limit_proportions.map(|p| {
            p.into_iter()
                .map(|[alpha, central, peripheral]| BlockProportions {
                    alpha,
                    central,
                    peripheral,
                })
                .collect::<Vec<_>>()
        });
        let blocks = match (sizes, props) {
            (Some(s), Some(p)) => BlockStructure {
                r: self.blocks.r,
                finite_sizes: Some(s),
                limit_proportions: p,
            },
            (Some(s), None) => {
                let mut b = BlockStructure::from_sizes(s);
                b.r = self.blocks.r;
                b
            }
            (None, Some(p)) => {
                let mut b = BlockStructure::from_proportions(p);
                b.r = self.blocks.r;
                b
            }
            (None, None) => {
                errors.push(ModelError::BadProportions(
                    "blocks needs finite_sizes or limit_proportions".into(),
                ));
                BlockStructure::from_proportions(Vec::new())
            }
        };
        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }

        validate_model(ModelSpec {
            state_space: StateSpace::new(k, edges),
            interaction: InteractionModel::new(self.interaction.w, self.interaction.beta)
                .with_potential(v),
            blocks,
        })
    }

    pub fn from_spec(spec: &ModelSpec) -> Self {
        let v = spec.interaction.potential();
        Self {
            state_space: StateSpaceFile {
                k: spec.k(),
                edges: spec
                    .state_space
                    .edges()
                    .iter()
                    .map(|&(a, b)| [a + 1, b + 1])
                    .collect(),
            },
            interaction: InteractionFile {
                w: spec.interaction.w_rows(),
                beta: spec.beta(),
                v: v.iter().any(|&x| x != 0.0).then(|| v.to_vec()),
            },
            blocks: BlocksFile {
                r: spec.r(),
                finite_sizes: spec
                    .blocks
                    .finite_sizes
                    .as_ref()
                    .map(|s| s.iter().map(|b| [b.central, b.peripheral]).collect()),
                limit_proportions: Some(
                    spec.blocks
                        .limit_proportions
                        .iter()
                        .map(|p| [p.alpha, p.central, p.peripheral])
                        .collect(),
                ),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    const EXAMPLE: &str = r#"{
        "state_space": {"K": 2, "edges": [[1, 2], [2, 1]]},
        "interaction": {"W": [[0, 1], [1, 0]], "beta": 4, "V": [0, 0]},
        "blocks": {"r": 2, "finite_sizes": [[1, 1], [1, 1]],
                   "limit_proportions": [[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]]}
    }"#;

    #[test]
    fn parses_and_roundtrips() {
        let spec = ModelSpec::from_json_str(EXAMPLE).unwrap();
        assert_eq!(spec, crate::model::example_model(4.0));
        let again = ModelSpec::from_json_str(&spec.to_json_string()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn proportions_alone_are_enough() {
        let text = EXAMPLE.replace(r#""finite_sizes": [[1, 1], [1, 1]],"#, "");
        let spec = ModelSpec::from_json_str(&text).unwrap();
        assert!(!spec.has_finite_sizes());
    }

    #[test]
    fn missing_key_is_named() {
        let text = EXAMPLE.replace(r#""beta": 4,"#, "");
        match ModelSpec::from_json_str(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("beta"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_way_edge_fails_validation() {
        let text = EXAMPLE.replace("[[1, 2], [2, 1]]", "[[1, 2]]");
        assert!(matches!(
            ModelSpec::from_json_str(&text),
            Err(Error::Validation(_))
        ));
    }
}
