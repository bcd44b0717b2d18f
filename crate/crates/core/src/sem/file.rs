//! JSON model files.
//!
//! ```json
//! {
//!   "nodes": [{"name": "X", "card": 2}, {"name": "Y", "card": 2}],
//!   "latents": [{"name": "U0", "children": ["X", "Y"], "probs": [0.5, 0.5]}],
//!   "cpts": [
//!     {"node": "X", "parents": [], "latents": ["U0"], "rows": [[0.2, 0.8], [0.7, 0.3]]},
//!     {"node": "Y", "parents": ["X"], "latents": ["U0"], "rows": [[0.1, 0.9], [0.5, 0.5], [0.6, 0.4], [0.3, 0.7]]}
//!   ]
//! }
//! ```
//!
//! Rows run over the listed parents and then the listed latents, mixed
//! radix with the last one fastest. The graph is read off the tables.

use serde::{Deserialize, Serialize};

use crate::graph::CausalGraph;

use super::{Cpt, DiscreteSEM, Latent, Result, SemError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub latents: Vec<LatentEntry>,
    pub cpts: Vec<CptEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: String,
    #[serde(default = "default_card")]
    pub card: usize,
}

fn default_card() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentEntry {
    pub name: String,
    pub children: [String; 2],
    pub probs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptEntry {
    pub node: String,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default)]
    pub latents: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<ModelFile> {
        serde_json::from_str(text).map_err(|e| SemError::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }

    pub fn from_model(m: &DiscreteSEM) -> ModelFile {
        let g = m.graph();
        let latent_name = |l: usize| format!("U{l}");
        ModelFile {
            nodes: g
                .nodes()
                .iter()
                .map(|v| NodeEntry {
                    name: g.name(v).to_string(),
                    card: m.card(v),
                })
                .collect(),
            latents: m
                .latents()
                .iter()
                .enumerate()
                .map(|(i, l)| LatentEntry {
                    name: latent_name(i),
                    children: l.children.map(|c| g.name(c).to_string()),
                    probs: l.probs.clone(),
                })
                .collect(),
            cpts: m
                .cpts()
                .map(|c| CptEntry {
                    node: g.name(c.node).to_string(),
                    parents: c.parents.iter().map(|&p| g.name(p).to_string()).collect(),
                    latents: c.latents.iter().map(|&l| latent_name(l)).collect(),
                    rows: c.rows.clone(),
                })
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<DiscreteSEM> {
        let mut b = CausalGraph::builder().nodes(self.nodes.iter().map(|n| n.name.clone()));
        for c in &self.cpts {
            for p in &c.parents {
                b = b.directed(p.clone(), c.node.clone());
            }
        }
        for l in &self.latents {
            b = b.bidirected(l.children[0].clone(), l.children[1].clone());
        }
        let g = b.build()?;
        let idx = |name: &str| {
            g.index_of(name)
                .ok_or_else(|| SemError::Format(format!("unknown node {name}")))
        };
        let mut cards = vec![0; g.names().len()];
        for n in &self.nodes {
            cards[idx(&n.name)?] = n.card;
        }
        let mut latents = Vec::with_capacity(self.latents.len());
        for (i, l) in self.latents.iter().enumerate() {
            if self.latents[..i].iter().any(|o| o.name == l.name) {
                return Err(SemError::Format(format!(
                    "latent {} declared twice",
                    l.name
                )));
            }
            latents.push(Latent {
                children: [idx(&l.children[0])?, idx(&l.children[1])?],
                probs: l.probs.clone(),
            });
        }
        let latent_idx = |name: &str| {
            self.latents
                .iter()
                .position(|l| l.name == name)
                .ok_or_else(|| SemError::Format(format!("unknown latent {name}")))
        };
        let cpts = self
            .cpts
            .iter()
            .map(|c| {
                Ok(Cpt {
                    node: idx(&c.node)?,
                    parents: c.parents.iter().map(|p| idx(p)).collect::<Result<_>>()?,
                    latents: c
                        .latents
                        .iter()
                        .map(|l| latent_idx(l))
                        .collect::<Result<_>>()?,
                    rows: c.rows.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteSEM::new(g, cards, latents, cpts)
    }
}
