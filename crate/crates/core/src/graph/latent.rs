//! Causal DAGs with explicit latent variables and their projection onto
//! observed variables.

use std::collections::BTreeSet;

use super::{CausalGraph, GraphError, NodeId, Result};

/// A DAG over observed and latent variables, before projection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawLatentGraph {
    observed: BTreeSet<NodeId>,
    latent: BTreeSet<NodeId>,
    directed: BTreeSet<(NodeId, NodeId)>,
}

impl RawLatentGraph {
    /// Checks names, endpoints, self-loops and duplicates. Acyclicity and
    /// parentless latents are checked by [`latent_project`](Self::latent_project).
    pub fn new<S: AsRef<str>>(observed: &[S], latent: &[S], directed: &[(S, S)]) -> Result<Self> {
        let mut all = BTreeSet::new();
        let mut collect = |names: &[S]| -> Result<BTreeSet<NodeId>> {
            let mut out = BTreeSet::new();
            for n in names {
                let id = NodeId::new(n.as_ref())?;
                if !all.insert(id.clone()) {
                    return Err(GraphError::DuplicateNode(id.to_string()));
                }
                out.insert(id);
            }
            Ok(out)
        };
        let observed = collect(observed)?;
        let latent = collect(latent)?;
        let mut edges = BTreeSet::new();
        for (a, b) in directed {
            let (a, b) = (a.as_ref(), b.as_ref());
            for end in [a, b] {
                if !observed
                    .iter()
                    .chain(latent.iter())
                    .any(|n| n.as_str() == end)
                {
                    return Err(GraphError::UnknownNode(end.to_string()));
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            if !edges.insert((NodeId::new(a)?, NodeId::new(b)?)) {
                return Err(GraphError::DuplicateEdge(format!("{a} -> {b}")));
            }
        }
        Ok(RawLatentGraph {
            observed,
            latent,
            directed: edges,
        })
    }

    pub fn observed(&self) -> impl Iterator<Item = &NodeId> {
        self.observed.iter()
    }

    pub fn latent(&self) -> impl Iterator<Item = &NodeId> {
        self.latent.iter()
    }

    pub fn directed(&self) -> impl Iterator<Item = &(NodeId, NodeId)> {
        self.directed.iter()
    }

    pub fn is_latent(&self, name: &str) -> bool {
        self.latent.iter().any(|n| n.as_str() == name)
    }

    /// Children of a latent, in name order.
    pub fn latent_children(&self, latent: &NodeId) -> Vec<&NodeId> {
        self.directed
            .iter()
            .filter(|(a, _)| a == latent)
            .map(|(_, b)| b)
            .collect()
    }

    /// The same DAG with every latent treated as an ordinary node.
    pub fn as_dag(&self) -> Result<CausalGraph> {
        let mut b = CausalGraph::builder()
            .nodes(self.observed.iter().map(NodeId::to_string))
            .nodes(self.latent.iter().map(NodeId::to_string));
        for (x, y) in &self.directed {
            b = b.directed(x.as_str(), y.as_str());
        }
        b.build()
    }

    /// Replaces every latent by bidirected edges between each pair of its
    /// children. Latents with fewer than two children vanish.
    pub fn latent_project(&self) -> Result<CausalGraph> {
        // Acyclicity over the full DAG, latents included.
        self.as_dag()?;
        for (a, b) in &self.directed {
            if self.latent.contains(b) {
                return Err(GraphError::LatentWithParent {
                    latent: b.to_string(),
                    parent: a.to_string(),
                });
            }
        }
        let mut builder = CausalGraph::builder().nodes(self.observed.iter().map(NodeId::to_string));
        for (a, b) in &self.directed {
            if !self.latent.contains(a) {
                builder = builder.directed(a.as_str(), b.as_str());
            }
        }
        let mut pairs = BTreeSet::new();
        for u in &self.latent {
            let kids = self.latent_children(u);
            for (i, a) in kids.iter().enumerate() {
                for b in &kids[i + 1..] {
                    pairs.insert((a.as_str(), b.as_str()));
                }
            }
        }
        for (a, b) in pairs {
            builder = builder.bidirected(a, b);
        }
        builder.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::examples::figure1;

    #[test]
    fn projects_figure1() {
        let raw = RawLatentGraph::new(
            &["X1", "X2", "Y1", "Y2"],
            &["U1", "U2"],
            &[
                ("U1", "X1"),
                ("U1", "X2"),
                ("U2", "Y1"),
                ("U2", "X1"),
                ("X1", "Y1"),
                ("X2", "Y2"),
            ],
        )
        .unwrap();
        assert_eq!(raw.latent_project().unwrap(), figure1());
    }

    #[test]
    fn no_latents_is_identity() {
        let raw = RawLatentGraph::new(&["A", "B", "C"], &[], &[("A", "B"), ("B", "C")]).unwrap();
        let g = raw.latent_project().unwrap();
        assert_eq!(
            g,
            CausalGraph::from_edges(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[]).unwrap()
        );
        assert!(g.bidirected_edges().is_empty());
    }

    #[test]
    fn three_children_become_a_clique() {
        let raw = RawLatentGraph::new(
            &["A", "B", "C"],
            &["U"],
            &[("U", "A"), ("U", "B"), ("U", "C")],
        )
        .unwrap();
        let g = raw.latent_project().unwrap();
        let pairs: Vec<(&str, &str)> = g
            .bidirected_edges()
            .into_iter()
            .map(|(a, b)| (g.name(a), g.name(b)))
            .collect();
        assert_eq!(pairs, [("A", "B"), ("A", "C"), ("B", "C")]);
    }

    #[test]
    fn lonely_latent_vanishes() {
        let raw = RawLatentGraph::new(&["A", "B"], &["U"], &[("U", "A"), ("A", "B")]).unwrap();
        let g = raw.latent_project().unwrap();
        assert!(g.bidirected_edges().is_empty());
        assert_eq!(g.directed_edges().len(), 1);
    }

    #[test]
    fn rejects_latent_parents_and_cycles() {
        let raw = RawLatentGraph::new(&["A", "B"], &["U"], &[("A", "U"), ("U", "B")]).unwrap();
        assert!(matches!(
            raw.latent_project(),
            Err(GraphError::LatentWithParent { .. })
        ));

        let raw = RawLatentGraph::new(&["A", "B"], &[], &[("A", "B"), ("B", "A")]).unwrap();
        assert!(matches!(raw.latent_project(), Err(GraphError::Cycle(_))));

        assert!(matches!(
            RawLatentGraph::new(&["A"], &["A"], &[]),
            Err(GraphError::DuplicateNode(_))
        ));
        assert!(matches!(
            RawLatentGraph::new(&["A"], &[], &[("A", "Q")]),
            Err(GraphError::UnknownNode(_))
        ));
    }
}
