//! Semi-Markovian causal graphs.
//!
//! A [`CausalGraph`] is an acyclic directed mixed graph over observed
//! variables: directed edges `A -> B` for direct causation and bidirected
//! edges `A <-> B` for a latent common cause. Graphs built from one another
//! (induced subgraphs, edge-deletion subgraphs) share a single name table, so
//! a [`NodeSet`] computed on one is meaningful on all of them.
//!
//! Conventions used by [`CausalGraph::edge_subgraph`]: a bidirected edge counts
//! as incoming at both endpoints (it stands for an arrow out of a latent
//! parent), and never as outgoing.

mod latent;
pub mod random;

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use latent::RawLatentGraph;

use crate::nodeset::{NodeIdx, NodeSet};
use crate::stats;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error(
        "invalid node name {0:?}: expected a letter followed by letters, digits or underscores"
    )]
    InvalidName(String),
    #[error("node {0} declared more than once")]
    DuplicateNode(String),
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node set contains nodes that are not in the graph: {0}")]
    NotInGraph(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("duplicate edge {0}")]
    DuplicateEdge(String),
    #[error("directed cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("latent {latent} has a parent {parent}; latents must be parentless")]
    LatentWithParent { latent: String, parent: String },
    #[error("{0}")]
    Precondition(String),
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

/// A variable name: a letter followed by letters, digits or underscores.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if is_valid_name(&name) {
            Ok(NodeId(name))
        } else {
            Err(GraphError::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NodeId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Acyclic directed mixed graph over observed variables.
#[derive(Clone, PartialEq, Eq)]
pub struct CausalGraph {
    names: Arc<[NodeId]>,
    nodes: NodeSet,
    parents: Vec<NodeSet>,
    children: Vec<NodeSet>,
    spouses: Vec<NodeSet>,
}

/// Collects nodes and edges by name; validation happens in [`build`](Self::build).
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<String>,
    directed: Vec<(String, String)>,
    bidirected: Vec<(String, String)>,
}

impl GraphBuilder {
    pub fn node(mut self, name: impl Into<String>) -> Self {
        self.nodes.push(name.into());
        self
    }

    pub fn nodes<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.nodes.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn directed(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.directed.push((from.into(), to.into()));
        self
    }

    pub fn bidirected(mut self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.bidirected.push((a.into(), b.into()));
        self
    }

    pub fn build(self) -> Result<CausalGraph> {
        let mut ids = self
            .nodes
            .into_iter()
            .map(NodeId::new)
            .collect::<Result<Vec<_>>>()?;
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(GraphError::DuplicateNode(w[0].to_string()));
        }
        let n = ids.len();
        let names: Arc<[NodeId]> = ids.into();
        let lookup = |s: &str| -> Result<NodeIdx> {
            names
                .binary_search_by(|id| id.as_str().cmp(s))
                .map_err(|_| GraphError::UnknownNode(s.to_string()))
        };
        let mut g = CausalGraph {
            nodes: NodeSet::full(n),
            parents: vec![NodeSet::new(); n],
            children: vec![NodeSet::new(); n],
            spouses: vec![NodeSet::new(); n],
            names: names.clone(),
        };
        for (from, to) in &self.directed {
            let (a, b) = (lookup(from)?, lookup(to)?);
            if a == b {
                return Err(GraphError::SelfLoop(from.clone()));
            }
            if !g.children[a].insert(b) {
                return Err(GraphError::DuplicateEdge(format!("{from} -> {to}")));
            }
            g.parents[b].insert(a);
        }
        for (x, y) in &self.bidirected {
            let (a, b) = (lookup(x)?, lookup(y)?);
            if a == b {
                return Err(GraphError::SelfLoop(x.clone()));
            }
            if !g.spouses[a].insert(b) {
                return Err(GraphError::DuplicateEdge(format!("{x} <-> {y}")));
            }
            g.spouses[b].insert(a);
        }
        if let Some(cycle) = g.find_cycle() {
            return Err(GraphError::Cycle(
                cycle.into_iter().map(|i| g.name(i).to_string()).collect(),
            ));
        }
        Ok(g)
    }
}

impl CausalGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    /// Convenience constructor from name lists.
    pub fn from_edges(
        nodes: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self> {
        let mut b = Self::builder().nodes(nodes.iter().copied());
        for (x, y) in directed {
            b = b.directed(*x, *y);
        }
        for (x, y) in bidirected {
            b = b.bidirected(*x, *y);
        }
        b.build()
    }

    /// The shared name table. Indices into it are [`NodeIdx`] values.
    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    /// Every index of the shared name table, including nodes removed by
    /// [`induced`](Self::induced).
    pub fn universe(&self) -> NodeSet {
        NodeSet::full(self.names.len())
    }

    /// Nodes present in this graph.
    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn index_of(&self, name: &str) -> Option<NodeIdx> {
        self.names
            .binary_search_by(|id| id.as_str().cmp(name))
            .ok()
            .filter(|&i| self.nodes.contains(i))
    }

    pub fn name(&self, idx: NodeIdx) -> &str {
        self.names[idx].as_str()
    }

    /// Resolves names to a node set of this graph.
    pub fn set<I, S>(&self, names: I) -> Result<NodeSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        names
            .into_iter()
            .map(|s| {
                let s = s.as_ref();
                self.index_of(s)
                    .ok_or_else(|| GraphError::UnknownNode(s.to_string()))
            })
            .collect()
    }

    pub fn names_of(&self, set: &NodeSet) -> Vec<&str> {
        set.iter().map(|i| self.name(i)).collect()
    }

    /// `{A,B,C}` rendering of a node set.
    pub fn fmt_set(&self, set: &NodeSet) -> String {
        format!("{{{}}}", self.names_of(set).join(","))
    }

    pub fn check_subset(&self, set: &NodeSet) -> Result<()> {
        if set.is_subset(&self.nodes) {
            Ok(())
        } else {
            let extra = set.difference(&self.nodes);
            let labels: Vec<String> = extra
                .iter()
                .map(|i| match self.names.get(i) {
                    Some(n) => n.to_string(),
                    None => format!("#{i}"),
                })
                .collect();
            Err(GraphError::NotInGraph(labels.join(",")))
        }
    }

    pub fn parents_of(&self, v: NodeIdx) -> &NodeSet {
        &self.parents[v]
    }

    pub fn children_of(&self, v: NodeIdx) -> &NodeSet {
        &self.children[v]
    }

    /// Bidirected neighbours of `v`.
    pub fn spouses_of(&self, v: NodeIdx) -> &NodeSet {
        &self.spouses[v]
    }

    pub fn has_directed(&self, from: NodeIdx, to: NodeIdx) -> bool {
        self.children.get(from).is_some_and(|c| c.contains(to))
    }

    pub fn has_bidirected(&self, a: NodeIdx, b: NodeIdx) -> bool {
        self.spouses.get(a).is_some_and(|s| s.contains(b))
    }

    /// Directed edges in (from, to) lexicographic order.
    pub fn directed_edges(&self) -> Vec<(NodeIdx, NodeIdx)> {
        self.nodes
            .iter()
            .flat_map(|a| self.children[a].iter().map(move |b| (a, b)))
            .collect()
    }

    /// Bidirected edges as (smaller, larger) pairs in lexicographic order.
    pub fn bidirected_edges(&self) -> Vec<(NodeIdx, NodeIdx)> {
        self.nodes
            .iter()
            .flat_map(|a| {
                self.spouses[a]
                    .iter()
                    .filter(move |&b| b > a)
                    .map(move |b| (a, b))
            })
            .collect()
    }

    /// Reflexive-transitive closure along `step`, starting from `start`.
    fn closure<'a>(&'a self, start: &NodeSet, step: impl Fn(NodeIdx) -> &'a NodeSet) -> NodeSet {
        let mut seen = start.clone();
        let mut stack = start.to_vec();
        while let Some(v) = stack.pop() {
            stats::tick(1);
            for w in step(v).iter() {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    pub(crate) fn anc(&self, x: &NodeSet) -> NodeSet {
        self.closure(x, |v| &self.parents[v])
    }

    pub(crate) fn desc(&self, x: &NodeSet) -> NodeSet {
        self.closure(x, |v| &self.children[v])
    }

    /// Ancestors of `x`, including `x` itself. Bidirected edges are ignored.
    pub fn ancestors(&self, x: &NodeSet) -> Result<NodeSet> {
        self.check_subset(x)?;
        Ok(self.anc(x))
    }

    /// Descendants of `x`, including `x` itself.
    pub fn descendants(&self, x: &NodeSet) -> Result<NodeSet> {
        self.check_subset(x)?;
        Ok(self.desc(x))
    }

    /// Union of the parents of every member of `x`.
    pub fn parents(&self, x: &NodeSet) -> Result<NodeSet> {
        self.check_subset(x)?;
        let mut out = NodeSet::new();
        for v in x {
            out.extend_from(&self.parents[v]);
        }
        Ok(out)
    }

    pub fn children(&self, x: &NodeSet) -> Result<NodeSet> {
        self.check_subset(x)?;
        let mut out = NodeSet::new();
        for v in x {
            out.extend_from(&self.children[v]);
        }
        Ok(out)
    }

    pub(crate) fn induced_unchecked(&self, x: &NodeSet) -> CausalGraph {
        let n = self.names.len();
        let keep = |adj: &[NodeSet]| -> Vec<NodeSet> {
            (0..n)
                .map(|v| {
                    if x.contains(v) {
                        adj[v].intersection(x)
                    } else {
                        NodeSet::new()
                    }
                })
                .collect()
        };
        stats::tick(x.len() as u64);
        CausalGraph {
            names: self.names.clone(),
            nodes: x.clone(),
            parents: keep(&self.parents),
            children: keep(&self.children),
            spouses: keep(&self.spouses),
        }
    }

    /// Subgraph over `x` keeping every edge with both endpoints in `x`.
    pub fn induced(&self, x: &NodeSet) -> Result<CausalGraph> {
        self.check_subset(x)?;
        Ok(self.induced_unchecked(x))
    }

    /// Deletes directed edges into `over`, bidirected edges touching `over`,
    /// and directed edges out of `under`.
    pub fn edge_subgraph(&self, over: &NodeSet, under: &NodeSet) -> Result<CausalGraph> {
        self.check_subset(over)?;
        self.check_subset(under)?;
        Ok(self.edge_subgraph_unchecked(over, under))
    }

    pub(crate) fn edge_subgraph_unchecked(&self, over: &NodeSet, under: &NodeSet) -> CausalGraph {
        let mut g = self.clone();
        for v in over {
            for p in self.parents[v].iter() {
                g.children[p].remove(v);
            }
            g.parents[v] = NodeSet::new();
            for s in self.spouses[v].iter() {
                g.spouses[s].remove(v);
            }
            g.spouses[v] = NodeSet::new();
        }
        for v in under {
            for c in g.children[v].clone().iter() {
                g.parents[c].remove(v);
            }
            g.children[v] = NodeSet::new();
        }
        stats::tick((over.len() + under.len()) as u64);
        g
    }

    /// Kahn's algorithm with lexicographically smallest ready node first.
    pub fn topological_order(&self) -> Vec<NodeIdx> {
        let mut indegree: Vec<usize> = (0..self.names.len())
            .map(|v| self.parents[v].len())
            .collect();
        let mut ready: BinaryHeap<Reverse<NodeIdx>> = self
            .nodes
            .iter()
            .filter(|&v| indegree[v] == 0)
            .map(Reverse)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for c in self.children[v].iter() {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        order
    }

    fn find_cycle(&self) -> Option<Vec<NodeIdx>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.names.len()];
        let mut path: Vec<NodeIdx> = Vec::new();
        for root in self.nodes.iter() {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(NodeIdx, Vec<NodeIdx>)> =
                vec![(root, self.children[root].to_vec())];
            state[root] = 1;
            path.push(root);
            while let Some((_, pending)) = stack.last_mut() {
                match pending.pop() {
                    Some(c) if state[c] == 1 => {
                        let start = path.iter().position(|&p| p == c).unwrap_or(0);
                        let mut cycle = path[start..].to_vec();
                        cycle.push(c);
                        return Some(cycle);
                    }
                    Some(c) if state[c] == 0 => {
                        state[c] = 1;
                        path.push(c);
                        stack.push((c, self.children[c].to_vec()));
                    }
                    Some(_) => {}
                    None => {
                        let (v, _) = stack.pop().expect("non-empty stack");
                        state[v] = 2;
                        path.pop();
                    }
                }
            }
        }
        None
    }
}

impl fmt::Debug for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let directed: Vec<String> = self
            .directed_edges()
            .into_iter()
            .map(|(a, b)| format!("{}->{}", self.name(a), self.name(b)))
            .collect();
        let bidirected: Vec<String> = self
            .bidirected_edges()
            .into_iter()
            .map(|(a, b)| format!("{}<->{}", self.name(a), self.name(b)))
            .collect();
        f.debug_struct("CausalGraph")
            .field("nodes", &self.names_of(&self.nodes))
            .field("directed", &directed)
            .field("bidirected", &bidirected)
            .finish()
    }
}

/// Graphs from the worked examples, used throughout the tests and docs.
pub mod examples {
    use super::CausalGraph;

    /// Four observed nodes; `X1 <-> X2` and `X1 <-> Y1` come from two latents.
    pub fn figure1() -> CausalGraph {
        CausalGraph::from_edges(
            &["X1", "X2", "Y1", "Y2"],
            &[("X1", "Y1"), ("X2", "Y2")],
            &[("X1", "X2"), ("X1", "Y1")],
        )
        .expect("valid graph")
    }

    /// The conditional-identification example: `X1 -> Z1 <- Z2 <- W1 <- Y1`
    /// with `X1 <-> Z1` and `W1 <-> Y1`.
    pub fn figure2() -> CausalGraph {
        CausalGraph::from_edges(
            &["X1", "Y1", "Z1", "Z2", "W1"],
            &[("X1", "Z1"), ("Z2", "Z1"), ("W1", "Z2"), ("Y1", "W1")],
            &[("X1", "Z1"), ("W1", "Y1")],
        )
        .expect("valid graph")
    }

    /// `X -> Y` with `X <-> Y`.
    pub fn bow() -> CausalGraph {
        CausalGraph::from_edges(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).expect("valid graph")
    }

    /// `Z -> X -> Y`, `Z -> Y`, no latent confounding.
    pub fn back_door() -> CausalGraph {
        CausalGraph::from_edges(&["X", "Y", "Z"], &[("Z", "X"), ("X", "Y"), ("Z", "Y")], &[])
            .expect("valid graph")
    }

    /// `X -> Z -> Y`.
    pub fn chain() -> CausalGraph {
        CausalGraph::from_edges(&["X", "Y", "Z"], &[("X", "Z"), ("Z", "Y")], &[])
            .expect("valid graph")
    }
}
