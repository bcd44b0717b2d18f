//! C-components, c-forests and hedge witnesses.
//!
//! A hedge for `Q[L]` inside `G[A]` is a node set `B` with `L ⊊ B ⊆ A` and a
//! subgraph `F` of `G[B]` such that the bidirected edges of `F` form a
//! spanning tree of `B` that restricts to a connected tree on `L`, every node
//! of `B \ L` has exactly one directed child in `F`, and the nodes of `L` have
//! none. Such a structure exists exactly when `Q[L]` is not identifiable from
//! `G[A]`. Because `F` is a subgraph, `G[B]` may carry extra bidirected or
//! directed edges beyond the ones the witness lists.

use itertools::Itertools;
use thiserror::Error;

use crate::graph::{CausalGraph, GraphError};
use crate::nodeset::{NodeIdx, NodeSet};
use crate::stats;

/// Connected components of the bidirected part of `g[x]`, ordered by their
/// smallest member.
pub fn c_components(g: &CausalGraph, x: &NodeSet) -> Result<Vec<NodeSet>, GraphError> {
    g.check_subset(x)?;
    Ok(c_components_unchecked(g, x))
}

pub(crate) fn c_components_unchecked(g: &CausalGraph, x: &NodeSet) -> Vec<NodeSet> {
    let mut remaining = x.clone();
    let mut out = Vec::new();
    while let Some(start) = remaining.first() {
        let comp = bidirected_reach(g, start, x);
        remaining = remaining.difference(&comp);
        out.push(comp);
    }
    out
}

/// Nodes of `within` reachable from `start` via bidirected edges inside `within`.
pub(crate) fn bidirected_reach(g: &CausalGraph, start: NodeIdx, within: &NodeSet) -> NodeSet {
    let mut seen = NodeSet::singleton(start);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        stats::tick(1);
        for s in g.spouses_of(v).intersection(within).iter() {
            if seen.insert(s) {
                stack.push(s);
            }
        }
    }
    seen
}

/// True when `x` has at most one c-component. The empty set qualifies.
pub fn is_single_c_component(g: &CausalGraph, x: &NodeSet) -> Result<bool, GraphError> {
    Ok(c_components(g, x)?.len() <= 1)
}

/// Members of `nodes` without a directed child inside `nodes`.
pub fn root_set(g: &CausalGraph, nodes: &NodeSet) -> Result<NodeSet, GraphError> {
    g.check_subset(nodes)?;
    Ok(nodes
        .iter()
        .filter(|&v| g.children_of(v).is_disjoint(nodes))
        .collect())
}

/// An induced subgraph that is a c-forest: a single c-component in which
/// every node has at most one directed child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CForest {
    pub nodes: NodeSet,
    pub roots: NodeSet,
}

impl CForest {
    /// Checks whether `g[nodes]` is a c-forest and returns it with its roots.
    pub fn induced(g: &CausalGraph, nodes: &NodeSet) -> Result<Option<CForest>, GraphError> {
        if !is_single_c_component(g, nodes)? || nodes.is_empty() {
            return Ok(None);
        }
        if nodes
            .iter()
            .any(|v| g.children_of(v).intersection(nodes).len() > 1)
        {
            return Ok(None);
        }
        Ok(Some(CForest {
            roots: root_set(g, nodes)?,
            nodes: nodes.clone(),
        }))
    }
}

pub fn is_c_forest(g: &CausalGraph, nodes: &NodeSet) -> Result<bool, GraphError> {
    Ok(CForest::induced(g, nodes)?.is_some())
}

/// Certificate that `Q[roots]` is not identifiable from `G[A]` for any `A`
/// containing `nodes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HedgeWitness {
    /// The set `L` whose `Q` is not identifiable.
    pub roots: NodeSet,
    /// The set `B`, a strict superset of `roots`.
    pub nodes: NodeSet,
    /// Bidirected spanning tree of `nodes`; its restriction to `roots` is connected.
    pub bidirected_tree: Vec<(NodeIdx, NodeIdx)>,
    /// One directed edge out of every node of `nodes \ roots`, staying inside `nodes`.
    pub directed: Vec<(NodeIdx, NodeIdx)>,
}

impl HedgeWitness {
    /// Re-checks every defining condition against `g`.
    pub fn verify(&self, g: &CausalGraph) -> Result<(), String> {
        let b = &self.nodes;
        let l = &self.roots;
        if !l.is_subset(b) || l == b || l.is_empty() {
            return Err("roots must be a non-empty strict subset of nodes".into());
        }
        if !b.is_subset(g.nodes()) {
            return Err("witness nodes outside the graph".into());
        }
        for &(u, v) in &self.bidirected_tree {
            if !g.has_bidirected(u, v) || !b.contains(u) || !b.contains(v) {
                return Err(format!(
                    "{}<->{} is not a bidirected edge inside B",
                    g.name(u),
                    g.name(v)
                ));
            }
        }
        if self.bidirected_tree.len() + 1 != b.len() || !tree_connects(&self.bidirected_tree, b) {
            return Err("bidirected edges do not form a spanning tree of B".into());
        }
        let inside_l: Vec<_> = self
            .bidirected_tree
            .iter()
            .copied()
            .filter(|&(u, v)| l.contains(u) && l.contains(v))
            .collect();
        if !tree_connects(&inside_l, l) {
            return Err("tree restricted to the roots is not connected".into());
        }
        let mut tails = NodeSet::new();
        for &(u, v) in &self.directed {
            if !g.has_directed(u, v) || !b.contains(v) {
                return Err(format!(
                    "{}->{} is not a directed edge inside B",
                    g.name(u),
                    g.name(v)
                ));
            }
            if l.contains(u) {
                return Err(format!("root {} has a child in the forest", g.name(u)));
            }
            if !tails.insert(u) {
                return Err(format!(
                    "{} has more than one child in the forest",
                    g.name(u)
                ));
            }
        }
        if tails != b.difference(l) {
            return Err("some non-root node has no child in the forest".into());
        }
        Ok(())
    }
}

fn tree_connects(edges: &[(NodeIdx, NodeIdx)], nodes: &NodeSet) -> bool {
    let Some(start) = nodes.first() else {
        return true;
    };
    let mut seen = NodeSet::singleton(start);
    let mut changed = true;
    while changed {
        changed = false;
        for &(u, v) in edges {
            if seen.contains(u) && nodes.contains(v) && seen.insert(v) {
                changed = true;
            }
            if seen.contains(v) && nodes.contains(u) && seen.insert(u) {
                changed = true;
            }
        }
    }
    seen == *nodes
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum HedgeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("hedge search pool has {size} candidate nodes, limit is {limit}")]
    PoolTooLarge { size: usize, limit: usize },
    #[error("hedge search budget of {0} candidate sets exhausted")]
    BudgetExhausted(u64),
}

#[derive(Clone, Debug)]
pub struct HedgeSearch {
    /// Maximum number of candidate nodes outside `L` to enumerate subsets of.
    pub max_pool: usize,
    /// Maximum number of candidate sets to examine.
    pub budget: Option<u64>,
}

impl Default for HedgeSearch {
    fn default() -> Self {
        HedgeSearch {
            max_pool: 12,
            budget: None,
        }
    }
}

/// Exhaustive search for a hedge for `Q[l]` in `g[a]`, smallest `B` first.
pub fn find_hedge(
    g: &CausalGraph,
    a: &NodeSet,
    l: &NodeSet,
) -> Result<Option<HedgeWitness>, HedgeError> {
    HedgeSearch::default().find(g, a, l)
}

impl HedgeSearch {
    pub fn find(
        &self,
        g: &CausalGraph,
        a: &NodeSet,
        l: &NodeSet,
    ) -> Result<Option<HedgeWitness>, HedgeError> {
        g.check_subset(a)?;
        if l.is_empty() || !l.is_subset(a) {
            return Err(GraphError::Precondition(
                "hedge roots must be a non-empty subset of A".into(),
            )
            .into());
        }
        if !is_single_c_component(g, l)? {
            return Err(GraphError::Precondition(format!(
                "{} is not a single c-component",
                g.fmt_set(l)
            ))
            .into());
        }
        // Any hedge lies within the ancestors of l and within l's c-component there.
        let ga = g.induced_unchecked(a);
        let anc = ga.anc(l);
        let comp = bidirected_reach(&ga, l.first().expect("non-empty"), &anc);
        let pool = comp.difference(l).to_vec();
        if pool.len() > self.max_pool {
            return Err(HedgeError::PoolTooLarge {
                size: pool.len(),
                limit: self.max_pool,
            });
        }
        let mut examined = 0u64;
        for k in 1..=pool.len() {
            for extra in pool.iter().copied().combinations(k) {
                examined += 1;
                if let Some(budget) = self.budget {
                    if examined > budget {
                        return Err(HedgeError::BudgetExhausted(budget));
                    }
                }
                let b: NodeSet = l.iter().chain(extra).collect();
                if let Some(w) = witness_for(g, &b, l) {
                    return Ok(Some(w));
                }
            }
        }
        Ok(None)
    }
}

/// Builds the hedge on exactly `b`, if `b` supports one.
fn witness_for(g: &CausalGraph, b: &NodeSet, l: &NodeSet) -> Option<HedgeWitness> {
    let mut directed = Vec::new();
    for v in b.difference(l).iter() {
        let child = g.children_of(v).intersection(b).first()?;
        directed.push((v, child));
    }
    // Spanning tree: grow over l first so its restriction stays connected.
    let mut tree = Vec::new();
    let mut seen = NodeSet::singleton(l.first()?);
    for within in [l, b] {
        let mut frontier = seen.to_vec();
        while let Some(v) = frontier.pop() {
            for s in g.spouses_of(v).intersection(within).iter() {
                if seen.insert(s) {
                    tree.push((v.min(s), v.max(s)));
                    frontier.push(s);
                }
            }
        }
    }
    if seen != *b {
        return None;
    }
    tree.sort_unstable();
    Some(HedgeWitness {
        roots: l.clone(),
        nodes: b.clone(),
        bidirected_tree: tree,
        directed,
    })
}
