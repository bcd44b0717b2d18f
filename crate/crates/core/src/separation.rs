//! d-separation and the applicability tests of the three do-calculus rules.
//!
//! Bidirected edges are read as a fresh latent parent of both endpoints. The
//! traversal is the usual reachability formulation of d-separation: a node is
//! entered either from a child ("up") or from a parent ("down"), and the
//! collider rule consults the ancestors of the conditioning set. A latent fork
//! `A <- U -> B` is crossed by entering `U` from below and leaving downwards,
//! which is only possible from a state where the walk could also move to the
//! parents of `A`.

use crate::graph::{CausalGraph, GraphError, Result};
use crate::nodeset::{NodeIdx, NodeSet};
use crate::stats;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    /// Arrived from a child, or this is a start node.
    Up,
    /// Arrived from a parent (directed or latent).
    Down,
}

fn check_disjoint(g: &CausalGraph, sets: &[(&str, &NodeSet)]) -> Result<()> {
    for (_, s) in sets {
        g.check_subset(s)?;
    }
    for (i, (na, a)) in sets.iter().enumerate() {
        for (nb, b) in &sets[i + 1..] {
            if !a.is_disjoint(b) {
                return Err(GraphError::Precondition(format!(
                    "sets {na} and {nb} overlap on {}",
                    g.fmt_set(&a.intersection(b))
                )));
            }
        }
    }
    Ok(())
}

/// True iff every path between `x` and `y` is blocked by `z`.
///
/// The three sets must be pairwise disjoint. An empty `x` or `y` is
/// vacuously separated.
pub fn d_separated(g: &CausalGraph, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> Result<bool> {
    check_disjoint(g, &[("x", x), ("y", y), ("z", z)])?;
    Ok(!reaches(g, x, y, z))
}

pub(crate) fn reaches(g: &CausalGraph, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
    if x.is_empty() || y.is_empty() {
        return false;
    }
    let z_anc = g.anc(z);
    let n = g.names().len();
    let mut seen_up = vec![false; n];
    let mut seen_down = vec![false; n];
    let mut stack: Vec<(NodeIdx, Dir)> = x.iter().map(|v| (v, Dir::Up)).collect();
    while let Some((v, dir)) = stack.pop() {
        let seen = match dir {
            Dir::Up => &mut seen_up[v],
            Dir::Down => &mut seen_down[v],
        };
        if std::mem::replace(seen, true) {
            continue;
        }
        stats::tick(1);
        if y.contains(v) {
            return true;
        }
        let blocked = z.contains(v);
        let (to_parents, to_children) = match dir {
            Dir::Up => (!blocked, !blocked),
            Dir::Down => (z_anc.contains(v), !blocked),
        };
        if to_parents {
            stack.extend(g.parents_of(v).iter().map(|p| (p, Dir::Up)));
            stack.extend(g.spouses_of(v).iter().map(|s| (s, Dir::Down)));
        }
        if to_children {
            stack.extend(g.children_of(v).iter().map(|c| (c, Dir::Down)));
        }
    }
    false
}

/// Rule 1 (insertion/deletion of observations):
/// `P_x(y | z, w) = P_x(y | w)` when `(Z ⊥ Y | X, W)` in `G` with edges into `X` cut.
pub fn rule1_holds(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<bool> {
    check_disjoint(g, &[("x", x), ("y", y), ("z", z), ("w", w)])?;
    let cut = g.edge_subgraph_unchecked(x, &NodeSet::new());
    Ok(!reaches(&cut, z, y, &x.union(w)))
}

/// Rule 2 (action/observation exchange):
/// `P_{x,z}(y | w) = P_x(y | z, w)` when `(Z ⊥ Y | X, W)` in `G` with edges
/// into `X` and out of `Z` cut.
pub fn rule2_holds(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<bool> {
    check_disjoint(g, &[("x", x), ("y", y), ("z", z), ("w", w)])?;
    let cut = g.edge_subgraph_unchecked(x, z);
    Ok(!reaches(&cut, z, y, &x.union(w)))
}

/// Rule 3 (insertion/deletion of actions):
/// `P_{x,z}(y | w) = P_x(y | w)` when `(Z ⊥ Y | X, W)` in `G` with edges into
/// `X` and into `Z \ Anc(W)` cut, ancestors taken in `G` with edges into `X` cut.
pub fn rule3_holds(
    g: &CausalGraph,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
    w: &NodeSet,
) -> Result<bool> {
    check_disjoint(g, &[("x", x), ("y", y), ("z", z), ("w", w)])?;
    let g_x = g.edge_subgraph_unchecked(x, &NodeSet::new());
    let z_w = z.difference(&g_x.anc(w));
    let cut = g.edge_subgraph_unchecked(&x.union(&z_w), &NodeSet::new());
    Ok(!reaches(&cut, z, y, &x.union(w)))
}
