//! Conditional generalized identifiability of `P_x(y | z)`.
//!
//! Conditioning variables that can be exchanged for interventions are moved
//! to the treatment side first; what remains is reduced to the unconditional
//! problem for `P_{x,w}(y, z \ w)`, then normalized over `y`.

use std::sync::Arc;

use crate::estimand::Estimand;
use crate::gid::{gid_decide_with, GidOptions, Outcome, QSpec, Verdict};
use crate::graph::{CausalGraph, GraphError, Result};
use crate::nodeset::NodeSet;
use crate::separation::reaches;

/// A validated query `P_x(y | z)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalQuery {
    pub x: NodeSet,
    pub y: NodeSet,
    pub z: NodeSet,
}

impl ConditionalQuery {
    pub fn new(g: &CausalGraph, x: NodeSet, y: NodeSet, z: NodeSet) -> Result<Self> {
        for s in [&x, &y, &z] {
            g.check_subset(s)?;
        }
        if y.is_empty() {
            return Err(GraphError::Precondition("the outcome set is empty".into()));
        }
        for (a, b, what) in [
            (&x, &y, "treatment and outcome"),
            (&x, &z, "treatment and condition"),
            (&y, &z, "outcome and condition"),
        ] {
            if !a.is_disjoint(b) {
                return Err(GraphError::Precondition(format!(
                    "{what} overlap on {}",
                    g.fmt_set(&a.intersection(b))
                )));
            }
        }
        Ok(ConditionalQuery { x, y, z })
    }
}

/// The largest subset `W` of `z` with `P_x(y | z) = P_{x,w}(y | z \ w)`:
/// every `Z'` in `z` that is separated from `y` by `x ∪ z \ {Z'}` once edges
/// into `x` and out of `Z'` are cut.
pub fn max_bi(g: &CausalGraph, q: &ConditionalQuery) -> NodeSet {
    let xz = q.x.union(&q.z);
    q.z.iter()
        .filter(|&zi| {
            let zi = NodeSet::singleton(zi);
            let cut = g.edge_subgraph_unchecked(&q.x, &zi);
            !reaches(&cut, &q.y, &zi, &xz.difference(&zi))
        })
        .collect()
}

/// Whether rule 2 moves all of `w ⊆ z` to the intervention side at once:
/// `(y ⊥ w | x ∪ z \ w)` with edges into `x` and out of `w` cut.
pub fn jointly_exchangeable(g: &CausalGraph, q: &ConditionalQuery, w: &NodeSet) -> Result<bool> {
    if !w.is_subset(&q.z) {
        return Err(GraphError::Precondition(format!(
            "{} is not part of the condition",
            g.fmt_set(w)
        )));
    }
    let cut = g.edge_subgraph_unchecked(&q.x, w);
    Ok(!reaches(&cut, &q.y, w, &q.x.union(&q.z.difference(w))))
}

pub fn cgid_decide(g: &CausalGraph, q: &ConditionalQuery, spec: &QSpec) -> Result<Verdict> {
    cgid_decide_with(g, q, spec, &GidOptions::default())
}

pub fn cgid_decide_with(
    g: &CausalGraph,
    q: &ConditionalQuery,
    spec: &QSpec,
    opts: &GidOptions,
) -> Result<Verdict> {
    if q.z.is_empty() {
        return gid_decide_with(&q.x, &q.y, spec, g, opts);
    }
    let w = max_bi(g, q);
    let rest = q.z.difference(&w);
    let inner = gid_decide_with(&q.x.union(&w), &q.y.union(&rest), spec, g, opts)?;
    let outcome = match inner.outcome {
        Outcome::Identifiable { estimand, chosen } => {
            let estimand = if rest.is_empty() {
                estimand
            } else {
                let joint = Arc::new(estimand);
                let marginal = Estimand::sum_out(&q.y, joint.clone());
                Estimand::ratio(joint, marginal)
            };
            Outcome::Identifiable { estimand, chosen }
        }
        failed => failed,
    };
    Ok(Verdict {
        moved_to_intervention: w,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimand::{Render, Term};
    use crate::graph::examples::*;

    fn query(g: &CausalGraph, x: &[&str], y: &[&str], z: &[&str]) -> ConditionalQuery {
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        ConditionalQuery::new(g, s(x), s(y), s(z)).unwrap()
    }

    #[test]
    fn figure2_query() {
        let g = figure2();
        let q = query(&g, &["X1"], &["Y1"], &["Z1", "Z2"]);
        let w = max_bi(&g, &q);
        assert_eq!(w, g.set(["Z1"]).unwrap());
        assert!(jointly_exchangeable(&g, &q, &w).unwrap());
        assert!(!jointly_exchangeable(&g, &q, &g.set(["Z1", "Z2"]).unwrap()).unwrap());

        let v = cgid_decide(&g, &q, &QSpec::observational(&g)).unwrap();
        assert_eq!(v.moved_to_intervention, w);
        let e = v.estimand().expect("identifiable");
        e.validate().unwrap();
        assert!(matches!(e.term(), Term::Ratio { .. }));
        let labels = vec!["A0".to_string()];
        let text = Render {
            names: g.names(),
            labels: &labels,
            compact: true,
        }
        .text(e);
        assert_eq!(text, "Σ_{W1} Q[W1,Y1,Z2] / Σ_{W1,Y1} Q[W1,Y1,Z2]");
    }

    #[test]
    fn figure2_negative_queries() {
        let g = figure2();
        let spec = QSpec::observational(&g);
        for (y, z) in [(&["Y1"][..], &["Z1"][..]), (&["Y1", "Z1"], &["Z2"])] {
            let q = query(&g, &["X1"], y, z);
            assert!(
                !cgid_decide(&g, &q, &spec).unwrap().is_identifiable(),
                "{y:?} | {z:?}"
            );
        }
    }

    #[test]
    fn empty_condition_matches_gid() {
        let g = figure1();
        let q = query(&g, &["X1"], &["Y1"], &[]);
        let spec = QSpec::observational(&g);
        assert_eq!(
            cgid_decide(&g, &q, &spec).unwrap(),
            crate::gid::gid_decide(&q.x, &q.y, &spec, &g).unwrap()
        );
    }

    #[test]
    fn chain_condition_fully_moved() {
        // P(Y | Z) = P_z(Y) in X -> Z -> Y.
        let g = chain();
        let q = query(&g, &[], &["Y"], &["Z"]);
        assert_eq!(max_bi(&g, &q), g.set(["Z"]).unwrap());
        let v = cgid_decide(&g, &q, &QSpec::observational(&g)).unwrap();
        assert_eq!(v.moved_to_intervention, q.z);
        let e = v.estimand().unwrap();
        assert!(g.set(["Y", "Z"]).unwrap().is_subset(e.scope()));
    }

    #[test]
    fn rejects_overlap() {
        let g = figure2();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        assert!(ConditionalQuery::new(&g, s(&["X1"]), s(&["Y1"]), s(&["Y1"])).is_err());
        assert!(ConditionalQuery::new(&g, s(&["X1"]), NodeSet::new(), s(&["Z1"])).is_err());
    }
}
