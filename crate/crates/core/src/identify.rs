//! Identification of `Q[S]` from `Q[A]` inside `G[A]`.
//!
//! Two facts drive everything here. First, `Q[A]` factorizes over the
//! c-components of `G[A]`, and each factor is a telescoping product of
//! marginals of `Q[A]` along a topological order. Second, summing `Q[T]`
//! over `T \ A'` yields `Q[A']` whenever `A'` is ancestral in `G[T]`.
//! Alternating the two shrinks `A` until either only `S` is left (identified)
//! or no further shrinking is possible (not identified).

use std::sync::Arc;

use crate::components::{c_components_unchecked, is_single_c_component};
use crate::estimand::Estimand;
use crate::graph::{CausalGraph, GraphError, Result};
use crate::nodeset::NodeSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QIdentification {
    Identified(Estimand),
    /// `blocking` is the c-component `T ⊋ S` that equals its own ancestral
    /// closure of `S`; it is the node set of a hedge.
    NotIdentified {
        blocking: NodeSet,
    },
}

impl QIdentification {
    pub fn is_identified(&self) -> bool {
        matches!(self, QIdentification::Identified(_))
    }
}

/// Splits `Q[a]` into one estimand per c-component of `g[a]`, in component order.
pub fn q_decompose(
    g: &CausalGraph,
    a: &NodeSet,
    q_a: &Arc<Estimand>,
) -> Result<Vec<(NodeSet, Estimand)>> {
    g.check_subset(a)?;
    let ga = g.induced_unchecked(a);
    let prefixes = PrefixSums::new(&ga, a, q_a);
    Ok(c_components_unchecked(&ga, a)
        .into_iter()
        .map(|comp| {
            let q = prefixes.component(&comp);
            (comp, q)
        })
        .collect())
}

/// Marginals `Q[a^(i)] = Σ_{a \ a^(i)} Q[a]` over the topological prefixes of `g[a]`.
struct PrefixSums {
    order: Vec<usize>,
    sums: Vec<Arc<Estimand>>,
}

impl PrefixSums {
    fn new(ga: &CausalGraph, a: &NodeSet, q_a: &Arc<Estimand>) -> Self {
        let order = ga.topological_order();
        let mut sums = Vec::with_capacity(order.len() + 1);
        let mut prefix = NodeSet::new();
        for i in 0..=order.len() {
            if i > 0 {
                prefix.insert(order[i - 1]);
            }
            let rest = a.difference(&prefix);
            sums.push(Arc::new(
                Estimand::sum_out(&rest, q_a.clone()).denoting(prefix.clone()),
            ));
        }
        PrefixSums { order, sums }
    }

    fn component(&self, comp: &NodeSet) -> Estimand {
        let factors = self
            .order
            .iter()
            .enumerate()
            .filter(|(_, v)| comp.contains(**v))
            .map(|(i, _)| {
                Arc::new(Estimand::ratio(
                    self.sums[i + 1].clone(),
                    self.sums[i].clone(),
                ))
            })
            .collect();
        Estimand::product(factors).denoting(comp.clone())
    }
}

/// Decides whether `Q[s]` is identifiable from `Q[a]` in `g[a]`, and if so
/// builds it from `q_a`.
///
/// `s` must be a non-empty single c-component with `s ⊆ a ⊆ nodes(g)`.
pub fn identify_q(
    s: &NodeSet,
    a: &NodeSet,
    g: &CausalGraph,
    q_a: Arc<Estimand>,
) -> Result<QIdentification> {
    g.check_subset(a)?;
    if s.is_empty() || !s.is_subset(a) {
        return Err(GraphError::Precondition(format!(
            "target {} must be a non-empty subset of {}",
            g.fmt_set(s),
            g.fmt_set(a)
        )));
    }
    if !is_single_c_component(g, s)? {
        return Err(GraphError::Precondition(format!(
            "{} is not a single c-component",
            g.fmt_set(s)
        )));
    }
    let anchor = s.first().expect("non-empty");
    let mut a = a.clone();
    let mut q = q_a;
    loop {
        let ga = g.induced_unchecked(&a);
        let comps = c_components_unchecked(&ga, &a);
        let t = comps
            .iter()
            .find(|c| c.contains(anchor))
            .expect("every node lies in a component")
            .clone();
        let q_t = if comps.len() == 1 {
            q.clone()
        } else {
            Arc::new(PrefixSums::new(&ga, &a, &q).component(&t))
        };
        let closure = g.induced_unchecked(&t).anc(s);
        if closure == *s {
            return Ok(QIdentification::Identified(
                Estimand::sum_out(&t.difference(s), q_t).denoting(s.clone()),
            ));
        }
        if closure == t {
            return Ok(QIdentification::NotIdentified { blocking: t });
        }
        q = Arc::new(Estimand::sum_out(&t.difference(&closure), q_t).denoting(closure.clone()));
        a = closure;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::examples::*;

    fn input(g: &CausalGraph) -> Arc<Estimand> {
        Arc::new(Estimand::input(0, g.nodes().clone(), g.nodes().clone()))
    }

    #[test]
    fn identity_case() {
        let g = figure1();
        let s = g.set(["X1", "X2", "Y1"]).unwrap();
        let gs = g.induced(&s).unwrap();
        let q = Arc::new(Estimand::input(0, s.clone(), g.nodes().clone()));
        assert_eq!(
            identify_q(&s, &s, &gs, q.clone()).unwrap(),
            QIdentification::Identified((*q).clone())
        );
    }

    #[test]
    fn bow_is_not_identified() {
        let g = bow();
        let r = identify_q(&g.set(["Y"]).unwrap(), g.nodes(), &g, input(&g)).unwrap();
        assert_eq!(
            r,
            QIdentification::NotIdentified {
                blocking: g.nodes().clone()
            }
        );
        // Q[X] is fine: X has no ancestors inside its component.
        assert!(identify_q(&g.set(["X"]).unwrap(), g.nodes(), &g, input(&g))
            .unwrap()
            .is_identified());
    }

    #[test]
    fn figure2_examples() {
        let g = figure2();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        assert_eq!(
            identify_q(&s(&["Z1"]), g.nodes(), &g, input(&g)).unwrap(),
            QIdentification::NotIdentified {
                blocking: s(&["X1", "Z1"])
            }
        );
        assert!(identify_q(&s(&["W1", "Y1"]), g.nodes(), &g, input(&g))
            .unwrap()
            .is_identified());
        assert!(identify_q(&s(&["Z2"]), g.nodes(), &g, input(&g))
            .unwrap()
            .is_identified());
    }

    #[test]
    fn preconditions() {
        let g = figure1();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        assert!(identify_q(&s(&["X1", "Y2"]), g.nodes(), &g, input(&g)).is_err());
        assert!(identify_q(&NodeSet::new(), g.nodes(), &g, input(&g)).is_err());
        assert!(identify_q(&s(&["Y2"]), &s(&["X1"]), &g, input(&g)).is_err());
    }

    #[test]
    fn decomposition_of_markovian_graph_is_singletons() {
        let g = back_door();
        let parts = q_decompose(&g, g.nodes(), &input(&g)).unwrap();
        assert_eq!(parts.len(), 3);
        for (comp, e) in &parts {
            assert_eq!(comp.len(), 1);
            assert_eq!(e.denotes(), Some(comp));
            e.validate().unwrap();
        }
    }

    #[test]
    fn figure2_component_has_two_ratios() {
        let g = figure2();
        let parts = q_decompose(&g, g.nodes(), &input(&g)).unwrap();
        let xz = g.set(["X1", "Z1"]).unwrap();
        let (_, e) = parts.iter().find(|(c, _)| *c == xz).unwrap();
        match e.term() {
            crate::estimand::Term::Product(fs) => assert_eq!(fs.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
