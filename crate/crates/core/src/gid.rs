//! Generalized identifiability of `P_x(y)` from a collection of `Q[A_i]`.
//!
//! `P_x(y) = Σ_{D \ Y} Π_j Q[S_j]` where `D` is the ancestral closure of `Y`
//! in `G[V \ X]` and the `S_j` are the c-components of `G[D]`. The effect is
//! identifiable exactly when every `Q[S_j]` is identifiable from some
//! `Q[A_i]` with `S_j ⊆ A_i` inside `G[A_i]`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::components::{c_components_unchecked, HedgeSearch, HedgeWitness};
use crate::estimand::Estimand;
use crate::graph::{CausalGraph, GraphError, Result};
use crate::identify::{identify_q, QIdentification};
use crate::nodeset::NodeSet;

/// The collection of given distributions, each named by a label such as `A0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QSpec {
    entries: Vec<(String, NodeSet)>,
}

impl QSpec {
    /// Every set must be non-empty and distinct, and labels must be unique.
    pub fn new(entries: Vec<(String, NodeSet)>) -> Result<QSpec> {
        if entries.is_empty() {
            return Err(GraphError::Precondition(
                "the input collection is empty".into(),
            ));
        }
        for (i, (label, set)) in entries.iter().enumerate() {
            if set.is_empty() {
                return Err(GraphError::Precondition(format!("input {label} is empty")));
            }
            for (other_label, other) in &entries[..i] {
                if other == set {
                    return Err(GraphError::Precondition(format!(
                        "inputs {other_label} and {label} are the same set"
                    )));
                }
                if other_label == label {
                    return Err(GraphError::Precondition(format!(
                        "label {label} used twice"
                    )));
                }
            }
        }
        Ok(QSpec { entries })
    }

    /// Labels `A0, A1, ...` in order.
    pub fn from_sets(sets: Vec<NodeSet>) -> Result<QSpec> {
        QSpec::new(
            sets.into_iter()
                .enumerate()
                .map(|(i, s)| (format!("A{i}"), s))
                .collect(),
        )
    }

    /// The classical setting: only the observational distribution `Q[V] = P(V)`.
    pub fn observational(g: &CausalGraph) -> QSpec {
        QSpec {
            entries: vec![("A0".into(), g.nodes().clone())],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn set(&self, i: usize) -> &NodeSet {
        &self.entries[i].1
    }

    pub fn label(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|(l, _)| l.clone()).collect()
    }

    pub fn sets(&self) -> impl Iterator<Item = &NodeSet> {
        self.entries.iter().map(|(_, s)| s)
    }

    pub fn entries(&self) -> &[(String, NodeSet)] {
        &self.entries
    }

    pub fn check(&self, g: &CausalGraph) -> Result<()> {
        self.sets().try_for_each(|s| g.check_subset(s))
    }

    /// The same collection with one more set appended.
    pub fn with(&self, label: impl Into<String>, set: NodeSet) -> Result<QSpec> {
        let mut entries = self.entries.clone();
        entries.push((label.into(), set));
        QSpec::new(entries)
    }
}

/// Which input produced the estimand for a component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChosenInput {
    pub component: NodeSet,
    pub input: usize,
}

/// Why one input could not supply a component.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputFailure {
    /// The component is not contained in the input set.
    NotSuperset,
    /// The component is inside the input set but `Q[S]` is not identifiable
    /// from it. `hedge` is filled when the hedge search ran and succeeded.
    Hedge {
        blocking: NodeSet,
        hedge: Option<HedgeWitness>,
        hedge_error: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    /// First c-component of `D` that no input can supply.
    pub component: NodeSet,
    /// One entry per input, in input order.
    pub reasons: Vec<InputFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Identifiable {
        estimand: Estimand,
        chosen: Vec<ChosenInput>,
    },
    NotIdentifiable(Failure),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    /// Conditioning variables turned into interventions; empty for
    /// unconditional queries.
    pub moved_to_intervention: NodeSet,
    pub outcome: Outcome,
}

impl Verdict {
    pub fn is_identifiable(&self) -> bool {
        matches!(self.outcome, Outcome::Identifiable { .. })
    }

    pub fn estimand(&self) -> Option<&Estimand> {
        match &self.outcome {
            Outcome::Identifiable { estimand, .. } => Some(estimand),
            Outcome::NotIdentifiable(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&Failure> {
        match &self.outcome {
            Outcome::NotIdentifiable(f) => Some(f),
            Outcome::Identifiable { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GidOptions {
    /// Hedge search used to explain failures; `None` skips it.
    pub hedges: Option<HedgeSearch>,
    /// Check components on the rayon pool. Results are assembled in
    /// component order either way.
    pub parallel: bool,
}

impl Default for GidOptions {
    fn default() -> Self {
        GidOptions {
            hedges: Some(HedgeSearch::default()),
            parallel: false,
        }
    }
}

pub fn gid_decide(x: &NodeSet, y: &NodeSet, spec: &QSpec, g: &CausalGraph) -> Result<Verdict> {
    gid_decide_with(x, y, spec, g, &GidOptions::default())
}

pub fn gid_decide_with(
    x: &NodeSet,
    y: &NodeSet,
    spec: &QSpec,
    g: &CausalGraph,
    opts: &GidOptions,
) -> Result<Verdict> {
    g.check_subset(x)?;
    g.check_subset(y)?;
    spec.check(g)?;
    if y.is_empty() {
        return Err(GraphError::Precondition("the outcome set is empty".into()));
    }
    if !x.is_disjoint(y) {
        return Err(GraphError::Precondition(format!(
            "treatment and outcome overlap on {}",
            g.fmt_set(&x.intersection(y))
        )));
    }
    let rest = g.nodes().difference(x);
    let d = g.induced_unchecked(&rest).anc(y);
    let components = c_components_unchecked(&g.induced_unchecked(&d), &d);

    let inputs: Vec<Arc<Estimand>> = (0..spec.len())
        .map(|i| Arc::new(Estimand::input(i, spec.set(i).clone(), g.nodes().clone())))
        .collect();
    let solve = |s: &NodeSet| solve_component(s, spec, g, &inputs, opts);
    let results: Vec<Result<Result<(Estimand, usize), Failure>>> = if opts.parallel {
        components.par_iter().map(solve).collect()
    } else {
        components.iter().map(solve).collect()
    };

    let mut factors = Vec::with_capacity(components.len());
    let mut chosen = Vec::with_capacity(components.len());
    for (comp, r) in components.iter().zip(results) {
        match r? {
            Ok((e, input)) => {
                factors.push(Arc::new(e));
                chosen.push(ChosenInput {
                    component: comp.clone(),
                    input,
                });
            }
            Err(failure) => {
                return Ok(Verdict {
                    moved_to_intervention: NodeSet::new(),
                    outcome: Outcome::NotIdentifiable(failure),
                })
            }
        }
    }
    let joint = Estimand::product(factors).denoting(d.clone());
    Ok(Verdict {
        moved_to_intervention: NodeSet::new(),
        outcome: Outcome::Identifiable {
            estimand: Estimand::sum_out(&d.difference(y), joint),
            chosen,
        },
    })
}

fn solve_component(
    s: &NodeSet,
    spec: &QSpec,
    g: &CausalGraph,
    inputs: &[Arc<Estimand>],
    opts: &GidOptions,
) -> Result<Result<(Estimand, usize), Failure>> {
    let mut reasons = Vec::with_capacity(spec.len());
    for (i, a) in spec.sets().enumerate() {
        if !s.is_subset(a) {
            reasons.push(InputFailure::NotSuperset);
            continue;
        }
        let ga = g.induced_unchecked(a);
        match identify_q(s, a, &ga, inputs[i].clone())? {
            QIdentification::Identified(e) => return Ok(Ok((e, i))),
            QIdentification::NotIdentified { blocking } => {
                let (hedge, hedge_error) = match &opts.hedges {
                    None => (None, None),
                    Some(search) => match search.find(g, a, s) {
                        Ok(Some(w)) => (Some(w), None),
                        Ok(None) => (None, Some("no hedge found".to_string())),
                        Err(e) => (None, Some(e.to_string())),
                    },
                };
                reasons.push(InputFailure::Hedge {
                    blocking,
                    hedge,
                    hedge_error,
                });
            }
        }
    }
    Ok(Err(Failure {
        component: s.clone(),
        reasons,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::examples::*;

    #[test]
    fn spec_validation() {
        let g = figure1();
        let v = g.nodes().clone();
        assert!(QSpec::from_sets(vec![]).is_err());
        assert!(QSpec::from_sets(vec![NodeSet::new()]).is_err());
        assert!(QSpec::from_sets(vec![v.clone(), v.clone()]).is_err());
        assert!(QSpec::new(vec![
            ("A".into(), v.clone()),
            ("A".into(), g.set(["X1"]).unwrap())
        ])
        .is_err());
        assert_eq!(QSpec::observational(&g), QSpec::from_sets(vec![v]).unwrap());
    }

    #[test]
    fn back_door_is_identifiable() {
        let g = back_door();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        let v = gid_decide(&s(&["X"]), &s(&["Y"]), &QSpec::observational(&g), &g).unwrap();
        assert!(v.is_identifiable());
        v.estimand().unwrap().validate().unwrap();
    }

    #[test]
    fn bow_examples() {
        let g = bow();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        let (x, y) = (s(&["X"]), s(&["Y"]));

        let v = gid_decide(&x, &y, &QSpec::observational(&g), &g).unwrap();
        let f = v.failure().expect("not identifiable");
        assert_eq!(f.component, y);
        match &f.reasons[0] {
            InputFailure::Hedge { hedge: Some(w), .. } => assert_eq!(w.nodes, s(&["X", "Y"])),
            other => panic!("unexpected {other:?}"),
        }

        let spec = QSpec::from_sets(vec![g.nodes().clone(), y.clone()]).unwrap();
        let v = gid_decide(&x, &y, &spec, &g).unwrap();
        assert_eq!(
            v.estimand(),
            Some(&Estimand::input(1, y.clone(), g.nodes().clone()))
        );
        match &v.outcome {
            Outcome::Identifiable { chosen, .. } => assert_eq!(
                chosen,
                &[ChosenInput {
                    component: y,
                    input: 1
                }]
            ),
            _ => unreachable!(),
        }
    }

    #[test]
    fn figure2_joint_targets_are_not_identifiable() {
        let g = figure2();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        let spec = QSpec::observational(&g);
        let x = s(&["X1"]);
        assert!(!gid_decide(&x, &s(&["Y1", "Z1", "Z2"]), &spec, &g)
            .unwrap()
            .is_identifiable());
        assert!(!gid_decide(&x, &s(&["Z1", "Z2"]), &spec, &g)
            .unwrap()
            .is_identifiable());
        let v = gid_decide(&x, &s(&["Z1", "Z2"]), &spec, &g).unwrap();
        assert_eq!(v.failure().unwrap().component, s(&["Z1"]));
    }

    #[test]
    fn empty_treatment_and_errors() {
        let g = figure1();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        let spec = QSpec::observational(&g);
        assert!(gid_decide(&NodeSet::new(), &s(&["Y1"]), &spec, &g)
            .unwrap()
            .is_identifiable());
        assert!(gid_decide(&s(&["X1"]), &NodeSet::new(), &spec, &g).is_err());
        assert!(gid_decide(&s(&["X1"]), &s(&["X1"]), &spec, &g).is_err());
    }

    #[test]
    fn parallel_matches_sequential() {
        let g = figure2();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        let spec = QSpec::observational(&g);
        let par = GidOptions {
            parallel: true,
            ..Default::default()
        };
        for y in [s(&["Y1", "Z2"]), s(&["Z1", "Z2"])] {
            assert_eq!(
                gid_decide(&s(&["X1"]), &y, &spec, &g).unwrap(),
                gid_decide_with(&s(&["X1"]), &y, &spec, &g, &par).unwrap()
            );
        }
    }
}
