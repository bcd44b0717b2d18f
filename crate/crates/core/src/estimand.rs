//! Symbolic estimands: expression trees over the given `Q[A_i]` tables.
//!
//! Every node is a function of a full realization `v` of the observed
//! variables, exactly like `Q[S](v)`. The free-variable scope of a node is
//! tracked alongside it: an input table is a function of all of `V`, a sum
//! removes its summation variables, products and ratios take the union.
//!
//! A node may also carry the set `S` it is known to compute `Q[S]` for. The
//! label is metadata for compact rendering and never affects evaluation.

use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::graph::NodeId;
use crate::nodeset::NodeSet;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Estimand {
    term: Term,
    scope: NodeSet,
    denotes: Option<NodeSet>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    /// The given table `Q[A_index]`, with `set = A_index`.
    Input { index: usize, set: NodeSet },
    /// Sum over every joint value of `over`, holding the rest of `v` fixed.
    Sum { over: NodeSet, body: Arc<Estimand> },
    /// Pointwise product; the empty product is the constant one.
    Product(Vec<Arc<Estimand>>),
    Ratio {
        num: Arc<Estimand>,
        den: Arc<Estimand>,
    },
}

impl Estimand {
    /// `Q[set]` given as input number `index`, a function over `universe`.
    pub fn input(index: usize, set: NodeSet, universe: NodeSet) -> Estimand {
        Estimand {
            denotes: Some(set.clone()),
            term: Term::Input { index, set },
            scope: universe,
        }
    }

    /// The constant one over `scope`.
    pub fn one(scope: NodeSet) -> Estimand {
        Estimand {
            term: Term::Product(Vec::new()),
            scope,
            denotes: None,
        }
    }

    /// Sums `body` over `over`. Summing over nothing returns `body`, and an
    /// unlabeled inner sum is merged into this one.
    pub fn sum_out(over: &NodeSet, body: impl Into<Arc<Estimand>>) -> Estimand {
        let body = body.into();
        debug_assert!(
            over.is_subset(&body.scope),
            "summed variables must be in scope"
        );
        if over.is_empty() {
            return Arc::unwrap_or_clone(body);
        }
        if let (
            Term::Sum {
                over: inner,
                body: inner_body,
            },
            None,
        ) = (&body.term, &body.denotes)
        {
            return Estimand::sum_out(&over.union(inner), inner_body.clone());
        }
        Estimand {
            scope: body.scope.difference(over),
            term: Term::Sum {
                over: over.clone(),
                body,
            },
            denotes: None,
        }
    }

    /// Product of `factors`; a single factor is returned as is.
    pub fn product(factors: Vec<Arc<Estimand>>) -> Estimand {
        if factors.len() == 1 {
            return Arc::unwrap_or_clone(factors.into_iter().next().expect("one factor"));
        }
        let mut scope = NodeSet::new();
        for f in &factors {
            scope.extend_from(&f.scope);
        }
        Estimand {
            term: Term::Product(factors),
            scope,
            denotes: None,
        }
    }

    pub fn ratio(num: impl Into<Arc<Estimand>>, den: impl Into<Arc<Estimand>>) -> Estimand {
        let (num, den) = (num.into(), den.into());
        Estimand {
            scope: num.scope.union(&den.scope),
            term: Term::Ratio { num, den },
            denotes: None,
        }
    }

    /// Records that this expression computes `Q[set]`.
    pub fn denoting(mut self, set: NodeSet) -> Estimand {
        self.denotes = Some(set);
        self
    }

    pub fn term(&self) -> &Term {
        &self.term
    }

    pub fn scope(&self) -> &NodeSet {
        &self.scope
    }

    pub fn denotes(&self) -> Option<&NodeSet> {
        self.denotes.as_ref()
    }

    pub fn is_one(&self) -> bool {
        matches!(&self.term, Term::Product(f) if f.is_empty())
    }

    /// Checks the scope bookkeeping of every node.
    pub fn validate(&self) -> Result<(), String> {
        match &self.term {
            Term::Input { .. } => Ok(()),
            Term::Sum { over, body } => {
                body.validate()?;
                if !over.is_subset(&body.scope) {
                    return Err(format!(
                        "sum over {over:?} outside body scope {:?}",
                        body.scope
                    ));
                }
                if self.scope != body.scope.difference(over) {
                    return Err("sum scope is not body scope minus summed variables".into());
                }
                Ok(())
            }
            Term::Product(factors) => {
                let mut scope = NodeSet::new();
                for f in factors {
                    f.validate()?;
                    scope.extend_from(&f.scope);
                }
                if !factors.is_empty() && scope != self.scope {
                    return Err("product scope is not the union of factor scopes".into());
                }
                Ok(())
            }
            Term::Ratio { num, den } => {
                num.validate()?;
                den.validate()?;
                if !den.scope.is_subset(&num.scope) {
                    return Err(format!(
                        "ratio denominator scope {:?} exceeds numerator scope {:?}",
                        den.scope, num.scope
                    ));
                }
                Ok(())
            }
        }
    }

    /// Number of distinct nodes, counting shared subtrees once.
    pub fn dag_size(&self) -> usize {
        fn walk(e: &Estimand, seen: &mut std::collections::HashSet<*const Estimand>) {
            if !seen.insert(e as *const Estimand) {
                return;
            }
            match &e.term {
                Term::Input { .. } => {}
                Term::Sum { body, .. } => walk(body, seen),
                Term::Product(fs) => fs.iter().for_each(|f| walk(f, seen)),
                Term::Ratio { num, den } => {
                    walk(num, seen);
                    walk(den, seen);
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        walk(self, &mut seen);
        seen.len()
    }
}

/// Semantics-preserving rewrites: nested sums collapse, products flatten,
/// ones disappear, and syntactically identical factors cancel across a ratio.
/// Cancellation relies on strictly positive inputs.
pub fn simplify(e: &Estimand) -> Estimand {
    match &e.term {
        Term::Input { .. } => e.clone(),
        Term::Sum { over, body } => {
            let body = simplify(body);
            let merged = match &body.term {
                Term::Sum {
                    over: inner,
                    body: inner_body,
                } => Estimand::sum_out(&over.union(inner), inner_body.clone()),
                _ => Estimand::sum_out(over, body),
            };
            keep_label(merged, e)
        }
        Term::Product(_) | Term::Ratio { .. } => {
            let (mut num, mut den) = (Vec::new(), Vec::new());
            split_factors(e, false, &mut num, &mut den);
            cancel(&mut num, &mut den);
            let num_e = if num.is_empty() {
                Estimand::one(NodeSet::new())
            } else {
                Estimand::product(num)
            };
            let out = if den.is_empty() {
                num_e
            } else {
                Estimand::ratio(num_e, Estimand::product(den))
            };
            // A vanished expression still has the original scope.
            let out = if out.is_one() {
                Estimand::one(e.scope.clone())
            } else {
                out
            };
            keep_label(out, e)
        }
    }
}

fn keep_label(mut out: Estimand, original: &Estimand) -> Estimand {
    if out.denotes.is_none() {
        out.denotes = original.denotes.clone();
    }
    out
}

/// Flattens products and ratios into numerator and denominator factor lists.
fn split_factors(
    e: &Estimand,
    inverted: bool,
    num: &mut Vec<Arc<Estimand>>,
    den: &mut Vec<Arc<Estimand>>,
) {
    match &e.term {
        Term::Product(fs) => {
            for f in fs {
                split_factors(f, inverted, num, den);
            }
        }
        Term::Ratio { num: n, den: d } => {
            split_factors(n, inverted, num, den);
            split_factors(d, !inverted, num, den);
        }
        _ => {
            let s = Arc::new(simplify(e));
            if s.is_one() {
                return;
            }
            if matches!(s.term, Term::Product(_) | Term::Ratio { .. }) {
                split_factors(&s, inverted, num, den);
            } else if inverted {
                den.push(s);
            } else {
                num.push(s);
            }
        }
    }
}

fn cancel(num: &mut Vec<Arc<Estimand>>, den: &mut Vec<Arc<Estimand>>) {
    let mut i = 0;
    while i < num.len() {
        if let Some(j) = den.iter().position(|d| d == &num[i]) {
            num.remove(i);
            den.remove(j);
        } else {
            i += 1;
        }
    }
}

/// How an estimand is turned into text.
pub struct Render<'a> {
    pub names: &'a [NodeId],
    /// Label of each input, e.g. `A0`.
    pub labels: &'a [String],
    /// Print labeled subexpressions as `Q[S]` instead of expanding them.
    pub compact: bool,
}

impl Render<'_> {
    fn set(&self, s: &NodeSet) -> String {
        s.iter()
            .map(|i| {
                self.names
                    .get(i)
                    .map_or_else(|| format!("#{i}"), |n| n.to_string())
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    fn label(&self, index: usize) -> String {
        self.labels
            .get(index)
            .cloned()
            .unwrap_or_else(|| format!("A{index}"))
    }

    pub fn text(&self, e: &Estimand) -> String {
        let mut out = String::new();
        self.write(e, true, &mut out);
        out
    }

    fn write(&self, e: &Estimand, top: bool, out: &mut String) {
        if !top && self.compact {
            if let (Some(s), false) = (&e.denotes, matches!(e.term, Term::Input { .. })) {
                let _ = write!(out, "Q[{}]", self.set(s));
                return;
            }
        }
        match &e.term {
            Term::Input { index, .. } => {
                let _ = write!(out, "Q[{}]", self.label(*index));
            }
            Term::Sum { over, body } => {
                let _ = write!(out, "Σ_{{{}}} ", self.set(over));
                self.child(
                    body,
                    needs_parens(body, self.compact, &[Kind::Product, Kind::Ratio]),
                    out,
                );
            }
            Term::Product(fs) if fs.is_empty() => out.push('1'),
            Term::Product(fs) => {
                for (i, f) in fs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(" · ");
                    }
                    self.child(
                        f,
                        needs_parens(f, self.compact, &[Kind::Sum, Kind::Product, Kind::Ratio]),
                        out,
                    );
                }
            }
            Term::Ratio { num, den } => {
                self.child(num, needs_parens(num, self.compact, &[Kind::Ratio]), out);
                out.push_str(" / ");
                self.child(
                    den,
                    needs_parens(den, self.compact, &[Kind::Product, Kind::Ratio]),
                    out,
                );
            }
        }
    }

    fn child(&self, e: &Estimand, parens: bool, out: &mut String) {
        if parens {
            out.push('(');
        }
        self.write(e, false, out);
        if parens {
            out.push(')');
        }
    }

    /// JSON form: `{"kind": "input" | "sum" | "prod" | "ratio", ...}`.
    pub fn json(&self, e: &Estimand) -> Value {
        let names = |s: &NodeSet| -> Vec<String> {
            s.iter()
                .map(|i| {
                    self.names
                        .get(i)
                        .map_or_else(|| format!("#{i}"), |n| n.to_string())
                })
                .collect()
        };
        let mut v = match &e.term {
            Term::Input { index, set } => json!({
                "kind": "input",
                "index": index,
                "label": self.label(*index),
                "set": names(set),
            }),
            Term::Sum { over, body } => json!({
                "kind": "sum",
                "over": names(over),
                "body": self.json(body),
            }),
            Term::Product(fs) => json!({
                "kind": "prod",
                "factors": fs.iter().map(|f| self.json(f)).collect::<Vec<_>>(),
            }),
            Term::Ratio { num, den } => json!({
                "kind": "ratio",
                "num": self.json(num),
                "den": self.json(den),
            }),
        };
        v["scope"] = json!(names(&e.scope));
        if let Some(d) = &e.denotes {
            v["denotes"] = json!(names(d));
        }
        v
    }
}

#[derive(PartialEq)]
enum Kind {
    Sum,
    Product,
    Ratio,
}

fn needs_parens(e: &Estimand, compact: bool, kinds: &[Kind]) -> bool {
    if compact && e.denotes.is_some() {
        return false;
    }
    let kind = match &e.term {
        Term::Input { .. } => return false,
        Term::Product(fs) if fs.is_empty() => return false,
        Term::Sum { .. } => Kind::Sum,
        Term::Product(_) => Kind::Product,
        Term::Ratio { .. } => Kind::Ratio,
    };
    kinds.contains(&kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<NodeId> {
        (0..n)
            .map(|i| NodeId::new(format!("V{i}")).unwrap())
            .collect()
    }

    fn q(universe: usize) -> Arc<Estimand> {
        Arc::new(Estimand::input(
            0,
            NodeSet::full(universe),
            NodeSet::full(universe),
        ))
    }

    #[test]
    fn empty_sum_is_identity() {
        let e = q(3);
        assert_eq!(Estimand::sum_out(&NodeSet::new(), e.clone()), *e);
    }

    #[test]
    fn scopes_follow_constructors() {
        let e = q(3);
        let s = Estimand::sum_out(&NodeSet::singleton(1), e.clone());
        assert_eq!(s.scope().to_vec(), vec![0, 2]);
        let r = Estimand::ratio(e.clone(), s.clone());
        assert_eq!(r.scope(), &NodeSet::full(3));
        r.validate().unwrap();
        assert!(Estimand::ratio(s, e).validate().is_err());
    }

    #[test]
    fn nested_unlabeled_sums_merge() {
        let e = q(3);
        let inner = Estimand::sum_out(&NodeSet::singleton(0), e.clone());
        let outer = Estimand::sum_out(&NodeSet::singleton(1), inner);
        match outer.term() {
            Term::Sum { over, body } => {
                assert_eq!(over.to_vec(), vec![0, 1]);
                assert_eq!(**body, *e);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ratio_of_equals_is_one() {
        let e = Arc::new(Estimand::sum_out(&NodeSet::singleton(2), q(3)));
        let s = simplify(&Estimand::ratio(e.clone(), e.clone()));
        assert!(s.is_one());
        assert_eq!(s.scope(), e.scope());
    }

    #[test]
    fn telescoping_product_collapses() {
        let base = q(3);
        let prefix = |k: usize| -> Arc<Estimand> {
            let over: NodeSet = (k..3).collect();
            Arc::new(Estimand::sum_out(&over, base.clone()))
        };
        let factors = (1..=3)
            .map(|i| Arc::new(Estimand::ratio(prefix(i), prefix(i - 1))))
            .collect();
        let s = simplify(&Estimand::product(factors));
        match s.term() {
            Term::Ratio { num, den } => {
                assert_eq!(*num, base);
                assert_eq!(*den, prefix(0));
            }
            other => panic!("unexpected {other:?}"),
        }
        s.validate().unwrap();
    }

    #[test]
    fn renders_compact_and_json() {
        let n = names(3);
        let labels = vec!["A0".to_string()];
        let base = q(3);
        let labeled = Arc::new(
            Estimand::product(vec![base.clone(), base.clone()]).denoting(NodeSet::full(2)),
        );
        let num = Estimand::sum_out(&NodeSet::singleton(0), labeled.clone());
        let den = Estimand::sum_out(&[0, 1].into_iter().collect(), labeled);
        let r = Estimand::ratio(num, den);
        let compact = Render {
            names: &n,
            labels: &labels,
            compact: true,
        };
        assert_eq!(compact.text(&r), "Σ_{V0} Q[V0,V1] / Σ_{V0,V1} Q[V0,V1]");
        let full = Render {
            names: &n,
            labels: &labels,
            compact: false,
        };
        assert_eq!(
            full.text(&r),
            "Σ_{V0} (Q[A0] · Q[A0]) / Σ_{V0,V1} (Q[A0] · Q[A0])"
        );
        let j = full.json(&r);
        assert_eq!(j["kind"], "ratio");
        assert_eq!(j["num"]["kind"], "sum");
        assert_eq!(j["num"]["body"]["kind"], "prod");
        assert_eq!(j["num"]["body"]["factors"][0]["kind"], "input");
        assert_eq!(j["den"]["over"], json!(["V0", "V1"]));
    }
}
