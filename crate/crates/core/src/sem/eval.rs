//! Enumeration-based evaluation: `Q[S]`, mutilated models, and estimands.

use std::collections::HashMap;
use std::sync::Arc;

use crate::cgid::ConditionalQuery;
use crate::estimand::{Estimand, Term};
use crate::gid::QSpec;
use crate::nodeset::{NodeIdx, NodeSet};

use super::{DiscreteSEM, DistTable, Normalization, Result, SemError, Space};

/// Values for some nodes, as `(node, value)` pairs.
pub type Assignment = Vec<(NodeIdx, usize)>;

/// `Σ_u Π_{S ∈ s} P(S | pa_S, u_S) Π P(u)` over the full observed space.
/// Nodes in `fixed` contribute an indicator of their fixed value instead of
/// their table; only latents touching the remaining nodes of `s` are summed.
fn factor(m: &DiscreteSEM, s: &NodeSet, fixed: &[(NodeIdx, usize)]) -> Result<Vec<f64>> {
    m.check_budget()?;
    let space = m.observed_space();
    let is_fixed = |v: NodeIdx| fixed.iter().any(|&(x, _)| x == v);
    let free: Vec<NodeIdx> = s.iter().filter(|&v| !is_fixed(v)).collect();
    let checks: Vec<(NodeIdx, usize)> = fixed
        .iter()
        .copied()
        .filter(|&(x, _)| s.contains(x))
        .collect();
    let lat: Vec<usize> = (0..m.latents().len())
        .filter(|&l| free.iter().any(|v| m.latents()[l].children.contains(v)))
        .collect();
    let lat_cards = lat.iter().map(|&l| m.latents()[l].card()).collect();
    let lat_space = Space::new(lat, lat_cards);

    let mut u = vec![0; m.latents().len()];
    let mut v = vec![0; m.graph().names().len()];
    let mut out = Vec::with_capacity(space.size);
    loop {
        if checks.iter().any(|&(x, a)| v[x] != a) {
            out.push(0.0);
        } else {
            let mut total = 0.0;
            loop {
                let mut w: f64 = lat_space
                    .vars
                    .iter()
                    .map(|&l| m.latents()[l].probs[u[l]])
                    .product();
                for &f in &free {
                    w *= m.row(f, &v, &u)[v[f]];
                }
                total += w;
                if !lat_space.advance(&mut u) {
                    break;
                }
            }
            out.push(total);
        }
        if !space.advance(&mut v) {
            break;
        }
    }
    Ok(out)
}

/// The observational joint distribution `P(v)`.
pub fn joint(m: &DiscreteSEM) -> Result<DistTable> {
    q_eval(m, m.graph().nodes())
}

/// `Q[s](v)` as a function of the full realization `v`.
pub fn q_eval(m: &DiscreteSEM, s: &NodeSet) -> Result<DistTable> {
    m.graph().check_subset(s)?;
    let data = factor(m, s, &[])?;
    let v = m.graph().nodes();
    let norm = if s == v {
        Normalization::Joint
    } else {
        Normalization::Conditional {
            given: v.difference(s),
        }
    };
    Ok(DistTable::from_parts(m.observed_space(), data, norm))
}

/// `Q[s1 | s2](v) = Q[s](v) / Σ_{s1} Q[s](v)` with `s = s1 ∪ s2`.
pub fn q_cond_eval(m: &DiscreteSEM, s1: &NodeSet, s2: &NodeSet) -> Result<DistTable> {
    if !s1.is_disjoint(s2) {
        return Err(SemError::Shape("the two sets must be disjoint".into()));
    }
    let q = q_eval(m, &s1.union(s2))?;
    let rest = m.graph().nodes().difference(s1);
    let mut t = q.conditional(&rest)?;
    if s1.is_empty() {
        // Q[s2] / Q[s2]: one wherever defined.
        t = DistTable::from_parts(
            t.space().clone(),
            vec![1.0; t.len()],
            Normalization::Conditional { given: rest },
        );
    }
    Ok(t)
}

/// Ground-truth `P_x(y | z)` from the mutilated model in which every node of
/// `x` is set to its value. The result ranges over `y ∪ z`.
pub fn interventional(
    m: &DiscreteSEM,
    x: &[(NodeIdx, usize)],
    y: &NodeSet,
    z: &NodeSet,
) -> Result<DistTable> {
    let g = m.graph();
    g.check_subset(y)?;
    g.check_subset(z)?;
    let mut xs = NodeSet::new();
    for &(v, a) in x {
        if !g.nodes().contains(v) {
            return Err(SemError::Shape(format!(
                "intervened index {v} is not a node"
            )));
        }
        if !xs.insert(v) {
            return Err(SemError::Shape(format!(
                "{} is intervened on twice",
                g.name(v)
            )));
        }
        if a >= m.card(v) {
            return Err(SemError::Shape(format!(
                "value {a} out of range for {}",
                g.name(v)
            )));
        }
    }
    if !xs.is_disjoint(y) || !xs.is_disjoint(z) || !y.is_disjoint(z) {
        return Err(SemError::Shape(
            "intervened, outcome and conditioning sets must be disjoint".into(),
        ));
    }
    let data = factor(m, g.nodes(), x)?;
    let full = DistTable::from_parts(m.observed_space(), data, Normalization::Joint);
    full.marginal(&y.union(z)).conditional(z)
}

struct Evaluator<'a> {
    tables: &'a [DistTable],
    space: Space,
    memo: HashMap<*const Estimand, Arc<Vec<f64>>>,
}

impl<'a> Evaluator<'a> {
    fn new(tables: &'a [DistTable]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| SemError::Eval("no input tables".into()))?;
        for (i, t) in tables.iter().enumerate() {
            if t.space() != first.space() {
                return Err(SemError::Eval(format!(
                    "input table {i} has a different layout"
                )));
            }
            if t.data().iter().any(|p| p.is_nan() || *p <= 0.0) {
                return Err(SemError::Eval(format!(
                    "input table {i} is not strictly positive"
                )));
            }
        }
        Ok(Evaluator {
            tables,
            space: first.space().clone(),
            memo: HashMap::new(),
        })
    }

    fn input(&self, index: usize) -> Result<&DistTable> {
        self.tables
            .get(index)
            .ok_or_else(|| SemError::Eval(format!("estimand refers to missing input {index}")))
    }

    fn positions(&self, over: &NodeSet) -> Result<Vec<usize>> {
        over.iter()
            .map(|x| {
                self.space.position(x).ok_or_else(|| {
                    SemError::Eval(format!("summed index {x} is not a table variable"))
                })
            })
            .collect()
    }

    fn point(&self, e: &Estimand, v: &mut [usize]) -> Result<f64> {
        match e.term() {
            Term::Input { index, .. } => Ok(self.input(*index)?.at(v)),
            Term::Sum { over, body } => {
                let pos = self.positions(over)?;
                let sub = Space::new(
                    over.to_vec(),
                    pos.iter().map(|&p| self.space.cards[p]).collect(),
                );
                let saved: Vec<usize> = sub.vars.iter().map(|&x| v[x]).collect();
                for &x in &sub.vars {
                    v[x] = 0;
                }
                let mut total = 0.0;
                loop {
                    total += self.point(body, v)?;
                    if !sub.advance(v) {
                        break;
                    }
                }
                for (&x, a) in sub.vars.iter().zip(saved) {
                    v[x] = a;
                }
                Ok(total)
            }
            Term::Product(fs) => fs
                .iter()
                .try_fold(1.0, |acc, f| Ok(acc * self.point(f, v)?)),
            Term::Ratio { num, den } => {
                let d = self.point(den, v)?;
                if d == 0.0 {
                    return Err(SemError::Eval("division by zero".into()));
                }
                Ok(self.point(num, v)? / d)
            }
        }
    }

    fn table(&mut self, e: &Estimand) -> Result<Arc<Vec<f64>>> {
        let key = e as *const Estimand;
        if let Some(t) = self.memo.get(&key) {
            return Ok(t.clone());
        }
        let out = match e.term() {
            Term::Input { index, .. } => self.input(*index)?.data().to_vec(),
            Term::Sum { over, body } => {
                let pos = self.positions(over)?;
                let body = self.table(body)?;
                let key_of = |idx: usize| {
                    idx - pos
                        .iter()
                        .map(|&p| self.space.digit(idx, p) * self.space.strides[p])
                        .sum::<usize>()
                };
                let mut acc = vec![0.0; self.space.size];
                for (idx, b) in body.iter().enumerate() {
                    acc[key_of(idx)] += b;
                }
                (0..self.space.size).map(|idx| acc[key_of(idx)]).collect()
            }
            Term::Product(fs) => {
                let mut out = vec![1.0; self.space.size];
                for f in fs {
                    for (o, x) in out.iter_mut().zip(self.table(f)?.iter()) {
                        *o *= x;
                    }
                }
                out
            }
            Term::Ratio { num, den } => {
                let (n, d) = (self.table(num)?, self.table(den)?);
                if d.contains(&0.0) {
                    return Err(SemError::Eval("division by zero".into()));
                }
                n.iter().zip(d.iter()).map(|(a, b)| a / b).collect()
            }
        };
        let out = Arc::new(out);
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

/// Evaluates `e` at the full realization `v` (indexed by node), with
/// `tables[i]` supplying input `i`.
pub fn eval_estimand(e: &Estimand, tables: &[DistTable], v: &[usize]) -> Result<f64> {
    let ev = Evaluator::new(tables)?;
    if v.len() <= ev.space.vars.iter().copied().max().unwrap_or(0) {
        return Err(SemError::Eval("realization is too short".into()));
    }
    for (&x, &c) in ev.space.vars.iter().zip(&ev.space.cards) {
        if v[x] >= c {
            return Err(SemError::Eval(format!("value out of range at index {x}")));
        }
    }
    let mut v = v.to_vec();
    ev.point(e, &mut v)
}

/// Evaluates `e` at every realization at once. Shared subexpressions are
/// computed once.
pub fn eval_estimand_table(e: &Estimand, tables: &[DistTable]) -> Result<DistTable> {
    let mut ev = Evaluator::new(tables)?;
    let data = ev.table(e)?;
    Ok(DistTable::from_parts(
        ev.space.clone(),
        Arc::unwrap_or_clone(data),
        Normalization::None,
    ))
}

/// Largest difference, over every full realization `v`, between `e`
/// evaluated on the inputs `Q[A_i]` of `m` and the ground truth
/// `P_x(y | z)` at the values `v` assigns to `x ∪ y ∪ z`.
pub fn estimand_error(
    m: &DiscreteSEM,
    spec: &QSpec,
    q: &ConditionalQuery,
    e: &Estimand,
) -> Result<f64> {
    let tables = spec
        .sets()
        .map(|a| q_eval(m, a))
        .collect::<Result<Vec<_>>>()?;
    let est = eval_estimand_table(e, &tables)?;
    let xs: Vec<NodeIdx> = q.x.iter().collect();
    let x_space = Space::new(xs.clone(), xs.iter().map(|&v| m.card(v)).collect());
    let mut truth = Vec::with_capacity(x_space.size);
    let mut v = vec![0; m.graph().names().len()];
    loop {
        let assign: Assignment = xs.iter().map(|&x| (x, v[x])).collect();
        truth.push(interventional(m, &assign, &q.y, &q.z)?);
        if !x_space.advance(&mut v) {
            break;
        }
    }
    let space = est.space().clone();
    let mut worst: f64 = 0.0;
    for (idx, p) in est.data().iter().enumerate() {
        space.decode(idx, &mut v);
        let t = truth[x_space.index(&v)].at(&v);
        worst = worst.max((p - t).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::c_components;
    use crate::graph::examples::*;
    use crate::graph::CausalGraph;
    use crate::sem::{random_model, Cpt, Latent};

    fn close(a: &DistTable, b: &DistTable, tol: f64) -> bool {
        a.max_abs_diff(b).is_some_and(|d| d <= tol)
    }

    #[test]
    fn single_node_joint() {
        let g = CausalGraph::from_edges(&["X"], &[], &[]).unwrap();
        let cpt = Cpt {
            node: 0,
            parents: vec![],
            latents: vec![],
            rows: vec![vec![0.7, 0.3]],
        };
        let m = DiscreteSEM::new(g, vec![2], vec![], vec![cpt]).unwrap();
        let j = joint(&m).unwrap();
        assert_eq!(j.data(), &[0.7, 0.3]);
    }

    #[test]
    fn uniform_figure1_model_is_uniform() {
        let g = figure1();
        let mut m = random_model(&g, 3, 2).unwrap();
        let latents: Vec<Latent> = m
            .latents()
            .iter()
            .map(|l| Latent {
                probs: vec![0.5; 2],
                ..l.clone()
            })
            .collect();
        let cpts: Vec<Cpt> = m
            .cpts()
            .map(|c| Cpt {
                rows: vec![vec![0.5; 2]; c.rows.len()],
                ..c.clone()
            })
            .collect();
        m = DiscreteSEM::new(g, vec![2; 4], latents, cpts).unwrap();
        for p in joint(&m).unwrap().data() {
            assert!((p - 1.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn q_of_everything_and_nothing() {
        let g = figure2();
        let m = random_model(&g, 11, 3).unwrap();
        let j = joint(&m).unwrap();
        assert!((j.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(j.data().iter().all(|p| *p > 0.0));
        assert_eq!(q_eval(&m, g.nodes()).unwrap().data(), j.data());
        assert!(q_eval(&m, &NodeSet::new())
            .unwrap()
            .data()
            .iter()
            .all(|p| *p == 1.0));
    }

    #[test]
    fn q_factorizes_over_c_components() {
        let g = figure2();
        let m = random_model(&g, 5, 2).unwrap();
        let s = g.set(["Y1", "W1", "Z1", "Z2"]).unwrap();
        let whole = q_eval(&m, &s).unwrap();
        let gs = g.induced(&s).unwrap();
        let mut prod = vec![1.0; whole.len()];
        for c in c_components(&gs, &s).unwrap() {
            for (p, q) in prod.iter_mut().zip(q_eval(&m, &c).unwrap().data()) {
                *p *= q;
            }
        }
        for (a, b) in whole.data().iter().zip(&prod) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn q_cond_chain_rule() {
        let g = figure2();
        let m = random_model(&g, 9, 2).unwrap();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        // Q[{Y1,W1}] = Q[Y1 | W1] · Σ_{Y1} Q[{Y1,W1}]
        let yw = q_eval(&m, &s(&["Y1", "W1"])).unwrap();
        let y_given_w = q_cond_eval(&m, &s(&["Y1"]), &s(&["W1"])).unwrap();
        let sum_y = yw.marginal(&g.nodes().difference(&s(&["Y1"])));
        let mut v = vec![0; 5];
        for (idx, q) in yw.data().iter().enumerate() {
            yw.space().decode(idx, &mut v);
            assert!((q - y_given_w.at(&v) * sum_y.at(&v)).abs() < 1e-12);
        }
        assert!(q_cond_eval(&m, &NodeSet::new(), &s(&["W1"]))
            .unwrap()
            .data()
            .iter()
            .all(|p| *p == 1.0));
        assert!(close(
            &q_cond_eval(&m, &s(&["Z1"]), &NodeSet::new()).unwrap(),
            &q_eval(&m, &s(&["Z1"]))
                .unwrap()
                .conditional(&g.nodes().difference(&s(&["Z1"])))
                .unwrap(),
            1e-15
        ));
    }

    #[test]
    fn intervention_without_x_is_marginal() {
        let g = figure1();
        let m = random_model(&g, 2, 3).unwrap();
        let y = g.set(["Y1", "Y2"]).unwrap();
        let a = interventional(&m, &[], &y, &NodeSet::new()).unwrap();
        assert!(close(&a, &joint(&m).unwrap().marginal(&y), 1e-15));
    }

    #[test]
    fn back_door_adjustment() {
        let g = back_door();
        let m = random_model(&g, 21, 3).unwrap();
        let (x, y, z) = (
            g.index_of("X").unwrap(),
            g.index_of("Y").unwrap(),
            g.index_of("Z").unwrap(),
        );
        let j = joint(&m).unwrap();
        let pz = j.marginal(&NodeSet::singleton(z));
        let y_given_xz = j.conditional(&[x, z].into_iter().collect()).unwrap();
        for xv in 0..m.card(x) {
            let truth =
                interventional(&m, &[(x, xv)], &NodeSet::singleton(y), &NodeSet::new()).unwrap();
            for yv in 0..m.card(y) {
                let adj: f64 = (0..m.card(z))
                    .map(|zv| {
                        let mut v = vec![0; 3];
                        v[x] = xv;
                        v[y] = yv;
                        v[z] = zv;
                        pz.at(&v) * y_given_xz.at(&v)
                    })
                    .sum();
                assert!((truth.get(&[yv]) - adj).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interventional_rejects_bad_assignments() {
        let g = bow();
        let m = random_model(&g, 1, 2).unwrap();
        let (x, y) = (g.index_of("X").unwrap(), g.index_of("Y").unwrap());
        let ys = NodeSet::singleton(y);
        assert!(interventional(&m, &[(x, 2)], &ys, &NodeSet::new()).is_err());
        assert!(interventional(&m, &[(x, 0), (x, 1)], &ys, &NodeSet::new()).is_err());
        assert!(interventional(&m, &[(y, 0)], &ys, &NodeSet::new()).is_err());
    }

    #[test]
    fn back_door_estimand_matches_truth() {
        let g = back_door();
        let s = |n: &[&str]| g.set(n.iter().copied()).unwrap();
        let q = ConditionalQuery::new(&g, s(&["X"]), s(&["Y"]), NodeSet::new()).unwrap();
        let spec = QSpec::observational(&g);
        let v = crate::gid::gid_decide(&q.x, &q.y, &spec, &g).unwrap();
        let e = v.estimand().unwrap();
        for seed in 0..5 {
            let m = random_model(&g, seed, 3).unwrap();
            assert!(estimand_error(&m, &spec, &q, e).unwrap() < 1e-12);
        }
        // The unadjusted conditional P(y | x) is not the effect.
        let p = Arc::new(Estimand::input(0, g.nodes().clone(), g.nodes().clone()));
        let naive = Estimand::ratio(
            Estimand::sum_out(&s(&["Z"]), p.clone()),
            Estimand::sum_out(&s(&["Y", "Z"]), p),
        );
        let m = random_model(&g, 0, 3).unwrap();
        assert!(estimand_error(&m, &spec, &q, &naive).unwrap() > 1e-3);
    }

    #[test]
    fn estimand_basics() {
        let g = figure2();
        let m = random_model(&g, 4, 2).unwrap();
        let tables = vec![joint(&m).unwrap()];
        let q = Arc::new(Estimand::input(0, g.nodes().clone(), g.nodes().clone()));
        let v = vec![1, 0, 1, 1, 0];
        assert_eq!(eval_estimand(&q, &tables, &v).unwrap(), tables[0].at(&v));
        assert_eq!(
            eval_estimand(&Estimand::ratio(q.clone(), q.clone()), &tables, &v).unwrap(),
            1.0
        );
        let total = Estimand::sum_out(g.nodes(), q.clone());
        assert!((eval_estimand(&total, &tables, &v).unwrap() - 1.0).abs() < 1e-12);
        let t = eval_estimand_table(&total, &tables).unwrap();
        assert!(t.data().iter().all(|p| (p - 1.0).abs() < 1e-12));
        assert!(eval_estimand(
            &Estimand::input(1, g.nodes().clone(), g.nodes().clone()),
            &tables,
            &v
        )
        .is_err());
        let zero = DistTable::from_parts(
            tables[0].space().clone(),
            vec![0.0; 32],
            Normalization::None,
        );
        assert!(eval_estimand(&q, &[zero], &v).is_err());
    }

    #[test]
    fn point_and_table_evaluation_agree() {
        let g = figure2();
        let m = random_model(&g, 13, 3).unwrap();
        let tables = vec![joint(&m).unwrap()];
        let q = Arc::new(Estimand::input(0, g.nodes().clone(), g.nodes().clone()));
        let parts = crate::identify::q_decompose(&g, g.nodes(), &q).unwrap();
        for (_, e) in &parts {
            let t = eval_estimand_table(e, &tables).unwrap();
            let mut v = vec![0; 5];
            let space = t.space().clone();
            for idx in 0..t.len() {
                space.decode(idx, &mut v);
                let p = eval_estimand(e, &tables, &v).unwrap();
                assert!((p - t.data()[idx]).abs() < 1e-12);
            }
        }
    }
}
