//! Randomized search for two models that agree on every given `Q[A_i]` but
//! disagree on the target `P_x(y | z)`.
//!
//! The first model is random. The second starts equal to it and moves inside
//! the set of models with the same inputs: each step follows the gradient of
//! one target cell projected onto the null space of the input Jacobian, then
//! Gauss-Newton pulls the inputs back onto those of the first model. Tables
//! are parameterized by log-probabilities with a softmax per row, so every
//! iterate is a positive model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cgid::ConditionalQuery;
use crate::gid::QSpec;
use crate::graph::CausalGraph;
use crate::nodeset::NodeIdx;

use super::eval::{interventional, q_eval, Assignment};
use super::{random_model_with, DiscreteSEM, ModelConfig, Result, SemError, Space};

#[derive(Clone, Debug)]
pub struct WitnessConfig {
    /// Total number of ascent steps across all restarts.
    pub budget: u64,
    pub restarts: usize,
    pub seed: u64,
    pub model: ModelConfig,
    /// Largest allowed `‖Q^{M1}[A_i] − Q^{M2}[A_i]‖_∞`.
    pub tolerance: f64,
    /// Smallest target difference accepted as a witness.
    pub min_gap: f64,
    /// The ascent stops once this difference is reached.
    pub target_gap: f64,
    /// No table entry of the second model may drop below this.
    pub min_entry: f64,
    pub parallel: bool,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            budget: 400,
            restarts: 4,
            seed: 0,
            model: ModelConfig::default(),
            tolerance: 1e-6,
            min_gap: 0.02,
            target_gap: 0.05,
            min_entry: 1e-3,
            parallel: false,
        }
    }
}

/// Independently recomputed agreement and disagreement of a model pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCheck {
    /// Largest input difference over all `A_i` and realizations.
    pub mismatch: f64,
    /// Largest target difference.
    pub gap: f64,
    /// Realization of `x ∪ y ∪ z` where `gap` is attained.
    pub cell: Assignment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessPair {
    pub m1: DiscreteSEM,
    pub m2: DiscreteSEM,
    pub check: PairCheck,
    /// Index of the restart that found the pair.
    pub restart: usize,
}

/// Target values for every realization of `x`, flattened, plus the cell
/// each entry belongs to.
fn targets(m: &DiscreteSEM, q: &ConditionalQuery) -> Result<(Vec<f64>, Vec<Assignment>)> {
    let xs: Vec<NodeIdx> = q.x.iter().collect();
    let x_space = Space::new(xs.clone(), xs.iter().map(|&v| m.card(v)).collect());
    let mut v = vec![0; m.graph().names().len()];
    let mut values = Vec::new();
    let mut cells = Vec::new();
    loop {
        let assign: Assignment = xs.iter().map(|&x| (x, v[x])).collect();
        let t = interventional(m, &assign, &q.y, &q.z)?;
        let mut w = v.clone();
        for (idx, p) in t.data().iter().enumerate() {
            t.space().decode(idx, &mut w);
            let mut cell = assign.clone();
            cell.extend(t.vars().iter().map(|&y| (y, w[y])));
            cells.push(cell);
            values.push(*p);
        }
        if !x_space.advance(&mut v) {
            break;
        }
    }
    Ok((values, cells))
}

fn inputs(m: &DiscreteSEM, spec: &QSpec) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for a in spec.sets() {
        out.extend_from_slice(q_eval(m, a)?.data());
    }
    Ok(out)
}

/// Recomputes, from scratch, how far apart `m1` and `m2` are on the inputs
/// and on the target.
pub fn verify_pair(
    spec: &QSpec,
    q: &ConditionalQuery,
    m1: &DiscreteSEM,
    m2: &DiscreteSEM,
) -> Result<PairCheck> {
    if m1.graph() != m2.graph() || m1.cards() != m2.cards() {
        return Err(SemError::Shape(
            "the two models differ in graph or domains".into(),
        ));
    }
    spec.check(m1.graph())?;
    let mut mismatch: f64 = 0.0;
    for a in spec.sets() {
        let d = q_eval(m1, a)?
            .max_abs_diff(&q_eval(m2, a)?)
            .expect("same layout");
        mismatch = mismatch.max(d);
    }
    let (t1, cells) = targets(m1, q)?;
    let (t2, _) = targets(m2, q)?;
    let (best, gap) = t1
        .iter()
        .zip(&t2)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    Ok(PairCheck {
        mismatch,
        gap,
        cell: cells[best].clone(),
    })
}

/// Where each softmax block of the parameter vector lives in the model.
#[derive(Clone, Copy)]
enum Slot {
    Latent(usize),
    Row(NodeIdx, usize),
}

struct Layout {
    blocks: Vec<(Slot, usize, usize)>,
    len: usize,
}

impl Layout {
    fn new(m: &DiscreteSEM) -> Layout {
        let mut blocks = Vec::new();
        let mut len = 0;
        for (l, lat) in m.latents().iter().enumerate() {
            blocks.push((Slot::Latent(l), len, lat.card()));
            len += lat.card();
        }
        for c in m.cpts() {
            for r in 0..c.rows.len() {
                let k = m.card(c.node);
                blocks.push((Slot::Row(c.node, r), len, k));
                len += k;
            }
        }
        Layout { blocks, len }
    }

    fn params(&self, m: &DiscreteSEM) -> Vec<f64> {
        let mut theta = vec![0.0; self.len];
        for &(slot, off, k) in &self.blocks {
            let probs = match slot {
                Slot::Latent(l) => &m.latents[l].probs,
                Slot::Row(v, r) => &m.cpt(v).rows[r],
            };
            for i in 0..k {
                theta[off + i] = probs[i].ln();
            }
        }
        theta
    }

    fn model(&self, base: &DiscreteSEM, theta: &[f64]) -> DiscreteSEM {
        let mut m = base.clone();
        for &(slot, off, k) in &self.blocks {
            let block = &theta[off..off + k];
            let top = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = block.iter().map(|t| (t - top).exp()).collect();
            let total: f64 = exp.iter().sum();
            let probs: Vec<f64> = exp.into_iter().map(|e| e / total).collect();
            match slot {
                Slot::Latent(l) => m.latents[l].probs = probs,
                Slot::Row(v, r) => m.cpts[v].as_mut().expect("node").rows[r] = probs,
            }
        }
        m
    }
}

struct Problem<'a> {
    base: &'a DiscreteSEM,
    layout: Layout,
    spec: &'a QSpec,
    query: &'a ConditionalQuery,
    reference: Vec<f64>,
}

impl Problem<'_> {
    fn eval(&self, theta: &[f64]) -> Result<(DVector<f64>, DVector<f64>)> {
        let m = self.layout.model(self.base, theta);
        let r: Vec<f64> = inputs(&m, self.spec)?
            .iter()
            .zip(&self.reference)
            .map(|(a, b)| a - b)
            .collect();
        let (t, _) = targets(&m, self.query)?;
        Ok((DVector::from_vec(r), DVector::from_vec(t)))
    }

    /// Central-difference Jacobians of the residual and the target.
    fn jacobians(&self, theta: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        const H: f64 = 1e-6;
        let mut jr = DMatrix::zeros(self.reference.len(), theta.len());
        let mut jt: Option<DMatrix<f64>> = None;
        let mut probe = theta.to_vec();
        for k in 0..theta.len() {
            probe[k] = theta[k] + H;
            let (r_plus, t_plus) = self.eval(&probe)?;
            probe[k] = theta[k] - H;
            let (r_minus, t_minus) = self.eval(&probe)?;
            probe[k] = theta[k];
            jr.set_column(k, &((r_plus - r_minus) / (2.0 * H)));
            let jt = jt.get_or_insert_with(|| DMatrix::zeros(t_plus.len(), theta.len()));
            jt.set_column(k, &((t_plus - t_minus) / (2.0 * H)));
        }
        Ok((jr, jt.unwrap_or_else(|| DMatrix::zeros(0, 0))))
    }

    fn min_entry(&self, theta: &[f64]) -> f64 {
        self.layout.model(self.base, theta).min_entry()
    }
}

fn pinv(j: &DMatrix<f64>) -> DMatrix<f64> {
    j.clone()
        .pseudo_inverse(1e-7)
        .expect("non-negative threshold")
}

/// Chord Gauss-Newton from `theta` using the fixed pseudo-inverse `jp`.
fn project(
    p: &Problem,
    jp: &DMatrix<f64>,
    mut theta: DVector<f64>,
) -> Result<Option<DVector<f64>>> {
    let mut last = f64::INFINITY;
    for _ in 0..60 {
        let (r, _) = p.eval(theta.as_slice())?;
        let norm = r.amax();
        if norm < 1e-12 {
            return Ok(Some(theta));
        }
        if norm > 0.5 * last && last < 1e-9 {
            // Converged as far as round-off allows.
            return Ok((norm < 1e-10).then_some(theta));
        }
        if norm >= last {
            return Ok(None);
        }
        last = norm;
        theta -= jp * r;
    }
    Ok(None)
}

fn run_restart(
    g: &CausalGraph,
    spec: &QSpec,
    q: &ConditionalQuery,
    cfg: &WitnessConfig,
    seed: u64,
    steps: u64,
) -> Result<Option<(DiscreteSEM, DiscreteSEM)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m1 = random_model_with(g, &mut rng, &cfg.model)?;
    let layout = Layout::new(&m1);
    if layout.len > 2000 {
        return Err(SemError::Shape(format!(
            "{} parameters is too many for the witness search",
            layout.len
        )));
    }
    let p = Problem {
        base: &m1,
        reference: inputs(&m1, spec)?,
        layout,
        spec,
        query: q,
    };
    let theta0 = DVector::from_vec(p.layout.params(&m1));
    let (_, t0) = p.eval(theta0.as_slice())?;

    let mut theta = theta0;
    let mut cell = None;
    let mut gap = 0.0;
    let mut alpha: f64 = 0.5;
    for _ in 0..steps {
        let (jr, jt) = p.jacobians(theta.as_slice())?;
        let jp = pinv(&jr);
        let null = DMatrix::identity(theta.len(), theta.len()) - &jp * &jr;
        let c = match cell {
            Some(c) => c,
            None => {
                let best = (0..jt.nrows())
                    .map(|c| (c, (&null * jt.row(c).transpose()).norm()))
                    .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                if best.1 < 1e-6 {
                    return Ok(None);
                }
                cell = Some(best.0);
                best.0
            }
        };
        let d = &null * jt.row(c).transpose();
        let norm = d.norm();
        if norm < 1e-9 {
            break;
        }
        let dir = d / norm;
        let mut moved = false;
        while alpha >= 1e-3 {
            let trial = project(&p, &jp, &theta + &dir * alpha)?;
            if let Some(next) = trial {
                let (_, t) = p.eval(next.as_slice())?;
                let next_gap = t[c] - t0[c];
                if next_gap > gap && p.min_entry(next.as_slice()) >= cfg.min_entry {
                    theta = next;
                    gap = next_gap;
                    alpha = (alpha * 1.5).min(2.0);
                    moved = true;
                    break;
                }
            }
            alpha /= 2.0;
        }
        if !moved || gap >= cfg.target_gap {
            break;
        }
    }
    if gap < cfg.min_gap {
        return Ok(None);
    }
    let m2 = p.layout.model(&m1, theta.as_slice());
    let m2 = DiscreteSEM::new(
        m2.graph.clone(),
        m2.cards.clone(),
        m2.latents.clone(),
        m2.cpts().cloned().collect(),
    )?;
    Ok(Some((m1, m2)))
}

/// Searches for a pair of models witnessing that `P_x(y | z)` is not
/// determined by the inputs `spec`. `None` means the budget ran out, which
/// proves nothing.
pub fn witness_search(
    g: &CausalGraph,
    spec: &QSpec,
    q: &ConditionalQuery,
    budget: u64,
    seed: u64,
) -> Result<Option<WitnessPair>> {
    witness_search_with(
        g,
        spec,
        q,
        &WitnessConfig {
            budget,
            seed,
            ..WitnessConfig::default()
        },
    )
}

pub fn witness_search_with(
    g: &CausalGraph,
    spec: &QSpec,
    q: &ConditionalQuery,
    cfg: &WitnessConfig,
) -> Result<Option<WitnessPair>> {
    spec.check(g)?;
    if cfg.restarts == 0 {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.restarts).map(|_| rng.gen()).collect();
    let steps = (cfg.budget / cfg.restarts as u64).max(1);
    let attempt = |i: usize| -> Result<Option<WitnessPair>> {
        let Some((m1, m2)) = run_restart(g, spec, q, cfg, seeds[i], steps)? else {
            return Ok(None);
        };
        let check = verify_pair(spec, q, &m1, &m2)?;
        let ok = check.mismatch <= cfg.tolerance && check.gap >= cfg.min_gap;
        Ok(ok.then_some(WitnessPair {
            m1,
            m2,
            check,
            restart: i,
        }))
    };
    let keep = |r: Result<Option<WitnessPair>>| match r {
        Ok(None) => None,
        other => Some(other),
    };
    let found = if cfg.parallel {
        (0..cfg.restarts)
            .into_par_iter()
            .map(attempt)
            .find_map_first(keep)
    } else {
        (0..cfg.restarts).map(attempt).find_map(keep)
    };
    found.unwrap_or(Ok(None))
}
