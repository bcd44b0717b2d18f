//! Finite-domain structural equation models used as ground truth.
//!
//! Every bidirected edge of the graph is realized by its own latent variable
//! with exactly the two endpoints as children. Interventional quantities are
//! computed by full enumeration, never through the identification formulas.

mod eval;
mod file;
mod table;
mod witness;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{CausalGraph, GraphError};
use crate::nodeset::{NodeIdx, NodeSet};

pub use eval::{
    estimand_error, eval_estimand, eval_estimand_table, interventional, joint, q_cond_eval, q_eval,
    Assignment,
};
pub use file::ModelFile;
pub use table::{DistTable, Normalization};
pub use witness::{
    verify_pair, witness_search, witness_search_with, PairCheck, WitnessConfig, WitnessPair,
};

pub(crate) use table::Space;

/// Lower bound applied to every drawn probability before renormalization.
pub const POSITIVITY_FLOOR: f64 = 0.01;
pub const DEFAULT_STATE_BUDGET: u64 = 10_000_000;
pub const MAX_CARD: usize = 4;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SemError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("joint state space has {size} states, budget is {budget}")]
    Budget { size: u128, budget: u64 },
    #[error("{0}")]
    Shape(String),
    #[error("{0}")]
    Eval(String),
    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T, E = SemError> = std::result::Result<T, E>;

/// A latent variable confounding the two endpoints of one bidirected edge.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub children: [NodeIdx; 2],
    pub probs: Vec<f64>,
}

impl Latent {
    pub fn card(&self) -> usize {
        self.probs.len()
    }
}

/// `P(node | parents, latents)`. Rows are indexed mixed-radix over the
/// parents and then the latents, in the listed order, last fastest; each
/// row holds one probability per value of `node`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub node: NodeIdx,
    pub parents: Vec<NodeIdx>,
    /// Indices into the model's latent list.
    pub latents: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSEM {
    graph: CausalGraph,
    /// Domain size per node index; zero for indices not in the graph.
    cards: Vec<usize>,
    latents: Vec<Latent>,
    /// Indexed by node; `None` for indices not in the graph.
    cpts: Vec<Option<Cpt>>,
    state_budget: u64,
}

fn check_row(row: &[f64], what: impl Fn() -> String) -> Result<Vec<f64>> {
    if row.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(SemError::Shape(format!(
            "{} has a non-positive entry",
            what()
        )));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(SemError::Shape(format!("{} sums to {total}", what())));
    }
    if (total - 1.0).abs() <= 1e-12 {
        return Ok(row.to_vec());
    }
    Ok(row.iter().map(|p| p / total).collect())
}

impl DiscreteSEM {
    /// Validates shapes against `graph` and renormalizes every row exactly.
    ///
    /// `cards` is indexed by node. Latents must match the bidirected edges
    /// one to one; each CPT must list exactly the node's parents and
    /// incident latents. Rows must be strictly positive and sum to one
    /// within 1e-6.
    pub fn new(
        graph: CausalGraph,
        cards: Vec<usize>,
        latents: Vec<Latent>,
        cpts: Vec<Cpt>,
    ) -> Result<DiscreteSEM> {
        let n = graph.names().len();
        if cards.len() != n {
            return Err(SemError::Shape(format!(
                "expected {n} domain sizes, got {}",
                cards.len()
            )));
        }
        for v in graph.nodes().iter() {
            if !(2..=MAX_CARD).contains(&cards[v]) {
                return Err(SemError::Shape(format!(
                    "domain size of {} must be between 2 and {MAX_CARD}",
                    graph.name(v)
                )));
            }
        }
        let mut cards = cards;
        for (v, c) in cards.iter_mut().enumerate() {
            if !graph.nodes().contains(v) {
                *c = 0;
            }
        }

        let mut edges = graph.bidirected_edges();
        let mut latents = latents;
        for (i, l) in latents.iter_mut().enumerate() {
            let [a, b] = l.children;
            let key = (a.min(b), a.max(b));
            let Some(pos) = edges.iter().position(|e| *e == key) else {
                return Err(SemError::Shape(format!(
                    "latent {i} does not match a bidirected edge"
                )));
            };
            edges.swap_remove(pos);
            if l.card() < 2 {
                return Err(SemError::Shape(format!(
                    "latent {i} needs at least two values"
                )));
            }
            l.probs = check_row(&l.probs, || format!("latent {i}"))?;
        }
        if let Some(&(a, b)) = edges.first() {
            return Err(SemError::Shape(format!(
                "bidirected edge {}<->{} has no latent",
                graph.name(a),
                graph.name(b)
            )));
        }

        let mut slots: Vec<Option<Cpt>> = vec![None; n];
        for mut cpt in cpts {
            let v = cpt.node;
            if !graph.nodes().contains(v) {
                return Err(SemError::Shape(format!("table for unknown node index {v}")));
            }
            let name = graph.name(v).to_string();
            if slots[v].is_some() {
                return Err(SemError::Shape(format!("two tables for {name}")));
            }
            let parents: NodeSet = cpt.parents.iter().copied().collect();
            if parents != *graph.parents_of(v) || parents.len() != cpt.parents.len() {
                return Err(SemError::Shape(format!(
                    "table for {name} must list exactly its parents"
                )));
            }
            let mut incident: Vec<usize> = (0..latents.len())
                .filter(|&l| latents[l].children.contains(&v))
                .collect();
            let mut listed = cpt.latents.clone();
            listed.sort_unstable();
            incident.sort_unstable();
            if listed != incident {
                return Err(SemError::Shape(format!(
                    "table for {name} must list exactly its latents"
                )));
            }
            let rows: usize = cpt.parents.iter().map(|&p| cards[p]).product::<usize>()
                * cpt
                    .latents
                    .iter()
                    .map(|&l| latents[l].card())
                    .product::<usize>();
            if cpt.rows.len() != rows {
                return Err(SemError::Shape(format!(
                    "table for {name} needs {rows} rows, has {}",
                    cpt.rows.len()
                )));
            }
            for (r, row) in cpt.rows.iter_mut().enumerate() {
                if row.len() != cards[v] {
                    return Err(SemError::Shape(format!(
                        "row {r} of {name} has {} entries",
                        row.len()
                    )));
                }
                *row = check_row(row, || format!("row {r} of {name}"))?;
            }
            slots[v] = Some(cpt);
        }
        if let Some(v) = graph.nodes().iter().find(|&v| slots[v].is_none()) {
            return Err(SemError::Shape(format!("no table for {}", graph.name(v))));
        }
        Ok(DiscreteSEM {
            graph,
            cards,
            latents,
            cpts: slots,
            state_budget: DEFAULT_STATE_BUDGET,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn card(&self, v: NodeIdx) -> usize {
        self.cards[v]
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn latents(&self) -> &[Latent] {
        &self.latents
    }

    pub fn cpt(&self, v: NodeIdx) -> &Cpt {
        self.cpts[v].as_ref().expect("node of the graph")
    }

    pub fn cpts(&self) -> impl Iterator<Item = &Cpt> {
        self.cpts.iter().flatten()
    }

    pub fn state_budget(&self) -> u64 {
        self.state_budget
    }

    pub fn with_state_budget(mut self, budget: u64) -> Self {
        self.state_budget = budget;
        self
    }

    /// Smallest entry over all latent marginals and CPT rows.
    pub fn min_entry(&self) -> f64 {
        let lat = self.latents.iter().flat_map(|l| l.probs.iter());
        let rows = self.cpts().flat_map(|c| c.rows.iter().flatten());
        lat.chain(rows).copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn observed_space(&self) -> Space {
        let vars: Vec<NodeIdx> = self.graph.nodes().iter().collect();
        let cards = vars.iter().map(|&v| self.cards[v]).collect();
        Space::new(vars, cards)
    }

    pub(crate) fn check_budget(&self) -> Result<()> {
        let obs: u128 = self
            .graph
            .nodes()
            .iter()
            .map(|v| self.cards[v] as u128)
            .product();
        let size = self
            .latents
            .iter()
            .fold(obs, |acc, l| acc.saturating_mul(l.card() as u128));
        if size > self.state_budget as u128 {
            return Err(SemError::Budget {
                size,
                budget: self.state_budget,
            });
        }
        Ok(())
    }

    /// Row of `P(v | ...)` selected by the parent values in `obs` and latent
    /// values in `lat`.
    pub(crate) fn row(&self, v: NodeIdx, obs: &[usize], lat: &[usize]) -> &[f64] {
        let cpt = self.cpt(v);
        let mut idx = 0;
        for &p in &cpt.parents {
            idx = idx * self.cards[p] + obs[p];
        }
        for &l in &cpt.latents {
            idx = idx * self.latents[l].card() + lat[l];
        }
        &cpt.rows[idx]
    }
}

/// Options for [`random_model_with`].
#[derive(Clone, Debug)]
pub struct ModelConfig {
    /// Observed domain sizes are drawn uniformly from `2..=max_card`.
    pub max_card: usize,
    pub latent_card: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_card: 2,
            latent_card: 2,
        }
    }
}

/// A random positive model over `g`, deterministic in `seed`.
pub fn random_model(g: &CausalGraph, seed: u64, max_card: usize) -> Result<DiscreteSEM> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_model_with(
        g,
        &mut rng,
        &ModelConfig {
            max_card,
            ..ModelConfig::default()
        },
    )
}

pub fn random_model_with<R: Rng + ?Sized>(
    g: &CausalGraph,
    rng: &mut R,
    cfg: &ModelConfig,
) -> Result<DiscreteSEM> {
    if !(2..=MAX_CARD).contains(&cfg.max_card) {
        return Err(SemError::Shape(format!(
            "max_card must be between 2 and {MAX_CARD}"
        )));
    }
    if cfg.latent_card < 2 {
        return Err(SemError::Shape("latent_card must be at least 2".into()));
    }
    let n = g.names().len();
    let mut cards = vec![0; n];
    for v in g.nodes().iter() {
        cards[v] = rng.gen_range(2..=cfg.max_card);
    }
    let latents: Vec<Latent> = g
        .bidirected_edges()
        .into_iter()
        .map(|(a, b)| Latent {
            children: [a, b],
            probs: simplex(rng, cfg.latent_card),
        })
        .collect();
    let cpts = g
        .nodes()
        .iter()
        .map(|v| {
            let parents: Vec<NodeIdx> = g.parents_of(v).iter().collect();
            let lats: Vec<usize> = (0..latents.len())
                .filter(|&l| latents[l].children.contains(&v))
                .collect();
            let rows = parents.iter().map(|&p| cards[p]).product::<usize>()
                * cfg.latent_card.pow(lats.len() as u32);
            Cpt {
                node: v,
                parents,
                latents: lats,
                rows: (0..rows).map(|_| simplex(rng, cards[v])).collect(),
            }
        })
        .collect();
    DiscreteSEM::new(g.clone(), cards, latents, cpts)
}

/// A uniform draw from the simplex, floored at [`POSITIVITY_FLOOR`] and renormalized.
fn simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    let floored: Vec<f64> = draws
        .iter()
        .map(|d| (d / total).max(POSITIVITY_FLOOR))
        .collect();
    let total: f64 = floored.iter().sum();
    floored.into_iter().map(|p| p / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::examples::*;

    #[test]
    fn random_models_are_deterministic_and_floored() {
        let g = figure2();
        let a = random_model(&g, 7, 3).unwrap();
        assert_eq!(a, random_model(&g, 7, 3).unwrap());
        assert_ne!(a, random_model(&g, 8, 3).unwrap());
        assert!(a.min_entry() >= POSITIVITY_FLOOR / 3.0 * 0.99);
        assert_eq!(a.latents().len(), 2);
        for c in a.cpts() {
            for row in &c.rows {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_errors() {
        let g = bow();
        let m = random_model(&g, 1, 2).unwrap();
        let (x, y) = (g.index_of("X").unwrap(), g.index_of("Y").unwrap());
        let cpts: Vec<Cpt> = m.cpts().cloned().collect();

        assert!(DiscreteSEM::new(g.clone(), m.cards().to_vec(), vec![], cpts.clone()).is_err());
        let mut bad = cpts.clone();
        bad[0].rows[0] = vec![1.0, 0.0];
        assert!(
            DiscreteSEM::new(g.clone(), m.cards().to_vec(), m.latents().to_vec(), bad).is_err()
        );
        let mut bad = cpts.clone();
        bad.retain(|c| c.node != y);
        assert!(
            DiscreteSEM::new(g.clone(), m.cards().to_vec(), m.latents().to_vec(), bad).is_err()
        );
        let mut cards = m.cards().to_vec();
        cards[x] = 5;
        assert!(DiscreteSEM::new(g.clone(), cards, m.latents().to_vec(), cpts.clone()).is_err());
        assert!(random_model(&g, 0, 5).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let g = figure1();
        let m = random_model(&g, 1, 2).unwrap().with_state_budget(10);
        assert!(matches!(m.check_budget(), Err(SemError::Budget { .. })));
    }
}
