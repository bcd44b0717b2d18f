//! Seeded random graph generators for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{CausalGraph, RawLatentGraph};

#[derive(Clone, Debug)]
pub struct RandomGraphConfig {
    pub nodes: usize,
    /// Probability of a directed edge between each ordered-compatible pair.
    pub edge_prob: f64,
    /// Upper bound on the number of bidirected edges; the actual count is
    /// drawn uniformly from `0..=max_bidirected` (capped by the pair count).
    pub max_bidirected: usize,
}

/// Zero-padded names `N00`, `N01`, ... so name order matches creation order.
pub fn node_names(n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len().max(2);
    (0..n).map(|i| format!("N{i:0width$}")).collect()
}

/// A random acyclic mixed graph. Directed edges follow a random causal order.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomGraphConfig) -> CausalGraph {
    let names = node_names(cfg.nodes);
    let mut order: Vec<usize> = (0..cfg.nodes).collect();
    order.shuffle(rng);
    let mut b = CausalGraph::builder().nodes(names.iter().cloned());
    for i in 0..cfg.nodes {
        for j in i + 1..cfg.nodes {
            if rng.gen_bool(cfg.edge_prob) {
                b = b.directed(names[order[i]].clone(), names[order[j]].clone());
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..cfg.nodes)
        .flat_map(|i| (i + 1..cfg.nodes).map(move |j| (i, j)))
        .collect();
    pairs.shuffle(rng);
    let k = rng.gen_range(0..=cfg.max_bidirected).min(pairs.len());
    for &(i, j) in &pairs[..k] {
        b = b.bidirected(names[i].clone(), names[j].clone());
    }
    b.build().expect("generated graph is valid by construction")
}

/// A random DAG with `latents` parentless latent nodes `L0, L1, ...`, each
/// pointing at a random subset (size 0 to 3) of the observed nodes.
pub fn random_latent_graph<R: Rng + ?Sized>(
    rng: &mut R,
    observed: usize,
    latents: usize,
    edge_prob: f64,
) -> RawLatentGraph {
    let obs = node_names(observed);
    let lat: Vec<String> = (0..latents).map(|i| format!("L{i}")).collect();
    let mut order: Vec<usize> = (0..observed).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..observed {
        for j in i + 1..observed {
            if rng.gen_bool(edge_prob) {
                edges.push((obs[order[i]].clone(), obs[order[j]].clone()));
            }
        }
    }
    for l in &lat {
        let mut kids = obs.clone();
        kids.shuffle(rng);
        let k = rng.gen_range(0..=3.min(observed));
        for c in &kids[..k] {
            edges.push((l.clone(), c.clone()));
        }
    }
    RawLatentGraph::new(&obs, &lat, &edges).expect("generated graph is valid by construction")
}
