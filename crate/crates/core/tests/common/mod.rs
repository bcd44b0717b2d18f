//! Brute-force oracles shared by the integration tests.
//!
//! The d-separation oracle enumerates simple paths in the DAG obtained by
//! turning every bidirected edge into an explicit latent parent. The semantic
//! oracle sums the structural model directly. Only `oracle_error` touches the
//! library's evaluator, and it checks the tables it gets back.

#![allow(dead_code)]

use cgid::cgid::ConditionalQuery;
use cgid::estimand::Estimand;
use cgid::gid::QSpec;
use cgid::graph::random::{random_graph, RandomGraphConfig};
use cgid::graph::CausalGraph;
use cgid::nodeset::NodeSet;
use cgid::sem::{eval_estimand_table, q_eval, DiscreteSEM};
use rand::seq::SliceRandom;
use rand::Rng;

/// A DAG over observed nodes `0..n` plus one latent per bidirected edge.
pub struct Expanded {
    pub n: usize,
    pub parents: Vec<Vec<usize>>,
    pub children: Vec<Vec<usize>>,
}

impl Expanded {
    /// Edge cuts happen before expansion: directed edges into `over` or out
    /// of `under` are dropped, and so are bidirected edges touching `over`.
    pub fn new(g: &CausalGraph, over: &NodeSet, under: &NodeSet) -> Expanded {
        let n = g.names().len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (a, b) in g.directed_edges() {
            if over.contains(b) || under.contains(a) {
                continue;
            }
            parents[b].push(a);
            children[a].push(b);
        }
        for (a, b) in g.bidirected_edges() {
            if over.contains(a) || over.contains(b) {
                continue;
            }
            let u = parents.len();
            parents.push(Vec::new());
            children.push(vec![a, b]);
            parents[a].push(u);
            parents[b].push(u);
        }
        Expanded {
            n,
            parents,
            children,
        }
    }

    fn descendants(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.parents.len()];
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if !seen[u] {
                seen[u] = true;
                stack.extend(&self.children[u]);
            }
        }
        seen
    }

    fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents[v].iter().chain(&self.children[v]).copied()
    }

    fn points_into(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    /// Whether some simple path between `x` and `y` is open given `z`.
    pub fn connected(&self, x: &NodeSet, y: &NodeSet, z: &NodeSet) -> bool {
        let total = self.parents.len();
        // A collider is open when it or one of its descendants is observed.
        let open_collider: Vec<bool> = (0..total)
            .map(|v| {
                self.descendants(v)
                    .iter()
                    .enumerate()
                    .any(|(d, &s)| s && d < self.n && z.contains(d))
            })
            .collect();
        let mut path = Vec::new();
        let mut on_path = vec![false; total];
        x.iter()
            .any(|s| self.search(s, y, z, &open_collider, &mut path, &mut on_path))
    }

    fn search(
        &self,
        v: usize,
        y: &NodeSet,
        z: &NodeSet,
        open_collider: &[bool],
        path: &mut Vec<usize>,
        on_path: &mut [bool],
    ) -> bool {
        path.push(v);
        on_path[v] = true;
        let mut found = false;
        if path.len() > 1 && v < self.n && y.contains(v) {
            found = true;
        } else {
            for w in self.neighbours(v).collect::<Vec<_>>() {
                if on_path[w] {
                    continue;
                }
                // `v` becomes an inner node of the path once we step to `w`.
                if path.len() > 1 {
                    let prev = path[path.len() - 2];
                    let collider = self.points_into(prev, v) && self.points_into(w, v);
                    let blocked = if collider {
                        !open_collider[v]
                    } else {
                        v < self.n && z.contains(v)
                    };
                    if blocked {
                        continue;
                    }
                }
                if self.search(w, y, z, open_collider, path, on_path) {
                    found = true;
                    break;
                }
            }
        }
        path.pop();
        on_path[v] = false;
        found
    }
}

/// Path-enumeration d-separation in `g` with the given edge cuts.
pub fn dsep_oracle(
    g: &CausalGraph,
    over: &NodeSet,
    under: &NodeSet,
    x: &NodeSet,
    y: &NodeSet,
    z: &NodeSet,
) -> bool {
    !Expanded::new(g, over, under).connected(x, y, z)
}

/// Every vector `v` with `v[i] < cards[i]`, last index fastest.
pub fn assignments(cards: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(cards.len())];
    for &c in cards {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..c).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    out
}

/// Probability of every full realization of the observed nodes.
pub type Joint = Vec<(Vec<usize>, f64)>;

/// The observed joint of `m` after setting each `(node, value)` in `fixed`.
pub fn mutilated_joint(m: &DiscreteSEM, fixed: &[(usize, usize)]) -> Joint {
    let g = m.graph();
    let cards: Vec<usize> = (0..g.names().len()).map(|v| m.card(v)).collect();
    let lat_cards: Vec<usize> = m.latents().iter().map(|l| l.probs.len()).collect();
    let lat_states = assignments(&lat_cards);
    assignments(&cards)
        .into_iter()
        .map(|v| {
            if fixed.iter().any(|&(x, a)| v[x] != a) {
                return (v, 0.0);
            }
            let mut p = 0.0;
            for u in &lat_states {
                let mut term: f64 = m
                    .latents()
                    .iter()
                    .zip(u)
                    .map(|(l, &a)| l.probs[a])
                    .product();
                for node in g.nodes().iter() {
                    if fixed.iter().any(|&(x, _)| x == node) {
                        continue;
                    }
                    let cpt = m.cpt(node);
                    let mut row = 0;
                    for &pa in &cpt.parents {
                        row = row * cards[pa] + v[pa];
                    }
                    for &l in &cpt.latents {
                        row = row * lat_cards[l] + u[l];
                    }
                    term *= cpt.rows[row][v[node]];
                }
                p += term;
            }
            (v, p)
        })
        .collect()
}

fn agrees(v: &[usize], w: &[usize], on: &NodeSet) -> bool {
    on.iter().all(|i| v[i] == w[i])
}

/// `P_x(y | z)` at the values of the full realization `v`.
pub fn conditional_truth(
    joint: &[(Vec<usize>, f64)],
    y: &NodeSet,
    z: &NodeSet,
    v: &[usize],
) -> f64 {
    let yz = y.union(z);
    let num: f64 = joint
        .iter()
        .filter(|(w, _)| agrees(v, w, &yz))
        .map(|(_, p)| p)
        .sum();
    let den: f64 = joint
        .iter()
        .filter(|(w, _)| agrees(v, w, z))
        .map(|(_, p)| p)
        .sum();
    num / den
}

/// `Q[s](v)`: the probability of `s = v_s` after fixing every other node to `v`.
pub fn q_truth(m: &DiscreteSEM, s: &NodeSet, v: &[usize]) -> f64 {
    let rest = m.graph().nodes().difference(s);
    let fixed: Vec<(usize, usize)> = rest.iter().map(|r| (r, v[r])).collect();
    let joint = mutilated_joint(m, &fixed);
    joint
        .iter()
        .filter(|(w, _)| agrees(v, w, s))
        .map(|(_, p)| p)
        .sum()
}

/// Largest gap, over every full realization, between `estimate(v)` and the
/// brute-force `P_x(y | z)` at `v`.
pub fn conditional_error(
    m: &DiscreteSEM,
    q: &ConditionalQuery,
    estimate: impl Fn(&[usize]) -> f64,
) -> f64 {
    let g = m.graph();
    let cards: Vec<usize> = (0..g.names().len()).map(|v| m.card(v)).collect();
    let xs: Vec<usize> = q.x.iter().collect();
    let x_cards: Vec<usize> = xs.iter().map(|&x| cards[x]).collect();
    let mut worst: f64 = 0.0;
    for xa in assignments(&x_cards) {
        let fixed: Vec<(usize, usize)> = xs.iter().copied().zip(xa).collect();
        let joint = mutilated_joint(m, &fixed);
        for (v, _) in joint
            .iter()
            .filter(|(w, _)| fixed.iter().all(|&(x, a)| w[x] == a))
        {
            let t = conditional_truth(&joint, &q.y, &q.z, v);
            worst = worst.max((estimate(v) - t).abs());
        }
    }
    worst
}

pub fn small_graph<R: Rng>(rng: &mut R, max_nodes: usize, max_bidirected: usize) -> CausalGraph {
    let cfg = RandomGraphConfig {
        nodes: rng.gen_range(2..=max_nodes),
        edge_prob: rng.gen_range(0.2..0.6),
        max_bidirected,
    };
    random_graph(rng, &cfg)
}

/// Every subset of `set`.
pub fn subsets(set: &NodeSet) -> Vec<NodeSet> {
    let items = set.to_vec();
    (0..1u32 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

/// Random pairwise-disjoint `x`, `y` (non-empty) and `z`.
pub fn random_query<R: Rng>(rng: &mut R, g: &CausalGraph) -> ConditionalQuery {
    let mut nodes = g.nodes().to_vec();
    nodes.shuffle(rng);
    let ny = rng.gen_range(1..=nodes.len().min(2));
    let y: NodeSet = nodes[..ny].iter().copied().collect();
    let mut x = NodeSet::new();
    let mut z = NodeSet::new();
    for &v in &nodes[ny..] {
        match rng.gen_range(0..3) {
            0 => {
                x.insert(v);
            }
            1 => {
                z.insert(v);
            }
            _ => {}
        }
    }
    ConditionalQuery::new(g, x, y, z).expect("disjoint by construction")
}

/// `V` plus up to `extra` distinct random non-empty proper subsets.
pub fn random_spec<R: Rng>(rng: &mut R, g: &CausalGraph, extra: usize) -> QSpec {
    let mut sets = vec![g.nodes().clone()];
    let k = rng.gen_range(0..=extra);
    let nodes = g.nodes().to_vec();
    for _ in 0..k {
        let s: NodeSet = nodes
            .iter()
            .copied()
            .filter(|_| rng.gen_bool(0.5))
            .collect();
        if !s.is_empty() && !sets.contains(&s) {
            sets.push(s);
        }
    }
    QSpec::from_sets(sets).expect("distinct non-empty sets")
}

/// Worst error of `e` against brute force: the input tables `Q[A_i]` are
/// checked against [`q_truth`] and the estimand against
/// [`conditional_error`].
pub fn oracle_error(m: &DiscreteSEM, spec: &QSpec, q: &ConditionalQuery, e: &Estimand) -> f64 {
    let tables: Vec<_> = spec
        .sets()
        .map(|a| q_eval(m, a).expect("model fits the budget"))
        .collect();
    let cards: Vec<usize> = (0..m.graph().names().len()).map(|v| m.card(v)).collect();
    let mut worst: f64 = 0.0;
    for (a, t) in spec.sets().zip(&tables) {
        for v in assignments(&cards) {
            worst = worst.max((t.at(&v) - q_truth(m, a, &v)).abs());
        }
    }
    let est = eval_estimand_table(e, &tables).expect("estimand evaluates");
    worst.max(conditional_error(m, q, |v| est.at(v)))
}
