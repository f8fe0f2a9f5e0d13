use std::collections::HashMap;

use super::{CoarseConfig, TimSet};

#[derive(Debug, Clone, PartialEq)]
pub struct CliquePruning {
    /// TIM subgraph induced by the clique.
    pub tims: TimSet,
    /// Indices into the input TIM set of the kept edges.
    pub kept_edges: Vec<usize>,
    /// Correspondence indices in the clique, ascending.
    pub clique: Vec<usize>,
    /// Clique has at most one node and no edges survive.
    pub singleton: bool,
    /// Search finished within the node budget, so the clique is maximum.
    pub exact: bool,
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn has(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn intersects(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).any(|(a, b)| a & b != 0)
    }
    fn and_assign(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a &= b;
        }
    }
    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                (word != 0).then(|| {
                    let b = word.trailing_zeros() as usize;
                    word &= word - 1;
                    w * 64 + b
                })
            })
        })
    }
}

fn core_numbers(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut core = vec![0; n];
    let mut removed = vec![false; n];
    let mut k = 0;
    for _ in 0..n {
        let v = (0..n).filter(|&v| !removed[v]).min_by_key(|&v| (degree[v], v)).expect("vertex left");
        k = k.max(degree[v]);
        core[v] = k;
        removed[v] = true;
        for &u in &adj[v] {
            if !removed[u] {
                degree[u] -= 1;
            }
        }
    }
    core
}

struct Search<'a> {
    adj: &'a [Bits],
    best: Vec<usize>,
    nodes: usize,
    budget: usize,
    aborted: bool,
}

impl Search<'_> {
    /// Greedy coloring; returns vertices ordered by color with their color numbers.
    fn color_sort(&self, p: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let n = self.adj.len();
        let mut classes: Vec<(Bits, Vec<usize>)> = Vec::new();
        for &v in p {
            match classes.iter_mut().find(|(bits, _)| !self.adj[v].intersects(bits)) {
                Some((bits, members)) => {
                    bits.set(v);
                    members.push(v);
                }
                None => {
                    let mut bits = Bits::new(n);
                    bits.set(v);
                    classes.push((bits, vec![v]));
                }
            }
        }
        let mut order = Vec::with_capacity(p.len());
        let mut colors = Vec::with_capacity(p.len());
        for (c, (_, members)) in classes.into_iter().enumerate() {
            colors.extend(std::iter::repeat_n(c + 1, members.len()));
            order.extend(members);
        }
        (order, colors)
    }

    fn expand(&mut self, r: &mut Vec<usize>, p: &[usize]) {
        let (order, colors) = self.color_sort(p);
        for idx in (0..order.len()).rev() {
            if r.len() + colors[idx] <= self.best.len() {
                return;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                self.aborted = true;
                return;
            }
            let v = order[idx];
            r.push(v);
            let next: Vec<usize> = order[..idx].iter().copied().filter(|&u| self.adj[v].has(u)).collect();
            if next.is_empty() {
                if r.len() > self.best.len() {
                    self.best = r.clone();
                }
            } else {
                self.expand(r, &next);
            }
            r.pop();
            if self.aborted {
                return;
            }
        }
    }
}

/// Maximum clique of an undirected graph on `n` vertices.
///
/// Branch and bound with greedy-coloring bounds, seeded by a greedy clique
/// grown along core numbers. Returns the clique (ascending) and whether the
/// search completed within `node_budget`.
pub fn max_clique(n: usize, edges: &[(usize, usize)], node_budget: usize) -> (Vec<usize>, bool) {
    if n == 0 {
        return (Vec::new(), true);
    }
    let mut lists = vec![Vec::new(); n];
    let mut bits = vec![Bits::new(n); n];
    for &(a, b) in edges {
        if a != b && !bits[a].has(b) {
            bits[a].set(b);
            bits[b].set(a);
            lists[a].push(b);
            lists[b].push(a);
        }
    }
    let core = core_numbers(&lists);

    let mut by_core: Vec<usize> = (0..n).collect();
    by_core.sort_by_key(|&v| (std::cmp::Reverse(core[v]), v));
    let mut best = vec![by_core[0]];
    for &v in &by_core {
        if core[v] < best.len() {
            break;
        }
        let mut clique = vec![v];
        let mut cand = bits[v].clone();
        while let Some(u) = cand.ones().max_by_key(|&u| (core[u], std::cmp::Reverse(u))) {
            clique.push(u);
            cand.and_assign(&bits[u]);
        }
        if clique.len() > best.len() {
            best = clique;
        }
    }

    // vertices whose core number cannot beat the incumbent are dropped
    let mut p: Vec<usize> = (0..n).filter(|&v| core[v] >= best.len()).collect();
    p.sort_by_key(|&v| (core[v], v));
    let mut search = Search { adj: &bits, best, nodes: 0, budget: node_budget, aborted: false };
    search.expand(&mut Vec::new(), &p);
    let mut clique = search.best;
    clique.sort_unstable();
    (clique, !search.aborted)
}

/// Keeps the TIMs inside a maximum clique of the length-consistency graph.
///
/// Correspondences `i`, `k` are consistent when `| |Δq| − κ|Δp| | ≤ c·δ`.
pub fn prune_max_clique(tims: &TimSet, kappa: f64, config: &CoarseConfig) -> CliquePruning {
    let c = config.c2.sqrt();
    let nodes = tims.nodes();
    let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let consistent: Vec<bool> =
        (0..tims.len()).map(|e| (tims.delta_q[e].norm() - kappa * tims.delta_p[e].norm()).abs() <= c * tims.rotation_bounds[e]).collect();
    let graph: Vec<(usize, usize)> =
        (0..tims.len()).filter(|&e| consistent[e]).map(|e| (local[&tims.edges[e].0], local[&tims.edges[e].1])).collect();
    let (clique_local, exact) = max_clique(nodes.len(), &graph, config.clique_node_budget);
    let clique: Vec<usize> = clique_local.iter().map(|&l| nodes[l]).collect();
    let singleton = clique.len() <= 1;
    let kept_edges: Vec<usize> = if singleton {
        Vec::new()
    } else {
        (0..tims.len())
            .filter(|&e| consistent[e] && clique.binary_search(&tims.edges[e].0).is_ok() && clique.binary_search(&tims.edges[e].1).is_ok())
            .collect()
    };
    if singleton {
        log::warn!("maximum clique is a single correspondence");
    }
    CliquePruning { tims: tims.subset(&kept_edges), kept_edges, clique, singleton, exact }
}
