//! Second-order biased random walks.
//!
//! From `curr`, having arrived from `prev`, the unnormalized weight of moving
//! to neighbour `x` is `w(curr, x) * bias`, with `bias = 1/p` if `x == prev`,
//! `1` if `x` is adjacent to `prev` and `1/q` otherwise. The first step of a
//! walk is plain weight-proportional.
//!
//! Randomness: every walk owns a ChaCha8 stream seeded from
//! `splitmix64`-mixing of `(seed, start index, walk index)`, so the corpus is
//! identical for any worker count.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::alias::AliasTable;
use crate::graph::{NodeId, PropertyGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("node {0} has no neighbors")]
    IsolatedNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("{prev} is not a neighbor of {curr}")]
    NotANeighbor { prev: NodeId, curr: NodeId },
    #[error("invalid walk config: {0}")]
    InvalidConfig(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    /// Maximum number of nodes per walk.
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
    /// Above this many second-order table entries (sum of squared degrees),
    /// transitions are sampled by linear scan instead of precomputed tables.
    pub alias_cap: usize,
    pub workers: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            walk_length: 80,
            walks_per_node: 10,
            seed: 42,
            alias_cap: 50_000_000,
            workers: 1,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        let bad = |m: &str| Err(WalkError::InvalidConfig(m.to_string()));
        if !(self.p.is_finite() && self.p > 0.0) {
            return bad("p must be positive");
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return bad("q must be positive");
        }
        if self.walk_length < 1 {
            return bad("walk_length must be at least 1");
        }
        if self.walks_per_node < 1 {
            return bad("walks_per_node must be at least 1");
        }
        if self.workers < 1 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

/// Compressed adjacency over dense indices; dense order is ascending
/// `NodeId` and every neighbor list is sorted, with parallel edges merged.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, u32>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl WalkGraph {
    pub fn from_graph(graph: &PropertyGraph) -> Self {
        let ids: Vec<NodeId> = graph.node_ids().collect();
        let index: HashMap<NodeId, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i as u32))
            .collect();
        let mut offsets = vec![0];
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for id in &ids {
            // `neighbors` is sorted by NodeId, which is dense-index order.
            for (n, w) in graph.neighbors(id) {
                targets.push(index[&n]);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        WalkGraph {
            ids,
            index,
            offsets,
            targets,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn index_of(&self, id: &NodeId) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, node: u32) -> (&[u32], &[f64]) {
        let r = self.offsets[node as usize]..self.offsets[node as usize + 1];
        (&self.targets[r.clone()], &self.weights[r])
    }

    pub fn degree(&self, node: u32) -> usize {
        self.offsets[node as usize + 1] - self.offsets[node as usize]
    }

    /// Slot of the directed incidence `from -> to`, if adjacent.
    fn incidence(&self, from: u32, to: u32) -> Option<usize> {
        let (targets, _) = self.neighbors(from);
        targets
            .binary_search(&to)
            .ok()
            .map(|pos| self.offsets[from as usize] + pos)
    }

    pub fn is_adjacent(&self, a: u32, b: u32) -> bool {
        self.incidence(a, b).is_some()
    }

    /// Unnormalized transition weights over `curr`'s neighbors.
    pub fn transition_weights(&self, prev: Option<u32>, curr: u32, p: f64, q: f64) -> Vec<f64> {
        let (targets, weights) = self.neighbors(curr);
        match prev {
            None => weights.to_vec(),
            Some(prev) => targets
                .iter()
                .zip(weights)
                .map(|(&x, &w)| {
                    if x == prev {
                        w / p
                    } else if self.is_adjacent(prev, x) {
                        w
                    } else {
                        w / q
                    }
                })
                .collect(),
        }
    }

    /// Sum over directed incidences of the destination's degree.
    fn second_order_entries(&self) -> usize {
        self.targets.iter().map(|&t| self.degree(t)).sum()
    }
}

/// Normalized next-step distribution from `curr` (arrived from `prev`, or
/// `None` on the first step), neighbors in ascending id order.
pub fn transition_distribution(
    graph: &PropertyGraph,
    prev: Option<NodeId>,
    curr: NodeId,
    p: f64,
    q: f64,
) -> Result<Vec<(NodeId, f64)>, WalkError> {
    let wg = WalkGraph::from_graph(graph);
    let c = wg.index_of(&curr).ok_or(WalkError::UnknownNode(curr))?;
    if wg.degree(c) == 0 {
        return Err(WalkError::IsolatedNode(curr));
    }
    let prev_index = match prev {
        None => None,
        Some(id) => {
            let pi = wg.index_of(&id).ok_or(WalkError::UnknownNode(id))?;
            if !wg.is_adjacent(c, pi) {
                return Err(WalkError::NotANeighbor { prev: id, curr });
            }
            Some(pi)
        }
    };
    let weights = wg.transition_weights(prev_index, c, p, q);
    let total: f64 = weights.iter().sum();
    let (targets, _) = wg.neighbors(c);
    Ok(targets
        .iter()
        .zip(weights)
        .map(|(&t, w)| (wg.ids[t as usize], w / total))
        .collect())
}

/// Precomputed alias tables: one per node for first steps and one per
/// directed incidence `prev -> curr` for subsequent steps.
#[derive(Debug, Clone)]
pub struct AliasCache {
    first: Vec<Option<AliasTable>>,
    second: Vec<Option<AliasTable>>,
}

impl AliasCache {
    pub fn first_step(&self, node: u32) -> Option<&AliasTable> {
        self.first[node as usize].as_ref()
    }

    pub fn table_count(&self) -> usize {
        self.first.iter().chain(&self.second).flatten().count()
    }
}

pub fn precompute_aliases(graph: &WalkGraph, p: f64, q: f64) -> AliasCache {
    let first = (0..graph.len() as u32)
        .map(|v| AliasTable::new(graph.neighbors(v).1).ok())
        .collect();
    let mut second = Vec::with_capacity(graph.targets.len());
    for prev in 0..graph.len() as u32 {
        for &curr in graph.neighbors(prev).0 {
            let w = graph.transition_weights(Some(prev), curr, p, q);
            second.push(AliasTable::new(&w).ok());
        }
    }
    AliasCache { first, second }
}

#[derive(Debug, Clone)]
enum Sampler {
    Tables(AliasCache),
    LinearScan,
}

/// Draws next steps for one graph and (p, q).
#[derive(Debug, Clone)]
pub struct Walker {
    graph: WalkGraph,
    sampler: Sampler,
    p: f64,
    q: f64,
}

impl Walker {
    pub fn new(graph: WalkGraph, p: f64, q: f64, alias_cap: usize) -> Self {
        let sampler = if graph.second_order_entries() <= alias_cap {
            Sampler::Tables(precompute_aliases(&graph, p, q))
        } else {
            log::info!(
                "second-order tables would hold {} entries (cap {alias_cap}); sampling by linear scan",
                graph.second_order_entries()
            );
            Sampler::LinearScan
        };
        Walker {
            graph,
            sampler,
            p,
            q,
        }
    }

    pub fn graph(&self) -> &WalkGraph {
        &self.graph
    }

    pub fn uses_tables(&self) -> bool {
        matches!(self.sampler, Sampler::Tables(_))
    }

    /// Next node after `curr`, or `None` when `curr` is isolated.
    pub fn next<R: Rng + ?Sized>(&self, prev: Option<u32>, curr: u32, rng: &mut R) -> Option<u32> {
        let (targets, _) = self.graph.neighbors(curr);
        if targets.is_empty() {
            return None;
        }
        let pos = match &self.sampler {
            Sampler::Tables(cache) => {
                let table = match prev {
                    None => cache.first[curr as usize].as_ref(),
                    Some(prev) => {
                        let slot = self.graph.incidence(prev, curr)?;
                        cache.second[slot].as_ref()
                    }
                }?;
                table.sample(rng)
            }
            Sampler::LinearScan => {
                let weights = self.graph.transition_weights(prev, curr, self.p, self.q);
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                let mut pick = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        pick = i;
                        break;
                    }
                    u -= w;
                }
                pick
            }
        };
        Some(targets[pos])
    }

    pub fn walk<R: Rng + ?Sized>(&self, start: u32, length: usize, rng: &mut R) -> Vec<u32> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        while walk.len() < length {
            let curr = walk[walk.len() - 1];
            let prev = walk.len().checked_sub(2).map(|i| walk[i]);
            match self.next(prev, curr, rng) {
                Some(n) => walk.push(n),
                None => break,
            }
        }
        walk
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the independent stream for one `(a, b)` pair under `seed`.
pub fn substream_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    /// Walks as dense vocabulary indices.
    pub walks: Vec<Vec<u32>>,
    /// Dense index -> node, ascending.
    pub vocabulary: Vec<NodeId>,
    /// Occurrences of each vocabulary entry across all walks.
    pub counts: Vec<u64>,
}

impl WalkCorpus {
    pub fn from_walks(vocabulary: Vec<NodeId>, walks: Vec<Vec<u32>>) -> Self {
        let mut counts = vec![0u64; vocabulary.len()];
        for &n in walks.iter().flatten() {
            counts[n as usize] += 1;
        }
        WalkCorpus {
            walks,
            vocabulary,
            counts,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.walks.iter().all(Vec::is_empty)
    }

    pub fn walk_ids(&self, i: usize) -> Vec<NodeId> {
        self.walks[i]
            .iter()
            .map(|&n| self.vocabulary[n as usize])
            .collect()
    }

    /// One walk per line, space-separated node ids.
    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for walk in &self.walks {
            let line: Vec<String> = walk
                .iter()
                .map(|&n| self.vocabulary[n as usize].to_string())
                .collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// `walks_per_node` walks from every node, ordered by walk round and then by
/// start node.
pub fn generate_walks(graph: &PropertyGraph, cfg: &WalkConfig) -> Result<WalkCorpus, WalkError> {
    cfg.validate()?;
    let wg = WalkGraph::from_graph(graph);
    if wg.is_empty() {
        return Err(WalkError::EmptyGraph);
    }
    let walker = Walker::new(wg, cfg.p, cfg.q, cfg.alias_cap);
    let n = walker.graph().len();
    let tasks: Vec<(usize, u32)> = (0..cfg.walks_per_node)
        .flat_map(|round| (0..n as u32).map(move |start| (round, start)))
        .collect();
    let run = |&(round, start): &(usize, u32)| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, start as u64, round as u64));
        walker.walk(start, cfg.walk_length, &mut rng)
    };
    let walks: Vec<Vec<u32>> = if cfg.workers == 1 {
        tasks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| WalkError::Pool(e.to_string()))?;
        pool.install(|| tasks.par_iter().map(run).collect())
    };
    Ok(WalkCorpus::from_walks(walker.graph().ids().to_vec(), walks))
}
