//! k-nearest-neighbor graphs and the k-NN classifier.
//!
//! Neighbors are ranked by descending kernel similarity; equal similarities
//! go to the lower dataset index. Graphs keep both directions: the
//! out-neighbors of a node and, for every node, the nodes that list it
//! together with its rank in their list.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledDataset, Structure};
use crate::error::{config_err, Error, Result};
use crate::kernels::{self_at, KernelEngine};
use crate::klsh::HashIndex;
use crate::rng_stream;

/// Directed k-NN graph.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnGraph {
    k: usize,
    out_edges: Vec<Vec<(usize, f64)>>,
    /// `(source, rank)` pairs, sources ascending, ranks starting at 1.
    in_edges: Vec<Vec<(usize, usize)>>,
}

impl KnnGraph {
    /// Builds a graph from per-node out-lists, which must be ordered best
    /// first and hold at most `k` entries without self-edges.
    pub fn from_out_edges(k: usize, out_edges: Vec<Vec<(usize, f64)>>) -> Result<KnnGraph> {
        let n = out_edges.len();
        let mut in_edges = vec![Vec::new(); n];
        for (i, list) in out_edges.iter().enumerate() {
            if list.len() > k {
                return Err(Error::Data(format!(
                    "node {i} has {} > k = {k} out-edges",
                    list.len()
                )));
            }
            for (rank, &(j, _)) in list.iter().enumerate() {
                if j == i {
                    return Err(Error::Data(format!("self-edge at node {i}")));
                }
                if j >= n {
                    return Err(Error::Data(format!("edge {i} -> {j} leaves the graph")));
                }
                in_edges[j].push((i, rank + 1));
            }
        }
        Ok(KnnGraph {
            k,
            out_edges,
            in_edges,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.out_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.out_edges.is_empty()
    }

    pub fn out_edges(&self, node: usize) -> &[(usize, f64)] {
        &self.out_edges[node]
    }

    pub fn in_edges(&self, node: usize) -> &[(usize, usize)] {
        &self.in_edges[node]
    }

    /// Checks that the stored in-lists are exactly the transpose of the
    /// out-lists.
    pub fn is_transpose_consistent(&self) -> bool {
        let mut expect = vec![Vec::new(); self.len()];
        for (i, list) in self.out_edges.iter().enumerate() {
            for (rank, &(j, _)) in list.iter().enumerate() {
                expect[j].push((i, rank + 1));
            }
        }
        expect == self.in_edges
    }

    /// Best out-neighbor of every node, when it has one.
    pub fn nearest(&self, node: usize) -> Option<(usize, f64)> {
        self.out_edges[node].first().copied()
    }
}

/// Direction of a neighbor query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborQueryMode {
    /// Nodes listed by the query nodes.
    Out,
    /// Nodes that list a query node.
    In,
}

/// Union over `nodes` of their top-`k` out-neighbors, or of the nodes
/// listing them within their top `k`.
pub fn get_neighbors<I: IntoIterator<Item = usize>>(
    graph: &KnnGraph,
    nodes: I,
    k: usize,
    mode: NeighborQueryMode,
) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for node in nodes {
        match mode {
            NeighborQueryMode::Out => {
                out.extend(graph.out_edges(node).iter().take(k).map(|&(j, _)| j));
            }
            NeighborQueryMode::In => {
                out.extend(
                    graph
                        .in_edges(node)
                        .iter()
                        .filter(|&&(_, rank)| rank <= k)
                        .map(|&(i, _)| i),
                );
            }
        }
    }
    out
}

/// `a` ranks before `b`.
fn better(a: (usize, f64), b: (usize, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

/// Inserts into a best-first list capped at `k`.
fn push_bounded(list: &mut Vec<(usize, f64)>, k: usize, cand: (usize, f64)) {
    if list.len() == k && !better(cand, list[k - 1]) {
        return;
    }
    let pos = list.partition_point(|&x| better(x, cand));
    list.insert(pos, cand);
    list.truncate(k);
}

/// The `k` best candidates, best first.
pub fn top_k(mut candidates: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(k);
    candidates
}

const ROW_CHUNK: usize = 64;

/// Exact k-NN graph over `n` nodes from a symmetric similarity function,
/// evaluated once per unordered pair.
pub fn exact_knn_graph_with<F>(n: usize, k: usize, sim: F) -> Result<KnnGraph>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if k == 0 {
        return config_err("k must be at least 1");
    }
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 nodes, got {n}")));
    }
    let kk = k.min(n - 1);
    let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(kk + 1); n];
    for start in (0..n).step_by(ROW_CHUNK) {
        let end = (start + ROW_CHUNK).min(n);
        let rows: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| sim(i, j)).collect())
            .collect();
        for (off, row) in rows.into_iter().enumerate() {
            let i = start + off;
            for (d, s) in row.into_iter().enumerate() {
                let j = i + 1 + d;
                push_bounded(&mut lists[i], kk, (j, s));
                push_bounded(&mut lists[j], kk, (i, s));
            }
        }
    }
    KnnGraph::from_out_edges(k, lists)
}

/// Exact k-NN graph: `N (N - 1) / 2` kernel evaluations.
pub fn exact_knn_graph(engine: &KernelEngine, items: &[&Structure], k: usize) -> Result<KnnGraph> {
    let selfk = engine.self_kernels(items);
    exact_knn_graph_with(items.len(), k, |i, j| {
        engine.kernel_with_self(items[i], items[j], self_at(&selfk, i), self_at(&selfk, j))
    })
}

/// Candidate retrieval settings for hash-accelerated neighbor search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeParams {
    /// Keep widening the probe until this many candidates are found.
    pub min_candidates: usize,
    /// Largest Hamming radius probed.
    pub max_radius: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            min_candidates: 16,
            max_radius: 2,
        }
    }
}

/// k-NN graph restricted to hash-probe candidates. Nodes whose probe
/// returns fewer than `k` candidates are padded with uniformly drawn
/// unseen nodes (seeded per node).
pub fn hashed_knn_graph(
    engine: &KernelEngine,
    items: &[&Structure],
    k: usize,
    index: &HashIndex,
    probe: ProbeParams,
    seed: u64,
) -> Result<KnnGraph> {
    let n = items.len();
    if k == 0 {
        return config_err("k must be at least 1");
    }
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 nodes, got {n}")));
    }
    if index.len() != n {
        return Err(Error::Mismatch(format!(
            "index covers {} items, graph has {n}",
            index.len()
        )));
    }
    let kk = k.min(n - 1);
    let selfk = engine.self_kernels(items);
    let lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cands: Vec<usize> = index
                .probe(
                    index.code(i),
                    probe.min_candidates.max(kk + 1),
                    probe.max_radius,
                )
                .into_iter()
                .filter(|&j| j != i)
                .collect();
            if cands.len() < kk {
                pad_random(&mut cands, i, n, kk, rng_stream::derive(seed, &[i as u64]));
            }
            let scored = cands
                .into_iter()
                .map(|j| {
                    let s = engine.kernel_with_self(
                        items[i],
                        items[j],
                        self_at(&selfk, i),
                        self_at(&selfk, j),
                    );
                    (j, s)
                })
                .collect();
            top_k(scored, kk)
        })
        .collect();
    KnnGraph::from_out_edges(k, lists)
}

fn pad_random(cands: &mut Vec<usize>, me: usize, n: usize, want: usize, seed: u64) {
    let mut rng = rng_stream::rng(seed, &[]);
    let taken: BTreeSet<usize> = cands.iter().copied().chain([me]).collect();
    let free: Vec<usize> = (0..n).filter(|j| !taken.contains(j)).collect();
    let need = (want - cands.len()).min(free.len());
    let mut extra: Vec<usize> = sample(&mut rng, free.len(), need)
        .into_iter()
        .map(|p| free[p])
        .collect();
    extra.sort_unstable();
    cands.extend(extra);
}

/// Majority vote over `(label, similarity)` pairs. A tied count goes to the
/// class with the larger summed similarity, then to `tie_label`.
pub fn vote(neighbors: &[(u8, f64)], tie_label: u8) -> (u8, [usize; 2]) {
    let mut votes = [0usize; 2];
    let mut mass = [0.0f64; 2];
    for &(label, sim) in neighbors {
        votes[label as usize] += 1;
        mass[label as usize] += sim;
    }
    let label = if votes[1] != votes[0] {
        u8::from(votes[1] > votes[0])
    } else if mass[1] != mass[0] {
        u8::from(mass[1] > mass[0])
    } else {
        tie_label
    };
    (label, votes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub k: usize,
    pub probe: ProbeParams,
    /// Label returned when both count and similarity mass tie.
    pub tie_label: u8,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            k: 8,
            probe: ProbeParams::default(),
            tie_label: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub label: u8,
    /// Neighbor counts per class.
    pub votes: [usize; 2],
    /// Training indices and similarities of the neighbors, best first.
    pub neighbors: Vec<(usize, f64)>,
}

/// k-NN classifier over a training set, with or without a hash index.
pub struct KnnClassifier<'a> {
    engine: &'a KernelEngine,
    train: &'a LabeledDataset,
    index: Option<&'a HashIndex>,
    structures: Vec<&'a Structure>,
    selfk: Vec<f64>,
    params: ClassifierParams,
}

impl<'a> KnnClassifier<'a> {
    /// `index = None` compares every query with the whole training set.
    pub fn new(
        engine: &'a KernelEngine,
        train: &'a LabeledDataset,
        index: Option<&'a HashIndex>,
        params: ClassifierParams,
    ) -> Result<KnnClassifier<'a>> {
        if train.is_empty() {
            return Err(Error::Data("empty training set".into()));
        }
        if params.k == 0 {
            return config_err("k must be at least 1");
        }
        if params.tie_label > 1 {
            return config_err("tie label must be 0 or 1");
        }
        if let Some(index) = index {
            if index.len() != train.len() {
                return Err(Error::Mismatch(format!(
                    "index covers {} items, training set has {}",
                    index.len(),
                    train.len()
                )));
            }
        }
        let structures = train.structures();
        let selfk = engine.self_kernels(&structures);
        Ok(KnnClassifier {
            engine,
            train,
            index,
            structures,
            selfk,
            params,
        })
    }

    fn candidates(&self, query: &Structure) -> Vec<usize> {
        let Some(index) = self.index else {
            return (0..self.train.len()).collect();
        };
        let code = index.hash_query(self.engine, query, &self.structures);
        let p = self.params.probe;
        let mut cands = index.probe(code, p.min_candidates.max(self.params.k), p.max_radius);
        if cands.len() < self.params.k {
            // Sparse neighborhood: widen until k items are in reach.
            cands = index.probe(code, self.params.k, index.bits());
        }
        cands
    }

    pub fn classify(&self, query: &Structure) -> Classification {
        self.classify_among(query, None)
    }

    /// Like [`KnnClassifier::classify`], ignoring training items whose
    /// `allowed` entry is false.
    pub fn classify_among(&self, query: &Structure, allowed: Option<&[bool]>) -> Classification {
        let qs = self.engine.self_kernel(query);
        let scored: Vec<(usize, f64)> = self
            .candidates(query)
            .into_iter()
            .filter(|&j| allowed.is_none_or(|a| a[j]))
            .map(|j| {
                let s = self.engine.kernel_with_self(
                    query,
                    self.structures[j],
                    qs,
                    self_at(&self.selfk, j),
                );
                (j, s)
            })
            .collect();
        let neighbors = top_k(scored, self.params.k);
        let labelled: Vec<(u8, f64)> = neighbors
            .iter()
            .map(|&(j, s)| (self.train.examples()[j].label, s))
            .collect();
        let (label, votes) = vote(&labelled, self.params.tie_label);
        Classification {
            label,
            votes,
            neighbors,
        }
    }
}

/// One-shot form of [`KnnClassifier::classify`].
pub fn classify_knn(
    engine: &KernelEngine,
    train: &LabeledDataset,
    index: &HashIndex,
    query: &Structure,
    params: ClassifierParams,
) -> Result<Classification> {
    Ok(KnnClassifier::new(engine, train, Some(index), params)?.classify(query))
}

/// Positive-class precision, recall and F1 with confusion counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn evaluate(predictions: &[u8], gold: &[u8]) -> Result<Metrics> {
    if predictions.len() != gold.len() {
        return Err(Error::Data(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p, g) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Metrics {
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        f1,
    })
}
