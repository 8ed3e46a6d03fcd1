//! Learning the binary edge-label weights.
//!
//! The objective is a 1-NN loss: every point whose nearest neighbor has the
//! other label pays the kernel similarity to that neighbor, and every
//! positive point whose nearest neighbor is also positive earns it back.
//! [`optimize_sigma`] runs coordinate descent over the weights of the most
//! frequent edge labels, estimating each coordinate's loss for `σ = 0` and
//! `σ = 1` on small subsets drawn around random points containing the
//! label, using a global k-NN graph to find their neighborhoods.

use std::collections::BTreeSet;

use log::{info, warn};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{indices_by_label, label_frequencies, LabeledDataset, Structure};
use crate::error::{config_err, Error, Result};
use crate::kernels::{self_at, KernelEngine, SigmaMap};
use crate::klsh::{self, HashFamily, HashIndex, IndexParams};
use crate::neighbors::{
    exact_knn_graph, exact_knn_graph_with, get_neighbors, hashed_knn_graph, KnnGraph,
    NeighborQueryMode, ProbeParams,
};
use crate::rng_stream;
use crate::stats;
use crate::symbol::Sym;

/// 1-NN loss over a set of points. The normalized terms are the raw sums
/// divided by the number of points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub mismatch: f64,
    pub reward: f64,
    pub raw_total: f64,
    pub raw_mismatch: f64,
    pub raw_reward: f64,
    /// Contribution of each point to the raw total.
    pub per_point: Vec<f64>,
}

/// Loss of `labels` under the nearest neighbors recorded in `graph`.
pub fn loss_from_labels(labels: &[u8], graph: &KnnGraph) -> Result<LossReport> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::Data(format!(
            "loss needs at least 2 points, got {n}"
        )));
    }
    if graph.len() != n {
        return Err(Error::Mismatch(format!(
            "graph has {} nodes for {n} labels",
            graph.len()
        )));
    }
    let mut raw_mismatch = 0.0;
    let mut raw_reward = 0.0;
    let mut per_point = vec![0.0; n];
    for (i, &y) in labels.iter().enumerate() {
        let Some((j, sim)) = graph.nearest(i) else {
            continue;
        };
        if y != labels[j] {
            raw_mismatch += sim;
            per_point[i] = sim;
        } else if y == 1 {
            raw_reward += sim;
            per_point[i] = -sim;
        }
    }
    let mismatch = raw_mismatch / n as f64;
    let reward = raw_reward / n as f64;
    Ok(LossReport {
        total: mismatch - reward,
        mismatch,
        reward,
        raw_total: raw_mismatch - raw_reward,
        raw_mismatch,
        raw_reward,
        per_point,
    })
}

/// Loss of a dataset under a nearest-neighbor graph over exactly its points.
pub fn loss(subset: &LabeledDataset, graph: &KnnGraph) -> Result<LossReport> {
    loss_from_labels(&subset.labels(), graph)
}

/// Loss with the exact 1-NN graph over the whole dataset.
pub fn full_loss(engine: &KernelEngine, train: &LabeledDataset) -> Result<LossReport> {
    let items = train.structures();
    let graph = exact_knn_graph(engine, &items, 1)?;
    loss(train, &graph)
}

/// `r`: up to `beta` random pool members; then their top-`k_global`
/// out-neighbors, up to `k_global` nodes per seed listing it within their
/// top `k_global`, and optionally the best neighbor of each of those.
/// Returned sorted.
pub fn sample_neighborhood<R: rand::Rng>(
    graph: &KnnGraph,
    pool: &[usize],
    beta: usize,
    k_global: usize,
    include_second_hop: bool,
    rng: &mut R,
) -> Vec<usize> {
    let seeds = random_subset(pool, beta, rng);
    expand_neighborhood(graph, &seeds, k_global, include_second_hop)
}

fn random_subset<R: rand::Rng>(pool: &[usize], beta: usize, rng: &mut R) -> Vec<usize> {
    if beta >= pool.len() {
        return pool.to_vec();
    }
    let mut r: Vec<usize> = sample(rng, pool.len(), beta)
        .into_iter()
        .map(|p| pool[p])
        .collect();
    r.sort_unstable();
    r
}

/// Nodes listing a seed within their top `k`, at most `k` per seed: best
/// rank first, then higher similarity, then lower index. Hubs would
/// otherwise pull in unbounded numbers of points.
fn capped_in_neighbors(graph: &KnnGraph, seeds: &[usize], k: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &s in seeds {
        let mut listed: Vec<(usize, f64, usize)> = graph
            .in_edges(s)
            .iter()
            .filter(|&&(_, rank)| rank <= k)
            .map(|&(src, rank)| (rank, graph.out_edges(src)[rank - 1].1, src))
            .collect();
        listed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        out.extend(listed.into_iter().take(k).map(|x| x.2));
    }
    out
}

fn expand_neighborhood(
    graph: &KnnGraph,
    seeds: &[usize],
    k_global: usize,
    include_second_hop: bool,
) -> Vec<usize> {
    let out = get_neighbors(
        graph,
        seeds.iter().copied(),
        k_global,
        NeighborQueryMode::Out,
    );
    let inn = capped_in_neighbors(graph, seeds, k_global);
    let mut all: BTreeSet<usize> = seeds.iter().copied().collect();
    if include_second_hop {
        let hop = get_neighbors(
            graph,
            out.iter().chain(&inn).copied(),
            1,
            NeighborQueryMode::Out,
        );
        all.extend(hop);
    }
    all.extend(out);
    all.extend(inn);
    all.into_iter().collect()
}

/// How trial subsets grow around their random seed points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Graph neighborhoods of the seeds.
    #[default]
    Neighborhood,
    /// Seeds plus uniformly random points, as many as the neighborhood
    /// sampler would have added.
    PureRandom,
}

/// Construction of a k-NN graph during learning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    Exact,
    #[default]
    Hashed,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighborhood" => Ok(Sampler::Neighborhood),
            "pure_random" | "pure-random" => Ok(Sampler::PureRandom),
            other => config_err(format!("unknown sampler `{other}`")),
        }
    }
}

impl std::str::FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(GraphMode::Exact),
            "hashed" => Ok(GraphMode::Hashed),
            other => config_err(format!("unknown graph mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    /// Random seed points per trial.
    pub beta: usize,
    /// Trials per parameter and value.
    pub trials: usize,
    /// Degree of the global graph.
    pub k_global: usize,
    pub include_second_hop: bool,
    /// Fraction of edge labels, most frequent first, that get a weight.
    pub label_fraction: f64,
    pub sampler: Sampler,
    /// Passes over the parameters; the global graph is rebuilt with the
    /// current weights before each.
    pub refresh_iterations: usize,
    pub seed: u64,
    pub global_graph: GraphMode,
    /// Hash family for the global graph.
    pub family: HashFamily,
    /// Code length for the global graph; derived from the dataset size
    /// when unset.
    pub bits: Option<usize>,
    /// Anchor count for the global graph; `ceil(sqrt(N))` when unset.
    pub anchors: Option<usize>,
    pub probe: ProbeParams,
    /// 1-NN graphs inside trial subsets.
    pub subset_graph: GraphMode,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            beta: 550,
            trials: 10,
            k_global: 4,
            include_second_hop: true,
            label_fraction: 0.5,
            sampler: Sampler::Neighborhood,
            refresh_iterations: 1,
            seed: 0,
            global_graph: GraphMode::Hashed,
            family: HashFamily::Rknn,
            bits: None,
            anchors: None,
            probe: ProbeParams::default(),
            subset_graph: GraphMode::Exact,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta < 1 {
            return config_err("beta must be at least 1");
        }
        if self.trials < 1 {
            return config_err("trials must be at least 1");
        }
        if self.k_global < 1 {
            return config_err("k_global must be at least 1");
        }
        if !(self.label_fraction > 0.0 && self.label_fraction <= 1.0) {
            return config_err(format!(
                "label_fraction must lie in (0, 1], got {}",
                self.label_fraction
            ));
        }
        if self.refresh_iterations < 1 {
            return config_err("refresh_iterations must be at least 1");
        }
        Ok(())
    }
}

/// Edge labels that receive a weight: the top `fraction` by descending
/// frequency, equal counts in name order.
pub fn parameter_labels(train: &LabeledDataset, fraction: f64) -> Vec<(String, usize)> {
    let mut freq: Vec<(String, usize)> = label_frequencies(train).into_iter().collect();
    freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let p = ((freq.len() as f64) * fraction).ceil() as usize;
    freq.truncate(p.min(freq.len()));
    freq
}

/// Loss of one trial subset for one value of one weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialLoss {
    pub iteration: usize,
    /// Position of the parameter in frequency order.
    pub parameter: usize,
    pub label: String,
    pub trial: usize,
    pub value: u8,
    pub subset_size: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDecision {
    pub iteration: usize,
    pub label: String,
    pub frequency: usize,
    /// Examples containing the label.
    pub pool_size: usize,
    /// Summed trial losses for `σ = 0` and `σ = 1`.
    pub loss_sums: [f64; 2],
    pub value: u8,
    /// True when no example contains the label.
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub sigma: SigmaMap,
    pub decisions: Vec<ParameterDecision>,
    pub trace: Vec<TrialLoss>,
    /// Kernel evaluations spent, including global graphs.
    pub kernel_evaluations: u64,
}

/// Coordinate descent over binary weights. Parameters are visited in
/// descending label frequency; for each, `trials` subsets are drawn and
/// the summed 1-NN losses under `σ = 0` and `σ = 1` decide its value, with
/// ties keeping 1. When `beta >= N` every trial uses the full dataset.
pub fn optimize_sigma(
    engine: &KernelEngine,
    train: &LabeledDataset,
    cfg: &LearnConfig,
) -> Result<LearnOutcome> {
    cfg.validate()?;
    let n = train.len();
    if n < 2 {
        return Err(Error::Data(format!(
            "need at least 2 training examples, got {n}"
        )));
    }
    if train.kind() != engine.config().structure_kind {
        return Err(Error::Mismatch(format!(
            "training data holds {} structures, kernel expects {}",
            train.kind(),
            engine.config().structure_kind
        )));
    }
    if n < 2 * cfg.beta {
        warn!(
            "dataset of {n} examples is smaller than 2 * beta = {}",
            2 * cfg.beta
        );
    }
    let items = train.structures();
    let labels = train.labels();
    let params = parameter_labels(train, cfg.label_fraction);
    let names: Vec<&str> = params.iter().map(|(l, _)| l.as_str()).collect();
    let pools = indices_by_label(train, &names);

    let mut sigma = engine.sigma().clone();
    for (label, _) in &params {
        sigma.set(label, 1);
    }
    let mut decisions = Vec::new();
    let mut trace = Vec::new();
    let mut evaluations = 0u64;

    for iteration in 0..cfg.refresh_iterations {
        let current = engine.with_sigma(sigma.clone());
        let graph = if cfg.beta >= n {
            None
        } else {
            let g = global_graph(&current, &items, cfg, iteration)?;
            evaluations += current.evaluations();
            Some(g)
        };
        for (t, (label, frequency)) in params.iter().enumerate() {
            let pool = &pools[label];
            if pool.is_empty() {
                warn!("no example contains label {label}; keeping its weight at 1");
                decisions.push(ParameterDecision {
                    iteration,
                    label: label.clone(),
                    frequency: *frequency,
                    pool_size: 0,
                    loss_sums: [0.0, 0.0],
                    value: 1,
                    skipped: true,
                });
                continue;
            }
            let e1 = engine.with_sigma(sigma.clone().with(label, 1));
            let e0 = engine.with_sigma(sigma.clone().with(label, 0));
            let sym = Sym::new(label);
            let results: Vec<Result<(usize, [f64; 2])>> = (0..cfg.trials)
                .into_par_iter()
                .map(|j| {
                    let subset = match &graph {
                        None => (0..n).collect(),
                        Some(g) => {
                            draw_subset(g, pool, cfg, &[iteration as u64, t as u64, j as u64])
                        }
                    };
                    let l = subset_losses(&e0, &e1, &items, &labels, &subset, sym, cfg)?;
                    Ok((subset.len(), l))
                })
                .collect();
            let mut sums = [0.0f64; 2];
            for (j, r) in results.into_iter().enumerate() {
                let (size, l) = r?;
                for v in 0..2 {
                    sums[v] += l[v];
                    trace.push(TrialLoss {
                        iteration,
                        parameter: t,
                        label: label.clone(),
                        trial: j,
                        value: v as u8,
                        subset_size: size,
                        loss: l[v],
                    });
                }
            }
            evaluations += e0.evaluations() + e1.evaluations();
            let value = u8::from(sums[0] >= sums[1]);
            info!(
                "iteration {iteration} label {label}: loss sums {:.6} (0) / {:.6} (1) -> {value}",
                sums[0], sums[1]
            );
            sigma.set(label, value);
            decisions.push(ParameterDecision {
                iteration,
                label: label.clone(),
                frequency: *frequency,
                pool_size: pool.len(),
                loss_sums: sums,
                value,
                skipped: false,
            });
        }
    }
    Ok(LearnOutcome {
        sigma,
        decisions,
        trace,
        kernel_evaluations: evaluations,
    })
}

fn global_graph(
    engine: &KernelEngine,
    items: &[&Structure],
    cfg: &LearnConfig,
    iteration: usize,
) -> Result<KnnGraph> {
    match cfg.global_graph {
        GraphMode::Exact => exact_knn_graph(engine, items, cfg.k_global),
        GraphMode::Hashed => {
            let seed = rng_stream::derive(cfg.seed, &[u64::MAX, iteration as u64]);
            let anchors = cfg
                .anchors
                .unwrap_or_else(|| klsh::sqrt_anchor_count(items.len()))
                .min(items.len());
            let params = IndexParams {
                family: cfg.family,
                bits: cfg.bits,
                anchors: Some(anchors),
                seed,
                ..IndexParams::default()
            };
            let index = HashIndex::build(engine, items, &params)?;
            hashed_knn_graph(engine, items, cfg.k_global, &index, cfg.probe, seed)
        }
    }
}

fn draw_subset(graph: &KnnGraph, pool: &[usize], cfg: &LearnConfig, path: &[u64]) -> Vec<usize> {
    let mut rng = rng_stream::rng(cfg.seed, path);
    let seeds = random_subset(pool, cfg.beta, &mut rng);
    let around = expand_neighborhood(graph, &seeds, cfg.k_global, cfg.include_second_hop);
    match cfg.sampler {
        Sampler::Neighborhood => around,
        Sampler::PureRandom => {
            let taken: BTreeSet<usize> = seeds.iter().copied().collect();
            let rest: Vec<usize> = (0..graph.len()).filter(|i| !taken.contains(i)).collect();
            let extra = random_subset(&rest, around.len() - seeds.len(), &mut rng);
            let mut all = seeds;
            all.extend(extra);
            all.sort_unstable();
            all
        }
    }
}

/// Normalized subset losses for `σ = 0` and `σ = 1`. Pairs where neither
/// structure carries `label` share the same kernel value under both.
fn subset_losses(
    e0: &KernelEngine,
    e1: &KernelEngine,
    items: &[&Structure],
    labels: &[u8],
    subset: &[usize],
    label: Sym,
    cfg: &LearnConfig,
) -> Result<[f64; 2]> {
    let local: Vec<&Structure> = subset.iter().map(|&i| items[i]).collect();
    let ys: Vec<u8> = subset.iter().map(|&i| labels[i]).collect();
    if cfg.subset_graph == GraphMode::Hashed {
        let mut out = [0.0; 2];
        for (v, e) in [e0, e1].into_iter().enumerate() {
            let params = IndexParams {
                anchors: Some(klsh::sqrt_anchor_count(local.len()).min(local.len())),
                seed: cfg.seed,
                ..IndexParams::default()
            };
            let index = HashIndex::build(e, &local, &params)?;
            let g = hashed_knn_graph(e, &local, 1, &index, cfg.probe, cfg.seed)?;
            out[v] = loss_from_labels(&ys, &g)?.total;
        }
        return Ok(out);
    }
    let m = local.len();
    let has: Vec<bool> = local.iter().map(|s| s.contains_edge(label)).collect();
    let self1 = e1.self_kernels(&local);
    let self0 = e0.self_kernels(&local);
    let rows1: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..m)
                .map(|j| {
                    e1.kernel_with_self(local[i], local[j], self_at(&self1, i), self_at(&self1, j))
                })
                .collect()
        })
        .collect();
    let rows0: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..m)
                .map(|j| {
                    if has[i] || has[j] {
                        e0.kernel_with_self(
                            local[i],
                            local[j],
                            self_at(&self0, i),
                            self_at(&self0, j),
                        )
                    } else {
                        rows1[i][j - i - 1]
                    }
                })
                .collect()
        })
        .collect();
    let mut out = [0.0; 2];
    for (v, rows) in [&rows0, &rows1].into_iter().enumerate() {
        let g = exact_knn_graph_with(m, 1, |i, j| {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            rows[a][b - a - 1]
        })?;
        out[v] = loss_from_labels(&ys, &g)?.total;
    }
    Ok(out)
}

/// Spread of subset losses across trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    pub mean: f64,
    /// Sample standard deviation; 0 with `std_defined = false` for a
    /// single trial.
    pub std: f64,
    pub std_defined: bool,
    pub losses: Vec<f64>,
    pub subset_sizes: Vec<usize>,
}

/// Repeats neighborhood sampling with the whole dataset as pool and
/// reports the normalized subset losses.
pub fn estimate_loss(
    engine: &KernelEngine,
    train: &LabeledDataset,
    graph: &KnnGraph,
    beta: usize,
    trials: usize,
    include_second_hop: bool,
    seed: u64,
) -> Result<LossEstimate> {
    if trials < 1 {
        return config_err("trials must be at least 1");
    }
    if graph.len() != train.len() {
        return Err(Error::Mismatch(format!(
            "graph has {} nodes, dataset {}",
            graph.len(),
            train.len()
        )));
    }
    let items = train.structures();
    let labels = train.labels();
    let pool: Vec<usize> = (0..train.len()).collect();
    let runs: Vec<Result<(f64, usize)>> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_stream::rng(seed, &[j as u64]);
            let a =
                sample_neighborhood(graph, &pool, beta, graph.k(), include_second_hop, &mut rng);
            let local: Vec<&Structure> = a.iter().map(|&i| items[i]).collect();
            let ys: Vec<u8> = a.iter().map(|&i| labels[i]).collect();
            let g = exact_knn_graph(engine, &local, 1)?;
            Ok((loss_from_labels(&ys, &g)?.total, a.len()))
        })
        .collect();
    let mut losses = Vec::with_capacity(trials);
    let mut subset_sizes = Vec::with_capacity(trials);
    for r in runs {
        let (l, s) = r?;
        losses.push(l);
        subset_sizes.push(s);
    }
    let std = stats::std_sample(&losses);
    Ok(LossEstimate {
        mean: stats::mean(&losses),
        std: std.unwrap_or(0.0),
        std_defined: std.is_some(),
        losses,
        subset_sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_formula() {
        // A <-> B mutual, both positive, K = 0.5; C (negative) -> A, K = 0.2.
        let g = KnnGraph::from_out_edges(1, vec![vec![(1, 0.5)], vec![(0, 0.5)], vec![(0, 0.2)]])
            .unwrap();
        let r = loss_from_labels(&[1, 1, 0], &g).unwrap();
        assert!((r.raw_total + 0.8).abs() < 1e-12);
        assert!((r.total + 0.8 / 3.0).abs() < 1e-12);
        assert_eq!(r.total, r.mismatch - r.reward);
        assert_eq!(loss_from_labels(&[0, 0, 0], &g).unwrap().total, 0.0);
        assert!(loss_from_labels(&[1, 1, 1], &g).unwrap().total < 0.0);
        assert!(
            loss_from_labels(&[1], &KnnGraph::from_out_edges(1, vec![vec![]]).unwrap()).is_err()
        );
    }

    #[test]
    fn sampler_keeps_seeds() {
        let g = KnnGraph::from_out_edges(
            1,
            vec![
                vec![(1, 1.0)],
                vec![(2, 1.0)],
                vec![(3, 1.0)],
                vec![(0, 1.0)],
                vec![(0, 0.5)],
            ],
        )
        .unwrap();
        let mut rng = rng_stream::rng(3, &[]);
        let a = sample_neighborhood(&g, &[0], 5, 1, true, &mut rng);
        // seed 0, out 1, in {3, 4} capped to the more similar 3, best
        // neighbors of those {2, 0}
        assert_eq!(a, vec![0, 1, 2, 3]);
        let b = sample_neighborhood(&g, &[0], 5, 1, false, &mut rng);
        assert_eq!(b, vec![0, 1, 3]);
        let wide = sample_neighborhood(&g, &[0], 5, 2, false, &mut rng);
        assert_eq!(wide, vec![0, 1, 3, 4]);
        let c = sample_neighborhood(&g, &[2, 4], 1, 1, false, &mut rng);
        assert!(c.contains(&2) || c.contains(&4));
    }

    #[test]
    fn config_ranges() {
        assert!(LearnConfig::default().validate().is_ok());
        let bad = |f: fn(&mut LearnConfig)| {
            let mut c = LearnConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.beta = 0));
        assert!(bad(|c| c.trials = 0));
        assert!(bad(|c| c.label_fraction = 0.0));
        assert!(bad(|c| c.label_fraction = 1.5));
    }
}
