//! Convolution kernels over tuple paths and labeled trees.
//!
//! Tuples are compared with
//!
//! ```text
//! k((e1, n1), (e2, n2)) = s(e1) * [e1 == e2] * s(e2) * k_node(n1, n2)
//! ```
//!
//! where `s` is the binary per-edge-label weight held in a [`SigmaMap`].
//! A label with weight 0 removes every tuple carrying it from all matches,
//! which turns the stationary baseline kernel into a nonstationary one.
//! Absent edge labels match each other and always carry weight 1.
//!
//! The structure kernels built on top of `k` are the all-subsequences path
//! kernel ([`path`]) and the sparse child-subsequence tree kernel
//! ([`tree`]). Independent enumeration oracles live in [`bruteforce`].

pub mod bruteforce;
mod gram;
pub mod path;
pub mod tree;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingTable, Structure, StructureKind, TupleLabel};
use crate::error::{config_err, Error, Result};
use crate::symbol::Sym;

pub use gram::{gram_matrix, min_eigenvalue};

/// Node-label similarity used inside the tuple kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TupleKernelKind {
    /// Exact node-label match.
    Indicator,
    /// `exp(w.w' - 1) * ((w.w' - gamma) / (1 - gamma))_+` over unit word vectors.
    Wordvec,
}

impl std::str::FromStr for TupleKernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(TupleKernelKind::Indicator),
            "wordvec" => Ok(TupleKernelKind::Wordvec),
            other => config_err(format!("unknown tuple kernel `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub structure_kind: StructureKind,
    pub tuple_kernel: TupleKernelKind,
    /// Decay applied per position spanned by a matched subsequence, in (0, 1).
    pub lambda: f64,
    /// Sparsity threshold of the word-vector node kernel, in (-1, 1).
    pub gamma: f64,
    /// Divide by `sqrt(K(a,a) K(b,b))`.
    pub normalize: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            structure_kind: StructureKind::Path,
            tuple_kernel: TupleKernelKind::Indicator,
            lambda: 0.8,
            gamma: 0.6,
            normalize: false,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return config_err(format!("lambda must lie in (0, 1), got {}", self.lambda));
        }
        if !(self.gamma > -1.0 && self.gamma < 1.0) {
            return config_err(format!("gamma must lie in (-1, 1), got {}", self.gamma));
        }
        Ok(())
    }
}

/// Binary weight per edge label. Labels not in the map weigh 1.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, u8>", into = "BTreeMap<String, u8>")]
pub struct SigmaMap(BTreeMap<String, u8>);

impl TryFrom<BTreeMap<String, u8>> for SigmaMap {
    type Error = Error;

    fn try_from(map: BTreeMap<String, u8>) -> Result<Self> {
        if let Some((label, v)) = map.iter().find(|(_, &v)| v > 1) {
            return config_err(format!("sigma for `{label}` must be 0 or 1, got {v}"));
        }
        Ok(SigmaMap(map))
    }
}

impl From<SigmaMap> for BTreeMap<String, u8> {
    fn from(s: SigmaMap) -> Self {
        s.0
    }
}

impl SigmaMap {
    pub fn new() -> SigmaMap {
        SigmaMap::default()
    }

    /// Every label set to 1.
    pub fn ones<S: AsRef<str>>(labels: &[S]) -> SigmaMap {
        SigmaMap(labels.iter().map(|l| (l.as_ref().to_string(), 1)).collect())
    }

    pub fn set(&mut self, label: &str, value: u8) {
        assert!(value <= 1, "sigma is binary");
        self.0.insert(label.to_string(), value);
    }

    pub fn with(mut self, label: &str, value: u8) -> SigmaMap {
        self.set(label, value);
        self
    }

    pub fn get(&self, label: &str) -> u8 {
        self.0.get(label).copied().unwrap_or(1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u8)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Labels whose weight is 0.
    pub fn zeros(&self) -> Vec<&str> {
        self.iter()
            .filter(|(_, v)| *v == 0)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Tuple with its weight and embedding row resolved.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PreparedTuple {
    edge: Option<Sym>,
    node: Sym,
    sigma: f64,
    row: Option<u32>,
}

/// Configured kernel with its weights. Immutable apart from an evaluation
/// counter; share it across threads freely.
pub struct KernelEngine {
    config: KernelConfig,
    sigma: SigmaMap,
    embeddings: Option<Arc<EmbeddingTable>>,
    sigma_by_sym: Vec<f64>,
    row_by_sym: Vec<Option<u32>>,
    rows: Vec<f64>,
    dim: usize,
    evaluations: AtomicU64,
}

impl std::fmt::Debug for KernelEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelEngine")
            .field("config", &self.config)
            .field("sigma", &self.sigma)
            .field("embeddings", &self.embeddings.as_ref().map(|e| e.len()))
            .finish()
    }
}

impl Clone for KernelEngine {
    fn clone(&self) -> Self {
        self.with_sigma(self.sigma.clone())
    }
}

impl KernelEngine {
    /// Embeddings are required for the word-vector tuple kernel and
    /// rejected otherwise.
    pub fn new(
        config: KernelConfig,
        sigma: SigmaMap,
        embeddings: Option<Arc<EmbeddingTable>>,
    ) -> Result<KernelEngine> {
        config.validate()?;
        match (config.tuple_kernel, &embeddings) {
            (TupleKernelKind::Wordvec, None) => {
                return config_err("the wordvec tuple kernel needs an embedding table")
            }
            (TupleKernelKind::Indicator, Some(_)) => {
                return config_err("embeddings are only used by the wordvec tuple kernel")
            }
            _ => {}
        }
        // Intern everything the engine refers to so the dense tables cover it.
        for (label, _) in sigma.iter() {
            Sym::new(label);
        }
        let mut words = Vec::new();
        if let Some(table) = &embeddings {
            words = table.words().map(|w| (Sym::new(w), w)).collect();
        }
        let n_syms = Sym::table_len();
        let mut sigma_by_sym = vec![1.0; n_syms];
        for (label, v) in sigma.iter() {
            sigma_by_sym[Sym::new(label).index()] = v as f64;
        }
        let mut row_by_sym = vec![None; n_syms];
        let mut rows = Vec::new();
        let mut dim = 0;
        if let Some(table) = &embeddings {
            dim = table.dim();
            // Deterministic row order.
            words.sort_by(|a, b| a.1.cmp(b.1));
            for (i, (sym, word)) in words.iter().enumerate() {
                row_by_sym[sym.index()] = Some(i as u32);
                rows.extend_from_slice(table.get(word).expect("word from table"));
            }
        }
        Ok(KernelEngine {
            config,
            sigma,
            embeddings,
            sigma_by_sym,
            row_by_sym,
            rows,
            dim,
            evaluations: AtomicU64::new(0),
        })
    }

    /// Baseline engine with no weights.
    pub fn baseline(config: KernelConfig) -> Result<KernelEngine> {
        KernelEngine::new(config, SigmaMap::new(), None)
    }

    /// Same configuration and embeddings, different weights.
    pub fn with_sigma(&self, sigma: SigmaMap) -> KernelEngine {
        KernelEngine::new(self.config.clone(), sigma, self.embeddings.clone())
            .expect("configuration already validated")
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn sigma(&self) -> &SigmaMap {
        &self.sigma
    }

    pub fn embeddings(&self) -> Option<&Arc<EmbeddingTable>> {
        self.embeddings.as_ref()
    }

    /// Raw structure-kernel evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    fn sigma_of(&self, edge: Option<Sym>) -> f64 {
        match edge {
            None => 1.0,
            Some(e) => self.sigma_by_sym.get(e.index()).copied().unwrap_or(1.0),
        }
    }

    pub(crate) fn prepare(&self, t: &TupleLabel) -> PreparedTuple {
        PreparedTuple {
            edge: t.edge,
            node: t.node,
            sigma: self.sigma_of(t.edge),
            row: self.row_by_sym.get(t.node.index()).copied().flatten(),
        }
    }

    fn node_kernel(&self, a: &PreparedTuple, b: &PreparedTuple) -> f64 {
        if a.node == b.node {
            return 1.0;
        }
        match self.config.tuple_kernel {
            TupleKernelKind::Indicator => 0.0,
            TupleKernelKind::Wordvec => match (a.row, b.row) {
                (Some(ra), Some(rb)) => {
                    let d = self.dim;
                    let wa = &self.rows[ra as usize * d..(ra as usize + 1) * d];
                    let wb = &self.rows[rb as usize * d..(rb as usize + 1) * d];
                    let dot: f64 = wa.iter().zip(wb).map(|(x, y)| x * y).sum();
                    let gamma = self.config.gamma;
                    let sparse = ((dot - gamma) / (1.0 - gamma)).max(0.0);
                    if sparse == 0.0 {
                        0.0
                    } else {
                        (dot - 1.0).exp() * sparse
                    }
                }
                // Out of vocabulary: only exact string equality matches.
                _ => 0.0,
            },
        }
    }

    #[inline]
    pub(crate) fn tuple_kernel_prepared(&self, a: &PreparedTuple, b: &PreparedTuple) -> f64 {
        if a.edge != b.edge {
            return 0.0;
        }
        let weight = a.sigma * b.sigma;
        if weight == 0.0 {
            return 0.0;
        }
        weight * self.node_kernel(a, b)
    }

    pub fn tuple_kernel(&self, a: &TupleLabel, b: &TupleLabel) -> f64 {
        self.tuple_kernel_prepared(&self.prepare(a), &self.prepare(b))
    }

    /// Unnormalized kernel. Returns 0 for structures of different kinds.
    pub fn raw_kernel(&self, a: &Structure, b: &Structure) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        match (a, b) {
            (Structure::Path(p), Structure::Path(q)) => path::path_kernel(self, p, q),
            (Structure::Tree(s), Structure::Tree(t)) => tree::tree_kernel(self, s, t),
            _ => {
                debug_assert!(false, "kernel between a path and a tree");
                0.0
            }
        }
    }

    /// `K(a, b)`, normalized when the configuration asks for it. A zero
    /// self-similarity on either side yields 0.
    pub fn structure_kernel(&self, a: &Structure, b: &Structure) -> f64 {
        let raw = self.raw_kernel(a, b);
        if !self.config.normalize {
            return raw;
        }
        let ka = self.raw_kernel(a, a);
        let kb = if a == b { ka } else { self.raw_kernel(b, b) };
        normalized(raw, ka, kb)
    }

    /// Self-kernels needed by [`KernelEngine::kernel_with_self`]; empty when
    /// normalization is off.
    pub fn self_kernels(&self, items: &[&Structure]) -> Vec<f64> {
        use rayon::prelude::*;
        if !self.config.normalize {
            return Vec::new();
        }
        items.par_iter().map(|s| self.raw_kernel(s, s)).collect()
    }

    /// Self-kernel of one structure, or 1 when normalization is off.
    pub fn self_kernel(&self, s: &Structure) -> f64 {
        if self.config.normalize {
            self.raw_kernel(s, s)
        } else {
            1.0
        }
    }

    /// Same value as [`KernelEngine::structure_kernel`] given precomputed
    /// self-kernels (ignored when normalization is off).
    pub fn kernel_with_self(&self, a: &Structure, b: &Structure, ka: f64, kb: f64) -> f64 {
        let raw = self.raw_kernel(a, b);
        if self.config.normalize {
            normalized(raw, ka, kb)
        } else {
            raw
        }
    }
}

fn normalized(raw: f64, ka: f64, kb: f64) -> f64 {
    let denom = (ka * kb).sqrt();
    if denom > 0.0 {
        raw / denom
    } else {
        0.0
    }
}

/// Lookup of precomputed self-kernels, tolerating the empty vector that
/// [`KernelEngine::self_kernels`] returns when normalization is off.
pub(crate) fn self_at(selfk: &[f64], i: usize) -> f64 {
    selfk.get(i).copied().unwrap_or(1.0)
}
