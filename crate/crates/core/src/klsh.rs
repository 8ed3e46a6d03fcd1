//! Kernelized locality-sensitive hashing.
//!
//! A structure is hashed from its kernel similarities to a fixed random
//! anchor set `A` of size `M`. Two bit families are provided:
//!
//! * [`HashFamily::Rknn`]: each bit draws two fixed random subsets of the
//!   anchors and records which subset holds the structure's nearest
//!   anchor. No anchor Gram matrix is needed.
//! * [`HashFamily::Kg`]: each bit is a random hyperplane in the kernel
//!   feature space, `w = K_c^{-1/2} e_S` over the centered anchor Gram
//!   matrix `K_c` and a random anchor subset `S`.
//!
//! Codes index a bucket table; [`HashIndex::probe`] reads buckets in
//! increasing Hamming distance from a query code.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::Structure;
use crate::error::{config_err, Error, Result};
use crate::kernels::{gram_matrix, KernelEngine};
use crate::rng_stream;

/// Eigenvalues of the centered anchor Gram matrix below this contribute
/// nothing to `K_c^{-1/2}`.
pub const EIGEN_CLIP: f64 = 1e-10;

/// Longest supported code.
pub const MAX_BITS: usize = 64;

/// `max(4, floor(log2 n) - 3)`: a little under `log2 n` so that a handful
/// of items share a bucket.
pub fn default_bits(n: usize) -> usize {
    let log2 = (n.max(1) as f64).log2().floor() as usize;
    log2.saturating_sub(3).max(4)
}

/// `ceil(sqrt(m))`.
pub fn default_alpha_subset(m: usize) -> usize {
    ((m as f64).sqrt().ceil() as usize).clamp(1, m.max(1))
}

/// `ceil(sqrt(n))`, the anchor count used while learning.
pub fn sqrt_anchor_count(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(2)
}

/// `min(30, ceil(m / 2))` anchors per hyperplane for the KG family.
pub fn default_kg_subset(m: usize) -> usize {
    m.div_ceil(2).clamp(1, 30)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSet {
    indices: Vec<usize>,
}

impl AnchorSet {
    pub fn new(indices: Vec<usize>) -> Result<AnchorSet> {
        if indices.is_empty() {
            return config_err("anchor set is empty");
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != indices.len() {
            return config_err("anchor indices must be distinct");
        }
        Ok(AnchorSet { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `m` distinct uniform indices below `n`, sorted.
pub fn sample_anchors(n: usize, m: usize, seed: u64) -> Result<AnchorSet> {
    if m < 2 {
        return config_err(format!("need at least 2 anchors, got {m}"));
    }
    if m > n {
        return config_err(format!("{m} anchors requested from {n} items"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = sample(&mut rng, n, m).into_vec();
    indices.sort_unstable();
    AnchorSet::new(indices)
}

/// Kernel similarities of `x` to every anchor.
pub fn kernel_vector(
    engine: &KernelEngine,
    x: &Structure,
    anchors: &AnchorSet,
    dataset: &[&Structure],
) -> Vec<f64> {
    let xs = engine.self_kernel(x);
    anchors
        .indices()
        .iter()
        .map(|&a| {
            let s = dataset[a];
            engine.kernel_with_self(x, s, xs, engine.self_kernel(s))
        })
        .collect()
}

/// H-bit code; bit `j` is stored at position `j` of a `u64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HashCode {
    bits: u64,
    len: u8,
}

impl HashCode {
    pub fn zeros(len: usize) -> HashCode {
        assert!(len <= MAX_BITS, "codes hold at most {MAX_BITS} bits");
        HashCode {
            bits: 0,
            len: len as u8,
        }
    }

    pub fn from_bits(bits: &[bool]) -> HashCode {
        let mut c = HashCode::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            c.set(j, b);
        }
        c
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits >> j & 1 == 1
    }

    pub fn set(&mut self, j: usize, bit: bool) {
        assert!(j < self.len());
        if bit {
            self.bits |= 1 << j;
        } else {
            self.bits &= !(1 << j);
        }
    }

    pub fn hamming(&self, other: &HashCode) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

impl fmt::Display for HashCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.len() {
            f.write_str(if self.get(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for HashCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashCode({self})")
    }
}

impl std::str::FromStr for HashCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<HashCode> {
        if s.len() > MAX_BITS {
            return Err(Error::Data(format!("hash code `{s}` is too long")));
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Data(format!("bad hash code `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HashCode::from_bits(&bits))
    }
}

impl Serialize for HashCode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HashCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<HashCode, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashFamily {
    Rknn,
    Kg,
}

impl fmt::Display for HashFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HashFamily::Rknn => "rknn",
            HashFamily::Kg => "kg",
        })
    }
}

impl std::str::FromStr for HashFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rknn" => Ok(HashFamily::Rknn),
            "kg" => Ok(HashFamily::Kg),
            other => config_err(format!("unknown hash family `{other}`")),
        }
    }
}

/// Fixed bit functions over kernel vectors of length `anchors`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum HashFunctionSet {
    Rknn {
        anchors: usize,
        /// Per bit, the two anchor-position subsets compared.
        subsets: Vec<(Vec<usize>, Vec<usize>)>,
    },
    Kg {
        anchors: usize,
        weights: Vec<Vec<f64>>,
        /// Column means of the uncentered anchor Gram matrix.
        center: Vec<f64>,
    },
}

impl HashFunctionSet {
    pub fn family(&self) -> HashFamily {
        match self {
            HashFunctionSet::Rknn { .. } => HashFamily::Rknn,
            HashFunctionSet::Kg { .. } => HashFamily::Kg,
        }
    }

    pub fn bits(&self) -> usize {
        match self {
            HashFunctionSet::Rknn { subsets, .. } => subsets.len(),
            HashFunctionSet::Kg { weights, .. } => weights.len(),
        }
    }

    pub fn anchor_count(&self) -> usize {
        match self {
            HashFunctionSet::Rknn { anchors, .. } | HashFunctionSet::Kg { anchors, .. } => *anchors,
        }
    }

    pub fn hash(&self, k: &[f64]) -> HashCode {
        match self {
            HashFunctionSet::Rknn { .. } => hash_rknn(self, k),
            HashFunctionSet::Kg { .. } => hash_kg(self, k),
        }
    }
}

fn check_bits(h: usize) -> Result<()> {
    if h == 0 || h > MAX_BITS {
        return config_err(format!("bit count must lie in 1..={MAX_BITS}, got {h}"));
    }
    Ok(())
}

/// Draws, per bit, two independent subsets of `alpha` anchor positions.
/// Touches no kernel.
pub fn build_rknn_functions(
    m: usize,
    h: usize,
    alpha: usize,
    seed: u64,
) -> Result<HashFunctionSet> {
    check_bits(h)?;
    if alpha == 0 || alpha > m {
        return config_err(format!("subset size must lie in 1..={m}, got {alpha}"));
    }
    if alpha == m {
        log::warn!("subset size equals the anchor count; every rknn bit is constant");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || {
        let mut s = sample(&mut rng, m, alpha).into_vec();
        s.sort_unstable();
        s
    };
    let subsets = (0..h).map(|_| (draw(), draw())).collect();
    Ok(HashFunctionSet::Rknn {
        anchors: m,
        subsets,
    })
}

/// Bit `j` is 0 when the best anchor similarity in the first subset is
/// strictly larger than in the second, 1 otherwise.
pub fn hash_rknn(functions: &HashFunctionSet, k: &[f64]) -> HashCode {
    let HashFunctionSet::Rknn { anchors, subsets } = functions else {
        panic!("hash_rknn called with {} functions", functions.family());
    };
    assert_eq!(k.len(), *anchors, "kernel vector length");
    let best = |s: &[usize]| s.iter().map(|&i| k[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut code = HashCode::zeros(subsets.len());
    for (j, (s1, s2)) in subsets.iter().enumerate() {
        code.set(j, best(s1) <= best(s2));
    }
    code
}

/// Random kernel-space hyperplanes from the centered anchor Gram matrix.
pub fn build_kg_functions(
    engine: &KernelEngine,
    anchors: &AnchorSet,
    dataset: &[&Structure],
    h: usize,
    t: usize,
    seed: u64,
) -> Result<HashFunctionSet> {
    check_bits(h)?;
    let m = anchors.len();
    if t == 0 || t > m {
        return config_err(format!(
            "hyperplane subset size must lie in 1..={m}, got {t}"
        ));
    }
    if t == m {
        log::warn!("hyperplane subset covers every anchor; all kg bits coincide");
    }
    let items: Vec<&Structure> = anchors.indices().iter().map(|&i| dataset[i]).collect();
    let gram = gram_matrix(engine, &items);
    let center: Vec<f64> = (0..m).map(|j| gram.column(j).mean()).collect();
    let centering = DMatrix::<f64>::identity(m, m) - DMatrix::from_element(m, m, 1.0 / m as f64);
    let kc = &centering * gram * &centering;
    let eig = kc.symmetric_eigen();
    let mut clipped = 0;
    let inv_sqrt_vals = DVector::from_iterator(
        m,
        eig.eigenvalues.iter().map(|&v| {
            if v > EIGEN_CLIP {
                1.0 / v.sqrt()
            } else {
                clipped += 1;
                0.0
            }
        }),
    );
    // One eigenvalue is always zero after centering.
    if clipped > m / 2 {
        log::warn!(
            "anchor Gram matrix is numerically singular: {clipped} of {m} eigenvalues clipped"
        );
    }
    let inv_sqrt =
        &eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt_vals) * eig.eigenvectors.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..h)
        .map(|_| {
            let mut e = DVector::zeros(m);
            for i in sample(&mut rng, m, t).into_iter() {
                e[i] = 1.0;
            }
            (&inv_sqrt * e).iter().copied().collect()
        })
        .collect();
    Ok(HashFunctionSet::Kg {
        anchors: m,
        weights,
        center,
    })
}

/// Bit `j` is 1 when `w_j . (k - center) >= 0`.
pub fn hash_kg(functions: &HashFunctionSet, k: &[f64]) -> HashCode {
    let HashFunctionSet::Kg {
        anchors,
        weights,
        center,
    } = functions
    else {
        panic!("hash_kg called with {} functions", functions.family());
    };
    assert_eq!(k.len(), *anchors, "kernel vector length");
    let mut code = HashCode::zeros(weights.len());
    for (j, w) in weights.iter().enumerate() {
        let dot: f64 = w
            .iter()
            .zip(k.iter().zip(center))
            .map(|(wi, (ki, ci))| wi * (ki - ci))
            .sum();
        code.set(j, dot >= 0.0);
    }
    code
}

/// Parameters for [`HashIndex::build`]. `None` fields take the defaults
/// derived from the dataset size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub family: HashFamily,
    pub bits: Option<usize>,
    pub anchors: Option<usize>,
    pub alpha_subset: Option<usize>,
    pub kg_subset: Option<usize>,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            family: HashFamily::Rknn,
            bits: None,
            anchors: None,
            alpha_subset: None,
            kg_subset: None,
            seed: 0,
        }
    }
}

/// Bucket table over a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashIndex {
    anchors: AnchorSet,
    functions: HashFunctionSet,
    /// Self-kernels of the anchors (all 1 without normalization).
    anchor_self: Vec<f64>,
    codes: Vec<HashCode>,
    #[serde(with = "bucket_list")]
    buckets: BTreeMap<HashCode, Vec<usize>>,
}

mod bucket_list {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Bucket {
        code: HashCode,
        items: Vec<usize>,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<HashCode, Vec<usize>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(code, items)| Bucket {
            code: *code,
            items: items.clone(),
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<HashCode, Vec<usize>>, D::Error> {
        let list = Vec::<Bucket>::deserialize(d)?;
        Ok(list.into_iter().map(|b| (b.code, b.items)).collect())
    }
}

/// Hashes every item once and groups items by code.
pub fn build_index(
    engine: &KernelEngine,
    dataset: &[&Structure],
    anchors: AnchorSet,
    functions: HashFunctionSet,
) -> Result<HashIndex> {
    check_bits(functions.bits())?;
    if functions.anchor_count() != anchors.len() {
        return config_err(format!(
            "hash functions expect {} anchors, anchor set has {}",
            functions.anchor_count(),
            anchors.len()
        ));
    }
    if let Some(&bad) = anchors.indices().iter().find(|&&a| a >= dataset.len()) {
        return config_err(format!(
            "anchor {bad} outside a dataset of {}",
            dataset.len()
        ));
    }
    let anchor_self: Vec<f64> = anchors
        .indices()
        .iter()
        .map(|&a| engine.self_kernel(dataset[a]))
        .collect();
    let mut index = HashIndex {
        anchors,
        functions,
        anchor_self,
        codes: Vec::new(),
        buckets: BTreeMap::new(),
    };
    let codes: Vec<HashCode> = dataset
        .par_iter()
        .map(|x| index.hash_with(engine, x, dataset))
        .collect();
    for (i, code) in codes.iter().enumerate() {
        index.buckets.entry(*code).or_default().push(i);
    }
    index.codes = codes;
    Ok(index)
}

impl HashIndex {
    /// Samples anchors and hash functions, then builds the index.
    pub fn build(
        engine: &KernelEngine,
        dataset: &[&Structure],
        params: &IndexParams,
    ) -> Result<HashIndex> {
        let n = dataset.len();
        let m = params.anchors.unwrap_or_else(|| sqrt_anchor_count(n));
        let h = params.bits.unwrap_or_else(|| default_bits(n));
        let anchors = sample_anchors(n, m, rng_stream::derive(params.seed, &[1]))?;
        let fseed = rng_stream::derive(params.seed, &[2]);
        let functions = match params.family {
            HashFamily::Rknn => build_rknn_functions(
                m,
                h,
                params
                    .alpha_subset
                    .unwrap_or_else(|| default_alpha_subset(m)),
                fseed,
            )?,
            HashFamily::Kg => build_kg_functions(
                engine,
                &anchors,
                dataset,
                h,
                params.kg_subset.unwrap_or_else(|| default_kg_subset(m)),
                fseed,
            )?,
        };
        build_index(engine, dataset, anchors, functions)
    }

    fn hash_with(&self, engine: &KernelEngine, x: &Structure, dataset: &[&Structure]) -> HashCode {
        let xs = engine.self_kernel(x);
        let k: Vec<f64> = self
            .anchors
            .indices()
            .iter()
            .zip(&self.anchor_self)
            .map(|(&a, &ks)| engine.kernel_with_self(x, dataset[a], xs, ks))
            .collect();
        self.functions.hash(&k)
    }

    /// Code of an arbitrary structure; `dataset` must be the indexed one.
    pub fn hash_query(
        &self,
        engine: &KernelEngine,
        x: &Structure,
        dataset: &[&Structure],
    ) -> HashCode {
        self.hash_with(engine, x, dataset)
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn functions(&self) -> &HashFunctionSet {
        &self.functions
    }

    pub fn family(&self) -> HashFamily {
        self.functions.family()
    }

    pub fn bits(&self) -> usize {
        self.functions.bits()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, item: usize) -> HashCode {
        self.codes[item]
    }

    pub fn buckets(&self) -> &BTreeMap<HashCode, Vec<usize>> {
        &self.buckets
    }

    /// Items of buckets at Hamming distance 0, 1, 2, ... from `code`,
    /// stopping after the first radius at which at least `min_candidates`
    /// items have been collected, or after `max_radius`. Buckets of equal
    /// distance are read in code order; items within a bucket ascend.
    pub fn probe(&self, code: HashCode, min_candidates: usize, max_radius: usize) -> Vec<usize> {
        let mut near: Vec<(u32, &HashCode, &Vec<usize>)> = self
            .buckets
            .iter()
            .map(|(c, items)| (c.hamming(&code), c, items))
            .filter(|(d, _, _)| *d as usize <= max_radius)
            .collect();
        near.sort_by_key(|(d, c, _)| (*d, **c));
        let mut out = Vec::new();
        let mut i = 0;
        while i < near.len() {
            let radius = near[i].0;
            while i < near.len() && near[i].0 == radius {
                out.extend_from_slice(near[i].2);
                i += 1;
            }
            if out.len() >= min_candidates {
                break;
            }
        }
        out
    }
}

/// Free-function form of [`HashIndex::probe`].
pub fn probe(
    index: &HashIndex,
    code: HashCode,
    min_candidates: usize,
    max_radius: usize,
) -> Vec<usize> {
    index.probe(code, min_candidates, max_radius)
}

/// Occupancy statistics of the non-empty buckets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketBalance {
    pub items: usize,
    pub buckets: usize,
    pub mean: f64,
    pub std: f64,
    pub max: usize,
}

pub fn bucket_balance_report(index: &HashIndex) -> BucketBalance {
    let sizes: Vec<f64> = index.buckets.values().map(|b| b.len() as f64).collect();
    BucketBalance {
        items: index.len(),
        buckets: sizes.len(),
        mean: crate::stats::mean(&sizes),
        std: crate::stats::std_population(&sizes),
        max: index.buckets.values().map(Vec::len).max().unwrap_or(0),
    }
}
