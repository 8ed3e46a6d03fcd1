//! Enumeration oracles for the path and tree kernels.
//!
//! These walk every pair of equal-length index subsets explicitly and
//! share nothing with the dynamic programs except the tuple kernel. They
//! are exponential and refuse large inputs.

use crate::corpus::{PathStructure, Structure, TreeStructure, TupleLabel};
use crate::error::{Error, Result};

use super::KernelEngine;

pub const MAX_PATH_LEN: usize = 12;
pub const MAX_TREE_NODES: usize = 8;
pub const MAX_BRANCHING: usize = 4;

/// Positions of the set bits of `mask`, ascending.
fn positions(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

fn span(pos: &[usize]) -> i32 {
    (pos[pos.len() - 1] - pos[0] + 1) as i32
}

pub fn path_kernel_bruteforce(
    engine: &KernelEngine,
    s: &PathStructure,
    t: &PathStructure,
) -> Result<f64> {
    if s.len() > MAX_PATH_LEN || t.len() > MAX_PATH_LEN {
        return Err(Error::SizeLimit(format!(
            "paths of length {} and {} exceed {MAX_PATH_LEN}",
            s.len(),
            t.len()
        )));
    }
    let lambda = engine.config().lambda;
    let (a, b) = (s.tuples(), t.tuples());
    let mut total = 0.0;
    for ma in 1u32..(1 << a.len()) {
        let ia = positions(ma);
        for mb in 1u32..(1 << b.len()) {
            if mb.count_ones() != ma.count_ones() {
                continue;
            }
            let ib = positions(mb);
            let prod: f64 = ia
                .iter()
                .zip(&ib)
                .map(|(&x, &y)| engine.tuple_kernel(&a[x], &b[y]))
                .product();
            total += prod * lambda.powi(span(&ia) + span(&ib));
        }
    }
    Ok(total)
}

pub fn tree_kernel_bruteforce(
    engine: &KernelEngine,
    s: &TreeStructure,
    t: &TreeStructure,
) -> Result<f64> {
    for tree in [s, t] {
        if tree.node_count() > MAX_TREE_NODES || tree.max_branching() > MAX_BRANCHING {
            return Err(Error::SizeLimit(format!(
                "tree with {} nodes and branching {} exceeds {MAX_TREE_NODES} nodes / branching {MAX_BRANCHING}",
                tree.node_count(),
                tree.max_branching()
            )));
        }
    }
    Ok(tree_rec(engine, s, t))
}

fn tree_rec(engine: &KernelEngine, s: &TreeStructure, t: &TreeStructure) -> f64 {
    let kr = engine.tuple_kernel(&s.label, &t.label);
    let lambda = engine.config().lambda;
    let (cs, ct) = (&s.children, &t.children);
    let mut inner = 0.0;
    for ms in 1u32..(1 << cs.len()) {
        let is = positions(ms);
        for mt in 1u32..(1 << ct.len()) {
            if mt.count_ones() != ms.count_ones() {
                continue;
            }
            let it = positions(mt);
            let mut sum_k = 0.0;
            let mut prod = 1.0;
            for (&x, &y) in is.iter().zip(&it) {
                sum_k += tree_rec(engine, &cs[x], &ct[y]);
                prod *= engine.tuple_kernel(&cs[x].label, &ct[y].label);
            }
            let weight = lambda.powf(f64::from(span(&is) + span(&it)) / 2.0);
            inner += weight * sum_k * prod;
        }
    }
    kr * (kr + inner)
}

/// Oracle for either structure kind.
pub fn structure_kernel_bruteforce(
    engine: &KernelEngine,
    a: &Structure,
    b: &Structure,
) -> Result<f64> {
    let raw = |x: &Structure, y: &Structure| match (x, y) {
        (Structure::Path(p), Structure::Path(q)) => path_kernel_bruteforce(engine, p, q),
        (Structure::Tree(p), Structure::Tree(q)) => tree_kernel_bruteforce(engine, p, q),
        _ => Err(Error::Data("kernel between a path and a tree".into())),
    };
    let k = raw(a, b)?;
    if !engine.config().normalize {
        return Ok(k);
    }
    let denom = (raw(a, a)? * raw(b, b)?).sqrt();
    Ok(if denom > 0.0 { k / denom } else { 0.0 })
}

/// Path kernel restricted to subsequences that avoid every tuple whose edge
/// label is in `removed`, with spans still measured on the original
/// positions. Uses the unweighted tuple kernel. Annihilating a label with a
/// zero weight must reproduce this value.
pub fn path_kernel_filtered(
    engine: &KernelEngine,
    s: &PathStructure,
    t: &PathStructure,
    removed: &[&str],
) -> Result<f64> {
    if s.len() > MAX_PATH_LEN || t.len() > MAX_PATH_LEN {
        return Err(Error::SizeLimit("path too long".into()));
    }
    let keep = |x: &TupleLabel| match x.edge {
        Some(e) => !removed.iter().any(|r| *e.as_str() == **r),
        None => true,
    };
    let baseline = engine.with_sigma(Default::default());
    let lambda = engine.config().lambda;
    let (a, b) = (s.tuples(), t.tuples());
    let mut total = 0.0;
    for ma in 1u32..(1 << a.len()) {
        let ia = positions(ma);
        if !ia.iter().all(|&x| keep(&a[x])) {
            continue;
        }
        for mb in 1u32..(1 << b.len()) {
            if mb.count_ones() != ma.count_ones() {
                continue;
            }
            let ib = positions(mb);
            if !ib.iter().all(|&y| keep(&b[y])) {
                continue;
            }
            let prod: f64 = ia
                .iter()
                .zip(&ib)
                .map(|(&x, &y)| baseline.tuple_kernel(&a[x], &b[y]))
                .product();
            total += prod * lambda.powi(span(&ia) + span(&ib));
        }
    }
    Ok(total)
}
