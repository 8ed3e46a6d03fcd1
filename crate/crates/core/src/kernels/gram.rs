use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::corpus::Structure;

use super::{self_at, KernelEngine};

/// Symmetric Gram matrix. The upper triangle is evaluated (in parallel
/// over rows) and mirrored.
pub fn gram_matrix(engine: &KernelEngine, items: &[&Structure]) -> DMatrix<f64> {
    let n = items.len();
    let selfk = engine.self_kernels(items);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| {
                    engine.kernel_with_self(
                        items[i],
                        items[j],
                        self_at(&selfk, i),
                        self_at(&selfk, j),
                    )
                })
                .collect()
        })
        .collect();
    let mut g = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            g[(i, i + off)] = v;
            g[(i + off, i)] = v;
        }
    }
    g
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
