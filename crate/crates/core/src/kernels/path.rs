//! All-subsequences path kernel.
//!
//! For paths `s` and `t` the kernel sums, over every pair of equal-length
//! index subsequences `i` of `s` and `j` of `t`, the product of tuple
//! kernels of aligned positions times `lambda^(span(i) + span(j))`, with
//! `span(i) = i_last - i_first + 1`.
//!
//! The dynamic program merges all subsequence lengths. With `E(i, j)` the
//! weighted sum over subsequence pairs ending exactly at `(i, j)` and
//! `S(i, j)` its decayed prefix sum,
//!
//! ```text
//! E(i, j) = k(s_i, t_j) * lambda^2 * (1 + S(i-1, j-1))
//! S(i, j) = E(i, j) + lambda*S(i-1, j) + lambda*S(i, j-1) - lambda^2*S(i-1, j-1)
//! ```
//!
//! and the kernel is the plain sum of `E`, accumulated the same way. Both
//! recurrences are symmetric under transposition, so `K(s, t)` and
//! `K(t, s)` agree bit for bit. Cost is `O(|s| |t|)`.

use crate::corpus::PathStructure;

use super::{KernelEngine, PreparedTuple};

pub fn path_kernel(engine: &KernelEngine, s: &PathStructure, t: &PathStructure) -> f64 {
    let a: Vec<PreparedTuple> = s.tuples().iter().map(|x| engine.prepare(x)).collect();
    let b: Vec<PreparedTuple> = t.tuples().iter().map(|x| engine.prepare(x)).collect();
    path_kernel_prepared(engine, &a, &b)
}

pub(crate) fn path_kernel_prepared(
    engine: &KernelEngine,
    a: &[PreparedTuple],
    b: &[PreparedTuple],
) -> f64 {
    let lambda = engine.config().lambda;
    let l2 = lambda * lambda;
    let m = b.len();
    let mut s_prev = vec![0.0; m + 1];
    let mut s_cur = vec![0.0; m + 1];
    let mut t_prev = vec![0.0; m + 1];
    let mut t_cur = vec![0.0; m + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            let j = j + 1;
            let k = engine.tuple_kernel_prepared(x, y);
            let e = if k == 0.0 {
                0.0
            } else {
                k * l2 * (1.0 + s_prev[j - 1])
            };
            s_cur[j] = e + (lambda * s_prev[j] + lambda * s_cur[j - 1]) - l2 * s_prev[j - 1];
            t_cur[j] = e + (t_prev[j] + t_cur[j - 1]) - t_prev[j - 1];
        }
        std::mem::swap(&mut s_prev, &mut s_cur);
        std::mem::swap(&mut t_prev, &mut t_cur);
    }
    t_prev[m].max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TupleLabel;
    use crate::kernels::{KernelConfig, SigmaMap};

    fn p(tuples: &[(&str, &str)]) -> PathStructure {
        PathStructure::new(tuples.iter().map(|(e, n)| TupleLabel::edge(e, n)).collect()).unwrap()
    }

    fn engine() -> KernelEngine {
        KernelEngine::baseline(KernelConfig::default()).unwrap()
    }

    // Expected values below come from enumerating subsequence pairs by hand
    // under the inclusive-span convention.
    #[test]
    fn single_tuple() {
        let e = engine();
        let s = p(&[("a", "x")]);
        assert_eq!(path_kernel(&e, &s, &s), 0.8 * 0.8);
    }

    #[test]
    fn two_tuples() {
        let e = engine();
        let s = p(&[("a", "x"), ("b", "y")]);
        let l: f64 = 0.8;
        let want = 2.0 * l.powi(2) + l.powi(4);
        assert!((path_kernel(&e, &s, &s) - want).abs() < 1e-15);
        let off = e.with_sigma(SigmaMap::new().with("b", 0));
        assert!((path_kernel(&off, &s, &s) - l.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn disjoint_vocabulary() {
        let e = engine();
        assert_eq!(
            path_kernel(&e, &p(&[("a", "x")]), &p(&[("a", "y"), ("b", "x")])),
            0.0
        );
    }

    #[test]
    fn gap_decays() {
        let e = engine();
        let s = p(&[("a", "x"), ("b", "y")]);
        let gapped = p(&[("a", "x"), ("c", "z"), ("b", "y")]);
        assert!(path_kernel(&e, &s, &gapped) < path_kernel(&e, &s, &s));
    }
}
