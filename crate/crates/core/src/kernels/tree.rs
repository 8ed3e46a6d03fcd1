//! Sparse child-subsequence tree kernel.
//!
//! ```text
//! K(u, v) = k(u, v) * ( k(u, v) + C(u, v) )
//! C(u, v) = sum over equal-length child subsequences i of u, j of v of
//!           lambda^((span(i) + span(j)) / 2)
//!             * (sum_s K(u[i_s], v[j_s]))
//!             * prod_s k(u[i_s], v[j_s])
//! ```
//!
//! `k` is the tuple kernel on node labels (a child's label carries its
//! incoming edge). The half-span exponent keeps the kernel symmetric and
//! reduces to `lambda^span(i)` whenever both spans agree.
//!
//! `C` is computed in `O(|u| |v|)` by a two-accumulator version of the path
//! kernel recursion: `P` sums products of tuple kernels, `Q` sums
//! products times the running sum of child kernels. Extending a subsequence
//! pair by children `(a, b)` maps `P -> P k_ab` and
//! `Q -> (Q + K_ab P) k_ab`. Child kernels are evaluated once per node
//! pair and only where `k_ab != 0`.

use crate::corpus::TreeStructure;

use super::{KernelEngine, PreparedTuple};

/// Tree flattened breadth-first so that children are contiguous.
pub(crate) struct FlatTree {
    labels: Vec<PreparedTuple>,
    first_child: Vec<usize>,
    n_children: Vec<usize>,
}

impl FlatTree {
    pub(crate) fn new(engine: &KernelEngine, tree: &TreeStructure) -> FlatTree {
        let mut queue = vec![tree];
        let mut head = 0;
        let mut flat = FlatTree {
            labels: Vec::new(),
            first_child: Vec::new(),
            n_children: Vec::new(),
        };
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            flat.labels.push(engine.prepare(&node.label));
            flat.first_child.push(queue.len());
            flat.n_children.push(node.children.len());
            queue.extend(node.children.iter());
        }
        flat
    }

    fn children(&self, u: usize) -> std::ops::Range<usize> {
        self.first_child[u]..self.first_child[u] + self.n_children[u]
    }
}

pub fn tree_kernel(engine: &KernelEngine, s: &TreeStructure, t: &TreeStructure) -> f64 {
    let a = FlatTree::new(engine, s);
    let b = FlatTree::new(engine, t);
    node_pair(engine, &a, 0, &b, 0)
}

fn node_pair(engine: &KernelEngine, a: &FlatTree, u: usize, b: &FlatTree, v: usize) -> f64 {
    let kr = engine.tuple_kernel_prepared(&a.labels[u], &b.labels[v]);
    if kr == 0.0 {
        return 0.0;
    }
    let (cu, cv) = (a.children(u), b.children(v));
    if cu.is_empty() || cv.is_empty() {
        return kr * kr;
    }
    let lambda = engine.config().lambda;
    let mu = lambda.sqrt();
    let m = cv.len();
    let mut p_prev = vec![0.0; m + 1];
    let mut p_cur = vec![0.0; m + 1];
    let mut q_prev = vec![0.0; m + 1];
    let mut q_cur = vec![0.0; m + 1];
    let mut t_prev = vec![0.0; m + 1];
    let mut t_cur = vec![0.0; m + 1];
    for x in cu {
        for (j, y) in cv.clone().enumerate() {
            let j = j + 1;
            let k = engine.tuple_kernel_prepared(&a.labels[x], &b.labels[y]);
            let (ep, eq) = if k == 0.0 {
                (0.0, 0.0)
            } else {
                let child = node_pair(engine, a, x, b, y);
                (
                    k * lambda * (1.0 + p_prev[j - 1]),
                    k * lambda * (child * (1.0 + p_prev[j - 1]) + q_prev[j - 1]),
                )
            };
            p_cur[j] = ep + (mu * p_prev[j] + mu * p_cur[j - 1]) - lambda * p_prev[j - 1];
            q_cur[j] = eq + (mu * q_prev[j] + mu * q_cur[j - 1]) - lambda * q_prev[j - 1];
            t_cur[j] = eq + (t_prev[j] + t_cur[j - 1]) - t_prev[j - 1];
        }
        std::mem::swap(&mut p_prev, &mut p_cur);
        std::mem::swap(&mut q_prev, &mut q_cur);
        std::mem::swap(&mut t_prev, &mut t_cur);
    }
    kr * (kr + t_prev[m].max(0.0))
}
