#![allow(dead_code)]

use nskernel::corpus::{
    LabeledDataset, LabeledExample, PathStructure, Structure, StructureKind, TreeStructure,
    TupleLabel,
};
use nskernel::kernels::SigmaMap;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EDGES: [&str; 3] = ["arg0", "arg1", "mod"];
pub const NODES: [&str; 4] = ["ras", "raf", "mek", "bind"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tuple<R: Rng>(rng: &mut R, edges: usize, nodes: usize) -> TupleLabel {
    let node = NODES[rng.gen_range(0..nodes)];
    // one in four tuples carries no edge label
    if rng.gen_range(0..4) == 0 {
        TupleLabel::bare(node)
    } else {
        TupleLabel::edge(EDGES[rng.gen_range(0..edges)], node)
    }
}

pub fn random_path<R: Rng>(rng: &mut R, max_len: usize, nodes: usize) -> PathStructure {
    let len = rng.gen_range(1..=max_len);
    PathStructure::new(
        (0..len)
            .map(|_| random_tuple(rng, EDGES.len(), nodes))
            .collect(),
    )
    .unwrap()
}

/// Random tree with at most `max_nodes` nodes and branching at most 4.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize, nodes: usize) -> TreeStructure {
    let total = rng.gen_range(1..=max_nodes);
    let root = TupleLabel::bare(NODES[rng.gen_range(0..nodes)]);
    let mut labels = vec![root];
    let mut parent = vec![usize::MAX];
    for i in 1..total {
        let open: Vec<usize> = (0..i)
            .filter(|&p| parent.iter().filter(|&&q| q == p).count() < 4)
            .collect();
        parent.push(open[rng.gen_range(0..open.len())]);
        labels.push(random_tuple(rng, EDGES.len(), nodes));
    }
    fn build(i: usize, labels: &[TupleLabel], parent: &[usize]) -> TreeStructure {
        let children = (0..labels.len())
            .filter(|&c| parent[c] == i)
            .map(|c| build(c, labels, parent))
            .collect();
        TreeStructure::new(labels[i].clone(), children)
    }
    build(0, &labels, &parent)
}

pub fn random_sigma<R: Rng>(rng: &mut R) -> SigmaMap {
    let mut s = SigmaMap::new();
    for e in EDGES {
        s.set(e, rng.gen_range(0..2));
    }
    s
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, max_len: usize) -> LabeledDataset {
    let examples = (0..n)
        .map(|i| LabeledExample {
            id: format!("x{i}"),
            structure: Structure::Path(random_path(rng, max_len, NODES.len())),
            label: rng.gen_range(0..2),
        })
        .collect();
    LabeledDataset::new(StructureKind::Path, examples).unwrap()
}
