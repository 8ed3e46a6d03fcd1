//! Labeled structure datasets and word embeddings.
//!
//! Datasets are JSON lines, one example per line:
//!
//! ```text
//! {"id": "e1", "label": 1, "path": [["arg0", "protein"], [null, "bind"]]}
//! {"id": "e2", "label": 0, "tree": {"edge": null, "node": "bind", "children": [...]}}
//! ```
//!
//! Embeddings are whitespace separated text, `word v1 v2 ... vd` per line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbol::Sym;

/// One `(edge, node)` tuple. Bare tuples such as a root verb have no edge label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TupleLabel {
    pub edge: Option<Sym>,
    pub node: Sym,
}

impl TupleLabel {
    pub fn new(edge: Option<&str>, node: &str) -> Result<TupleLabel> {
        if node.is_empty() {
            return Err(Error::Data("empty node label".into()));
        }
        if edge == Some("") {
            return Err(Error::Data("empty edge label".into()));
        }
        Ok(TupleLabel {
            edge: edge.map(Sym::new),
            node: Sym::new(node),
        })
    }

    /// Tuple with an edge label. Panics on empty strings.
    pub fn edge(edge: &str, node: &str) -> TupleLabel {
        TupleLabel::new(Some(edge), node).expect("non-empty labels")
    }

    /// Tuple without an edge label. Panics on an empty node label.
    pub fn bare(node: &str) -> TupleLabel {
        TupleLabel::new(None, node).expect("non-empty node label")
    }
}

/// A sequence of tuples, at least one long.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathStructure {
    tuples: Vec<TupleLabel>,
}

impl PathStructure {
    pub fn new(tuples: Vec<TupleLabel>) -> Result<PathStructure> {
        if tuples.is_empty() {
            return Err(Error::Data("empty structure".into()));
        }
        Ok(PathStructure { tuples })
    }

    pub fn tuples(&self) -> &[TupleLabel] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// Ordered labeled tree. `label.edge` is the incoming edge; a root has none.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreeStructure {
    pub label: TupleLabel,
    pub children: Vec<TreeStructure>,
}

impl TreeStructure {
    pub fn new(label: TupleLabel, children: Vec<TreeStructure>) -> TreeStructure {
        TreeStructure { label, children }
    }

    pub fn leaf(label: TupleLabel) -> TreeStructure {
        TreeStructure {
            label,
            children: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn max_branching(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.max_branching())
            .max()
            .unwrap_or(0)
            .max(self.children.len())
    }

    /// Pre-order walk over every node label, root first.
    pub fn labels(&self) -> Vec<&TupleLabel> {
        let mut out = Vec::with_capacity(self.node_count());
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(&node.label);
            stack.extend(node.children.iter().rev());
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Path,
    Tree,
}

impl std::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StructureKind::Path => f.write_str("path"),
            StructureKind::Tree => f.write_str("tree"),
        }
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(StructureKind::Path),
            "tree" => Ok(StructureKind::Tree),
            other => Err(Error::Config(format!("unknown structure kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    Path(PathStructure),
    Tree(TreeStructure),
}

impl Structure {
    pub fn kind(&self) -> StructureKind {
        match self {
            Structure::Path(_) => StructureKind::Path,
            Structure::Tree(_) => StructureKind::Tree,
        }
    }

    /// Every tuple of the structure (tree nodes in pre-order).
    pub fn tuples(&self) -> Vec<&TupleLabel> {
        match self {
            Structure::Path(p) => p.tuples().iter().collect(),
            Structure::Tree(t) => t.labels(),
        }
    }

    pub fn contains_edge(&self, edge: Sym) -> bool {
        self.tuples().iter().any(|t| t.edge == Some(edge))
    }

    pub fn size(&self) -> usize {
        match self {
            Structure::Path(p) => p.len(),
            Structure::Tree(t) => t.node_count(),
        }
    }
}

impl From<PathStructure> for Structure {
    fn from(p: PathStructure) -> Structure {
        Structure::Path(p)
    }
}

impl From<TreeStructure> for Structure {
    fn from(t: TreeStructure) -> Structure {
        Structure::Tree(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub id: String,
    pub structure: Structure,
    /// Binary class label, 0 or 1.
    pub label: u8,
}

/// Homogeneous collection of labeled examples with unique ids.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    kind: StructureKind,
    examples: Vec<LabeledExample>,
}

impl LabeledDataset {
    pub fn new(kind: StructureKind, examples: Vec<LabeledExample>) -> Result<LabeledDataset> {
        let mut ids = HashSet::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            if ex.structure.kind() != kind {
                return Err(Error::Data(format!(
                    "example `{}` is a {} but the dataset holds {}s",
                    ex.id,
                    ex.structure.kind(),
                    kind
                )));
            }
            if ex.label > 1 {
                return Err(Error::Data("label must be 0 or 1".into()));
            }
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: ex.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(LabeledDataset { kind, examples })
    }

    pub fn kind(&self) -> StructureKind {
        self.kind
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn structures(&self) -> Vec<&Structure> {
        self.examples.iter().map(|e| &e.structure).collect()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Examples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            kind: self.kind,
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    edge: Option<String>,
    node: String,
    #[serde(default)]
    children: Vec<TreeRecord>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<Vec<(Option<String>, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tree: Option<TreeRecord>,
}

fn tree_from_record(rec: TreeRecord) -> Result<TreeStructure> {
    let label = TupleLabel::new(rec.edge.as_deref(), &rec.node)?;
    let children = rec
        .children
        .into_iter()
        .map(tree_from_record)
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeStructure { label, children })
}

fn tree_to_record(tree: &TreeStructure) -> TreeRecord {
    TreeRecord {
        edge: tree.label.edge.map(|e| e.as_str().to_string()),
        node: tree.label.node.as_str().to_string(),
        children: tree.children.iter().map(tree_to_record).collect(),
    }
}

fn parse_record(
    text: &str,
    kind: StructureKind,
) -> Result<(String, Structure, Option<u8>), String> {
    let rec: Record = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let label = match rec.label {
        None => None,
        Some(l @ (0 | 1)) => Some(l as u8),
        Some(_) => return Err("label must be 0 or 1".into()),
    };
    let structure = match (kind, rec.path, rec.tree) {
        (StructureKind::Path, Some(path), _) => {
            let tuples = path
                .iter()
                .map(|(e, n)| TupleLabel::new(e.as_deref(), n))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.to_string())?;
            Structure::Path(PathStructure::new(tuples).map_err(|e| e.to_string())?)
        }
        (StructureKind::Tree, _, Some(tree)) => {
            if tree.edge.is_some() {
                return Err("tree root must not carry an edge label".into());
            }
            Structure::Tree(tree_from_record(tree).map_err(|e| e.to_string())?)
        }
        (kind, _, _) => return Err(format!("missing `{kind}` field")),
    };
    Ok((rec.id, structure, label))
}

/// A structure to classify; the label is optional.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub id: String,
    pub structure: Structure,
    pub label: Option<u8>,
}

/// Parses a JSON-lines file of records whose label may be absent. Blank
/// lines are skipped.
pub fn load_queries<R: BufRead>(source: R, kind: StructureKind) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, structure, label) =
            parse_record(&line, kind).map_err(|message| Error::Record {
                line: lineno,
                message,
            })?;
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, line: lineno });
        }
        out.push(Query {
            id,
            structure,
            label,
        });
    }
    Ok(out)
}

/// Parses a JSON-lines dataset. Blank lines are skipped; every record
/// needs a label.
pub fn load_dataset<R: BufRead>(source: R, kind: StructureKind) -> Result<LabeledDataset> {
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (id, structure, label) =
            parse_record(&line, kind).map_err(|message| Error::Record {
                line: lineno,
                message,
            })?;
        let Some(label) = label else {
            return Err(Error::Record {
                line: lineno,
                message: "missing label".into(),
            });
        };
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, line: lineno });
        }
        examples.push(LabeledExample {
            id,
            structure,
            label,
        });
    }
    Ok(LabeledDataset { kind, examples })
}

/// Writes `ds` in the format read by [`load_dataset`].
pub fn write_dataset<W: Write>(ds: &LabeledDataset, mut out: W) -> Result<()> {
    for ex in ds.examples() {
        let mut rec = Record {
            id: ex.id.clone(),
            label: Some(ex.label as i64),
            path: None,
            tree: None,
        };
        match &ex.structure {
            Structure::Path(p) => {
                rec.path = Some(
                    p.tuples()
                        .iter()
                        .map(|t| {
                            (
                                t.edge.map(|e| e.as_str().to_string()),
                                t.node.as_str().to_string(),
                            )
                        })
                        .collect(),
                )
            }
            Structure::Tree(t) => rec.tree = Some(tree_to_record(t)),
        }
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Result of [`dedup_dataset`].
#[derive(Clone, Debug)]
pub struct Dedup {
    pub dataset: LabeledDataset,
    pub dropped: usize,
    /// Dropped duplicates whose label disagreed with the kept example.
    pub conflicts: usize,
}

/// Keeps the first occurrence of every structurally identical example.
pub fn dedup_dataset(ds: &LabeledDataset) -> Dedup {
    let mut first: HashMap<&Structure, u8> = HashMap::with_capacity(ds.len());
    let mut kept = Vec::with_capacity(ds.len());
    let mut conflicts = 0;
    for ex in ds.examples() {
        match first.get(&ex.structure) {
            Some(&label) => {
                if label != ex.label {
                    conflicts += 1;
                }
            }
            None => {
                first.insert(&ex.structure, ex.label);
                kept.push(ex.clone());
            }
        }
    }
    if conflicts > 0 {
        log::warn!("{conflicts} duplicate structures carried conflicting labels; kept the first occurrence");
    }
    let dropped = ds.len() - kept.len();
    Dedup {
        dataset: LabeledDataset {
            kind: ds.kind,
            examples: kept,
        },
        dropped,
        conflicts,
    }
}

/// Occurrence count of every edge label across all tuples.
pub fn label_frequencies(ds: &LabeledDataset) -> BTreeMap<String, usize> {
    let mut counts: HashMap<Sym, usize> = HashMap::new();
    for ex in ds.examples() {
        for t in ex.structure.tuples() {
            if let Some(e) = t.edge {
                *counts.entry(e).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(k, v)| (k.as_str().to_string(), v))
        .collect()
}

/// For each label, the sorted indices of examples containing it at least once.
pub fn indices_by_label<S: AsRef<str>>(
    ds: &LabeledDataset,
    labels: &[S],
) -> BTreeMap<String, Vec<usize>> {
    labels
        .iter()
        .map(|label| {
            let label = label.as_ref();
            let hits = match Sym::lookup(label) {
                Some(sym) => ds
                    .examples()
                    .iter()
                    .enumerate()
                    .filter(|(_, ex)| ex.structure.contains_edge(sym))
                    .map(|(i, _)| i)
                    .collect(),
                None => Vec::new(),
            };
            (label.to_string(), hits)
        })
        .collect()
}

/// Unit-norm word vectors.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }
}

pub fn load_embeddings<R: BufRead>(source: R) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Record {
                line: lineno,
                message: format!("bad component: {e}"),
            })?;
        if values.is_empty() {
            return Err(Error::Record {
                line: lineno,
                message: format!("word `{word}` has no vector"),
            });
        }
        if table.dim == 0 {
            table.dim = values.len();
        } else if values.len() != table.dim {
            return Err(Error::Record {
                line: lineno,
                message: format!(
                    "dimension mismatch: expected {}, found {}",
                    table.dim,
                    values.len()
                ),
            });
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Record {
                line: lineno,
                message: format!("zero vector for `{word}`"),
            });
        }
        if table.vectors.contains_key(word) {
            log::warn!("line {lineno}: duplicate word `{word}`, keeping the first vector");
            continue;
        }
        table
            .vectors
            .insert(word.to_string(), values.iter().map(|v| v / norm).collect());
    }
    Ok(table)
}
