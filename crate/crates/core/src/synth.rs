//! Planted synthetic corpora.
//!
//! Each example carries one tuple per signal label whose node word is drawn
//! from a small vocabulary; the class is the parity of the drawn word
//! positions. Distractor tuples (their own labels, their own small
//! vocabulary) are inserted at a fixed rate regardless of the class, and a
//! few unlabeled filler tuples make examples distinct.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    LabeledDataset, LabeledExample, PathStructure, Structure, StructureKind, TreeStructure,
    TupleLabel,
};
use crate::error::{config_err, Error, Result};
use crate::rng_stream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_examples: usize,
    pub kind: StructureKind,
    /// Labels whose node words decide the class.
    pub signal_labels: Vec<String>,
    pub distractor_labels: Vec<String>,
    /// Probability that each distractor label appears in an example.
    pub insertion_rate: f64,
    /// Inclusive range of unlabeled filler tuples per example.
    pub filler_min: usize,
    pub filler_max: usize,
    pub signal_vocab: usize,
    pub distractor_vocab: usize,
    pub filler_vocab: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_examples: 2000,
            kind: StructureKind::Path,
            signal_labels: vec!["a".into(), "b".into()],
            distractor_labels: vec!["q1".into(), "q2".into()],
            insertion_rate: 0.5,
            filler_min: 1,
            filler_max: 2,
            signal_vocab: 4,
            distractor_vocab: 3,
            filler_vocab: 200,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_examples < 2 {
            return config_err("need at least 2 examples");
        }
        if self.signal_labels.is_empty() {
            return config_err("need at least one signal label");
        }
        let signal: BTreeSet<&str> = self.signal_labels.iter().map(String::as_str).collect();
        let distract: BTreeSet<&str> = self.distractor_labels.iter().map(String::as_str).collect();
        if signal.len() != self.signal_labels.len()
            || distract.len() != self.distractor_labels.len()
        {
            return config_err("labels must not repeat");
        }
        if let Some(both) = signal.intersection(&distract).next() {
            return config_err(format!("label {both} is both signal and distractor"));
        }
        if !(0.0..=1.0).contains(&self.insertion_rate) {
            return config_err("insertion rate must lie in [0, 1]");
        }
        if self.filler_min > self.filler_max {
            return config_err("filler_min exceeds filler_max");
        }
        if self.signal_vocab < 1 || self.filler_vocab < 1 {
            return config_err("vocabulary sizes must be positive");
        }
        if !self.distractor_labels.is_empty() && self.distractor_vocab < 1 {
            return config_err("distractor vocabulary must be positive");
        }
        Ok(())
    }

    /// The class rule: parity of the summed signal word positions.
    pub fn class_of(&self, signal_words: &[usize]) -> u8 {
        (signal_words.iter().sum::<usize>() % 2) as u8
    }
}

/// Generates the corpus; fails when one class would be empty.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = rng_stream::rng(spec.seed, &[]);
    let width = (spec.n_examples - 1).to_string().len();
    let mut examples = Vec::with_capacity(spec.n_examples);
    for i in 0..spec.n_examples {
        let words: Vec<usize> = spec
            .signal_labels
            .iter()
            .map(|_| rng.gen_range(0..spec.signal_vocab))
            .collect();
        let label = spec.class_of(&words);
        let signal: Vec<TupleLabel> = spec
            .signal_labels
            .iter()
            .zip(&words)
            .map(|(l, &w)| TupleLabel::edge(l, &format!("s{w}")))
            .collect();
        let mut distractors = Vec::new();
        for l in &spec.distractor_labels {
            if rng.gen_bool(spec.insertion_rate) {
                let w = rng.gen_range(0..spec.distractor_vocab);
                distractors.push(TupleLabel::edge(l, &format!("d{w}")));
            }
        }
        let fillers: Vec<TupleLabel> = (0..rng.gen_range(spec.filler_min..=spec.filler_max))
            .map(|_| TupleLabel::bare(&format!("f{}", rng.gen_range(0..spec.filler_vocab))))
            .collect();
        let structure = match spec.kind {
            StructureKind::Path => Structure::Path(PathStructure::new(assemble_path(
                signal,
                distractors,
                fillers,
                &mut rng,
            ))?),
            StructureKind::Tree => {
                let root = TupleLabel::bare(&format!("f{}", rng.gen_range(0..spec.filler_vocab)));
                let mut children: Vec<TreeStructure> = signal
                    .into_iter()
                    .chain(distractors)
                    .chain(fillers)
                    .map(TreeStructure::leaf)
                    .collect();
                children.shuffle(&mut rng);
                Structure::Tree(TreeStructure::new(root, children))
            }
        };
        examples.push(LabeledExample {
            id: format!("s{i:0width$}"),
            structure,
            label,
        });
    }
    let positives = examples.iter().filter(|e| e.label == 1).count();
    if positives == 0 || positives == examples.len() {
        return Err(Error::Data("generated corpus has a single class".into()));
    }
    LabeledDataset::new(spec.kind, examples)
}

/// Fillers and signal tuples in order, fillers first, then distractors at
/// uniformly random positions.
fn assemble_path<R: Rng>(
    signal: Vec<TupleLabel>,
    distractors: Vec<TupleLabel>,
    fillers: Vec<TupleLabel>,
    rng: &mut R,
) -> Vec<TupleLabel> {
    let mut tuples = fillers;
    tuples.extend(signal);
    for d in distractors {
        let at = rng.gen_range(0..=tuples.len());
        tuples.insert(at, d);
    }
    tuples
}
