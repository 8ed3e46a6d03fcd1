//! Command-line flags and the optional JSON config file.
//!
//! Every tunable is an `Option` so that a flag, when given, overrides the
//! config file, which in turn overrides the built-in default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nskernel::corpus::StructureKind;
use nskernel::kernels::{KernelConfig, TupleKernelKind};
use nskernel::klsh::{HashFamily, IndexParams};
use nskernel::learn::{GraphMode, LearnConfig, Sampler};
use nskernel::neighbors::{ClassifierParams, ProbeParams};
use nskernel::synth::SyntheticSpec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Anchor count used at inference time.
pub const DEFAULT_INFERENCE_ANCHORS: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "nskernel",
    version,
    about = "Nonstationary convolution kernels with hashed k-NN"
)]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NSKERNEL_WORKERS")]
    pub workers: Option<usize>,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted synthetic dataset.
    Synth(SynthCmd),
    /// Learn the edge-label weights.
    Train(TrainCmd),
    /// Hash a training set for inference.
    Index(IndexCmd),
    /// Classify queries with the k-NN vote.
    Predict(PredictCmd),
    /// Score prediction files against gold labels.
    Eval(EvalCmd),
    /// Bucket statistics and probe costs of indexes.
    Diag(DiagCmd),
}

/// Settings read from `--config`. Sections mirror the flag groups.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub kernel: KernelOpts,
    pub learn: LearnOpts,
    pub index: IndexOpts,
    pub knn: KnnOpts,
    pub synth: SynthOpts,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

macro_rules! mergeable {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl $name {
            /// Fills fields left unset on the command line from `file`.
            pub fn merge(self, file: $name) -> $name {
                $name { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelOpts {
    /// Structure kind: path or tree.
    #[arg(long)]
    pub kind: Option<StructureKind>,
    /// Tuple kernel: indicator or wordvec.
    #[arg(long)]
    pub tuple_kernel: Option<TupleKernelKind>,
    /// Subsequence decay in (0, 1).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Word-vector sparsity threshold in [0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Normalize K(a, b) by sqrt(K(a, a) K(b, b)).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
}
mergeable!(KernelOpts {
    kind,
    tuple_kernel,
    lambda,
    gamma,
    normalize
});

impl KernelOpts {
    pub fn resolve(&self) -> CliResult<KernelConfig> {
        let d = KernelConfig::default();
        let cfg = KernelConfig {
            structure_kind: self.kind.unwrap_or(d.structure_kind),
            tuple_kernel: self.tuple_kernel.unwrap_or(d.tuple_kernel),
            lambda: self.lambda.unwrap_or(d.lambda),
            gamma: self.gamma.unwrap_or(d.gamma),
            normalize: self.normalize.unwrap_or(d.normalize),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnOpts {
    /// Random seed points per trial.
    #[arg(long)]
    pub beta: Option<usize>,
    /// Trials per parameter.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Degree of the global k-NN graph.
    #[arg(long)]
    pub k_global: Option<usize>,
    /// Add the best neighbor of every sampled neighbor.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub second_hop: Option<bool>,
    /// Fraction of edge labels, most frequent first, to learn.
    #[arg(long)]
    pub label_fraction: Option<f64>,
    /// Trial subset sampler: neighborhood or pure-random.
    #[arg(long)]
    pub sampler: Option<Sampler>,
    /// Passes over the parameters.
    #[arg(long)]
    pub refresh_iterations: Option<usize>,
    /// Global graph construction: hashed or exact.
    #[arg(long)]
    pub global_graph: Option<GraphMode>,
    /// Hash family of the global graph.
    #[arg(long)]
    pub global_family: Option<HashFamily>,
    /// Code length of the global graph.
    #[arg(long)]
    pub global_bits: Option<usize>,
    /// Anchor count of the global graph (default ceil(sqrt(N))).
    #[arg(long)]
    pub global_anchors: Option<usize>,
    /// 1-NN graphs inside trial subsets: exact or hashed.
    #[arg(long)]
    pub subset_graph: Option<GraphMode>,
    /// Probe until this many candidates are found.
    #[arg(long)]
    pub global_min_candidates: Option<usize>,
    /// Largest Hamming radius probed.
    #[arg(long)]
    pub global_max_radius: Option<usize>,
}
mergeable!(LearnOpts {
    beta,
    trials,
    k_global,
    second_hop,
    label_fraction,
    sampler,
    refresh_iterations,
    global_graph,
    global_family,
    global_bits,
    global_anchors,
    subset_graph,
    global_min_candidates,
    global_max_radius,
});

impl LearnOpts {
    pub fn resolve(&self, seed: u64) -> CliResult<LearnConfig> {
        let d = LearnConfig::default();
        let cfg = LearnConfig {
            beta: self.beta.unwrap_or(d.beta),
            trials: self.trials.unwrap_or(d.trials),
            k_global: self.k_global.unwrap_or(d.k_global),
            include_second_hop: self.second_hop.unwrap_or(d.include_second_hop),
            label_fraction: self.label_fraction.unwrap_or(d.label_fraction),
            sampler: self.sampler.unwrap_or(d.sampler),
            refresh_iterations: self.refresh_iterations.unwrap_or(d.refresh_iterations),
            seed,
            global_graph: self.global_graph.unwrap_or(d.global_graph),
            family: self.global_family.unwrap_or(d.family),
            bits: self.global_bits.or(d.bits),
            anchors: self.global_anchors.or(d.anchors),
            probe: ProbeParams {
                min_candidates: self.global_min_candidates.unwrap_or(d.probe.min_candidates),
                max_radius: self.global_max_radius.unwrap_or(d.probe.max_radius),
            },
            subset_graph: self.subset_graph.unwrap_or(d.subset_graph),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexOpts {
    /// Hash family: rknn or kg.
    #[arg(long)]
    pub family: Option<HashFamily>,
    /// Code length (default max(4, floor(log2 N) - 3)).
    #[arg(long)]
    pub bits: Option<usize>,
    /// Anchor count.
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Anchors per subset for rknn bits (default ceil(sqrt(M))).
    #[arg(long)]
    pub alpha_subset: Option<usize>,
    /// Anchors per hyperplane for kg bits.
    #[arg(long)]
    pub kg_subset: Option<usize>,
}
mergeable!(IndexOpts {
    family,
    bits,
    anchors,
    alpha_subset,
    kg_subset
});

impl IndexOpts {
    pub fn resolve(&self, seed: u64) -> IndexParams {
        IndexParams {
            family: self.family.unwrap_or(HashFamily::Rknn),
            bits: self.bits,
            anchors: Some(self.anchors.unwrap_or(DEFAULT_INFERENCE_ANCHORS)),
            alpha_subset: self.alpha_subset,
            kg_subset: self.kg_subset,
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnOpts {
    /// Neighbors per vote.
    #[arg(long)]
    pub k: Option<usize>,
    /// Probe until this many candidates are found.
    #[arg(long)]
    pub min_candidates: Option<usize>,
    /// Largest Hamming radius probed before widening for sparse buckets.
    #[arg(long)]
    pub max_radius: Option<usize>,
    /// Label for fully tied votes.
    #[arg(long)]
    pub tie_label: Option<u8>,
}
mergeable!(KnnOpts {
    k,
    min_candidates,
    max_radius,
    tie_label
});

impl KnnOpts {
    pub fn resolve(&self) -> ClassifierParams {
        let d = ClassifierParams::default();
        ClassifierParams {
            k: self.k.unwrap_or(d.k),
            probe: ProbeParams {
                min_candidates: self.min_candidates.unwrap_or(d.probe.min_candidates),
                max_radius: self.max_radius.unwrap_or(d.probe.max_radius),
            },
            tie_label: self.tie_label.unwrap_or(d.tie_label),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthOpts {
    /// Number of examples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Structure kind: path or tree.
    #[arg(long = "kind")]
    pub kind: Option<StructureKind>,
    /// Comma-separated signal labels.
    #[arg(long, value_delimiter = ',')]
    pub signal: Option<Vec<String>>,
    /// Comma-separated distractor labels.
    #[arg(long, value_delimiter = ',')]
    pub distractors: Option<Vec<String>>,
    /// Probability of each distractor label per example.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub filler_min: Option<usize>,
    #[arg(long)]
    pub filler_max: Option<usize>,
    #[arg(long)]
    pub signal_vocab: Option<usize>,
    #[arg(long)]
    pub distractor_vocab: Option<usize>,
    #[arg(long)]
    pub filler_vocab: Option<usize>,
}
mergeable!(SynthOpts {
    n,
    kind,
    signal,
    distractors,
    rate,
    filler_min,
    filler_max,
    signal_vocab,
    distractor_vocab,
    filler_vocab,
});

impl SynthOpts {
    pub fn resolve(self, seed: u64) -> SyntheticSpec {
        let d = SyntheticSpec::default();
        SyntheticSpec {
            n_examples: self.n.unwrap_or(d.n_examples),
            kind: self.kind.unwrap_or(d.kind),
            signal_labels: self.signal.unwrap_or(d.signal_labels),
            distractor_labels: self.distractors.unwrap_or(d.distractor_labels),
            insertion_rate: self.rate.unwrap_or(d.insertion_rate),
            filler_min: self.filler_min.unwrap_or(d.filler_min),
            filler_max: self.filler_max.unwrap_or(d.filler_max),
            signal_vocab: self.signal_vocab.unwrap_or(d.signal_vocab),
            distractor_vocab: self.distractor_vocab.unwrap_or(d.distractor_vocab),
            filler_vocab: self.filler_vocab.unwrap_or(d.filler_vocab),
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    /// Output dataset (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub synth: SynthOpts,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    /// Training dataset (JSON lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    /// Word vectors for the wordvec tuple kernel.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Also write the per-trial losses as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Report the exact 1-NN loss before and after learning (quadratic cost).
    #[arg(long)]
    pub full_loss: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub learn: LearnOpts,
}

#[derive(Debug, Args)]
pub struct IndexCmd {
    #[arg(long)]
    pub model: PathBuf,
    /// Training dataset the index covers.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub index: IndexOpts,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Training dataset the index was built from.
    #[arg(long)]
    pub train: PathBuf,
    /// Structures to classify (JSON lines, labels optional).
    #[arg(long)]
    pub queries: PathBuf,
    /// Output predictions (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Keep only this fraction of the training set, drawn uniformly.
    #[arg(long)]
    pub subsample: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub knn: KnnOpts,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Dataset with the gold labels.
    #[arg(long)]
    pub gold: PathBuf,
    /// One or more prediction files.
    #[arg(long = "pred", required = true, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// Structure kind of the gold file.
    #[arg(long)]
    pub kind: Option<StructureKind>,
}

#[derive(Debug, Args)]
pub struct DiagCmd {
    /// One or more index files.
    #[arg(long = "index", required = true, num_args = 1..)]
    pub indexes: Vec<PathBuf>,
    /// Model and training data enable per-query kernel counts.
    #[arg(long, requires = "train")]
    pub model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Training items probed as queries.
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    /// Candidate budget per query.
    #[arg(long, default_value_t = 16)]
    pub budget: usize,
    /// Largest radius in the candidates-by-radius table.
    #[arg(long, default_value_t = 3)]
    pub radius: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}
