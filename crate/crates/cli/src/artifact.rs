//! Persisted model and index files.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use nskernel::corpus::{
    dedup_dataset, load_dataset, load_embeddings, write_dataset, LabeledDataset, StructureKind,
};
use nskernel::kernels::{KernelConfig, KernelEngine, SigmaMap, TupleKernelKind};
use nskernel::klsh::{HashIndex, IndexParams};
use nskernel::learn::{LearnConfig, ParameterDecision};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MODEL_FORMAT: &str = "nskernel-model/1";
pub const INDEX_FORMAT: &str = "nskernel-index/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical JSON-lines rendering of a dataset.
pub fn dataset_digest(ds: &LabeledDataset) -> String {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf).expect("writing to memory");
    sha256_hex(&buf)
}

/// Identifies everything that changes kernel values.
pub fn fingerprint(kernel: &KernelConfig, sigma: &SigmaMap, embeddings: Option<&str>) -> String {
    #[derive(Serialize)]
    struct Basis<'a> {
        kernel: &'a KernelConfig,
        sigma: &'a SigmaMap,
        embeddings: Option<&'a str>,
    }
    let basis = Basis {
        kernel,
        sigma,
        embeddings,
    };
    sha256_hex(&serde_json::to_vec(&basis).expect("serializable"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub digest: String,
    pub examples: usize,
    /// Duplicates removed before learning.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub fingerprint: String,
    pub kernel: KernelConfig,
    pub sigma: SigmaMap,
    pub embeddings_digest: Option<String>,
    pub label_frequencies: BTreeMap<String, usize>,
    pub learn: LearnConfig,
    pub decisions: Vec<ParameterDecision>,
    pub kernel_evaluations: u64,
    pub train: TrainSummary,
    /// Exact 1-NN loss with all weights 1 and with the learned weights.
    pub full_loss: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexFile {
    pub format: String,
    /// Fingerprint of the model whose kernel built the index.
    pub fingerprint: String,
    pub train_digest: String,
    pub train_examples: usize,
    pub params: IndexParams,
    pub kernel_evaluations: u64,
    pub index: HashIndex,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> CliResult<ModelFile> {
    let model: ModelFile = read_json(path)?;
    if model.format != MODEL_FORMAT {
        return Err(CliError::Data(format!(
            "{}: unsupported model format `{}`",
            path.display(),
            model.format
        )));
    }
    let expected = fingerprint(
        &model.kernel,
        &model.sigma,
        model.embeddings_digest.as_deref(),
    );
    if expected != model.fingerprint {
        return Err(CliError::Mismatch(format!(
            "{}: fingerprint does not match its contents",
            path.display()
        )));
    }
    Ok(model)
}

pub fn load_index(path: &Path) -> CliResult<IndexFile> {
    let index: IndexFile = read_json(path)?;
    if index.format != INDEX_FORMAT {
        return Err(CliError::Data(format!(
            "{}: unsupported index format `{}`",
            path.display(),
            index.format
        )));
    }
    Ok(index)
}

/// Loads a dataset and drops structural duplicates.
pub fn load_train(path: &Path, kind: StructureKind) -> CliResult<(LabeledDataset, usize)> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let ds = load_dataset(BufReader::new(file), kind).map_err(|e| located(path, e))?;
    if ds.is_empty() {
        return Err(CliError::Data(format!("{}: no examples", path.display())));
    }
    let d = dedup_dataset(&ds);
    if d.dropped > 0 {
        log::info!(
            "{}: dropped {} duplicate structures",
            path.display(),
            d.dropped
        );
    }
    Ok((d.dataset, d.dropped))
}

/// Prefixes data errors with the file they came from.
pub fn located(path: &Path, e: nskernel::Error) -> CliError {
    match e {
        nskernel::Error::Config(_) | nskernel::Error::Mismatch(_) => CliError::Core(e),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

/// Reads the word-vector file, returning the table and its digest.
pub fn load_embedding_file(
    path: Option<&Path>,
) -> CliResult<Option<(Arc<nskernel::corpus::EmbeddingTable>, String)>> {
    let Some(path) = path else { return Ok(None) };
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let table = load_embeddings(bytes.as_slice()).map_err(|e| located(path, e))?;
    Ok(Some((Arc::new(table), sha256_hex(&bytes))))
}

/// Rebuilds the kernel a model was trained with.
pub fn model_engine(model: &ModelFile, embeddings: Option<&Path>) -> CliResult<KernelEngine> {
    let loaded = load_embedding_file(embeddings)?;
    match (&model.embeddings_digest, &loaded) {
        (Some(want), Some((_, got))) if want != got => {
            return Err(CliError::Mismatch(
                "embedding file differs from the one the model was trained with".into(),
            ))
        }
        (Some(_), None) if model.kernel.tuple_kernel == TupleKernelKind::Wordvec => {
            return Err(CliError::Usage("this model needs --embeddings".into()))
        }
        _ => {}
    }
    let table = loaded.map(|(t, _)| t);
    Ok(KernelEngine::new(
        model.kernel.clone(),
        model.sigma.clone(),
        table,
    )?)
}
