//! Subcommand implementations. Reports go to `out`; artifacts are written
//! once at the end of each command.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nskernel::corpus::{
    label_frequencies, load_dataset, load_queries, write_dataset, StructureKind,
};
use nskernel::kernels::{KernelEngine, SigmaMap};
use nskernel::klsh::{bucket_balance_report, BucketBalance, HashIndex};
use nskernel::learn::{full_loss, optimize_sigma, LearnOutcome};
use nskernel::neighbors::{evaluate, KnnClassifier, Metrics};
use nskernel::rng_stream;
use nskernel::stats::{mean, std_sample};
use nskernel::synth::generate;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::artifact::*;
use crate::error::{CliError, CliResult};

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(cmd) => synth(cmd, file, out),
        Command::Train(cmd) => train(cmd, file, out),
        Command::Index(cmd) => index(cmd, file, out),
        Command::Predict(cmd) => predict(cmd, file, out),
        Command::Eval(cmd) => eval(cmd, file, out),
        Command::Diag(cmd) => diag(cmd, file, out),
    }
}

fn report(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> CliResult<()> {
    out.write_fmt(text)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => { report($out, format_args!($($arg)*)) };
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn synth(cmd: SynthCmd, file: FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let seed = cmd.seed.or(file.seed).unwrap_or(0);
    let spec = cmd.synth.merge(file.synth).resolve(seed);
    let ds = generate(&spec)?;
    let mut buf = Vec::new();
    write_dataset(&ds, &mut buf)?;
    write_file(&cmd.out, &buf)?;
    let positives = ds.labels().iter().filter(|&&l| l == 1).count();
    say!(
        out,
        "wrote {} examples ({} positive) to {}",
        ds.len(),
        positives,
        cmd.out.display()
    )
}

fn train(cmd: TrainCmd, file: FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let seed = cmd.seed.or(file.seed).unwrap_or(0);
    let kernel = cmd.kernel.merge(file.kernel).resolve()?;
    let learn = cmd.learn.merge(file.learn).resolve(seed)?;
    let (ds, dropped) = load_train(&cmd.data, kernel.structure_kind)?;
    let embeddings = load_embedding_file(cmd.embeddings.as_deref())?;
    let (table, digest) = match embeddings {
        Some((t, d)) => (Some(t), Some(d)),
        None => (None, None),
    };
    let baseline = KernelEngine::new(kernel.clone(), SigmaMap::new(), table)?;
    say!(
        out,
        "training on {} examples ({} duplicates dropped)",
        ds.len(),
        dropped
    )?;

    let before = if cmd.full_loss {
        Some(full_loss(&baseline, &ds)?.total)
    } else {
        None
    };
    baseline.reset_evaluations();
    let outcome = optimize_sigma(&baseline, &ds, &learn)?;
    let after = match before {
        Some(_) => Some(full_loss(&baseline.with_sigma(outcome.sigma.clone()), &ds)?.total),
        None => None,
    };

    print_decisions(out, &outcome)?;
    if let (Some(b), Some(a)) = (before, after) {
        say!(
            out,
            "full 1-NN loss: {b:.6e} with all weights 1, {a:.6e} learned"
        )?;
    }
    say!(out, "kernel evaluations: {}", outcome.kernel_evaluations)?;

    if let Some(path) = &cmd.trace {
        write_file(path, trace_csv(&outcome).as_bytes())?;
    }
    let model = ModelFile {
        format: MODEL_FORMAT.into(),
        fingerprint: fingerprint(&kernel, &outcome.sigma, digest.as_deref()),
        kernel,
        sigma: outcome.sigma,
        embeddings_digest: digest,
        label_frequencies: label_frequencies(&ds),
        learn,
        decisions: outcome.decisions,
        kernel_evaluations: outcome.kernel_evaluations,
        train: TrainSummary {
            digest: dataset_digest(&ds),
            examples: ds.len(),
            dropped,
        },
        full_loss: before.zip(after).map(|(b, a)| [b, a]),
    };
    write_json(&cmd.out, &model)
}

fn print_decisions(out: &mut dyn Write, outcome: &LearnOutcome) -> CliResult<()> {
    say!(
        out,
        "{:>4}  {:<16} {:>9} {:>7} {:>13} {:>13}  {}",
        "iter",
        "label",
        "frequency",
        "pool",
        "loss(σ=0)",
        "loss(σ=1)",
        "σ"
    )?;
    for d in &outcome.decisions {
        let flag = if d.skipped { "  (absent)" } else { "" };
        say!(
            out,
            "{:>4}  {:<16} {:>9} {:>7} {:>13.6e} {:>13.6e}  {}{}",
            d.iteration,
            d.label,
            d.frequency,
            d.pool_size,
            d.loss_sums[0],
            d.loss_sums[1],
            d.value,
            flag
        )?;
    }
    Ok(())
}

fn trace_csv(outcome: &LearnOutcome) -> String {
    let mut s = String::from("iteration,parameter,label,trial,value,subset_size,loss\n");
    for t in &outcome.trace {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:e}\n",
            t.iteration, t.parameter, t.label, t.trial, t.value, t.subset_size, t.loss
        ));
    }
    s
}

fn index(cmd: IndexCmd, file: FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let seed = cmd.seed.or(file.seed).unwrap_or(0);
    let model = load_model(&cmd.model)?;
    let engine = model_engine(&model, cmd.embeddings.as_deref())?;
    let params = cmd.index.merge(file.index).resolve(seed);
    let (ds, _) = load_train(&cmd.data, model.kernel.structure_kind)?;
    let items = ds.structures();
    let index = HashIndex::build(&engine, &items, &params)?;
    let evaluations = engine.evaluations();
    let b = bucket_balance_report(&index);
    say!(
        out,
        "indexed {} items: family {}, {} bits, {} anchors, {} buckets (std {:.3}, max {})",
        b.items,
        index.family(),
        index.bits(),
        index.anchors().len(),
        b.buckets,
        b.std,
        b.max
    )?;
    say!(out, "kernel evaluations: {evaluations}")?;
    let file = IndexFile {
        format: INDEX_FORMAT.into(),
        fingerprint: model.fingerprint,
        train_digest: dataset_digest(&ds),
        train_examples: ds.len(),
        params,
        kernel_evaluations: evaluations,
        index,
    };
    write_json(&cmd.out, &file)
}

/// One line of a predictions file.
#[derive(Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub pred: u8,
    #[serde(default)]
    pub votes: [usize; 2],
    /// Training ids with their similarities, best first.
    #[serde(default)]
    pub neighbors: Vec<(String, f64)>,
}

fn check_consistent(model: &ModelFile, index: &IndexFile) -> CliResult<()> {
    if model.fingerprint != index.fingerprint {
        return Err(CliError::Mismatch(format!(
            "index was built with kernel {} but the model has {}",
            short(&index.fingerprint),
            short(&model.fingerprint)
        )));
    }
    Ok(())
}

fn check_train(index: &IndexFile, ds: &nskernel::corpus::LabeledDataset) -> CliResult<()> {
    if dataset_digest(ds) != index.train_digest {
        return Err(CliError::Mismatch(
            "training data differs from the data the index was built on".into(),
        ));
    }
    Ok(())
}

fn short(hash: &str) -> &str {
    &hash[..hash.len().min(12)]
}

fn predict(cmd: PredictCmd, file: FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let seed = cmd.seed.or(file.seed).unwrap_or(0);
    let model = load_model(&cmd.model)?;
    let index = load_index(&cmd.index)?;
    check_consistent(&model, &index)?;
    let engine = model_engine(&model, cmd.embeddings.as_deref())?;
    let kind = model.kernel.structure_kind;
    let (train, _) = load_train(&cmd.train, kind)?;
    check_train(&index, &train)?;
    let params = cmd.knn.merge(file.knn).resolve();

    let qfile = fs::File::open(&cmd.queries).map_err(|e| CliError::io(&cmd.queries, e))?;
    let queries =
        load_queries(BufReader::new(qfile), kind).map_err(|e| located(&cmd.queries, e))?;

    let mask = match cmd.subsample {
        None => None,
        Some(f) if f > 0.0 && f <= 1.0 => {
            let n = train.len();
            let keep = ((f * n as f64).round() as usize).max(1);
            let mut mask = vec![false; n];
            for i in sample(&mut rng_stream::rng(seed, &[5]), n, keep) {
                mask[i] = true;
            }
            Some(mask)
        }
        Some(f) => {
            return Err(CliError::Usage(format!(
                "subsample must lie in (0, 1], got {f}"
            )))
        }
    };

    let classifier = KnnClassifier::new(&engine, &train, Some(&index.index), params)?;
    engine.reset_evaluations();
    let results: Vec<_> = queries
        .par_iter()
        .map(|q| classifier.classify_among(&q.structure, mask.as_deref()))
        .collect();
    let evaluations = engine.evaluations();

    let mut buf = Vec::new();
    let ids = train.examples();
    for (q, c) in queries.iter().zip(results) {
        let line = Prediction {
            id: q.id.clone(),
            pred: c.label,
            votes: c.votes,
            neighbors: c
                .neighbors
                .iter()
                .map(|&(j, s)| (ids[j].id.clone(), s))
                .collect(),
        };
        serde_json::to_writer(&mut buf, &line).map_err(|e| CliError::json(&cmd.out, e))?;
        buf.push(b'\n');
    }
    write_file(&cmd.out, &buf)?;
    let per_query = if queries.is_empty() {
        0.0
    } else {
        evaluations as f64 / queries.len() as f64
    };
    say!(
        out,
        "classified {} queries; kernel evaluations: {} ({:.1} per query)",
        queries.len(),
        evaluations,
        per_query
    )
}

fn read_predictions(path: &Path) -> CliResult<Vec<Prediction>> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut preds = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        if p.pred > 1 {
            return Err(CliError::Data(format!(
                "{}: line {}: prediction must be 0 or 1",
                path.display(),
                i + 1
            )));
        }
        preds.push(p);
    }
    Ok(preds)
}

/// Predictions in the order of `ids`, which must be exactly the gold ids.
fn align(
    path: &Path,
    preds: &[Prediction],
    gold: &HashMap<&str, u8>,
    ids: &[&str],
) -> CliResult<Vec<u8>> {
    let mut by_id: HashMap<&str, u8> = HashMap::with_capacity(preds.len());
    for p in preds {
        if !gold.contains_key(p.id.as_str()) {
            return Err(CliError::Data(format!(
                "{}: id `{}` not in gold",
                path.display(),
                p.id
            )));
        }
        if by_id.insert(&p.id, p.pred).is_some() {
            return Err(CliError::Data(format!(
                "{}: id `{}` predicted twice",
                path.display(),
                p.id
            )));
        }
    }
    if by_id.len() != gold.len() {
        return Err(CliError::Data(format!(
            "{}: {} of {} gold ids have no prediction",
            path.display(),
            gold.len() - by_id.len(),
            gold.len()
        )));
    }
    Ok(ids.iter().map(|id| by_id[id]).collect())
}

fn eval(cmd: EvalCmd, file: FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let kind = cmd.kind.or(file.kernel.kind).unwrap_or(StructureKind::Path);
    let gf = fs::File::open(&cmd.gold).map_err(|e| CliError::io(&cmd.gold, e))?;
    let gold_ds = load_dataset(BufReader::new(gf), kind).map_err(|e| located(&cmd.gold, e))?;
    let gold: HashMap<&str, u8> = gold_ds
        .examples()
        .iter()
        .map(|e| (e.id.as_str(), e.label))
        .collect();
    let ids: Vec<&str> = gold_ds.examples().iter().map(|e| e.id.as_str()).collect();
    let gold_labels = gold_ds.labels();

    let mut rows = Vec::new();
    for path in &cmd.predictions {
        let preds = read_predictions(path)?;
        let aligned = align(path, &preds, &gold, &ids)?;
        rows.push((
            path.display().to_string(),
            evaluate(&aligned, &gold_labels)?,
        ));
    }
    print_metrics(out, &rows)
}

fn print_metrics(out: &mut dyn Write, rows: &[(String, Metrics)]) -> CliResult<()> {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(4).max(4);
    say!(
        out,
        "{:<width$} {:>7} {:>7} {:>7} {:>6} {:>6} {:>6} {:>6}",
        "file",
        "P",
        "R",
        "F1",
        "TP",
        "FP",
        "FN",
        "TN"
    )?;
    for (name, m) in rows {
        say!(
            out,
            "{:<width$} {:>7.4} {:>7.4} {:>7.4} {:>6} {:>6} {:>6} {:>6}",
            name,
            m.precision,
            m.recall,
            m.f1,
            m.tp,
            m.fp,
            m.fn_,
            m.tn
        )?;
    }
    if rows.len() > 1 {
        let col = |f: fn(&Metrics) -> f64| -> (f64, f64) {
            let xs: Vec<f64> = rows.iter().map(|r| f(&r.1)).collect();
            (mean(&xs), std_sample(&xs).unwrap_or(0.0))
        };
        let (p, ps) = col(|m| m.precision);
        let (r, rs) = col(|m| m.recall);
        let (f, fs) = col(|m| m.f1);
        say!(
            out,
            "mean ± std over {} runs: P {p:.4} ± {ps:.4}  R {r:.4} ± {rs:.4}  F1 {f:.4} ± {fs:.4}",
            rows.len()
        )?;
    }
    Ok(())
}

fn diag(cmd: DiagCmd, file: FileConfig, out: &mut dyn Write) -> CliResult<()> {
    let seed = cmd.seed.or(file.seed).unwrap_or(0);
    let indexes: Vec<IndexFile> = cmd
        .indexes
        .iter()
        .map(|p| load_index(p))
        .collect::<CliResult<_>>()?;
    let names: Vec<String> = cmd
        .indexes
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let width = names.iter().map(String::len).max().unwrap_or(5).max(5);
    let balances: Vec<BucketBalance> = indexes
        .iter()
        .map(|f| bucket_balance_report(&f.index))
        .collect();

    say!(
        out,
        "{:<width$} {:>6} {:>5} {:>7} {:>7} {:>8} {:>9} {:>9} {:>6}",
        "index",
        "family",
        "bits",
        "anchors",
        "items",
        "buckets",
        "mean",
        "std",
        "max"
    )?;
    for ((name, f), b) in names.iter().zip(&indexes).zip(&balances) {
        say!(
            out,
            "{:<width$} {:>6} {:>5} {:>7} {:>7} {:>8} {:>9.3} {:>9.3} {:>6}",
            name,
            f.index.family().to_string(),
            f.index.bits(),
            f.index.anchors().len(),
            b.items,
            b.buckets,
            b.mean,
            b.std,
            b.max
        )?;
    }

    if indexes.len() > 1 {
        say!(out, "\noccupancy std comparison")?;
        for i in 0..indexes.len() {
            for j in i + 1..indexes.len() {
                let (a, b) = (&balances[i], &balances[j]);
                let verdict = if a.std <= b.std { "<=" } else { ">" };
                say!(
                    out,
                    "  {} ({}) {:.3} {} {} ({}) {:.3}",
                    names[i],
                    indexes[i].index.family(),
                    a.std,
                    verdict,
                    names[j],
                    indexes[j].index.family(),
                    b.std
                )?;
            }
        }
    }

    let (Some(model_path), Some(train_path)) = (&cmd.model, &cmd.train) else {
        return Ok(());
    };
    let model = load_model(model_path)?;
    let engine = model_engine(&model, cmd.embeddings.as_deref())?;
    let (train, _) = load_train(train_path, model.kernel.structure_kind)?;
    let items = train.structures();
    for f in &indexes {
        check_consistent(&model, f)?;
        check_train(f, &train)?;
    }
    let n_queries = cmd.queries.min(items.len());
    let queries = sample(
        &mut rng_stream::rng(seed, &[0xd1a6]),
        items.len(),
        n_queries,
    )
    .into_vec();
    if queries.is_empty() {
        return Ok(());
    }

    say!(out, "\nprobe cost over {} training queries", queries.len())?;
    say!(
        out,
        "{:<width$} {:>6} {:>14} {:>17}",
        "index",
        "radius",
        "candidates",
        "kernels/query"
    )?;
    for (name, f) in names.iter().zip(&indexes) {
        let index = &f.index;
        let codes: Vec<_> = queries.iter().map(|&q| index.code(q)).collect();
        for r in 0..=cmd.radius.min(index.bits()) {
            engine.reset_evaluations();
            let mut total = 0usize;
            for (&q, code) in queries.iter().zip(&codes) {
                let x = items[q];
                index.hash_query(&engine, x, &items);
                let cands = index.probe(*code, usize::MAX, r);
                total += cands.len();
                for &j in &cands {
                    engine.structure_kernel(x, items[j]);
                }
            }
            let nq = queries.len() as f64;
            let per = engine.evaluations() as f64 / nq;
            say!(
                out,
                "{:<width$} {:>6} {:>14.2} {:>17.2}",
                name,
                r,
                total as f64 / nq,
                per
            )?;
        }
        // Measured with the counter: hash the query, then score up to the budget.
        engine.reset_evaluations();
        for (&q, code) in queries.iter().zip(&codes) {
            let x = items[q];
            index.hash_query(&engine, x, &items);
            let cands = index.probe(*code, cmd.budget, index.bits());
            for &j in cands.iter().take(cmd.budget) {
                engine.structure_kernel(x, items[j]);
            }
        }
        let per = engine.evaluations() as f64 / queries.len() as f64;
        say!(
            out,
            "{:<width$} budget {}: {:.2} kernel evaluations per query",
            name,
            cmd.budget,
            per
        )?;
    }
    Ok(())
}
