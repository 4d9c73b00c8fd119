//! One function per subcommand.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use se3m::corpus::{
    corpus_stats, holdout, kfold_split, leave_one_project_out, load_labeled, load_unlabeled, Cleaner, LabeledCorpus,
    LabeledFormat, UnlabeledCorpus,
};
use se3m::embed_ctx::{
    build_wordpiece_vocab, create_pretraining_data, finetune_lm, pretrain_with, PretrainConfig, TransformerModel,
};
use se3m::embed_static::{finetune_static as finetune_words, train_static, StaticEmbeddingModel};
use se3m::estimator::{
    build_estimator, represent_corpus, run_experiment, train_estimator, ContextualSource, EstimatorModel,
    ExperimentId, ExperimentOptions, InputMode, OutputKind, RepresentationSource, Sample, SourceKind, StaticSource,
};
use se3m::eval::{emit_tables, EvalReport, TableMode};
use se3m::numkernel::sha256_hex;

use crate::config::PipelineConfig;

const EMBEDDING_PATH_KEY: &str = "embedding_path";

fn static_path(config: &PipelineConfig, fine_tuned: bool) -> PathBuf {
    config
        .models()
        .join(if fine_tuned { "static_finetuned.ckpt" } else { "static_base.ckpt" })
}

fn ctx_path(config: &PipelineConfig, fine_tuned: bool) -> PathBuf {
    config
        .models()
        .join(if fine_tuned { "ctx_finetuned.ckpt" } else { "ctx_base.ckpt" })
}

fn estimator_path(config: &PipelineConfig) -> PathBuf {
    config.models().join(format!("estimator_{}.ckpt", config.experiment))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn load_corpus(config: &PipelineConfig) -> Result<LabeledCorpus> {
    let path = config.labeled_path();
    let ingested = load_labeled(&path, LabeledFormat::from_path(&path))
        .with_context(|| format!("loading labeled corpus {}", path.display()))?;
    if ingested.corpus.is_empty() {
        bail!("{} holds no usable records", path.display());
    }
    Ok(ingested.corpus)
}

fn pretraining_corpus(config: &PipelineConfig) -> Result<UnlabeledCorpus> {
    match config.pretrain_path() {
        Some(path) => load_unlabeled(&path).with_context(|| format!("loading {}", path.display())),
        None => Ok(UnlabeledCorpus::from(&load_corpus(config)?)),
    }
}

fn finetuning_corpus(config: &PipelineConfig) -> Result<UnlabeledCorpus> {
    let path = config.finetune_path();
    load_unlabeled(&path).with_context(|| format!("loading fine-tuning corpus {}", path.display()))
}

/// The embedding model an experiment needs, and where it was loaded from.
pub fn load_source(config: &PipelineConfig, experiment: ExperimentId) -> Result<(Box<dyn RepresentationSource>, PathBuf)> {
    let (kind, fine_tuned) = experiment.required_source();
    let missing = |path: &Path| {
        format!(
            "{experiment} needs {}; run the matching pretrain or finetune command first",
            path.display()
        )
    };
    Ok(match kind {
        SourceKind::Static => {
            let path = static_path(config, fine_tuned);
            let model = StaticEmbeddingModel::load(&path).with_context(|| missing(&path))?;
            (Box::new(StaticSource::new(model, fine_tuned)?), path)
        }
        SourceKind::Contextual => {
            let path = ctx_path(config, fine_tuned);
            let model = TransformerModel::load(&path).with_context(|| missing(&path))?;
            (Box::new(ContextualSource::new(model, fine_tuned)?), path)
        }
    })
}

pub fn ingest(config: &PipelineConfig) -> Result<()> {
    let path = config.labeled_path();
    let ingested = load_labeled(&path, LabeledFormat::from_path(&path))
        .with_context(|| format!("loading labeled corpus {}", path.display()))?;
    let dir = config.reports().join("ingest");
    create_dir(&dir)?;
    ingested.corpus.write_jsonl(&dir.join("corpus.jsonl"))?;
    let summary = ingested.summary();
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "ingested {} records from {} projects, rejected {}, degenerate {} -> {}",
        summary.records,
        summary.projects,
        summary.rejected.len(),
        summary.degenerate.len(),
        dir.display()
    );
    Ok(())
}

pub fn stats(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let stats = corpus_stats(&corpus, &config.cleaner()?, 10.0)?;
    let dir = config.reports().join("stats");
    stats.write(&dir)?;
    println!(
        "{} records, {:.2} words per text, mean effort {:.2} -> {}",
        stats.records,
        stats.words_per_text.mean,
        stats.effort.mean,
        dir.display()
    );
    Ok(())
}

pub fn pretrain_static(config: &PipelineConfig) -> Result<()> {
    let corpus = pretraining_corpus(config)?;
    let model = train_static(&corpus, &config.cleaner()?, &config.static_train)?;
    let path = static_path(config, false);
    create_dir(&config.models())?;
    model.save(&path)?;
    println!(
        "trained {}-dimensional word vectors for {} words -> {}",
        model.dimension(),
        model.vocabulary().len(),
        path.display()
    );
    Ok(())
}

pub fn finetune_static(config: &PipelineConfig) -> Result<()> {
    let base_path = static_path(config, false);
    let base = StaticEmbeddingModel::load(&base_path)
        .with_context(|| format!("loading {}; run pretrain-static first", base_path.display()))?;
    let corpus = finetuning_corpus(config)?;
    let model = finetune_words(&base, &corpus, &config.cleaner()?, config.static_finetune_epochs)?;
    let path = static_path(config, true);
    model.save(&path)?;
    println!(
        "fine-tuned word vectors on {} documents, vocabulary {} -> {} words -> {}",
        corpus.len(),
        base.vocabulary().len(),
        model.vocabulary().len(),
        path.display()
    );
    Ok(())
}

fn print_epoch(epoch: usize, loss: &se3m::embed_ctx::EpochLoss) {
    eprintln!("epoch {}: mlm {:.4} nsp {:.4}", epoch + 1, loss.mlm, loss.nsp);
}

pub fn pretrain_ctx(config: &PipelineConfig) -> Result<()> {
    let corpus = pretraining_corpus(config)?;
    let vocab = build_wordpiece_vocab(&corpus, config.transformer.vocab_size)?;
    let mut model = TransformerModel::new(config.transformer.clone(), vocab)?;
    let data = se3m::embed_ctx::PretrainDataConfig {
        max_seq_len: config.pretrain_data.max_seq_len.min(config.transformer.max_seq_len),
        ..config.pretrain_data.clone()
    };
    let examples = create_pretraining_data(&corpus, model.vocab(), &data)?;
    let history = pretrain_with(&mut model, &examples, &config.pretrain, print_epoch)?;
    let path = ctx_path(config, false);
    create_dir(&config.models())?;
    model.save(&path)?;
    let last = history.epochs.last().unwrap_or(&history.initial);
    println!(
        "pretrained encoder on {} examples, mlm loss {:.4} -> {:.4} -> {}",
        examples.len(),
        history.initial.mlm,
        last.mlm,
        path.display()
    );
    Ok(())
}

pub fn finetune_ctx(config: &PipelineConfig) -> Result<()> {
    let base_path = ctx_path(config, false);
    let mut model = TransformerModel::load(&base_path)
        .with_context(|| format!("loading {}; run pretrain-ctx first", base_path.display()))?;
    let corpus = finetuning_corpus(config)?;
    let train = PretrainConfig {
        epochs: config.ctx_finetune_epochs,
        ..config.pretrain.clone()
    };
    let history = finetune_lm(&mut model, &corpus, &config.pretrain_data, &train)?;
    let path = ctx_path(config, true);
    model.save(&path)?;
    let last = history.epochs.last().unwrap_or(&history.initial);
    println!(
        "fine-tuned encoder on {} documents, mlm loss {:.4} -> {:.4} -> {}",
        corpus.len(),
        history.initial.mlm,
        last.mlm,
        path.display()
    );
    Ok(())
}

/// Writes `id,project,effort,degenerate,d0..` with one pooled vector per
/// record and returns the row count.
fn write_embeddings(
    path: &Path,
    corpus: &LabeledCorpus,
    cleaner: &Cleaner,
    source: &dyn RepresentationSource,
) -> Result<usize> {
    let head = se3m::estimator::HeadConfig {
        input: InputMode::Pooled,
        ..Default::default()
    };
    let reps = represent_corpus(corpus, cleaner, source, &head)?;
    let mut header = vec!["id".to_string(), "project".into(), "effort".into(), "degenerate".into()];
    header.extend((0..source.dimension()).map(|i| format!("d{i}")));
    let mut lines = vec![header.join(",")];
    for (record, (rep, degenerate)) in corpus.records().iter().zip(&reps) {
        let se3m::estimator::Representation::Pooled(v) = rep else {
            bail!("expected a pooled representation");
        };
        let mut row = vec![
            csv_field(&record.id),
            csv_field(&record.project_id),
            record.effort.to_string(),
            degenerate.to_string(),
        ];
        row.extend(v.iter().map(f64::to_string));
        lines.push(row.join(","));
    }
    std::fs::write(path, lines.join("\n") + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(reps.len())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn embed(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let (source, _) = load_source(config, config.experiment)?;
    let dir = config.reports().join("embeddings");
    create_dir(&dir)?;
    let path = dir.join(format!("{}.csv", config.experiment));
    let rows = write_embeddings(&path, &corpus, &config.cleaner()?, source.as_ref())?;
    println!("exported {rows} sentence embeddings ({}) -> {}", source.descriptor(), path.display());
    Ok(())
}

pub fn train(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let cleaner = config.cleaner()?;
    let (source, source_path) = load_source(config, config.experiment)?;
    let head = se3m::estimator::HeadConfig {
        output: config.experiment.output(),
        ..config.head.clone()
    };
    let reps = represent_corpus(&corpus, &cleaner, source.as_ref(), &head)?;
    let usable: Vec<usize> = (0..reps.len()).filter(|&i| !reps[i].1).collect();
    let (train_idx, val_idx) = holdout(&usable, config.validation_fraction, config.seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        bail!("too few usable records to hold out a validation set");
    }
    let records = corpus.records();
    let samples =
        |idx: &[usize]| -> Vec<Sample<'_>> { idx.iter().map(|&i| (&reps[i].0, records[i].effort)).collect() };
    let mut model = build_estimator(&head, source.dimension(), source.descriptor())?;
    let history = train_estimator(&mut model, &samples(&train_idx), &samples(&val_idx))?;
    model.metadata.insert("experiment".into(), config.experiment.to_string());
    model.metadata.insert(EMBEDDING_PATH_KEY.into(), source_path.display().to_string());
    model.metadata.insert("split_seed".into(), config.seed.to_string());
    model.metadata.insert("history".into(), serde_json::to_string(&history)?);
    let path = estimator_path(config);
    create_dir(&config.models())?;
    model.save(&path)?;
    println!(
        "trained {} head on {} records, best validation MAE {:.2} at epoch {} -> {}",
        config.experiment,
        train_idx.len(),
        history.best_val_mae,
        history.best_epoch + 1,
        path.display()
    );
    Ok(())
}

fn evaluation_name(config: &PipelineConfig) -> String {
    if config.by_project {
        format!("{}-by-project", config.experiment)
    } else {
        format!("{}-kfold{}-seed{}", config.experiment, config.kfold, config.seed)
    }
}

pub fn evaluate(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let cleaner = config.cleaner()?;
    let (source, _) = load_source(config, config.experiment)?;
    let plan = if config.by_project {
        leave_one_project_out(&corpus)?
    } else {
        kfold_split(&corpus, config.kfold, config.seed)?
    };
    let name = evaluation_name(config);
    let dir = config.reports().join("evaluations").join(&name);
    let options = ExperimentOptions {
        head: config.head.clone(),
        validation_fraction: config.validation_fraction,
        checkpoint_dir: config
            .save_fold_models
            .then(|| config.models().join("folds").join(&name)),
    };
    let mut report = run_experiment(config.experiment, &corpus, &cleaner, source.as_ref(), &plan, &options)?;
    report.provenance.insert("seed".into(), config.seed.to_string());
    report.provenance.insert("labeled_corpus".into(), config.labeled_path().display().to_string());
    report.write(&dir)?;
    emit_tables(std::slice::from_ref(&report), TableMode::Comparison, &dir, None)?;
    if config.by_project {
        emit_tables(std::slice::from_ref(&report), TableMode::PerProject, &dir, None)?;
        emit_tables(std::slice::from_ref(&report), TableMode::NewProject, &dir, None)?;
        let projects = dir.join("projects");
        create_dir(&projects)?;
        for fold in &report.folds {
            let path = projects.join(format!("{}.json", fold.label));
            std::fs::write(&path, serde_json::to_string_pretty(fold)? + "\n")?;
        }
    }
    let a = &report.aggregate;
    println!(
        "{} ({}): MAE {:.2} ± {:.2}, MSE {:.2}, MdAE {:.2} over {} rounds -> {}",
        report.experiment,
        report.provenance["embedding"],
        a.mae.mean,
        a.mae.std,
        a.mse.mean,
        a.mdae.mean,
        report.folds.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResponse {
    pub effort: f64,
    pub class: f64,
    pub model_id: String,
    pub degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

/// A trained estimator with the embedding model it was trained on.
pub struct LoadedEstimator {
    model: EstimatorModel,
    source: Box<dyn RepresentationSource>,
    cleaner: Cleaner,
    model_id: String,
}

impl LoadedEstimator {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let path = estimator_path(config);
        let bytes = std::fs::read(&path).with_context(|| format!("reading {}; run train first", path.display()))?;
        let model = EstimatorModel::from_checkpoint(&se3m::numkernel::Checkpoint::from_bytes(&bytes)?)?;
        let (source, _) = match model.metadata.get(EMBEDDING_PATH_KEY) {
            Some(p) => {
                let mut c = config.clone();
                c.model_dir = Path::new(p).parent().map(Path::to_path_buf);
                load_source(&c, config.experiment)?
            }
            None => load_source(config, config.experiment)?,
        };
        if source.descriptor() != *model.source() {
            bail!(
                "the embedding model changed since {} was trained ({} vs {})",
                path.display(),
                source.descriptor().identity,
                model.source().identity
            );
        }
        Ok(Self {
            model,
            source,
            cleaner: config.cleaner()?,
            model_id: sha256_hex(&bytes),
        })
    }

    pub fn estimate(&self, text: &str) -> Result<EstimateResponse> {
        let (rep, degenerate) = self.source.represent(&self.cleaner.clean(text), self.model.config().input)?;
        let result = match self.model.config().output {
            OutputKind::Softmax => self.model.predict_class(&rep)?,
            OutputKind::Linear => self.model.predict_effort(&rep)?,
        };
        Ok(EstimateResponse {
            effort: result.effort,
            class: result.class,
            model_id: self.model_id.clone(),
            degenerate,
            probabilities: result.probabilities,
        })
    }
}

pub fn predict(config: &PipelineConfig, text: &str) -> Result<()> {
    let estimator = LoadedEstimator::load(config)?;
    println!("{}", serde_json::to_string(&estimator.estimate(text)?)?);
    Ok(())
}

fn copy_tree(from: &Path, to: &Path) -> Result<Vec<PathBuf>> {
    create_dir(to)?;
    let mut copied = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(from)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copied.extend(copy_tree(&entry.path(), &target)?);
        } else {
            std::fs::copy(entry.path(), &target)?;
            copied.push(target);
        }
    }
    Ok(copied)
}

fn file_checksum(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|b| sha256_hex(&b))
}

pub fn report(config: &PipelineConfig) -> Result<()> {
    let evaluations = config.reports().join("evaluations");
    let mut runs: Vec<(String, EvalReport)> = Vec::new();
    if evaluations.is_dir() {
        let mut names: Vec<String> = std::fs::read_dir(&evaluations)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("report.json").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for name in names {
            let report = EvalReport::load(&evaluations.join(&name).join("report.json"))?;
            runs.push((name, report));
        }
    }
    if runs.is_empty() {
        bail!("no evaluation outputs under {}; run evaluate first", evaluations.display());
    }

    let bundles = config.reports().join("bundles");
    let version = (1..).find(|v| !bundles.join(format!("v{v}")).exists()).expect("unbounded range");
    let bundle = bundles.join(format!("v{version}"));
    let mut files = Vec::new();
    for (name, _) in &runs {
        files.extend(copy_tree(&evaluations.join(name), &bundle.join("evaluations").join(name))?);
    }
    let reports: Vec<EvalReport> = runs.iter().map(|(_, r)| r.clone()).collect();
    files.extend(emit_tables(&reports, TableMode::Comparison, &bundle, None)?);
    let by_project: Vec<EvalReport> = reports
        .iter()
        .filter(|r| r.split == se3m::corpus::SplitKind::LeaveOneProjectOut)
        .cloned()
        .collect();
    if !by_project.is_empty() {
        files.extend(emit_tables(&by_project, TableMode::PerProject, &bundle, None)?);
        files.extend(emit_tables(&by_project, TableMode::NewProject, &bundle, None)?);
    }

    let mut exports = BTreeMap::new();
    let experiments: BTreeSet<String> = reports.iter().map(|r| r.experiment.clone()).collect();
    if let Ok(corpus) = load_corpus(config) {
        let cleaner = config.cleaner()?;
        for exp in &experiments {
            let Ok(id) = exp.parse::<ExperimentId>() else { continue };
            let Ok((source, _)) = load_source(config, id) else { continue };
            let path = bundle.join(format!("embeddings_{exp}.csv"));
            let rows = write_embeddings(&path, &corpus, &cleaner, source.as_ref())?;
            exports.insert(exp.clone(), rows);
            files.push(path);
        }
    }

    let mut seeds = BTreeSet::new();
    seeds.insert(config.seed);
    for r in &reports {
        for key in ["seed", "head_seed", "split_seed"] {
            if let Some(s) = r.provenance.get(key).and_then(|v| v.parse::<u64>().ok()) {
                seeds.insert(s);
            }
        }
    }
    let mut checksums = BTreeMap::new();
    let mut corpora = vec![("labeled", config.labeled_path()), ("finetune", config.finetune_path())];
    if let Some(p) = config.pretrain_path() {
        corpora.push(("pretrain", p));
    }
    for (name, path) in corpora {
        if let Some(sum) = file_checksum(&path) {
            checksums.insert(name.to_string(), sum);
        }
    }
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "bundle_version": version,
        "created_unix": created,
        "evaluations": runs.iter().map(|(n, r)| serde_json::json!({
            "name": n,
            "experiment": r.experiment,
            "provenance": r.provenance,
        })).collect::<Vec<_>>(),
        "seeds": seeds,
        "config": config.to_map(),
        "corpus_checksums": checksums,
        "embedding_exports": exports,
        "files": files
            .iter()
            .map(|f| f.strip_prefix(&bundle).unwrap_or(f).display().to_string())
            .collect::<Vec<_>>(),
    });
    std::fs::write(bundle.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!(
        "bundled {} evaluations ({} embedding exports) -> {}",
        runs.len(),
        exports.len(),
        bundle.display()
    );
    Ok(())
}
