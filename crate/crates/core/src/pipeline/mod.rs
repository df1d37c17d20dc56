//! Staged workspace driver.
//!
//! Each stage reads the previous stage's files from the workspace directory
//! and writes its own, plus `manifest.<stage>.json` holding content hashes of
//! its inputs and outputs, a hash of the output-affecting configuration, and
//! the seed. Stages refuse to run before their prerequisites have.
//!
//! | stage    | reads                                     | writes |
//! |----------|-------------------------------------------|--------|
//! | ingest   | source report files, CVE file             | `corpus.ingest.json`, `cve.json`, `ingest.warnings.jsonl` |
//! | classify | `corpus.ingest.json`                      | `corpus.classify.json` |
//! | extract  | `corpus.classify.json`                    | `corpus.extract.json`, `extract.degradations.jsonl` |
//! | link     | `corpus.extract.json`                     | `links.jsonl`, `embeddings.json`, `link.degradations.jsonl` |
//! | complete | `corpus.extract.json`, `cve.json`, `links.jsonl` | `corpus.complete.json`, `completions.jsonl` |
//! | stats    | `corpus.complete.json`, `completions.jsonl` | `deficiency.{md,csv}`, `completion.{md,csv}` |
//! | pairs    | `corpus.extract.json`                     | `pairs.jsonl` |
//!
//! `embeddings.json` is only written when the corpus has prose reports with a
//! non-empty vocabulary.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    ConfigFile, Overrides, PairsConfig, PipelineConfig, ServiceEndpoint, DEFAULT_JOBS, DEFAULT_SEED,
};

use crate::classify::categorize;
use crate::complete::{records_from_jsonl, records_to_jsonl, run_completion};
use crate::corpus::{
    corpus_from_bytes, corpus_to_bytes, cve_db_from_bytes, cve_db_to_bytes, ingest_cve_entries, ingest_reports,
    merge_batches, to_container_bytes, Corpus, ContentKind, CveDb, IngestWarning,
};
use crate::extract::{extract_all, HttpExtractor, PatternExtractor, Rules, StructuredExtractor};
use crate::link::{
    build_link_graph, build_pair_training_set, links_from_jsonl, links_to_jsonl, pair_training_set_to_jsonl,
    ClassifierSetup, HttpClassifier, PairClassifier, SimilarityModels,
};
use crate::report::{completion_stats, deficiency_stats, render_report, ReportFormat};
use crate::similarity::train_embeddings;

pub const MANIFEST_FORMAT: &str = "pocfuse-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const LOCK_FILE: &str = ".pocfuse.lock";

pub const CORPUS_INGEST: &str = "corpus.ingest.json";
pub const CVE_DB: &str = "cve.json";
pub const INGEST_WARNINGS: &str = "ingest.warnings.jsonl";
pub const CORPUS_CLASSIFY: &str = "corpus.classify.json";
pub const CORPUS_EXTRACT: &str = "corpus.extract.json";
pub const EXTRACT_DEGRADATIONS: &str = "extract.degradations.jsonl";
pub const LINKS: &str = "links.jsonl";
pub const EMBEDDINGS: &str = "embeddings.json";
pub const LINK_DEGRADATIONS: &str = "link.degradations.jsonl";
pub const CORPUS_COMPLETE: &str = "corpus.complete.json";
pub const COMPLETIONS: &str = "completions.jsonl";
pub const PAIRS: &str = "pairs.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Classify,
    Extract,
    Link,
    Complete,
    Stats,
    Pairs,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Classify,
        Stage::Extract,
        Stage::Link,
        Stage::Complete,
        Stage::Stats,
        Stage::Pairs,
    ];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Classify => "classify",
            Stage::Extract => "extract",
            Stage::Link => "link",
            Stage::Complete => "complete",
            Stage::Stats => "stats",
            Stage::Pairs => "pairs",
        }
    }

    /// Stages that must have run, earliest first.
    pub fn requires(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Ingest => &[],
            Classify => &[Ingest],
            Extract => &[Ingest, Classify],
            Link => &[Ingest, Classify, Extract],
            Complete => &[Ingest, Classify, Extract, Link],
            Stats => &[Ingest, Classify, Extract, Link, Complete],
            Pairs => &[Ingest, Classify, Extract],
        }
    }

    pub fn manifest_file(self) -> String {
        format!("manifest.{}.json", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stage(Stage),
    /// Every stage in order; `pairs` only when configured.
    RunAll,
}

impl Command {
    pub fn stages(self, config: &PipelineConfig) -> Vec<Stage> {
        match self {
            Command::Stage(s) => vec![s],
            Command::RunAll => Stage::ALL
                .into_iter()
                .filter(|&s| s != Stage::Pairs || config.pairs.is_some())
                .collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("stage `{stage}` needs `{required}` to have run first ({missing} not found); run `pocfuse {required}`")]
    Prerequisite {
        stage: &'static str,
        required: &'static str,
        missing: String,
    },

    #[error("workspace {} is locked by another run; delete {} if that run is gone", .0.display(), .0.join(LOCK_FILE).display())]
    Locked(PathBuf),

    #[error(transparent)]
    Data(#[from] crate::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Prerequisite { .. } | PipelineError::Locked(_) => 3,
            PipelineError::Data(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Prerequisite { .. } => "prerequisite",
            PipelineError::Locked(_) => "locked",
            PipelineError::Data(_) => "data",
        }
    }

    /// Single-line JSON for stderr.
    pub fn summary_json(&self) -> String {
        let mut v = serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        match self {
            PipelineError::Config(problems) => v["problems"] = serde_json::json!(problems),
            PipelineError::Prerequisite { stage, required, .. } => {
                v["stage"] = serde_json::json!(stage);
                v["required_command"] = serde_json::json!(required);
            }
            _ => {}
        }
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    stage: &'a str,
    inputs: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
    config_hash: &'a str,
    seed: u64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files a stage read and wants written.
#[derive(Default)]
struct Artifacts {
    inputs: BTreeMap<String, String>,
    outputs: Vec<(String, Vec<u8>)>,
    absent: Vec<String>,
    notes: Vec<String>,
}

impl Artifacts {
    fn read(&mut self, ws: &Path, name: &str) -> crate::Result<Vec<u8>> {
        let path = ws.join(name);
        let bytes = fs::read(&path).map_err(|e| crate::Error::io(&path, e))?;
        self.inputs.insert(name.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn read_external(&mut self, label: String, path: &Path) -> crate::Result<()> {
        let bytes = fs::read(path).map_err(|e| crate::Error::io(path, e))?;
        self.inputs.insert(label, sha256_hex(&bytes));
        Ok(())
    }

    fn write(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.outputs.push((name.into(), bytes));
    }
}

struct WorkspaceLock(PathBuf);

impl WorkspaceLock {
    fn acquire(root: &Path) -> Result<WorkspaceLock, PipelineError> {
        let path = root.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(WorkspaceLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(root.to_path_buf())),
            Err(e) => Err(crate::Error::io(&path, e).into()),
        }
    }
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn check_prerequisites(ws: &Path, stage: Stage) -> Result<(), PipelineError> {
    for &req in stage.requires() {
        let manifest = req.manifest_file();
        if !ws.join(&manifest).is_file() {
            return Err(PipelineError::Prerequisite {
                stage: stage.name(),
                required: req.name(),
                missing: manifest,
            });
        }
    }
    Ok(())
}

/// Runs a command against the configured workspace.
pub fn run(command: Command, config: &PipelineConfig) -> Result<Vec<StageOutcome>, PipelineError> {
    let stages = command.stages(config);
    let ws = config.workspace.as_path();
    if stages.contains(&Stage::Ingest) {
        let problems = config.check_inputs();
        if !problems.is_empty() {
            return Err(PipelineError::Config(problems));
        }
        fs::create_dir_all(ws).map_err(|e| crate::Error::io(ws, e))?;
    } else if !ws.is_dir() {
        check_prerequisites(ws, stages[0])?;
    }
    if stages.contains(&Stage::Pairs) && config.pairs.is_none() {
        return Err(PipelineError::Config(vec![
            "the pairs stage needs a [pairs] section in the config".into(),
        ]));
    }
    // Fail before locking when the first stage cannot run.
    check_prerequisites(ws, stages[0])?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| PipelineError::Config(vec![format!("cannot start {} worker threads: {e}", config.jobs)]))?;
    let _lock = WorkspaceLock::acquire(ws)?;
    let config_hash = sha256_hex(&serde_json::to_vec(&config.output_affecting()).expect("config serializes"));

    pool.install(|| {
        let mut outcomes = Vec::new();
        for stage in stages {
            check_prerequisites(ws, stage)?;
            log::info!("stage {}", stage.name());
            let art = match stage {
                Stage::Ingest => ingest(config)?,
                Stage::Classify => classify(ws)?,
                Stage::Extract => extract(ws, config)?,
                Stage::Link => link(ws, config)?,
                Stage::Complete => complete(ws, config)?,
                Stage::Stats => stats(ws, config)?,
                Stage::Pairs => pairs(ws, config)?,
            };
            outcomes.push(commit(ws, stage, art, &config_hash, config.seed)?);
        }
        Ok(outcomes)
    })
}

fn commit(ws: &Path, stage: Stage, art: Artifacts, config_hash: &str, seed: u64) -> crate::Result<StageOutcome> {
    for name in &art.absent {
        let p = ws.join(name);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| crate::Error::io(&p, e))?;
        }
    }
    let mut hashes = BTreeMap::new();
    for (name, bytes) in &art.outputs {
        let p = ws.join(name);
        fs::write(&p, bytes).map_err(|e| crate::Error::io(&p, e))?;
        hashes.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        stage: stage.name(),
        inputs: &art.inputs,
        outputs: &hashes,
        config_hash,
        seed,
    };
    let name = stage.manifest_file();
    let p = ws.join(&name);
    fs::write(&p, to_container_bytes(MANIFEST_FORMAT, MANIFEST_VERSION, &manifest)).map_err(|e| crate::Error::io(&p, e))?;
    for n in &art.notes {
        log::warn!("{}: {n}", stage.name());
    }
    let mut outputs: Vec<String> = art.outputs.into_iter().map(|(n, _)| n).collect();
    outputs.push(name);
    Ok(StageOutcome {
        stage: stage.name(),
        outputs,
        notes: art.notes,
    })
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, &item).expect("jsonl lines serialize");
        out.push(b'\n');
    }
    out
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn warning_line(w: &IngestWarning) -> serde_json::Value {
    serde_json::json!({"file": file_label(&w.path), "line": w.line, "message": w.message})
}

fn ingest(config: &PipelineConfig) -> crate::Result<Artifacts> {
    let mut art = Artifacts::default();
    let mut warnings = Vec::new();
    let mut batches = Vec::new();
    for (source, path) in &config.sources {
        art.read_external(format!("source:{}", source.label()), path)?;
        let got = ingest_reports(path, source)?;
        warnings.extend(got.warnings);
        batches.push((path.clone(), got.items));
    }
    let merged = merge_batches(batches);
    warnings.extend(merged.warnings);
    let corpus = Corpus::new(merged.items)?;
    let db = match &config.cve {
        Some(path) => {
            art.read_external("cve".into(), path)?;
            let got = ingest_cve_entries(path)?;
            warnings.extend(got.warnings);
            got.items
        }
        None => {
            art.notes.push("no CVE file given; CVE completion will find nothing".into());
            CveDb::new()
        }
    };
    if !warnings.is_empty() {
        art.notes.push(format!("{} input lines skipped or repaired, see {INGEST_WARNINGS}", warnings.len()));
    }
    art.write(CORPUS_INGEST, corpus_to_bytes(&corpus));
    art.write(CVE_DB, cve_db_to_bytes(&db));
    art.write(INGEST_WARNINGS, jsonl(warnings.iter().map(warning_line)));
    Ok(art)
}

fn load_stage_corpus(art: &mut Artifacts, ws: &Path, name: &str) -> crate::Result<Corpus> {
    let bytes = art.read(ws, name)?;
    corpus_from_bytes(&ws.join(name), &bytes)
}

fn classify(ws: &Path) -> crate::Result<Artifacts> {
    let mut art = Artifacts::default();
    let corpus = load_stage_corpus(&mut art, ws, CORPUS_INGEST)?;
    let reports = corpus.reports().par_iter().map(categorize).collect::<crate::Result<Vec<_>>>()?;
    art.write(CORPUS_CLASSIFY, corpus_to_bytes(&Corpus::new(reports)?));
    Ok(art)
}

fn extract(ws: &Path, config: &PipelineConfig) -> crate::Result<Artifacts> {
    let mut art = Artifacts::default();
    let corpus = load_stage_corpus(&mut art, ws, CORPUS_CLASSIFY)?;
    let extractor: Box<dyn StructuredExtractor> = match &config.extractor_service {
        Some(s) => Box::new(HttpExtractor::new(s.url.clone(), s.deadline)),
        None => Box::new(PatternExtractor),
    };
    let rules = Rules::default();
    let done = corpus
        .reports()
        .par_iter()
        .map(|r| extract_all(r, &rules, extractor.as_ref()))
        .collect::<crate::Result<Vec<_>>>()?;
    let mut degradations = Vec::new();
    let mut reports = Vec::with_capacity(done.len());
    for e in done {
        if let Some(d) = e.degradation {
            degradations.push(serde_json::json!({"id": e.report.id, "degradation": d}));
        }
        reports.push(e.report);
    }
    if !degradations.is_empty() {
        art.notes.push(format!(
            "{} reports fell back to the pattern extractor, see {EXTRACT_DEGRADATIONS}",
            degradations.len()
        ));
    }
    art.write(CORPUS_EXTRACT, corpus_to_bytes(&Corpus::new(reports)?));
    art.write(EXTRACT_DEGRADATIONS, jsonl(degradations));
    Ok(art)
}

fn link(ws: &Path, config: &PipelineConfig) -> crate::Result<Artifacts> {
    let mut art = Artifacts::default();
    let corpus = load_stage_corpus(&mut art, ws, CORPUS_EXTRACT)?;
    let texts: Vec<&str> = corpus
        .reports()
        .iter()
        .filter(|r| r.content_kind == ContentKind::Text)
        .map(|r| r.raw_content.as_str())
        .collect();
    let model = if texts.is_empty() {
        None
    } else {
        match train_embeddings(&texts, &config.embedding) {
            Ok((model, report)) => {
                log::info!("embedding epoch losses: {:?}", report.epoch_losses);
                Some(model)
            }
            Err(crate::Error::EmptyVocabulary { min_count }) => {
                art.notes.push(format!(
                    "no prose token occurs {min_count} times; text pairs score 0"
                ));
                None
            }
            Err(e) => return Err(e),
        }
    };
    let remote: Option<HttpClassifier> = config
        .classifier_service
        .as_ref()
        .map(|s| HttpClassifier::new(s.url.clone(), s.deadline));
    let classifier: &dyn PairClassifier = match &remote {
        Some(c) => c,
        None => &config.classifier,
    };
    let setup = ClassifierSetup {
        classifier,
        fallback: &config.classifier,
    };
    let models = SimilarityModels {
        embeddings: model.as_ref(),
    };
    let graph = build_link_graph(&corpus, &models, Some(&setup), &config.thresholds)?;
    if !graph.degradations.is_empty() {
        art.notes.push(format!(
            "{} pairs fell back to the heuristic classifier, see {LINK_DEGRADATIONS}",
            graph.degradations.len()
        ));
    }
    art.write(LINKS, links_to_jsonl(&graph.links).into_bytes());
    match model {
        Some(m) => art.write(EMBEDDINGS, m.to_bytes()),
        None => art.absent.push(EMBEDDINGS.into()),
    }
    art.write(
        LINK_DEGRADATIONS,
        jsonl(graph.degradations.iter().map(|d| serde_json::json!({"degradation": d}))),
    );
    Ok(art)
}

fn complete(ws: &Path, config: &PipelineConfig) -> crate::Result<Artifacts> {
    let mut art = Artifacts::default();
    let corpus = load_stage_corpus(&mut art, ws, CORPUS_EXTRACT)?;
    let db_bytes = art.read(ws, CVE_DB)?;
    let db = cve_db_from_bytes(&ws.join(CVE_DB), &db_bytes)?;
    let link_bytes = art.read(ws, LINKS)?;
    let links = links_from_jsonl(&ws.join(LINKS), &String::from_utf8_lossy(&link_bytes))?;
    let run = run_completion(&corpus, &db, &links, &config.completion())?;
    art.notes.push(format!("run {}: {} values completed", run.run_id, run.records.len()));
    art.write(CORPUS_COMPLETE, corpus_to_bytes(&run.corpus));
    art.write(COMPLETIONS, records_to_jsonl(&run.records).into_bytes());
    Ok(art)
}

fn stats(ws: &Path, config: &PipelineConfig) -> crate::Result<Artifacts> {
    let mut art = Artifacts::default();
    let corpus = load_stage_corpus(&mut art, ws, CORPUS_COMPLETE)?;
    let rec_bytes = art.read(ws, COMPLETIONS)?;
    let records = records_from_jsonl(&ws.join(COMPLETIONS), &String::from_utf8_lossy(&rec_bytes))?;
    let fmt = config.format;
    let deficiency = deficiency_stats(&corpus);
    let completion = completion_stats(&records, &corpus)?;
    art.write(format!("deficiency.{}", fmt.extension()), render_report(&deficiency, fmt).into_bytes());
    art.write(format!("completion.{}", fmt.extension()), render_report(&completion, fmt).into_bytes());
    for other in [ReportFormat::Markdown, ReportFormat::Csv] {
        if other != fmt {
            art.absent.push(format!("deficiency.{}", other.extension()));
            art.absent.push(format!("completion.{}", other.extension()));
        }
    }
    Ok(art)
}

fn pairs(ws: &Path, config: &PipelineConfig) -> crate::Result<Artifacts> {
    let p = config.pairs.as_ref().expect("checked before running");
    let mut art = Artifacts::default();
    let corpus = load_stage_corpus(&mut art, ws, CORPUS_EXTRACT)?;
    let set = build_pair_training_set(&corpus, p.positives, p.negatives, p.split, config.seed)?;
    art.write(PAIRS, pair_training_set_to_jsonl(&set).into_bytes());
    Ok(art)
}
