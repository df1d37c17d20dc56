//! Pipeline configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! workspace = "work"          # relative paths resolve against this file
//! cve = "cve.jsonl"
//! seed = 42
//! jobs = 8
//! format = "markdown"         # or "csv"
//!
//! [sources]
//! exploitdb = "exploitdb.jsonl"
//! packetstorm = "packetstorm.jsonl"
//!
//! [thresholds]
//! code = 0.5
//! text = 0.95
//!
//! [classifier]                # heuristic pair classifier and optional service
//! cutoff = 0.85
//! title_weight = 0.5
//! content_weight = 0.5
//! url = "http://127.0.0.1:9000/classify"
//! deadline_secs = 10
//!
//! [extractor]
//! url = "http://127.0.0.1:9000/extract"
//! deadline_secs = 10
//!
//! [embedding]                 # skip-gram parameters; the seed is the top-level one
//! dim = 100
//! window = 5
//! negative_samples = 5
//! epochs = 5
//! learning_rate = 0.025
//! min_count = 2
//!
//! [completion]                # default whitelist: all eight aspects
//! poc_aspect_whitelist = ["trigger_step", "verification_oracle", "title"]
//!
//! [pairs]                     # enables the pair training-set stage in run-all
//! positives = 600
//! negatives = 5400
//! split = [0.8, 0.1, 0.1]
//! ```
//!
//! Every key is optional in the file. Missing values take the defaults shown,
//! except where noted.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::complete::CompletionConfig;
use crate::corpus::{Aspect, SourceId};
use crate::link::{HeuristicClassifier, SplitRatios, Thresholds};
use crate::report::ReportFormat;
use crate::similarity::EmbeddingParams;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_JOBS: usize = 8;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub workspace: Option<PathBuf>,
    pub cve: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub format: Option<String>,
    #[serde(default)]
    pub sources: toml::Table,
    #[serde(default)]
    pub thresholds: ThresholdsFile,
    #[serde(default)]
    pub classifier: ClassifierFile,
    #[serde(default)]
    pub extractor: ServiceFile,
    pub embedding: Option<EmbeddingFile>,
    #[serde(default)]
    pub completion: CompletionFile,
    pub pairs: Option<PairsFile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsFile {
    pub code: Option<f64>,
    pub text: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierFile {
    pub cutoff: Option<f64>,
    pub title_weight: Option<f64>,
    pub content_weight: Option<f64>,
    pub url: Option<String>,
    pub deadline_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceFile {
    pub url: Option<String>,
    pub deadline_secs: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingFile {
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negative_samples: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f32>,
    pub min_count: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionFile {
    pub poc_aspect_whitelist: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsFile {
    pub positives: usize,
    pub negatives: usize,
    pub split: Option<[f64; 3]>,
}

/// Values given on the command line; each beats the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub workspace: Option<PathBuf>,
    /// Raw `name=path` strings.
    pub sources: Vec<String>,
    pub cve: Option<PathBuf>,
    pub code_threshold: Option<f64>,
    pub text_threshold: Option<f64>,
    pub seed: Option<u64>,
    pub extractor_url: Option<String>,
    pub classifier_url: Option<String>,
    pub jobs: Option<usize>,
    pub format: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairsConfig {
    pub positives: usize,
    pub negatives: usize,
    pub split: SplitRatios,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServiceEndpoint {
    pub url: String,
    #[serde(skip)]
    pub deadline: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub workspace: PathBuf,
    /// In canonical source order.
    pub sources: Vec<(SourceId, PathBuf)>,
    pub cve: Option<PathBuf>,
    pub thresholds: Thresholds,
    pub classifier: HeuristicClassifier,
    pub classifier_service: Option<ServiceEndpoint>,
    pub extractor_service: Option<ServiceEndpoint>,
    pub embedding: EmbeddingParams,
    pub whitelist: BTreeSet<Aspect>,
    pub pairs: Option<PairsConfig>,
    pub seed: u64,
    pub jobs: usize,
    pub format: ReportFormat,
}

/// The part of the configuration that can change stage outputs. Paths and
/// parallelism are deliberately absent.
#[derive(Serialize)]
pub(crate) struct OutputAffecting<'a> {
    thresholds: &'a Thresholds,
    classifier: &'a HeuristicClassifier,
    classifier_service: Option<&'a ServiceEndpoint>,
    extractor_service: Option<&'a ServiceEndpoint>,
    embedding: &'a EmbeddingParams,
    whitelist: &'a BTreeSet<Aspect>,
    pairs: Option<&'a PairsConfig>,
    seed: u64,
    format: ReportFormat,
}

impl PipelineConfig {
    pub fn completion(&self) -> CompletionConfig {
        CompletionConfig {
            code_threshold: self.thresholds.code,
            text_threshold: self.thresholds.text,
            poc_aspect_whitelist: self.whitelist.clone(),
        }
    }

    pub(crate) fn output_affecting(&self) -> OutputAffecting<'_> {
        OutputAffecting {
            thresholds: &self.thresholds,
            classifier: &self.classifier,
            classifier_service: self.classifier_service.as_ref(),
            extractor_service: self.extractor_service.as_ref(),
            embedding: &self.embedding,
            whitelist: &self.whitelist,
            pairs: self.pairs.as_ref(),
            seed: self.seed,
            format: self.format,
        }
    }

    /// Reads `path` as a config file. Problems come back as a list.
    pub fn load_file(path: &Path) -> Result<ConfigFile, Vec<String>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![format!("cannot read config {}: {e}", path.display())])?;
        toml::from_str(&text).map_err(|e| vec![format!("config {}: {e}", path.display())])
    }

    /// Merges file and flags and validates the result, collecting every
    /// problem before failing. `base` anchors relative paths from the file.
    pub fn resolve(file: ConfigFile, base: &Path, flags: Overrides) -> Result<PipelineConfig, Vec<String>> {
        let mut errors = Vec::new();
        let anchor = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };

        let workspace = match flags.workspace.or(file.workspace.map(anchor)) {
            Some(w) => w,
            None => {
                errors.push("no workspace given (use --workspace, POCFUSE_WORKSPACE or `workspace` in the config)".into());
                PathBuf::new()
            }
        };

        let mut raw_sources: Vec<(String, PathBuf)> = Vec::new();
        if flags.sources.is_empty() {
            for (k, v) in &file.sources {
                match v.as_str() {
                    Some(p) => raw_sources.push((k.clone(), anchor(PathBuf::from(p)))),
                    None => errors.push(format!("sources.{k} must be a path string")),
                }
            }
        } else {
            for s in &flags.sources {
                match s.split_once('=') {
                    Some((name, path)) if !name.trim().is_empty() && !path.trim().is_empty() => {
                        raw_sources.push((name.trim().to_string(), PathBuf::from(path.trim())))
                    }
                    _ => errors.push(format!("--source expects name=path, got {s:?}")),
                }
            }
        }
        let mut sources: Vec<(SourceId, PathBuf)> = Vec::new();
        for (name, path) in raw_sources {
            match name.parse::<SourceId>() {
                Ok(id) if sources.iter().any(|(s, _)| *s == id) => errors.push(format!("source {id} given twice")),
                Ok(id) => sources.push((id, path)),
                Err(e) => errors.push(e.to_string()),
            }
        }
        sources.sort_by_key(|(s, _)| crate::report::source_order(s));

        let cve = flags.cve.or(file.cve.map(anchor));
        for (s, p) in &sources {
            if !p.is_file() {
                errors.push(format!("source {s}: {} does not exist", p.display()));
            }
        }
        if let Some(c) = cve.as_ref().filter(|c| !c.is_file()) {
            errors.push(format!("cve file {} does not exist", c.display()));
        }

        let defaults = Thresholds::default();
        let thresholds = Thresholds {
            code: flags.code_threshold.or(file.thresholds.code).unwrap_or(defaults.code),
            text: flags.text_threshold.or(file.thresholds.text).unwrap_or(defaults.text),
        };
        for (name, t) in [("code", thresholds.code), ("text", thresholds.text)] {
            if !(0.0..=1.0).contains(&t) {
                errors.push(format!("{name} threshold {t} outside [0, 1]"));
            }
        }

        let hd = HeuristicClassifier::default();
        let classifier = HeuristicClassifier {
            cutoff: file.classifier.cutoff.unwrap_or(hd.cutoff),
            title_weight: file.classifier.title_weight.unwrap_or(hd.title_weight),
            content_weight: file.classifier.content_weight.unwrap_or(hd.content_weight),
        };
        if let Err(e) = classifier.validate() {
            errors.push(e.to_string());
        }

        let deadline = |secs: Option<u64>| secs.map(Duration::from_secs).unwrap_or(crate::link::DEFAULT_CLASSIFIER_DEADLINE);
        let mut service = |url: Option<String>, secs: Option<u64>, what: &str| {
            let url = url.filter(|u| !u.trim().is_empty())?;
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                errors.push(format!("{what} url {url:?} must start with http:// or https://"));
            }
            if secs == Some(0) {
                errors.push(format!("{what} deadline must be positive"));
            }
            Some(ServiceEndpoint {
                url,
                deadline: deadline(secs),
            })
        };
        let classifier_service = service(
            flags.classifier_url.or(file.classifier.url),
            file.classifier.deadline_secs,
            "classifier",
        );
        let extractor_service = service(
            flags.extractor_url.or(file.extractor.url),
            file.extractor.deadline_secs,
            "extractor",
        );

        let seed = flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let ed = EmbeddingParams::default();
        let ef = file.embedding.unwrap_or_default();
        let embedding = EmbeddingParams {
            dim: ef.dim.unwrap_or(ed.dim),
            window: ef.window.unwrap_or(ed.window),
            negative_samples: ef.negative_samples.unwrap_or(ed.negative_samples),
            epochs: ef.epochs.unwrap_or(ed.epochs),
            learning_rate: ef.learning_rate.unwrap_or(ed.learning_rate),
            min_count: ef.min_count.unwrap_or(ed.min_count),
            seed,
        };
        if let Err(e) = embedding.validate() {
            errors.push(format!("embedding: {e}"));
        }

        let whitelist = match file.completion.poc_aspect_whitelist {
            None => Aspect::ALL.into_iter().collect(),
            Some(names) => names
                .iter()
                .filter_map(|n| match n.parse::<Aspect>() {
                    Ok(a) => Some(a),
                    Err(e) => {
                        errors.push(format!("completion.poc_aspect_whitelist: {e}"));
                        None
                    }
                })
                .collect(),
        };

        let pairs = file.pairs.map(|p| {
            let split = p
                .split
                .map(|[train, dev, test]| SplitRatios { train, dev, test })
                .unwrap_or_default();
            if let Err(e) = split.validate() {
                errors.push(format!("pairs: {e}"));
            }
            PairsConfig {
                positives: p.positives,
                negatives: p.negatives,
                split,
            }
        });

        let jobs = flags.jobs.or(file.jobs).unwrap_or(DEFAULT_JOBS);
        if jobs == 0 {
            errors.push("jobs must be at least 1".into());
        }
        let format = match flags.format.or(file.format) {
            None => ReportFormat::Markdown,
            Some(f) => f.parse().unwrap_or_else(|e: crate::Error| {
                errors.push(e.to_string());
                ReportFormat::Markdown
            }),
        };

        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(PipelineConfig {
            workspace,
            sources,
            cve,
            thresholds,
            classifier,
            classifier_service,
            extractor_service,
            embedding,
            whitelist,
            pairs,
            seed,
            jobs,
            format,
        })
    }

    /// Problems with the input files ingestion needs.
    pub fn check_inputs(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.sources.is_empty() {
            errors.push("no report sources given (use --source name=path or [sources])".into());
        }
        for (s, p) in &self.sources {
            if !p.is_file() {
                errors.push(format!("source {s}: {} does not exist", p.display()));
            }
        }
        if let Some(c) = &self.cve {
            if !c.is_file() {
                errors.push(format!("cve file {} does not exist", c.display()));
            }
        }
        errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(ws: &str) -> Overrides {
        Overrides {
            workspace: Some(ws.into()),
            ..Overrides::default()
        }
    }

    #[test]
    fn defaults() {
        let c = PipelineConfig::resolve(ConfigFile::default(), Path::new("."), flags("w")).unwrap();
        assert_eq!(c.thresholds, Thresholds::default());
        assert_eq!(c.seed, DEFAULT_SEED);
        assert_eq!(c.jobs, DEFAULT_JOBS);
        assert_eq!(c.whitelist.len(), 8);
        assert_eq!(c.format, ReportFormat::Markdown);
    }

    #[test]
    fn all_problems_reported_together() {
        let f = Overrides {
            workspace: None,
            sources: vec!["nowhere".into(), "bogus=x".into()],
            code_threshold: Some(1.5),
            jobs: Some(0),
            format: Some("xml".into()),
            ..Overrides::default()
        };
        let errs = PipelineConfig::resolve(ConfigFile::default(), Path::new("."), f).unwrap_err();
        assert!(errs.len() >= 5, "{errs:?}");
    }

    #[test]
    fn file_and_flag_precedence() {
        let file: ConfigFile = toml::from_str(
            "workspace = \"w\"\nseed = 7\n[sources]\nseebug = \"s.jsonl\"\nexploitdb = \"e.jsonl\"\n[thresholds]\ncode = 0.6\n",
        )
        .unwrap();
        let f = Overrides {
            code_threshold: Some(0.7),
            ..Overrides::default()
        };
        let base = tempfile::tempdir().unwrap();
        for name in ["s.jsonl", "e.jsonl"] {
            std::fs::write(base.path().join(name), "").unwrap();
        }
        let c = PipelineConfig::resolve(file, base.path(), f).unwrap();
        assert_eq!(c.workspace, base.path().join("w"));
        assert_eq!(c.seed, 7);
        assert_eq!(c.thresholds.code, 0.7);
        assert_eq!(c.sources[0], (SourceId::ExploitDb, base.path().join("e.jsonl")));
        assert_eq!(c.sources[1].0, SourceId::Seebug);
    }

    #[test]
    fn missing_input_paths_reported() {
        let f = Overrides {
            workspace: Some("w".into()),
            sources: vec!["seebug=/nonexistent/s.jsonl".into()],
            cve: Some("/nonexistent/cve.jsonl".into()),
            text_threshold: Some(-0.1),
            ..Overrides::default()
        };
        let errs = PipelineConfig::resolve(ConfigFile::default(), Path::new("."), f).unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ConfigFile>("colour = 3").is_err());
    }
}
