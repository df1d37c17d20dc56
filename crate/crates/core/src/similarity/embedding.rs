//! Skip-gram word embeddings trained with negative sampling.
//!
//! Training is single-threaded and driven by one seeded ChaCha stream, so a
//! fixed seed reproduces the model bit for bit. Sentences are visited in input
//! order, center words left to right, context words left to right.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cosine::{cosine_dense, Cosine};
use super::tokens::text_tokens;
use crate::corpus::{from_container_bytes, to_container_bytes, write_file};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "pocfuse-embeddings";
pub const MODEL_VERSION: u32 = 1;

const UNIGRAM_POWER: f64 = 0.75;
const MIN_LR_FRACTION: f32 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    /// Starting rate; decays linearly towards zero over the run.
    pub learning_rate: f32,
    pub min_count: u32,
    pub seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        EmbeddingParams {
            dim: 100,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 2,
            seed: 0x5EED,
        }
    }
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.dim < 2 {
            problems.push("dim must be at least 2");
        }
        if self.window == 0 {
            problems.push("window must be at least 1");
        }
        if self.epochs == 0 {
            problems.push("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push("learning_rate must be positive");
        }
        if self.min_count == 0 {
            problems.push("min_count must be at least 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    params: EmbeddingParams,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f32>,
}

impl PartialEq for EmbeddingModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.vocab == other.vocab && self.vectors == other.vectors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Mean negative-sampling loss per (center, context) pair, per epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    params: EmbeddingParams,
    vocab: Vec<String>,
    vectors: Vec<Vec<f32>>,
}

impl EmbeddingModel {
    pub fn params(&self) -> &EmbeddingParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn vector(&self, token: &str) -> Option<&[f32]> {
        let &i = self.index.get(token)?;
        Some(self.row(i))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.params.dim..(i + 1) * self.params.dim]
    }

    /// Cosine between two vocabulary words.
    pub fn word_similarity(&self, a: &str, b: &str) -> Option<f64> {
        let to_f64 = |v: &[f32]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let va = to_f64(self.vector(a)?);
        let vb = to_f64(self.vector(b)?);
        Some(cosine_dense(&va, &vb).value)
    }

    fn from_parts(params: EmbeddingParams, vocab: Vec<String>, vectors: Vec<f32>) -> Result<Self> {
        if vectors.len() != vocab.len() * params.dim {
            return Err(Error::Invalid(format!(
                "model has {} values for {} words of dimension {}",
                vectors.len(),
                vocab.len(),
                params.dim
            )));
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, w) in vocab.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(EmbeddingModel {
            params,
            vocab,
            index,
            vectors,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let file = ModelFile {
            params: self.params.clone(),
            vocab: self.vocab.clone(),
            vectors: (0..self.vocab.len()).map(|i| self.row(i).to_vec()).collect(),
        };
        to_container_bytes(MODEL_FORMAT, MODEL_VERSION, &file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = from_container_bytes(path, &bytes, MODEL_FORMAT, MODEL_VERSION)?;
        file.params.validate()?;
        let dim = file.params.dim;
        if let Some(bad) = file.vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::Invalid(format!(
                "model row of length {} in a dimension-{dim} model",
                bad.len()
            )));
        }
        let vectors = file.vectors.into_iter().flatten().collect();
        Self::from_parts(file.params, file.vocab, vectors)
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn train_embeddings<S: AsRef<str>>(texts: &[S], params: &EmbeddingParams) -> Result<(EmbeddingModel, TrainingReport)> {
    params.validate()?;
    if texts.is_empty() {
        return Err(Error::Invalid("no training texts".into()));
    }
    let sentences: Vec<Vec<String>> = texts.iter().map(|t| text_tokens(t.as_ref())).collect();

    let mut counts: HashMap<&str, u64> = HashMap::new();
    for w in sentences.iter().flatten() {
        *counts.entry(w.as_str()).or_insert(0) += 1;
    }
    let mut vocab: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= params.min_count as u64)
        .collect();
    if vocab.is_empty() {
        return Err(Error::EmptyVocabulary {
            min_count: params.min_count,
        });
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(w, _))| (w, i)).collect();
    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|w| index.get(w.as_str()).copied()).collect())
        .collect();

    // Cumulative unigram^0.75 distribution for negative draws.
    let mut cdf = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for &(_, c) in &vocab {
        acc += (c as f64).powf(UNIGRAM_POWER);
        cdf.push(acc);
    }

    let dim = params.dim;
    let n = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut input: Vec<f32> = (0..n * dim).map(|_| (rng.gen::<f32>() - 0.5) / dim as f32).collect();
    let mut output = vec![0.0f32; n * dim];
    let mut grad = vec![0.0f32; dim];

    let words_per_epoch: usize = encoded.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * params.epochs).max(1) as f32;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        let mut loss = 0.0f64;
        let mut pairs = 0usize;
        for sentence in &encoded {
            for (pos, &center) in sentence.iter().enumerate() {
                let lr = (params.learning_rate * (1.0 - processed as f32 / total_words))
                    .max(params.learning_rate * MIN_LR_FRACTION);
                processed += 1;
                let reach = params.window - rng.gen_range(0..params.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == pos {
                        continue;
                    }
                    let context = sentence[ctx_pos];
                    let center_vec = &input[center * dim..(center + 1) * dim];
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    pairs += 1;

                    for k in 0..=params.negative_samples {
                        let (target, label) = if k == 0 {
                            (context, 1.0f32)
                        } else {
                            let u: f64 = rng.gen::<f64>() * acc;
                            let t = cdf.partition_point(|&c| c <= u).min(n - 1);
                            if t == context {
                                continue;
                            }
                            (t, 0.0f32)
                        };
                        let out_vec = &mut output[target * dim..(target + 1) * dim];
                        let score = dot(center_vec, out_vec);
                        loss -= if label == 1.0 {
                            log_sigmoid(score as f64)
                        } else {
                            log_sigmoid(-score as f64)
                        };
                        let g = lr * (label - sigmoid(score));
                        for d in 0..dim {
                            grad[d] += g * out_vec[d];
                            out_vec[d] += g * center_vec[d];
                        }
                    }
                    let center_vec = &mut input[center * dim..(center + 1) * dim];
                    for d in 0..dim {
                        center_vec[d] += grad[d];
                    }
                }
            }
        }
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        log::debug!("skip-gram epoch {}: mean loss {mean:.6}", epoch_losses.len() + 1);
        epoch_losses.push(mean);
    }

    let vocab_words = vocab.into_iter().map(|(w, _)| w.to_string()).collect();
    let model = EmbeddingModel::from_parts(params.clone(), vocab_words, input)?;
    Ok((model, TrainingReport { epoch_losses }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocVector {
    pub values: Vec<f64>,
    /// No token was in the vocabulary; `values` is the zero vector.
    pub all_oov: bool,
}

impl DocVector {
    pub fn cosine(&self, other: &DocVector) -> Cosine {
        cosine_dense(&self.values, &other.values)
    }
}

/// Unweighted mean of the in-vocabulary word vectors.
pub fn embed_text(model: &EmbeddingModel, content: &str) -> DocVector {
    let dim = model.dim();
    let mut sum = vec![0.0f64; dim];
    let mut hits = 0usize;
    for token in text_tokens(content) {
        if let Some(v) = model.vector(&token) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += x as f64;
            }
            hits += 1;
        }
    }
    if hits == 0 {
        return DocVector {
            values: sum,
            all_oov: true,
        };
    }
    let n = hits as f64;
    DocVector {
        values: sum.into_iter().map(|s| s / n).collect(),
        all_oov: false,
    }
}
