use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::sigmoid;

use super::tokenize::TokenizedTweet;
use super::TextError;

/// Skip-gram training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextModelParams {
    /// Context words on each side of the centre word, 1 to 10.
    pub window_size: usize,
    /// Vector length, 50 to 500 in steps of 50.
    pub dimension: usize,
    /// Tokens seen fewer times than this are dropped, 0 to 9.
    pub min_count: usize,
    /// Noise words per positive pair, 0 to 9.
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TextModelParams {
    fn default() -> Self {
        TextModelParams {
            window_size: 5,
            dimension: 100,
            min_count: 1,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
        }
    }
}

impl TextModelParams {
    pub fn validate(&self) -> Result<(), TextError> {
        let bad = |m: String| Err(TextError::InvalidParams(m));
        if !(1..=10).contains(&self.window_size) {
            return bad(format!("window_size {} outside 1..=10", self.window_size));
        }
        if !(50..=500).contains(&self.dimension) || self.dimension % 50 != 0 {
            return bad(format!("dimension {} not a multiple of 50 in 50..=500", self.dimension));
        }
        if self.min_count > 9 {
            return bad(format!("min_count {} outside 0..=9", self.min_count));
        }
        if self.negative_samples > 9 {
            return bad(format!("negative_samples {} outside 0..=9", self.negative_samples));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!(
            "window_size={} dimension={} min_count={} negative_samples={} epochs={} learning_rate={} seed={}",
            self.window_size, self.dimension, self.min_count, self.negative_samples, self.epochs, self.learning_rate, self.seed
        )
    }
}

/// Word vectors for one time segment.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub segment: u32,
    pub dimension: usize,
    pub params: TextModelParams,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_vectors(
        segment: u32,
        params: TextModelParams,
        entries: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, TextError> {
        let dimension = entries.first().map(|(_, v)| v.len()).ok_or(TextError::EmptyVocabulary)?;
        let mut tokens = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dimension);
        for (t, v) in entries {
            if v.len() != dimension {
                return Err(TextError::Format(format!("token {t:?} has {} components, expected {dimension}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(TextError::Format(format!("token {t:?} has non-finite components")));
            }
            if index.insert(t.clone(), tokens.len()).is_some() {
                return Err(TextError::Format(format!("duplicate token {t:?}")));
            }
            tokens.push(t);
            vectors.extend(v);
        }
        Ok(EmbeddingTable { segment, dimension, params, tokens, index, vectors })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in table order (descending training frequency).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens.iter().enumerate().map(|(i, t)| (t.as_str(), self.row(i)))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "embedding segment={} dimension={} vocab_size={} {}",
            self.segment,
            self.dimension,
            self.len(),
            self.params.label()
        )?;
        for (t, v) in self.iter() {
            write!(out, "{t}")?;
            for x in v {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self, TextError> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| TextError::Format("missing header".into()))??;
        let mut fields: HashMap<&str, &str> = HashMap::new();
        let mut parts = header.split_whitespace();
        if parts.next() != Some("embedding") {
            return Err(TextError::Format("header must start with 'embedding'".into()));
        }
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| TextError::Format(format!("bad header field {p:?}")))?;
            fields.insert(k, v);
        }
        fn field<T: std::str::FromStr>(f: &HashMap<&str, &str>, k: &str) -> Result<T, TextError> {
            f.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| TextError::Format(format!("header field {k} missing or invalid")))
        }
        let params = TextModelParams {
            window_size: field(&fields, "window_size")?,
            dimension: field(&fields, "dimension")?,
            min_count: field(&fields, "min_count")?,
            negative_samples: field(&fields, "negative_samples")?,
            epochs: field(&fields, "epochs")?,
            learning_rate: field(&fields, "learning_rate")?,
            seed: field(&fields, "seed")?,
        };
        let segment: u32 = field(&fields, "segment")?;
        let vocab_size: usize = field(&fields, "vocab_size")?;
        let mut entries = Vec::with_capacity(vocab_size);
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(' ');
            let token = it.next().unwrap_or_default().to_string();
            let v: Result<Vec<f64>, _> = it.map(str::parse::<f64>).collect();
            let v = v.map_err(|e| TextError::Format(format!("line {}: {e}", n + 2)))?;
            entries.push((token, v));
        }
        if entries.len() != vocab_size {
            return Err(TextError::Format(format!("header says {vocab_size} tokens, found {}", entries.len())));
        }
        let table = EmbeddingTable::from_vectors(segment, params, entries)?;
        if table.dimension != table.params.dimension {
            return Err(TextError::Format("vector length differs from header dimension".into()));
        }
        Ok(table)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero when either vector has zero length.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d = norm(a) * norm(b);
    if d == 0.0 {
        0.0
    } else {
        (dot(a, b) / d).clamp(-1.0, 1.0)
    }
}

/// Cumulative `count^0.75` weights for drawing noise words.
struct NoiseSampler {
    cumulative: Vec<f64>,
}

impl NoiseSampler {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseSampler { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Skip-gram with negative sampling, trained by plain SGD with a linearly
/// decaying learning rate. Single-threaded so that a seed fixes every bit of
/// the output.
pub fn train_embeddings(
    segment: u32,
    corpus: &[TokenizedTweet],
    params: &TextModelParams,
) -> Result<EmbeddingTable, TextError> {
    params.validate()?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in corpus {
        for tok in &t.tokens {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= params.min_count.max(1)).collect();
    if vocab.is_empty() {
        return Err(TextError::EmptyVocabulary);
    }
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, &(t, _))| (t, i)).collect();
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|t| t.tokens.iter().filter_map(|tok| index.get(tok.as_str()).copied()).collect())
        .collect();

    let dim = params.dimension;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w_in: Vec<f64> = (0..v * dim).map(|_| (rng.random::<f64>() - 0.5) / dim as f64).collect();
    let mut w_out = vec![0.0; v * dim];
    let noise = NoiseSampler::new(&vocab.iter().map(|&(_, c)| c).collect::<Vec<_>>());

    let words_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let total_words = (words_per_epoch * params.epochs).max(1) as f64;
    let alpha0 = params.learning_rate;
    let alpha_floor = alpha0 * 1e-4;
    let mut processed = 0usize;
    let mut grad = vec![0.0; dim];

    for _ in 0..params.epochs {
        for sentence in &sentences {
            for (pos, &center) in sentence.iter().enumerate() {
                let alpha = (alpha0 * (1.0 - processed as f64 / total_words)).max(alpha_floor);
                processed += 1;
                let reach = 1 + rng.random_range(0..params.window_size);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sentence.len() - 1);
                for (cpos, &context) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let input = &w_in[center * dim..(center + 1) * dim];
                    for d in 0..=params.negative_samples {
                        let (target, label) = if d == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = &mut w_out[target * dim..(target + 1) * dim];
                        let f = sigmoid(dot(input, out));
                        let g = (label - f) * alpha;
                        for k in 0..dim {
                            grad[k] += g * out[k];
                            out[k] += g * input[k];
                        }
                    }
                    let input = &mut w_in[center * dim..(center + 1) * dim];
                    for k in 0..dim {
                        input[k] += grad[k];
                    }
                }
            }
        }
    }

    let entries = vocab
        .iter()
        .enumerate()
        .map(|(i, &(t, _))| (t.to_string(), w_in[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    EmbeddingTable::from_vectors(segment, params.clone(), entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{TimeWindow, Timestamp};

    fn tweet(tokens: &[&str]) -> TokenizedTweet {
        TokenizedTweet {
            tweet_id: String::new(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            window: TimeWindow::from_index(0, Timestamp(0)),
        }
    }

    fn params() -> TextModelParams {
        TextModelParams { dimension: 50, epochs: 3, ..TextModelParams::default() }
    }

    #[test]
    fn param_ranges() {
        assert!(params().validate().is_ok());
        assert!(TextModelParams { dimension: 60, ..params() }.validate().is_err());
        assert!(TextModelParams { window_size: 0, ..params() }.validate().is_err());
        assert!(TextModelParams { negative_samples: 10, ..params() }.validate().is_err());
    }

    #[test]
    fn min_count_prunes() {
        let corpus = vec![tweet(&["a", "b", "a"]), tweet(&["a", "c", "b"])];
        let t = train_embeddings(0, &corpus, &TextModelParams { min_count: 2, ..params() }).unwrap();
        assert!(t.contains("a") && t.contains("b") && !t.contains("c"));
        assert_eq!(t.tokens()[0], "a");
        let err = train_embeddings(0, &corpus, &TextModelParams { min_count: 9, ..params() });
        assert!(matches!(err, Err(TextError::EmptyVocabulary)));
    }

    #[test]
    fn self_cosine_is_one() {
        let corpus = vec![tweet(&["x", "y", "z"]); 5];
        let t = train_embeddings(0, &corpus, &params()).unwrap();
        for (_, v) in t.iter() {
            assert!((cosine(v, v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let corpus = vec![tweet(&["storm", "surge", "flood"]); 4];
        let t = train_embeddings(7, &corpus, &params()).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn noise_sampler_skips_nothing() {
        let s = NoiseSampler::new(&[16, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = (0..10_000).filter(|_| s.sample(&mut rng) == 1).count() as f64 / 10_000.0;
        // 1 / (16^0.75 + 1) = 1/9
        assert!((hits - 1.0 / 9.0).abs() < 0.02, "{hits}");
    }
}
