//! Distributed bag-of-words document embedding with negative sampling.
//!
//! Every document owns a vector that is trained to predict the document's
//! tokens: for each (kept) token occurrence the document vector is pushed
//! towards the token's output vector and away from `negatives` tokens drawn
//! from the unigram distribution raised to 3/4. The learning rate decays
//! linearly over the whole run. Training is single-threaded and all
//! randomness flows from one seeded generator, so results are bit-identical
//! for a fixed seed and corpus.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wl::WlDocument;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DocEmbedParams {
    pub dims: usize,
    pub epochs: usize,
    pub lr: f32,
    pub negatives: usize,
    /// Tokens with fewer corpus occurrences are ignored.
    pub min_count: usize,
    /// Frequent-token downsampling threshold; 0 disables it.
    pub sample: f64,
    pub seed: u64,
}

impl Default for DocEmbedParams {
    fn default() -> Self {
        Self {
            dims: 128,
            epochs: 250,
            lr: 0.025,
            negatives: 5,
            min_count: 5,
            sample: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DocModel {
    params: DocEmbedParams,
    vocab: HashMap<String, u32>,
    keep_prob: Vec<f64>,
    cumulative: Vec<f64>,
    output: Vec<f32>,
    docs: Vec<f32>,
}

fn sigmoid(x: f32) -> f32 {
    if x > 6.0 {
        1.0
    } else if x < -6.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

struct Sampler<'a> {
    keep_prob: &'a [f64],
    cumulative: &'a [f64],
    negatives: usize,
}

impl Sampler<'_> {
    fn negative(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1) as u32
    }

    /// One pass of negative-sampling SGD over a document's tokens.
    #[allow(clippy::too_many_arguments)]
    fn train_document(
        &self,
        output: &mut [f32],
        doc: &mut [f32],
        tokens: &[u32],
        alpha: f32,
        update_output: bool,
        rng: &mut ChaCha8Rng,
        grad: &mut [f32],
    ) {
        let dims = doc.len();
        for &word in tokens {
            let keep = self.keep_prob[word as usize];
            if keep < 1.0 && rng.gen::<f64>() > keep {
                continue;
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            for n in 0..=self.negatives {
                let (target, label) = if n == 0 {
                    (word, 1.0)
                } else {
                    let t = self.negative(rng);
                    if t == word {
                        continue;
                    }
                    (t, 0.0)
                };
                let out = &mut output[target as usize * dims..(target as usize + 1) * dims];
                let dot: f32 = doc.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                let g = (label - sigmoid(dot)) * alpha;
                for (acc, o) in grad.iter_mut().zip(out.iter()) {
                    *acc += g * o;
                }
                if update_output {
                    for (o, x) in out.iter_mut().zip(doc.iter()) {
                        *o += g * x;
                    }
                }
            }
            for (x, g) in doc.iter_mut().zip(grad.iter()) {
                *x += g;
            }
        }
    }
}

/// Trains document vectors for `corpus`; vector `i` belongs to document `i`.
pub fn doc_embed_train(corpus: &[WlDocument], params: &DocEmbedParams) -> Result<DocModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("document corpus"));
    }
    if params.dims == 0 || params.epochs == 0 {
        return Err(Error::InvalidArgument("dims and epochs must be >= 1".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in corpus {
        for t in &doc.tokens {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c as usize >= params.min_count)
        .collect();
    kept.sort_unstable();
    let vocab: HashMap<String, u32> = kept
        .iter()
        .enumerate()
        .map(|(i, (t, _))| ((*t).to_owned(), i as u32))
        .collect();
    let total: u64 = kept.iter().map(|&(_, c)| c).sum();
    let keep_prob = kept
        .iter()
        .map(|&(_, c)| {
            if params.sample <= 0.0 {
                return 1.0;
            }
            let threshold = params.sample * total as f64;
            let c = c as f64;
            (((c / threshold).sqrt() + 1.0) * threshold / c).min(1.0)
        })
        .collect();
    let mut acc = 0.0;
    let cumulative = kept
        .iter()
        .map(|&(_, c)| {
            acc += (c as f64).powf(0.75);
            acc
        })
        .collect();

    let dims = params.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let docs: Vec<f32> = (0..corpus.len() * dims)
        .map(|_| (rng.gen::<f32>() - 0.5) / dims as f32)
        .collect();
    let mut model = DocModel {
        params: *params,
        vocab,
        keep_prob,
        cumulative,
        output: vec![0.0; kept.len() * dims],
        docs,
    };

    let encoded: Vec<Vec<u32>> = corpus.iter().map(|d| model.encode(d)).collect();
    if model.vocab.is_empty() {
        return Ok(model);
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let steps = (params.epochs * corpus.len()) as f32;
    let mut step = 0usize;
    let mut grad = vec![0.0f32; dims];
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &d in &order {
            let alpha = params.lr * (1.0 - step as f32 / steps).max(1e-4);
            step += 1;
            let sampler = Sampler {
                keep_prob: &model.keep_prob,
                cumulative: &model.cumulative,
                negatives: params.negatives,
            };
            let row = &mut model.docs[d * dims..(d + 1) * dims];
            sampler.train_document(&mut model.output, row, &encoded[d], alpha, true, &mut rng, &mut grad);
        }
    }
    Ok(model)
}

impl DocModel {
    pub fn dims(&self) -> usize {
        self.params.dims
    }

    pub fn len(&self) -> usize {
        self.docs.len() / self.params.dims
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn vector(&self, doc: usize) -> &[f32] {
        &self.docs[doc * self.params.dims..(doc + 1) * self.params.dims]
    }

    fn encode(&self, doc: &WlDocument) -> Vec<u32> {
        doc.tokens.iter().filter_map(|t| self.vocab.get(t).copied()).collect()
    }

    fn sampler(&self) -> Sampler<'_> {
        Sampler {
            keep_prob: &self.keep_prob,
            cumulative: &self.cumulative,
            negatives: self.params.negatives,
        }
    }

    /// Infers a vector for an unseen document with the output vectors frozen.
    /// Deterministic for a given model and document.
    pub fn infer(&self, doc: &WlDocument) -> Vec<f32> {
        let dims = self.params.dims;
        let tokens = self.encode(doc);
        let mut seed = self.params.seed ^ 0x9e37_79b9_7f4a_7c15;
        for t in &tokens {
            seed = seed.rotate_left(5) ^ u64::from(*t).wrapping_mul(0x100_0000_01b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vector: Vec<f32> = (0..dims).map(|_| (rng.gen::<f32>() - 0.5) / dims as f32).collect();
        if tokens.is_empty() {
            return vector;
        }
        let mut output = self.output.clone();
        let sampler = self.sampler();
        let mut grad = vec![0.0f32; dims];
        let epochs = self.params.epochs;
        for e in 0..epochs {
            let alpha = self.params.lr * (1.0 - e as f32 / epochs as f32).max(1e-4);
            sampler.train_document(&mut output, &mut vector, &tokens, alpha, false, &mut rng, &mut grad);
        }
        vector
    }
}
