//! Synthetic sentiment-like embeddings.
//!
//! A vocabulary of Gaussian word vectors is split into positive, negative
//! and neutral words; polar words are shifted along a shared polarity
//! direction. Each record mean-pools a handful of words drawn with a bias
//! toward its class, and records whose projection on the polarity direction
//! falls inside the margin are redrawn.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use ldprepr_core::{EmbeddingVector, RngSeed};

use crate::formats::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub records: usize,
    pub dim: usize,
    pub vocab: usize,
    /// Share of the vocabulary in each polar group.
    pub polar_share: f64,
    /// Length of the polarity shift of a polar word, per unit of `sqrt(dim)`.
    pub polarity_strength: f64,
    pub min_words: usize,
    pub max_words: usize,
    /// Chance a drawn word comes from the record's own polar group.
    pub on_class_rate: f64,
    /// Chance a drawn word comes from the opposite polar group.
    pub off_class_rate: f64,
    /// Minimum signed projection on the unit polarity direction.
    pub margin: f64,
    /// Values are rounded to this many decimal places.
    pub decimals: i32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            records: 1000,
            dim: 50,
            vocab: 400,
            polar_share: 0.15,
            polarity_strength: 0.3,
            min_words: 8,
            max_words: 20,
            on_class_rate: 0.30,
            off_class_rate: 0.05,
            margin: 0.2,
            decimals: 6,
            seed: 2019,
        }
    }
}

fn gaussian(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Balanced two-class dataset; labels alternate 0, 1, 0, ...
pub fn generate(spec: &SynthSpec) -> Dataset<EmbeddingVector> {
    assert!(spec.dim >= 2 && spec.vocab >= 3 && spec.min_words >= 1);
    assert!(spec.min_words <= spec.max_words);
    let mut rng = RngSeed::from_seed(spec.seed).rng();

    let mut direction = gaussian(&mut rng, spec.dim);
    let centre = direction.iter().sum::<f64>() / spec.dim as f64;
    direction.iter_mut().for_each(|v| *v -= centre);
    let norm = dot(&direction, &direction).sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);

    let polar = ((spec.vocab as f64 * spec.polar_share) as usize).max(1);
    let shift = spec.polarity_strength * (spec.dim as f64).sqrt();
    let words: Vec<Vec<f64>> = (0..spec.vocab)
        .map(|w| {
            let sign = if w < polar {
                1.0
            } else if w < 2 * polar {
                -1.0
            } else {
                0.0
            };
            let mut v = gaussian(&mut rng, spec.dim);
            v.iter_mut()
                .zip(&direction)
                .for_each(|(x, d)| *x += sign * shift * d);
            v
        })
        .collect();
    let neutral = 2 * polar..spec.vocab;

    let scale = 10f64.powi(spec.decimals);
    let records = (0..spec.records)
        .map(|i| {
            let label = i % 2;
            let (own, other) = if label == 1 {
                (0..polar, polar..2 * polar)
            } else {
                (polar..2 * polar, 0..polar)
            };
            let class_sign = if label == 1 { 1.0 } else { -1.0 };
            loop {
                let k = rng.random_range(spec.min_words..=spec.max_words);
                let mut pooled = vec![0.0; spec.dim];
                for _ in 0..k {
                    let u: f64 = rng.random();
                    let range = if u < spec.on_class_rate {
                        own.clone()
                    } else if u < spec.on_class_rate + spec.off_class_rate {
                        other.clone()
                    } else {
                        neutral.clone()
                    };
                    let w = &words[rng.random_range(range)];
                    pooled
                        .iter_mut()
                        .zip(w)
                        .for_each(|(p, x)| *p += x / k as f64);
                }
                if class_sign * dot(&pooled, &direction) >= spec.margin {
                    let values = pooled.iter().map(|v| (v * scale).round() / scale).collect();
                    break EmbeddingVector::new(label, values);
                }
            }
        })
        .collect();
    Dataset {
        classes: 2,
        records,
    }
}
