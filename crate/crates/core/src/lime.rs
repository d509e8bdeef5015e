//! LIME for text.
//!
//! Each perturbed sample deletes a random set of word types: the number of
//! deletions `s` is uniform on `{1, …, d}`, the deleted set is uniform among
//! the `s`-subsets of the local dictionary, and every occurrence of a deleted
//! word is removed. Samples are weighted by an exponential kernel on the
//! cosine distance between the kept-word mask and the all-ones mask, and a
//! weighted ridge regression of the binary prediction on the mask gives one
//! coefficient per distinct word.
//!
//! [`exact_expected_explanation`] enumerates the sampling law instead of
//! drawing from it, which gives the population surrogate for small `d`.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LocalDictionary};
use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::wls::NormalEquations;

/// Largest local dictionary [`exact_expected_explanation`] will enumerate.
pub const EXACT_MAX_WORDS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 1000,
            kernel_width: 0.25,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("LIME needs at least one sample".into()));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel width must be positive, got {}",
                self.kernel_width
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ridge must be nonnegative, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// One perturbed document, described over the local dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeSample {
    /// `true` where the word type is kept.
    pub mask: Vec<bool>,
    /// Local-dictionary indices of the deleted words, ascending.
    pub deleted: Vec<usize>,
    pub label: Option<u8>,
    pub weight: f64,
}

/// Per-word surrogate coefficients, in first-occurrence order.
#[derive(Debug, Clone, PartialEq)]
pub struct LimeExplanation {
    pub words: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl LimeExplanation {
    pub fn coefficient(&self, word: &str) -> Option<f64> {
        self.words
            .iter()
            .position(|w| w == word)
            .map(|i| self.coefficients[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.words
            .iter()
            .map(String::as_str)
            .zip(self.coefficients.iter().copied())
    }
}

/// Draws `cfg.n_samples` deletion masks; labels are left unset and weights
/// are computed from `cfg.kernel_width`.
pub fn sample_lime<R: Rng + ?Sized>(
    doc: &Document,
    cfg: &LimeConfig,
    rng: &mut R,
) -> Result<Vec<LimeSample>> {
    let d = doc.local_dictionary().len();
    if d == 0 {
        return Err(Error::EmptyDocument);
    }
    Ok((0..cfg.n_samples)
        .map(|_| {
            let s = rng.random_range(1..=d);
            let mut deleted = index::sample(rng, d, s).into_vec();
            deleted.sort_unstable();
            let mut mask = vec![true; d];
            for &j in &deleted {
                mask[j] = false;
            }
            let weight = sample_weight(&mask, cfg.kernel_width);
            LimeSample {
                mask,
                deleted,
                label: None,
                weight,
            }
        })
        .collect())
}

/// Removes every occurrence of each word in `deleted`.
pub fn apply_mask(doc: &Document, deleted: &[&str]) -> Result<Document> {
    let dict = doc.local_dictionary();
    let mut keep = vec![true; dict.len()];
    for w in deleted {
        let j = dict
            .index_of(w)
            .ok_or_else(|| Error::WordNotInDocument((*w).to_owned()))?;
        keep[j] = false;
    }
    Ok(masked(doc, &dict, &keep))
}

fn masked(doc: &Document, dict: &LocalDictionary, keep: &[bool]) -> Document {
    Document::from_tokens(
        doc.tokens()
            .iter()
            .filter(|t| keep[dict.index_of(t).expect("token of its own document")])
            .cloned(),
    )
}

/// `exp(−D² / (2ν²))` with `D` the cosine distance between the all-ones
/// vector and `mask`. An all-zero mask has distance 1.
pub fn sample_weight(mask: &[bool], kernel_width: f64) -> f64 {
    let d = mask.len() as f64;
    let kept = mask.iter().filter(|&&m| m).count() as f64;
    let distance = if kept == 0.0 {
        1.0
    } else {
        1.0 - kept / (d.sqrt() * kept.sqrt())
    };
    (-distance * distance / (2.0 * kernel_width * kernel_width)).exp()
}

/// Intercept and per-mask-column coefficients of the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Weighted ridge fit of the sample labels on their masks.
pub fn fit_surrogate(samples: &[LimeSample], ridge: f64) -> Result<SurrogateFit> {
    let first = samples.first().ok_or(Error::EmptyInput)?;
    let mut ne = NormalEquations::new(first.mask.len());
    for s in samples {
        if s.mask.len() != first.mask.len() {
            return Err(Error::InvalidConfig("samples have different mask lengths".into()));
        }
        let y = s
            .label
            .ok_or_else(|| Error::InvalidConfig("sample label is unset".into()))?;
        ne.add_binary(&s.mask, f64::from(y), s.weight);
    }
    let (intercept, coefficients) = ne.solve(ridge)?;
    Ok(SurrogateFit {
        intercept,
        coefficients,
    })
}

/// Full LIME pipeline; deterministic given `cfg.seed`.
pub fn explain_lime<C: Classifier + ?Sized>(
    f: &C,
    doc: &Document,
    cfg: &LimeConfig,
) -> Result<LimeExplanation> {
    cfg.validate()?;
    let dict = doc.local_dictionary();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = sample_lime(doc, cfg, &mut rng)?;
    for s in samples.iter_mut() {
        s.label = Some(f.predict(&masked(doc, &dict, &s.mask)));
    }
    let fit = fit_surrogate(&samples, cfg.ridge)?;
    Ok(LimeExplanation {
        words: dict.words().map(str::to_owned).collect(),
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Population surrogate: every nonempty deleted set `S` is weighted by its
/// sampling probability `(1/d)·C(d,|S|)⁻¹` times its kernel weight.
pub fn exact_expected_explanation<C: Classifier + ?Sized>(
    f: &C,
    doc: &Document,
    kernel_width: f64,
    ridge: f64,
) -> Result<LimeExplanation> {
    let dict = doc.local_dictionary();
    let d = dict.len();
    if d == 0 {
        return Err(Error::EmptyDocument);
    }
    if d > EXACT_MAX_WORDS {
        return Err(Error::TooLarge {
            what: "local dictionary size",
            actual: d,
            limit: EXACT_MAX_WORDS,
        });
    }
    let mut ne = NormalEquations::new(d);
    let mut mask = vec![true; d];
    for deleted_bits in 1u32..(1 << d) {
        for (j, m) in mask.iter_mut().enumerate() {
            *m = deleted_bits & (1 << j) == 0;
        }
        let s = deleted_bits.count_ones() as usize;
        let prob = 1.0 / (d as f64 * binomial(d, s));
        let y = f64::from(f.predict(&masked(doc, &dict, &mask)));
        ne.add_binary(&mask, y, prob * sample_weight(&mask, kernel_width));
    }
    let (intercept, coefficients) = ne.solve(ridge)?;
    Ok(LimeExplanation {
        words: dict.words().map(str::to_owned).collect(),
        coefficients,
        intercept,
        n_samples: 0,
        seed: 0,
    })
}
