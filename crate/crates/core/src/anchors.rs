//! Anchors for text.
//!
//! An anchor is a set of token positions of the explained document. Its
//! precision is the probability that the classifier keeps its original
//! decision on perturbed copies where the anchored tokens are fixed and every
//! other token is independently replaced by [`UNK`] with probability 1/2.
//! The explanation is the shortest anchor whose precision reaches `1 − ε`.
//!
//! Candidates are sets of distinct words. By default each chosen word anchors
//! only its first occurrence, so the remaining occurrences stay free and can
//! keep the word present on their own; this is what makes anchors depend on
//! word multiplicities.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LocalDictionary};
use crate::error::{Error, Result};
use crate::models::{Classifier, DnfClassifier};

/// Replacement token for masked positions; out of vocabulary for any
/// vectorizer fitted on ordinary text.
pub const UNK: &str = "unk";

pub const EXHAUSTIVE_MAX_WORDS: usize = 12;
pub const BRUTE_FORCE_MAX_FREE: usize = 20;

// precision ties closer than this are treated as equal
const PRECISION_TIE: f64 = 1e-12;

/// Which occurrences of a chosen word an anchor fixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Occurrences {
    #[default]
    First,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    pub epsilon: f64,
    pub batch_size: usize,
    pub delta: f64,
    pub beam_width: usize,
    pub max_batches: usize,
    pub occurrences: Occurrences,
    pub seed: u64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            epsilon: 0.05,
            batch_size: 10,
            delta: 0.1,
            beam_width: 4,
            max_batches: 200,
            occurrences: Occurrences::First,
            seed: 0,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.epsilon) {
            return Err(Error::InvalidConfig(format!("epsilon must be in (0, 1), got {}", self.epsilon)));
        }
        if !open_unit(self.delta) {
            return Err(Error::InvalidConfig(format!("delta must be in (0, 1), got {}", self.delta)));
        }
        if self.batch_size == 0 || self.beam_width == 0 || self.max_batches == 0 {
            return Err(Error::InvalidConfig(
                "batch_size, beam_width and max_batches must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        1.0 - self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Anchor {
    /// Anchored token positions, ascending.
    pub positions: Vec<usize>,
    /// Tokens at `positions`.
    pub words: Vec<String>,
    pub precision: f64,
    /// `false` when the beam search ran out of budget without certifying
    /// any candidate.
    pub converged: bool,
    pub model_calls: usize,
}

impl Anchor {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Distinct anchored words, in position order.
    pub fn distinct_words(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.words
            .iter()
            .filter(|w| seen.insert(w.as_str()))
            .cloned()
            .collect()
    }
}

/// Empirical precision with two-sided Hoeffding bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionEstimate {
    pub mean: f64,
    pub n_samples: usize,
    pub lower: f64,
    pub upper: f64,
}

impl PrecisionEstimate {
    pub fn from_counts(hits: usize, n_samples: usize, delta: f64) -> Self {
        if n_samples == 0 {
            return PrecisionEstimate {
                mean: 0.0,
                n_samples,
                lower: 0.0,
                upper: 1.0,
            };
        }
        let n = n_samples as f64;
        let mean = hits as f64 / n;
        let radius = ((2.0 / delta).ln() / (2.0 * n)).sqrt();
        PrecisionEstimate {
            mean,
            n_samples,
            lower: (mean - radius).max(0.0),
            upper: (mean + radius).min(1.0),
        }
    }
}

fn check_positions(doc: &Document, positions: &[usize]) -> Result<()> {
    match positions.iter().find(|&&p| p >= doc.len()) {
        Some(&position) => Err(Error::PositionOutOfRange {
            position,
            len: doc.len(),
        }),
        None => Ok(()),
    }
}

fn fixed_mask(doc: &Document, positions: &[usize]) -> Vec<bool> {
    let mut fixed = vec![false; doc.len()];
    for &p in positions {
        fixed[p] = true;
    }
    fixed
}

fn perturb<R: Rng + ?Sized>(doc: &Document, fixed: &[bool], rng: &mut R) -> Document {
    Document::from_tokens(doc.tokens().iter().zip(fixed).map(|(t, &keep)| {
        if keep || rng.random_bool(0.5) {
            t.as_str()
        } else {
            UNK
        }
    }))
}

/// `n` perturbed copies of `doc` with `positions` held fixed.
pub fn sample_conditioned<R: Rng + ?Sized>(
    doc: &Document,
    positions: &[usize],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Document>> {
    check_positions(doc, positions)?;
    let fixed = fixed_mask(doc, positions);
    Ok((0..n).map(|_| perturb(doc, &fixed, rng)).collect())
}

/// Precision estimated from `cfg.max_batches × cfg.batch_size` samples.
pub fn empirical_precision<C: Classifier + ?Sized, R: Rng + ?Sized>(
    f: &C,
    doc: &Document,
    positions: &[usize],
    cfg: &AnchorConfig,
    rng: &mut R,
) -> Result<PrecisionEstimate> {
    check_positions(doc, positions)?;
    let target = f.predict(doc);
    let fixed = fixed_mask(doc, positions);
    let n = cfg.max_batches * cfg.batch_size;
    let hits = (0..n)
        .filter(|_| f.predict(&perturb(doc, &fixed, rng)) == target)
        .count();
    Ok(PrecisionEstimate::from_counts(hits, n, cfg.delta))
}

/// Closed-form precision for a DNF classifier. Words are present
/// independently: with probability 1 if any of their positions is anchored,
/// else `1 − 2^{−m}`. The probability that some clause holds follows by
/// inclusion–exclusion over clauses.
pub fn exact_precision_dnf(clf: &DnfClassifier, doc: &Document, positions: &[usize]) -> Result<f64> {
    check_positions(doc, positions)?;
    if clf.words().contains(&UNK) {
        return Err(Error::InvalidModel(format!(
            "the placeholder `{UNK}` cannot appear in a clause"
        )));
    }
    let dict = doc.local_dictionary();
    let anchored: HashSet<&str> = positions.iter().map(|&p| doc.tokens()[p].as_str()).collect();
    let presence = |w: &str| -> f64 {
        if anchored.contains(w) {
            1.0
        } else {
            match dict.multiplicity(w) {
                0 => 0.0,
                m => 1.0 - 0.5f64.powi(m as i32),
            }
        }
    };

    let clauses = clf.clauses();
    if clauses.len() > 20 {
        return Err(Error::TooLarge {
            what: "number of clauses",
            actual: clauses.len(),
            limit: 20,
        });
    }
    let mut positive = 0.0;
    for subset in 1u32..(1 << clauses.len()) {
        let words: BTreeSet<&str> = clauses
            .iter()
            .enumerate()
            .filter(|(k, _)| subset & (1 << k) != 0)
            .flat_map(|(_, c)| c.iter().map(String::as_str))
            .collect();
        let joint: f64 = words.into_iter().map(presence).product();
        if subset.count_ones() % 2 == 1 {
            positive += joint;
        } else {
            positive -= joint;
        }
    }
    let positive = positive.clamp(0.0, 1.0);
    Ok(if clf.predict(doc) == 1 {
        positive
    } else {
        1.0 - positive
    })
}

/// Precision by enumerating all `2^free` replacement patterns.
pub fn exact_precision_bruteforce<C: Classifier + ?Sized>(
    f: &C,
    doc: &Document,
    positions: &[usize],
) -> Result<f64> {
    check_positions(doc, positions)?;
    let fixed = fixed_mask(doc, positions);
    let free: Vec<usize> = (0..doc.len()).filter(|&p| !fixed[p]).collect();
    if free.len() > BRUTE_FORCE_MAX_FREE {
        return Err(Error::TooLarge {
            what: "number of free positions",
            actual: free.len(),
            limit: BRUTE_FORCE_MAX_FREE,
        });
    }
    let target = f.predict(doc);
    let mut tokens: Vec<&str> = doc.tokens().iter().map(String::as_str).collect();
    let mut hits = 0u64;
    for pattern in 0u32..(1 << free.len()) {
        for (k, &p) in free.iter().enumerate() {
            tokens[p] = if pattern & (1 << k) != 0 {
                UNK
            } else {
                doc.tokens()[p].as_str()
            };
        }
        if f.predict(&Document::from_tokens(tokens.iter().copied())) == target {
            hits += 1;
        }
    }
    Ok(hits as f64 / (1u64 << free.len()) as f64)
}

/// Positions anchored when the local-dictionary words `word_ids` are chosen.
pub fn anchor_positions(dict: &LocalDictionary, word_ids: &[usize], occurrences: Occurrences) -> Vec<usize> {
    let mut positions: Vec<usize> = word_ids
        .iter()
        .flat_map(|&j| {
            let e = &dict.entries()[j];
            match occurrences {
                Occurrences::First => e.positions[..1].to_vec(),
                Occurrences::All => e.positions.clone(),
            }
        })
        .collect();
    positions.sort_unstable();
    positions
}

fn make_anchor(doc: &Document, positions: Vec<usize>, precision: f64, converged: bool, model_calls: usize) -> Anchor {
    let words = positions.iter().map(|&p| doc.tokens()[p].clone()).collect();
    Anchor {
        positions,
        words,
        precision,
        converged,
        model_calls,
    }
}

/// Higher precision first, then lexicographically smaller positions.
fn better(a_prec: f64, a_pos: &[usize], b_prec: f64, b_pos: &[usize]) -> bool {
    if (a_prec - b_prec).abs() > PRECISION_TIE {
        return a_prec > b_prec;
    }
    a_pos < b_pos
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Smallest anchor with `precision(positions) ≥ 1 − epsilon`, enumerating
/// word sets by increasing size. Falls back to anchoring every position.
pub fn search_anchor_exhaustive<P>(
    doc: &Document,
    epsilon: f64,
    occurrences: Occurrences,
    mut precision: P,
) -> Result<Anchor>
where
    P: FnMut(&[usize]) -> Result<f64>,
{
    let dict = doc.local_dictionary();
    let d = dict.len();
    if d > EXHAUSTIVE_MAX_WORDS {
        return Err(Error::TooLarge {
            what: "local dictionary size",
            actual: d,
            limit: EXHAUSTIVE_MAX_WORDS,
        });
    }
    let threshold = 1.0 - epsilon;
    for k in 0..=d {
        let mut best: Option<(f64, Vec<usize>)> = None;
        for ids in combinations(d, k) {
            let positions = anchor_positions(&dict, &ids, occurrences);
            let p = precision(&positions)?;
            if p < threshold {
                continue;
            }
            let replace = match &best {
                None => true,
                Some((bp, bpos)) => better(p, &positions, *bp, bpos),
            };
            if replace {
                best = Some((p, positions));
            }
        }
        if let Some((p, positions)) = best {
            return Ok(make_anchor(doc, positions, p, true, 0));
        }
    }
    Ok(make_anchor(doc, (0..doc.len()).collect(), 1.0, true, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Accepted,
    Rejected,
    Undecided,
}

struct Candidate {
    word_ids: Vec<usize>,
    positions: Vec<usize>,
    estimate: PrecisionEstimate,
    verdict: Verdict,
}

/// Samples a candidate in batches until its Hoeffding interval clears the
/// threshold on either side or the batch budget runs out.
fn evaluate<C: Classifier + ?Sized>(
    f: &C,
    doc: &Document,
    target: u8,
    positions: &[usize],
    cfg: &AnchorConfig,
    rng: &mut ChaCha8Rng,
    model_calls: &mut usize,
) -> (PrecisionEstimate, Verdict) {
    let fixed = fixed_mask(doc, positions);
    let threshold = cfg.threshold();
    let (mut hits, mut n) = (0, 0);
    let mut estimate = PrecisionEstimate::from_counts(0, 0, cfg.delta);
    for _ in 0..cfg.max_batches {
        for _ in 0..cfg.batch_size {
            if f.predict(&perturb(doc, &fixed, rng)) == target {
                hits += 1;
            }
        }
        n += cfg.batch_size;
        *model_calls += cfg.batch_size;
        estimate = PrecisionEstimate::from_counts(hits, n, cfg.delta);
        if estimate.lower >= threshold {
            return (estimate, Verdict::Accepted);
        }
        if estimate.upper < threshold {
            return (estimate, Verdict::Rejected);
        }
    }
    (estimate, Verdict::Undecided)
}

fn rank_by_lower(a: &Candidate, b: &Candidate) -> Ordering {
    b.estimate
        .lower
        .total_cmp(&a.estimate.lower)
        .then(b.estimate.mean.total_cmp(&a.estimate.mean))
        .then_with(|| a.positions.cmp(&b.positions))
}

/// Beam search over word sets with sampled precision. Each round extends
/// the `beam_width` candidates with the best lower bounds by one word; the
/// first round with a certified candidate returns its most precise member.
pub fn search_anchor_beam<C: Classifier + ?Sized>(
    f: &C,
    doc: &Document,
    cfg: &AnchorConfig,
) -> Result<Anchor> {
    cfg.validate()?;
    let dict = doc.local_dictionary();
    let target = f.predict(doc);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut calls = 0;

    let (estimate, verdict) = evaluate(f, doc, target, &[], cfg, &mut rng, &mut calls);
    if verdict == Verdict::Accepted {
        return Ok(make_anchor(doc, Vec::new(), estimate.mean, true, calls));
    }
    let mut best_seen = Candidate {
        word_ids: Vec::new(),
        positions: Vec::new(),
        estimate,
        verdict,
    };
    let mut beam: Vec<Vec<usize>> = vec![Vec::new()];

    for _ in 0..dict.len() {
        let extensions: BTreeSet<Vec<usize>> = beam
            .iter()
            .flat_map(|ids| {
                (0..dict.len()).filter(|j| !ids.contains(j)).map(move |j| {
                    let mut next = ids.clone();
                    next.push(j);
                    next.sort_unstable();
                    next
                })
            })
            .collect();
        if extensions.is_empty() {
            break;
        }
        let mut round: Vec<Candidate> = extensions
            .into_iter()
            .map(|word_ids| {
                let positions = anchor_positions(&dict, &word_ids, cfg.occurrences);
                let (estimate, verdict) = evaluate(f, doc, target, &positions, cfg, &mut rng, &mut calls);
                Candidate {
                    word_ids,
                    positions,
                    estimate,
                    verdict,
                }
            })
            .collect();

        let accepted = round
            .iter()
            .filter(|c| c.verdict == Verdict::Accepted)
            .reduce(|a, b| {
                if better(b.estimate.mean, &b.positions, a.estimate.mean, &a.positions) {
                    b
                } else {
                    a
                }
            });
        if let Some(c) = accepted {
            return Ok(make_anchor(doc, c.positions.clone(), c.estimate.mean, true, calls));
        }

        round.sort_by(rank_by_lower);
        if rank_by_lower(&round[0], &best_seen) == Ordering::Less {
            let top = &round[0];
            best_seen = Candidate {
                word_ids: top.word_ids.clone(),
                positions: top.positions.clone(),
                estimate: top.estimate,
                verdict: top.verdict,
            };
        }
        beam = round
            .into_iter()
            .take(cfg.beam_width)
            .map(|c| c.word_ids)
            .collect();
    }
    Ok(make_anchor(
        doc,
        best_seen.positions,
        best_seen.estimate.mean,
        false,
        calls,
    ))
}
