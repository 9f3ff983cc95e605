//! Surface-overlap baselines: BLEU, ROUGE-N, ROUGE-L and METEOR.
//!
//! Sentence level, single reference, values in `[0, 1]`. Tokens come from
//! [`crate::textproc::tokenize`] so these metrics see the same text as the
//! hallucination score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::molhallu::DEFAULT_THETA;
use crate::textproc::{extract_ngrams, tokenize};

/// F-measure recall weight for ROUGE-L.
pub const ROUGE_L_BETA: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub theta: f64,
    pub meteor_gamma: f64,
    pub meteor_exponent: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            theta: DEFAULT_THETA,
            meteor_gamma: 0.5,
            meteor_exponent: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineScores {
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub meteor: f64,
}

impl BaselineScores {
    pub fn compute(pred: &str, reference: &str, config: &BaselineConfig) -> Result<Self> {
        let p = tokenize(pred).tokens;
        let r = tokenize(reference).tokens;
        Ok(BaselineScores {
            bleu2: bleu(&p, &r, 2, None, config.theta)?,
            bleu4: bleu(&p, &r, 4, None, config.theta)?,
            rouge1: rouge_n(&p, &r, 1)?,
            rouge2: rouge_n(&p, &r, 2)?,
            rouge_l: rouge_l(&p, &r),
            meteor: meteor(&p, &r, config.meteor_gamma, config.meteor_exponent),
        })
    }
}

/// Brevity penalty: 1 when the candidate is longer than the reference,
/// otherwise `exp(1 - r/c)`.
pub fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len == 0 {
        0.0
    } else if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// Clipped n-gram precision; 0 when the candidate has no n-grams of that order.
pub fn modified_precision(pred: &[String], reference: &[String], order: usize) -> Result<f64> {
    let cand = extract_ngrams(pred, order)?;
    let total = cand.total();
    if total == 0 {
        return Ok(0.0);
    }
    let refs = extract_ngrams(reference, order)?;
    Ok(cand.clipped_overlap(&refs) as f64 / total as f64)
}

/// `BP · exp(Σ w_n log p_n)` with zero precisions floored at `theta`.
/// Weights default to uniform `1/max_order`.
pub fn bleu(
    pred: &[String],
    reference: &[String],
    max_order: usize,
    weights: Option<&[f64]>,
    theta: f64,
) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Invalid("BLEU needs a non-empty reference".into()));
    }
    if !(1..=4).contains(&max_order) {
        return Err(Error::Invalid(format!("BLEU order must be in 1..=4, got {max_order}")));
    }
    let uniform = vec![1.0 / max_order as f64; max_order];
    let weights = weights.unwrap_or(&uniform);
    if weights.len() != max_order {
        return Err(Error::Invalid(format!(
            "expected {max_order} BLEU weights, got {}",
            weights.len()
        )));
    }
    let bp = brevity_penalty(pred.len(), reference.len());
    if bp == 0.0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for (n, w) in (1..=max_order).zip(weights) {
        log_sum += w * modified_precision(pred, reference, n)?.max(theta).ln();
    }
    Ok(bp * log_sum.exp())
}

/// Recall-oriented n-gram overlap; 0 when the reference has no n-grams.
pub fn rouge_n(pred: &[String], reference: &[String], n: usize) -> Result<f64> {
    let refs = extract_ngrams(reference, n)?;
    let total = refs.total();
    if total == 0 {
        return Ok(0.0);
    }
    let cand = extract_ngrams(pred, n)?;
    Ok(refs.clipped_overlap(&cand) as f64 / total as f64)
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure `(1 + β²)·R·P / (R + β²·P)` with β = 1.2.
pub fn rouge_l(pred: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_len(pred, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / pred.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = ROUGE_L_BETA * ROUGE_L_BETA;
    (1.0 + b2) * r * p / (r + b2 * p)
}

/// Unigram alignment used by METEOR, as `(pred index, ref index)` pairs in
/// prediction order.
///
/// Each prediction token takes the reference slot right after its
/// predecessor's slot when that continues the current chunk, otherwise the
/// leftmost unused reference occurrence of the same token.
pub fn meteor_alignment(pred: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut used = vec![false; reference.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, tok) in pred.iter().enumerate() {
        let continuation = match pairs.last() {
            Some(&(pi, pj))
                if pi + 1 == i && pj + 1 < reference.len() && !used[pj + 1] && reference[pj + 1] == *tok =>
            {
                Some(pj + 1)
            }
            _ => None,
        };
        let slot = continuation.or_else(|| (0..reference.len()).find(|&j| !used[j] && reference[j] == *tok));
        if let Some(j) = slot {
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}

/// Number of maximal runs adjacent in both prediction and reference.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

/// `(1 - γ·(chunks/matches)^exponent) · 10PR / (R + 9P)` over exact unigram
/// matches.
pub fn meteor(pred: &[String], reference: &[String], gamma: f64, exponent: f64) -> f64 {
    let pairs = meteor_alignment(pred, reference);
    let matches = pairs.len();
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / pred.len() as f64;
    let r = matches as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = gamma * (count_chunks(&pairs) as f64 / matches as f64).powf(exponent);
    fmean * (1.0 - penalty)
}
