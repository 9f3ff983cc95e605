//! Entity-entailment hallucination score.
//!
//! For a predicted answer `A`, ground truth `G` and molecular description
//! `T`:
//!
//! - entities of `A` are rewarded 1 when `G` contains them, `w(e)` when only
//!   `T` does, and 0 otherwise; per-order means are combined by a smoothed
//!   geometric mean into the entity precision;
//! - n-grams of `A` outside any entity get a clipped BLEU-style precision;
//! - the two are blended with `γ = 1 - sqrt(N_wrong / N_total)`;
//! - recall is a frequency-weighted n-gram recall of `G`;
//! - the sample score is the F1 of the blended precision and the recall, and
//!   a corpus score is the arithmetic mean of sample scores.
//!
//! Orders with nothing to score are *absent* (`None`) and dropped from the
//! geometric means instead of counting as zero.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{EntityId, EntityLexicon};
use crate::textproc::{
    entity_mask, extract_entities, extract_ngrams, extract_ngrams_where, tokenize, EntitySpan, NGramMultiset,
    TokenizedText,
};

pub const DEFAULT_THETA: f64 = 1e-5;
pub const MAX_ORDER: usize = 4;

/// Per-order component; `None` marks an order with nothing to score.
pub type Component = Option<f64>;

/// Which side of the precision blend `γ` weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaOrientation {
    /// `P = γ·P_nonentity + (1 - γ)·P_entity`
    #[default]
    AsPrinted,
    /// `P = (1 - γ)·P_nonentity + γ·P_entity`
    Inverted,
}

impl FromStr for GammaOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as-printed" => Ok(GammaOrientation::AsPrinted),
            "inverted" => Ok(GammaOrientation::Inverted),
            other => Err(Error::Invalid(format!("unknown gamma orientation {other:?}"))),
        }
    }
}

impl fmt::Display for GammaOrientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaOrientation::AsPrinted => "as-printed",
            GammaOrientation::Inverted => "inverted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MolHalluConfig {
    /// Floor applied to per-order components before taking logs.
    pub theta: f64,
    pub gamma_orientation: GammaOrientation,
}

impl Default for MolHalluConfig {
    fn default() -> Self {
        MolHalluConfig {
            theta: DEFAULT_THETA,
            gamma_orientation: GammaOrientation::AsPrinted,
        }
    }
}

impl MolHalluConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta > 0.0 && self.theta < 1.0 {
            Ok(())
        } else {
            Err(Error::Invalid(format!("theta must be in (0, 1), got {}", self.theta)))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringSample {
    pub id: String,
    pub smiles: String,
    pub question: String,
    pub answer_pred: String,
    pub answer_gt: String,
    pub description: String,
}

/// What the prediction is checked against.
#[derive(Debug, Clone)]
pub struct EntailmentContext<'a> {
    pub gt_entities: HashSet<EntityId>,
    pub desc_entities: HashSet<EntityId>,
    /// Full (unfiltered) n-grams of the ground truth, orders 1..=4.
    pub gt_ngrams: Vec<NGramMultiset<'a>>,
}

impl<'a> EntailmentContext<'a> {
    pub fn new(gt: &'a TokenizedText, gt_spans: &[EntitySpan], desc_spans: &[EntitySpan]) -> Self {
        EntailmentContext {
            gt_entities: gt_spans.iter().map(|s| s.record).collect(),
            desc_entities: desc_spans.iter().map(|s| s.record).collect(),
            gt_ngrams: (1..=MAX_ORDER)
                .map(|n| extract_ngrams(&gt.tokens, n).expect("order in range"))
                .collect(),
        }
    }

    fn is_counterfactual(&self, id: EntityId) -> bool {
        !self.gt_entities.contains(&id) && !self.desc_entities.contains(&id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolHalluScore {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gamma: f64,
    pub n_wrong: usize,
    pub n_total: usize,
    pub n_counterfactual: usize,
    /// Smoothed geometric mean of the entity components, if any were present.
    pub entity_precision: Option<f64>,
    /// Smoothed geometric mean of the non-entity components, if any were present.
    pub nonentity_precision: Option<f64>,
    pub per_order_entity_precision: [Component; MAX_ORDER],
    pub per_order_nonentity_precision: [Component; MAX_ORDER],
    pub per_order_recall: [Component; MAX_ORDER],
}

/// Fraction of `entities` whose record appears in the description; 0 for an
/// empty list.
pub fn entailment_weight(entities: &[EntitySpan], desc_entities: &HashSet<EntityId>) -> f64 {
    if entities.is_empty() {
        return 0.0;
    }
    let hits = entities.iter().filter(|e| desc_entities.contains(&e.record)).count();
    hits as f64 / entities.len() as f64
}

/// Mean reward of the predicted entities scored at `order`.
pub fn entity_precision_order(pred_spans: &[EntitySpan], order: usize, ctx: &EntailmentContext<'_>) -> Component {
    let at_order: Vec<&EntitySpan> = pred_spans.iter().filter(|s| s.order() == order).collect();
    if at_order.is_empty() {
        return None;
    }
    let reward: f64 = at_order
        .iter()
        .map(|span| {
            if ctx.gt_entities.contains(&span.record) {
                1.0
            } else {
                entailment_weight(std::slice::from_ref(*span), &ctx.desc_entities)
            }
        })
        .sum();
    Some(reward / at_order.len() as f64)
}

/// Clipped n-gram precision over n-grams that avoid every entity token.
pub fn nonentity_precision_order(
    pred: &[String],
    pred_spans: &[EntitySpan],
    gt: &[String],
    gt_spans: &[EntitySpan],
    order: usize,
) -> Component {
    let pred_mask = entity_mask(pred.len(), pred_spans);
    let gt_mask = entity_mask(gt.len(), gt_spans);
    let cand = extract_ngrams_where(pred, order, |i| !pred_mask[i]).expect("order in range");
    let total = cand.total();
    if total == 0 {
        return None;
    }
    let refs = extract_ngrams_where(gt, order, |i| !gt_mask[i]).expect("order in range");
    Some(cand.clipped_overlap(&refs) as f64 / total as f64)
}

/// exp(mean(ln c)) over present components, each floored at `theta`.
pub fn geometric_mean_smoothed(components: &[Component], theta: f64) -> Component {
    let present: Vec<f64> = components.iter().flatten().copied().collect();
    if present.is_empty() {
        return None;
    }
    let log_sum: f64 = present.iter().map(|&c| c.max(theta).ln()).sum();
    Some((log_sum / present.len() as f64).exp())
}

/// `1 - sqrt(n_wrong / n_total)`; 1 when there are no entities.
pub fn gamma(n_wrong: usize, n_total: usize) -> Result<f64> {
    if n_wrong > n_total {
        return Err(Error::Invalid(format!(
            "n_wrong ({n_wrong}) exceeds n_total ({n_total})"
        )));
    }
    if n_total == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n_wrong as f64 / n_total as f64).sqrt())
}

/// Convex blend of the non-entity and entity precisions.
///
/// When exactly one side is absent the other is returned unblended; when
/// both are absent the precision is 0.
pub fn combine_precision(gamma: f64, nonentity: Component, entity: Component, orientation: GammaOrientation) -> f64 {
    match (nonentity, entity) {
        (Some(ne), Some(e)) => match orientation {
            GammaOrientation::AsPrinted => gamma * ne + (1.0 - gamma) * e,
            GammaOrientation::Inverted => (1.0 - gamma) * ne + gamma * e,
        },
        (Some(ne), None) => ne,
        (None, Some(e)) => e,
        (None, None) => 0.0,
    }
}

/// Per-order `Σ min(c_pred, c_gt) / Σ c_gt` over ground-truth n-grams.
pub fn recall_per_order(pred: &[String], gt: &[String]) -> [Component; MAX_ORDER] {
    let mut out = [None; MAX_ORDER];
    for (slot, n) in out.iter_mut().zip(1..=MAX_ORDER) {
        let gt_grams = extract_ngrams(gt, n).expect("order in range");
        let total = gt_grams.total();
        if total == 0 {
            continue;
        }
        let pred_grams = extract_ngrams(pred, n).expect("order in range");
        *slot = Some(gt_grams.clipped_overlap(&pred_grams) as f64 / total as f64);
    }
    out
}

pub fn entailed_recall(pred: &[String], gt: &[String], theta: f64) -> f64 {
    geometric_mean_smoothed(&recall_per_order(pred, gt), theta).unwrap_or(0.0)
}

/// Predicted entities found in neither the ground truth nor the description.
pub fn counterfactual_count(pred_spans: &[EntitySpan], ctx: &EntailmentContext<'_>) -> usize {
    pred_spans.iter().filter(|s| ctx.is_counterfactual(s.record)).count()
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn score_sample(sample: &ScoringSample, lexicon: &EntityLexicon, config: &MolHalluConfig) -> MolHalluScore {
    let pred = tokenize(&sample.answer_pred);
    let gt = tokenize(&sample.answer_gt);
    let desc = tokenize(&sample.description);
    let pred_spans = extract_entities(&pred, lexicon);
    let gt_spans = extract_entities(&gt, lexicon);
    let desc_spans = extract_entities(&desc, lexicon);
    let ctx = EntailmentContext::new(&gt, &gt_spans, &desc_spans);

    let mut per_order_entity = [None; MAX_ORDER];
    let mut per_order_nonentity = [None; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        per_order_entity[n - 1] = entity_precision_order(&pred_spans, n, &ctx);
        per_order_nonentity[n - 1] = nonentity_precision_order(&pred.tokens, &pred_spans, &gt.tokens, &gt_spans, n);
    }
    let entity_precision = geometric_mean_smoothed(&per_order_entity, config.theta);
    let nonentity_precision = geometric_mean_smoothed(&per_order_nonentity, config.theta);

    let n_total = pred_spans.len();
    let n_wrong = counterfactual_count(&pred_spans, &ctx);
    let gamma = gamma(n_wrong, n_total).expect("n_wrong is a subset count");
    let precision = combine_precision(gamma, nonentity_precision, entity_precision, config.gamma_orientation);

    let per_order_recall = recall_per_order(&pred.tokens, &gt.tokens);
    let recall = geometric_mean_smoothed(&per_order_recall, config.theta).unwrap_or(0.0);

    MolHalluScore {
        id: sample.id.clone(),
        precision,
        recall,
        f1: f1(precision, recall),
        gamma,
        n_wrong,
        n_total,
        n_counterfactual: n_wrong,
        entity_precision,
        nonentity_precision,
        per_order_entity_precision: per_order_entity,
        per_order_nonentity_precision: per_order_nonentity,
        per_order_recall,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusScore {
    /// Arithmetic mean of sample F1 values.
    pub mean_f1: f64,
    pub sample_scores: Vec<MolHalluScore>,
    /// Counterfactual-entity count → number of samples.
    pub histogram: BTreeMap<usize, usize>,
}

impl CorpusScore {
    pub fn from_scores(sample_scores: Vec<MolHalluScore>) -> Result<Self> {
        if sample_scores.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mean_f1 = sample_scores.iter().map(|s| s.f1).sum::<f64>() / sample_scores.len() as f64;
        let mut histogram = BTreeMap::new();
        for s in &sample_scores {
            *histogram.entry(s.n_counterfactual).or_insert(0) += 1;
        }
        Ok(CorpusScore {
            mean_f1,
            sample_scores,
            histogram,
        })
    }

    pub fn len(&self) -> usize {
        self.sample_scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_scores.is_empty()
    }

    pub fn mean_counterfactual(&self) -> f64 {
        self.sample_scores
            .iter()
            .map(|s| s.n_counterfactual as f64)
            .sum::<f64>()
            / self.len() as f64
    }
}

/// Scores samples in parallel; results keep input order.
pub fn score_corpus(
    samples: &[ScoringSample],
    lexicon: &EntityLexicon,
    config: &MolHalluConfig,
) -> Result<CorpusScore> {
    config.validate()?;
    let scores: Vec<MolHalluScore> = samples.par_iter().map(|s| score_sample(s, lexicon, config)).collect();
    CorpusScore::from_scores(scores)
}
