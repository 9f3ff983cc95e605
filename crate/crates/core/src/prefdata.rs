//! Training-data artifacts for hallucination reduction.
//!
//! Two outputs:
//!
//! - an SFT corpus of `(masked question, ground truth)` pairs, where every
//!   entity name in the question is replaced by "this molecule";
//! - a preference corpus of `(masked question, G+, [G-])` triples. `G+` is
//!   the ground truth. Negatives are the ground truth with some entities
//!   swapped for same-type lexicon entries, plus optional model samples
//!   supplied in an external file.
//!
//! Training itself (cross-entropy on the SFT pairs, DPO on the triples)
//! happens elsewhere; [`DATASET_README`] documents the expected use.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::mask_drug_names;
use crate::corpus::{read_jsonl, CorpusRecord};
use crate::error::{Error, Result};
use crate::lexicon::{EntityId, EntityLexicon, EntityType};
use crate::molhallu::{score_sample, MolHalluConfig, ScoringSample};
use crate::rng::{derive_rng, seeded};
use crate::textproc::{extract_entities, tokenize, EntitySpan};

pub const DEFAULT_SAMPLE_COUNT: usize = 2000;

/// Redraws per local negative before giving up on it.
const MAX_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftPair {
    pub question: String,
    pub answer: String,
}

pub fn build_sft_dataset(records: &[CorpusRecord], lexicon: &EntityLexicon) -> Vec<SftPair> {
    records
        .iter()
        .map(|r| SftPair {
            question: mask_drug_names(&r.question, lexicon).0,
            answer: r.answer_gt.clone(),
        })
        .collect()
}

/// How many entities a local negative perturbs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PerturbCount {
    /// Uniform in `1..=ceil(entities / 2)`, drawn per negative.
    #[default]
    Random,
    Fixed(usize),
}

impl FromStr for PerturbCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "random" {
            return Ok(PerturbCount::Random);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(PerturbCount::Fixed(k)),
            _ => Err(Error::Invalid(format!(
                "perturbation count must be \"random\" or a positive integer, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySwap {
    pub original: String,
    pub substitute: String,
    pub entity_type: EntityType,
}

/// Swap `k` randomly chosen entity spans of `answer` for same-type records.
///
/// Substitutes never come from `exclude` nor from the answer's own
/// entities. Spans without a candidate are left as they are. Fails with
/// [`Error::NoEntities`] when the answer has no entity, and with
/// [`Error::NoCandidate`] when no chosen span could be swapped.
pub fn perturb_entities_excluding<R: Rng + ?Sized>(
    answer: &str,
    lexicon: &EntityLexicon,
    count: PerturbCount,
    exclude: &HashSet<EntityId>,
    rng: &mut R,
) -> Result<(String, Vec<EntitySwap>)> {
    let tt = tokenize(answer);
    let spans = extract_entities(&tt, lexicon);
    if spans.is_empty() {
        return Err(Error::NoEntities);
    }
    let k = match count {
        PerturbCount::Fixed(k) => k.min(spans.len()),
        PerturbCount::Random => rng.gen_range(1..=spans.len().div_ceil(2)),
    };
    let mut chosen: Vec<usize> = sample_indices(rng, spans.len(), k).into_vec();
    chosen.sort_unstable();

    let mut blocked: HashSet<EntityId> = exclude.clone();
    blocked.extend(spans.iter().map(|s| s.record));

    let mut out = String::with_capacity(answer.len());
    let mut swaps = Vec::new();
    let mut cursor = 0;
    let mut last_type = None;
    for idx in chosen {
        let span: &EntitySpan = &spans[idx];
        let range = tt.source_range(span.start, span.len);
        if range.start < cursor {
            continue;
        }
        let ty = lexicon.get(span.record).entity_type;
        last_type = Some(ty);
        let Ok(sub) = lexicon.sample_replacement(ty, &blocked, rng) else {
            continue;
        };
        out.push_str(&answer[cursor..range.start]);
        out.push_str(&sub.surface);
        swaps.push(EntitySwap {
            original: answer[range.clone()].to_string(),
            substitute: sub.surface.clone(),
            entity_type: ty,
        });
        cursor = range.end;
    }
    if swaps.is_empty() {
        return Err(Error::NoCandidate(last_type.expect("at least one span chosen")));
    }
    out.push_str(&answer[cursor..]);
    Ok((out, swaps))
}

/// [`perturb_entities_excluding`] with no extra exclusions.
pub fn perturb_entities<R: Rng + ?Sized>(
    answer: &str,
    lexicon: &EntityLexicon,
    count: PerturbCount,
    rng: &mut R,
) -> Result<(String, Vec<EntitySwap>)> {
    perturb_entities_excluding(answer, lexicon, count, &HashSet::new(), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    EntityPerturbed,
    ExternalSampled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Negative {
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceTriple {
    pub id: String,
    pub question: String,
    pub g_plus: String,
    pub g_minus: Vec<Negative>,
}

/// One line of the external negatives file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalNegatives {
    pub id: String,
    pub texts: Vec<String>,
}

pub fn read_external_negatives(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let rows: Vec<ExternalNegatives> = read_jsonl(path)?;
    let mut map = BTreeMap::new();
    for row in rows {
        map.entry(row.id).or_insert_with(Vec::new).extend(row.texts);
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefConfig {
    pub sample_count: usize,
    /// Entity-perturbed negatives per triple.
    pub negatives_per_sample: usize,
    pub perturb: PerturbCount,
    pub seed: u64,
    /// Accept a corpus smaller than `sample_count` and use all of it.
    pub allow_smaller: bool,
    /// Scoring setup used to confirm each negative is penalized.
    pub scoring: MolHalluConfig,
}

impl PrefConfig {
    pub fn new(seed: u64) -> Self {
        PrefConfig {
            sample_count: DEFAULT_SAMPLE_COUNT,
            negatives_per_sample: 1,
            perturb: PerturbCount::Random,
            seed,
            allow_smaller: false,
            scoring: MolHalluConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefReport {
    pub seed: u64,
    pub requested: usize,
    pub selected: usize,
    pub emitted: usize,
    pub dropped_no_negatives: usize,
    pub local_negatives: usize,
    pub external_negatives: usize,
    /// Local negatives abandoned because no draw scored below the ground truth.
    pub rejected_perturbations: usize,
}

fn self_f1(rec: &CorpusRecord, lexicon: &EntityLexicon, cfg: &MolHalluConfig) -> f64 {
    score_against(&rec.answer_gt, rec, lexicon, cfg)
}

fn score_against(pred: &str, rec: &CorpusRecord, lexicon: &EntityLexicon, cfg: &MolHalluConfig) -> f64 {
    let sample = ScoringSample {
        id: rec.id.clone(),
        answer_pred: pred.to_string(),
        answer_gt: rec.answer_gt.clone(),
        description: rec.description.clone().unwrap_or_default(),
        ..Default::default()
    };
    score_sample(&sample, lexicon, cfg).f1
}

/// Sample QA pairs and attach negatives.
///
/// Local negatives swap entities for records found in neither the answer
/// nor the description, and are kept only when they score strictly below
/// the ground truth. Triples come out in corpus order.
pub fn build_preference_dataset(
    records: &[CorpusRecord],
    lexicon: &EntityLexicon,
    config: &PrefConfig,
    external: Option<&BTreeMap<String, Vec<String>>>,
) -> Result<(Vec<PreferenceTriple>, PrefReport)> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if records.len() < config.sample_count && !config.allow_smaller {
        return Err(Error::Invalid(format!(
            "corpus has {} records but {} were requested",
            records.len(),
            config.sample_count
        )));
    }
    let take = config.sample_count.min(records.len());
    let mut picked = sample_indices(&mut seeded(config.seed), records.len(), take).into_vec();
    picked.sort_unstable();

    let mut report = PrefReport {
        seed: config.seed,
        requested: config.sample_count,
        selected: take,
        ..Default::default()
    };
    let mut triples = Vec::with_capacity(take);

    for idx in picked {
        let rec = &records[idx];
        let mut rng = derive_rng(config.seed, &rec.id);
        let desc = rec.description.clone().unwrap_or_default();
        let exclude: HashSet<EntityId> = extract_entities(&tokenize(&desc), lexicon)
            .into_iter()
            .map(|s| s.record)
            .collect();
        let ceiling = self_f1(rec, lexicon, &config.scoring);

        let mut g_minus = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        'negatives: for _ in 0..config.negatives_per_sample {
            for _ in 0..MAX_ATTEMPTS {
                match perturb_entities_excluding(&rec.answer_gt, lexicon, config.perturb, &exclude, &mut rng) {
                    Ok((text, _)) => {
                        if seen.contains(&text) || score_against(&text, rec, lexicon, &config.scoring) >= ceiling {
                            continue;
                        }
                        seen.insert(text.clone());
                        g_minus.push(Negative {
                            text,
                            provenance: Provenance::EntityPerturbed,
                        });
                        continue 'negatives;
                    }
                    Err(Error::NoEntities) => break 'negatives,
                    Err(Error::NoCandidate(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            report.rejected_perturbations += 1;
        }
        report.local_negatives += g_minus.len();

        if let Some(ext) = external.and_then(|m| m.get(&rec.id)) {
            report.external_negatives += ext.len();
            g_minus.extend(ext.iter().map(|t| Negative {
                text: t.clone(),
                provenance: Provenance::ExternalSampled,
            }));
        }

        if g_minus.is_empty() {
            report.dropped_no_negatives += 1;
            continue;
        }
        triples.push(PreferenceTriple {
            id: rec.id.clone(),
            question: mask_drug_names(&rec.question, lexicon).0,
            g_plus: rec.answer_gt.clone(),
            g_minus,
        });
    }
    report.emitted = triples.len();
    Ok((triples, report))
}

/// Notes shipped next to generated datasets.
pub const DATASET_README: &str = "\
# Hallucination-reduction training data

## sft file

JSONL, one object per line: `{\"question\": ..., \"answer\": ...}`.
Entity names in `question` are replaced by \"this molecule\" so a model has
to answer from the molecule rather than from a remembered name. Train with
token-level cross-entropy on `answer` conditioned on `question`.

## preference file

JSONL, one object per line:

    {\"id\": ..., \"question\": ..., \"g_plus\": ...,
     \"g_minus\": [{\"text\": ..., \"provenance\": \"entity-perturbed\" | \"external-sampled\"}]}

`g_plus` is the reference answer. `entity-perturbed` negatives are the
reference answer with one or more entities swapped for different entities
of the same type; each scores strictly lower than `g_plus` under the
entity-entailment metric. `external-sampled` negatives are copied verbatim
from the external negatives file (`{\"id\": ..., \"texts\": [...]}`), usually
high-temperature samples from the model being tuned.

Intended for DPO: for every (`g_plus`, negative) pair, minimise
`-log sigmoid(beta * (log pi(g+|q) - log ref(g+|q) - log pi(g-|q) + log ref(g-|q)))`
where `pi` is the model being trained, `ref` a frozen reference copy and
`beta` the preference temperature.
";
