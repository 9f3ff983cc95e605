//! Knowledge-shortcut attacks on question text.
//!
//! Three corpus transforms probe whether a model answers from the drug name
//! in the question rather than from the molecule itself:
//!
//! - `DrugMask` replaces every lexicon entity in the question with
//!   "this molecule";
//! - `DrugDistract` swaps each entity for a different entity of the same
//!   type;
//! - `MoleculeMask` blanks the SMILES field.
//!
//! Answers are never touched.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_corpus, write_json, write_jsonl, CorpusRecord};
use crate::error::{Error, Result};
use crate::lexicon::{EntityLexicon, EntityType};
use crate::molhallu::ScoringSample;
use crate::rng::derive_rng;
use crate::textproc::{extract_entities, tokenize, EntitySpan, TokenizedText};
use crate::MASK_PHRASE;

/// Rescans after masking, in case a substitution creates a new entity
/// across its boundary.
const MAX_MASK_PASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    DrugMask,
    DrugDistract,
    MoleculeMask,
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drug-mask" => Ok(AttackKind::DrugMask),
            "drug-distract" => Ok(AttackKind::DrugDistract),
            "molecule-mask" => Ok(AttackKind::MoleculeMask),
            other => Err(Error::Invalid(format!(
                "unknown attack kind {other:?} (expected drug-mask, drug-distract or molecule-mask)"
            ))),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::DrugMask => "drug-mask",
            AttackKind::DrugDistract => "drug-distract",
            AttackKind::MoleculeMask => "molecule-mask",
        })
    }
}

/// Entity types an attack is allowed to touch. Empty means all types.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeFilter(pub Vec<EntityType>);

impl TypeFilter {
    pub fn all() -> Self {
        TypeFilter(Vec::new())
    }

    pub fn allows(&self, ty: EntityType) -> bool {
        self.0.is_empty() || self.0.contains(&ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub original: String,
    /// `None` when no substitute was available and the entity was kept.
    pub substitute: Option<String>,
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    a.start < b.end && b.start < a.end
}

/// Rewrite `text`, replacing the source range of each span with the string
/// chosen by `pick`. Returns the new text and the ranges of the inserted
/// strings. Spans whose ranges collide with `protected` or with an earlier
/// span are left alone.
fn rewrite<F>(
    tt: &TokenizedText,
    spans: &[EntitySpan],
    protected: &[Range<usize>],
    mut pick: F,
) -> (String, Vec<Range<usize>>, Vec<Range<usize>>)
where
    F: FnMut(&EntitySpan, &str) -> Option<String>,
{
    let src = &tt.source;
    let mut out = String::with_capacity(src.len());
    let mut inserted = Vec::new();
    let mut replaced_src = Vec::new();
    let mut cursor = 0;
    for span in spans {
        let range = tt.source_range(span.start, span.len);
        if range.start < cursor || protected.iter().any(|p| overlaps(p, &range)) {
            continue;
        }
        let Some(sub) = pick(span, &src[range.clone()]) else {
            continue;
        };
        out.push_str(&src[cursor..range.start]);
        let at = out.len();
        out.push_str(&sub);
        inserted.push(at..out.len());
        replaced_src.push(range.clone());
        cursor = range.end;
    }
    out.push_str(&src[cursor..]);
    (out, inserted, replaced_src)
}

/// Shift ranges of the old text into the new text after `replaced` source
/// ranges were swapped for `inserted` ones.
fn remap(old: &[Range<usize>], replaced: &[Range<usize>], inserted: &[Range<usize>]) -> Vec<Range<usize>> {
    old.iter()
        .map(|r| {
            let delta: isize = replaced
                .iter()
                .zip(inserted)
                .filter(|(src, _)| src.end <= r.start)
                .map(|(src, ins)| ins.len() as isize - src.len() as isize)
                .sum();
            let shift = |x: usize| (x as isize + delta) as usize;
            shift(r.start)..shift(r.end)
        })
        .collect()
}

/// Mask every allowed entity span with [`MASK_PHRASE`].
pub fn mask_entities(question: &str, lexicon: &EntityLexicon, filter: &TypeFilter) -> (String, Vec<Replacement>) {
    let mut text = question.to_string();
    let mut protected: Vec<Range<usize>> = Vec::new();
    let mut log = Vec::new();
    for _ in 0..MAX_MASK_PASSES {
        let tt = tokenize(&text);
        let spans: Vec<EntitySpan> = extract_entities(&tt, lexicon)
            .into_iter()
            .filter(|s| filter.allows(lexicon.get(s.record).entity_type))
            .collect();
        let mut pass_log = Vec::new();
        let (next, inserted, replaced) = rewrite(&tt, &spans, &protected, |_, original| {
            pass_log.push(Replacement {
                original: original.to_string(),
                substitute: Some(MASK_PHRASE.to_string()),
            });
            Some(MASK_PHRASE.to_string())
        });
        if pass_log.is_empty() {
            break;
        }
        protected = remap(&protected, &replaced, &inserted);
        protected.extend(inserted);
        log.extend(pass_log);
        text = next;
    }
    (text, log)
}

/// Replace each lexicon entity in the question with "this molecule".
pub fn mask_drug_names(question: &str, lexicon: &EntityLexicon) -> (String, usize) {
    let (text, log) = mask_entities(question, lexicon, &TypeFilter::all());
    (text, log.len())
}

/// Swap each allowed entity for a different record of the same type.
/// Entities without any candidate are kept and logged with no substitute.
pub fn distract_entities<R: Rng + ?Sized>(
    question: &str,
    lexicon: &EntityLexicon,
    filter: &TypeFilter,
    rng: &mut R,
) -> (String, Vec<Replacement>) {
    let tt = tokenize(question);
    let spans: Vec<EntitySpan> = extract_entities(&tt, lexicon)
        .into_iter()
        .filter(|s| filter.allows(lexicon.get(s.record).entity_type))
        .collect();
    let mut log = Vec::new();
    let (text, _, _) = rewrite(&tt, &spans, &[], |span, original| {
        let rec = lexicon.get(span.record);
        let exclude = HashSet::from([span.record]);
        match lexicon.sample_replacement(rec.entity_type, &exclude, rng) {
            Ok(sub) => {
                log.push(Replacement {
                    original: original.to_string(),
                    substitute: Some(sub.surface.clone()),
                });
                Some(sub.surface.clone())
            }
            Err(_) => {
                log.push(Replacement {
                    original: original.to_string(),
                    substitute: None,
                });
                None
            }
        }
    });
    (text, log)
}

pub fn distract_drug_names<R: Rng + ?Sized>(
    question: &str,
    lexicon: &EntityLexicon,
    rng: &mut R,
) -> (String, Vec<Replacement>) {
    distract_entities(question, lexicon, &TypeFilter::all(), rng)
}

pub fn mask_molecule(sample: &ScoringSample) -> ScoringSample {
    ScoringSample {
        smiles: String::new(),
        ..sample.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLog {
    pub id: String,
    pub count: usize,
    pub replaced: Vec<Replacement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackManifest {
    pub seed: Option<u64>,
    pub kind: AttackKind,
    /// How distracting names were chosen, so downstream analysis can
    /// reinterpret the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distraction: Option<String>,
    pub types: TypeFilter,
    pub per_sample: Vec<SampleLog>,
}

/// Apply one attack to every record. Per-sample randomness is derived from
/// `(seed, id)`.
pub fn attack_corpus(
    records: &[CorpusRecord],
    kind: AttackKind,
    seed: Option<u64>,
    lexicon: &EntityLexicon,
    filter: &TypeFilter,
) -> Result<(Vec<CorpusRecord>, AttackManifest)> {
    if kind == AttackKind::DrugDistract && seed.is_none() {
        return Err(Error::Invalid("drug-distract needs a seed".into()));
    }
    let mut out = Vec::with_capacity(records.len());
    let mut per_sample = Vec::with_capacity(records.len());
    for rec in records {
        let mut next = rec.clone();
        let replaced = match kind {
            AttackKind::DrugMask => {
                let (q, log) = mask_entities(&rec.question, lexicon, filter);
                next.question = q;
                log
            }
            AttackKind::DrugDistract => {
                let mut rng = derive_rng(seed.expect("checked above"), &rec.id);
                let (q, log) = distract_entities(&rec.question, lexicon, filter, &mut rng);
                next.question = q;
                log
            }
            AttackKind::MoleculeMask => {
                next.smiles.clear();
                if rec.smiles.is_empty() {
                    Vec::new()
                } else {
                    vec![Replacement {
                        original: rec.smiles.clone(),
                        substitute: Some(String::new()),
                    }]
                }
            }
        };
        per_sample.push(SampleLog {
            id: rec.id.clone(),
            count: replaced.iter().filter(|r| r.substitute.is_some()).count(),
            replaced,
        });
        out.push(next);
    }
    let manifest = AttackManifest {
        seed,
        kind,
        distraction: (kind == AttackKind::DrugDistract)
            .then(|| "substitute: a different lexicon entity of the same type".to_string()),
        types: filter.clone(),
        per_sample,
    };
    Ok((out, manifest))
}

/// Manifest written next to an attacked corpus.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

/// File-level attack: read `input`, write the attacked corpus to `output`
/// and its manifest to [`manifest_path`].
pub fn attack_corpus_file(
    input: &Path,
    output: &Path,
    kind: AttackKind,
    seed: Option<u64>,
    lexicon: &EntityLexicon,
    filter: &TypeFilter,
) -> Result<AttackManifest> {
    let records = read_corpus(input)?;
    let (attacked, manifest) = attack_corpus(&records, kind, seed, lexicon, filter)?;
    write_jsonl(output, &attacked)?;
    write_json(&manifest_path(output), &manifest)?;
    Ok(manifest)
}
