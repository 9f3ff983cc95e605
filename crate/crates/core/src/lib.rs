//! Hallucination scoring for molecular question answering.
//!
//! The crate is organised around a chemical-entity lexicon:
//!
//! - [`lexicon`] loads and indexes typed entity records.
//! - [`textproc`] tokenizes answers and finds entity spans with a
//!   leftmost-longest scan.
//! - [`molhallu`] computes the entity-entailment precision/recall F1 for one
//!   sample and averages it over a corpus.
//! - [`baselines`] provides BLEU, ROUGE-N, ROUGE-L and METEOR for comparison.
//! - [`attacks`] rewrites questions to probe drug-name shortcuts.
//! - [`prefdata`] builds entity-masked SFT pairs and preference triples.
//! - [`reports`] renders comparison tables, histograms and before/after diffs.
//!
//! All randomness goes through [`rng::derive_rng`], so every transform is
//! reproducible from a seed and a sample id.

pub mod attacks;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod lexicon;
pub mod molhallu;
pub mod prefdata;
pub mod reports;
pub mod rng;
pub mod textproc;

pub use error::{Error, Result};
pub use lexicon::{EntityId, EntityLexicon, EntityRecord, EntityType};
pub use molhallu::{score_corpus, score_sample, CorpusScore, MolHalluConfig, MolHalluScore, ScoringSample};
pub use textproc::{tokenize, EntitySpan, TokenizedText};

/// Phrase substituted for entity names when masking questions.
pub const MASK_PHRASE: &str = "this molecule";
