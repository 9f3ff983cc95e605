//! Chemical-entity lexicon: loading, normalization and longest-match lookup.
//!
//! Entries are matched on token sequences (see [`crate::textproc::tokenize`]),
//! never on raw substrings, so "ketones" can not fire inside "diketones".

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::textproc;

/// Stable record id, assigned in load order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    Application,
    Property,
    Source,
    Structure,
}

impl EntityType {
    pub const ALL: [EntityType; 4] = [
        EntityType::Application,
        EntityType::Property,
        EntityType::Source,
        EntityType::Structure,
    ];

    fn slot(self) -> usize {
        match self {
            EntityType::Application => 0,
            EntityType::Property => 1,
            EntityType::Source => 2,
            EntityType::Structure => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Application => "Application",
            EntityType::Property => "Property",
            EntityType::Source => "Source",
            EntityType::Structure => "Structure",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "application" => Ok(EntityType::Application),
            "property" => Ok(EntityType::Property),
            "source" => Ok(EntityType::Source),
            "structure" => Ok(EntityType::Structure),
            other => Err(Error::Invalid(format!("unknown entity type {other:?}"))),
        }
    }
}

/// Canonical form used for all entity matching.
///
/// NFKC, lowercase, whitespace runs collapsed to one space, ends trimmed.
/// Hyphens and parentheses are kept because chemical names depend on them.
pub fn normalize_surface(raw: &str) -> String {
    // The second NFKC pass makes the function idempotent when lowercasing
    // produces a decomposable sequence.
    let folded: String = raw.nfkc().collect::<String>().to_lowercase().nfkc().collect();
    let mut out = String::with_capacity(folded.len());
    for word in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityRecord {
    pub id: EntityId,
    pub surface: String,
    pub normalized: String,
    pub entity_type: EntityType,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconFormat {
    Tsv,
    Jsonl,
}

impl LexiconFormat {
    /// Guess from the file extension; anything but `.jsonl`/`.json` is TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => LexiconFormat::Jsonl,
            _ => LexiconFormat::Tsv,
        }
    }
}

impl FromStr for LexiconFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(LexiconFormat::Tsv),
            "jsonl" => Ok(LexiconFormat::Jsonl),
            other => Err(Error::Invalid(format!("unknown lexicon format {other:?}"))),
        }
    }
}

/// Outcome of a lexicon load. Serialized as the validation report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped_unknown_type: usize,
    pub skipped_empty: usize,
    pub duplicates: usize,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Default, Clone)]
struct TrieNode {
    children: HashMap<String, usize>,
    record: Option<EntityId>,
}

/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct EntityLexicon {
    records: Vec<EntityRecord>,
    nodes: Vec<TrieNode>,
    by_type: [Vec<EntityId>; 4],
}

#[derive(Deserialize)]
struct JsonRow {
    surface: Option<String>,
    #[serde(rename = "type")]
    entity_type: Option<String>,
}

impl EntityLexicon {
    /// Build from `(surface, type)` rows. Unknown types and empty surfaces are
    /// skipped; duplicate normalized forms keep the first occurrence.
    pub fn from_rows<I, S, T>(rows: I) -> Result<(Self, LoadReport)>
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let mut lex = EntityLexicon {
            records: Vec::new(),
            nodes: vec![TrieNode::default()],
            by_type: Default::default(),
        };
        let mut report = LoadReport::default();
        let mut seen_forms: HashSet<String> = HashSet::new();
        let mut seen_keys: HashSet<Vec<String>> = HashSet::new();

        for (row, (surface, ty)) in rows.into_iter().enumerate() {
            let surface = surface.as_ref();
            let normalized = normalize_surface(surface);
            if normalized.is_empty() {
                report.skipped_empty += 1;
                continue;
            }
            let entity_type = match ty.as_ref().parse::<EntityType>() {
                Ok(t) => t,
                Err(_) => {
                    report.skipped_unknown_type += 1;
                    report
                        .warnings
                        .push(format!("row {}: unknown entity type {:?}", row + 1, ty.as_ref()));
                    continue;
                }
            };
            let tokens = textproc::tokenize(&normalized).tokens;
            // Distinct forms such as "a." and "a ." share a token sequence.
            if seen_forms.contains(&normalized) || !seen_keys.insert(tokens.clone()) {
                report.duplicates += 1;
                let msg = format!("row {}: duplicate entity {:?} ignored", row + 1, surface);
                warn!("{msg}");
                report.warnings.push(msg);
                continue;
            }
            seen_forms.insert(normalized.clone());
            lex.insert(EntityRecord {
                id: EntityId(lex.records.len() as u32),
                surface: surface.trim().to_string(),
                normalized,
                entity_type,
                tokens,
            });
        }

        if lex.records.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        report.loaded = lex.records.len();
        Ok((lex, report))
    }

    /// Convenience constructor for typed entries.
    pub fn from_entries<S: AsRef<str>>(entries: &[(S, EntityType)]) -> Result<Self> {
        Self::from_rows(entries.iter().map(|(s, t)| (s.as_ref(), t.as_str()))).map(|(l, _)| l)
    }

    fn insert(&mut self, record: EntityRecord) {
        let mut node = 0;
        for tok in &record.tokens {
            node = match self.nodes[node].children.get(tok) {
                Some(&next) => next,
                None => {
                    let next = self.nodes.len();
                    self.nodes.push(TrieNode::default());
                    self.nodes[node].children.insert(tok.clone(), next);
                    next
                }
            };
        }
        self.nodes[node].record = Some(record.id);
        self.by_type[record.entity_type.slot()].push(record.id);
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EntityRecord] {
        &self.records
    }

    pub fn get(&self, id: EntityId) -> &EntityRecord {
        &self.records[id.index()]
    }

    pub fn type_count(&self, ty: EntityType) -> usize {
        self.by_type[ty.slot()].len()
    }

    /// Record whose normalized form equals `normalize_surface(surface)`.
    pub fn find(&self, surface: &str) -> Option<&EntityRecord> {
        let tokens = textproc::tokenize(surface).tokens;
        match self.lookup_longest(&tokens, 0) {
            Some((id, len)) if len == tokens.len() => Some(self.get(id)),
            _ => None,
        }
    }

    /// Longest entry whose token sequence equals `tokens[start..start + k]`.
    pub fn lookup_longest<S: AsRef<str>>(&self, tokens: &[S], start: usize) -> Option<(EntityId, usize)> {
        let mut node = 0;
        let mut best = None;
        for (offset, tok) in tokens.get(start..)?.iter().enumerate() {
            match self.nodes[node].children.get(tok.as_ref()) {
                Some(&next) => node = next,
                None => break,
            }
            if let Some(id) = self.nodes[node].record {
                best = Some((id, offset + 1));
            }
        }
        best
    }

    /// Uniformly pick a record of `entity_type` that is not in `exclude`.
    pub fn sample_replacement<R: Rng + ?Sized>(
        &self,
        entity_type: EntityType,
        exclude: &HashSet<EntityId>,
        rng: &mut R,
    ) -> Result<&EntityRecord> {
        let pool: Vec<EntityId> = self.by_type[entity_type.slot()]
            .iter()
            .copied()
            .filter(|id| !exclude.contains(id))
            .collect();
        if pool.is_empty() {
            return Err(Error::NoCandidate(entity_type));
        }
        Ok(self.get(pool[rng.gen_range(0..pool.len())]))
    }

    /// Percentage of records per entity type.
    pub fn stats(&self) -> Result<TypeRates> {
        if self.records.is_empty() {
            return Err(Error::EmptyLexicon);
        }
        let total = self.records.len() as f64;
        let pct = |t: EntityType| 100.0 * self.type_count(t) as f64 / total;
        Ok(TypeRates {
            total: self.records.len(),
            application: pct(EntityType::Application),
            property: pct(EntityType::Property),
            source: pct(EntityType::Source),
            structure: pct(EntityType::Structure),
        })
    }
}

/// Per-type share of the lexicon, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeRates {
    pub total: usize,
    pub application: f64,
    pub property: f64,
    pub source: f64,
    pub structure: f64,
}

impl TypeRates {
    pub fn rate(&self, ty: EntityType) -> f64 {
        match ty {
            EntityType::Application => self.application,
            EntityType::Property => self.property,
            EntityType::Source => self.source,
            EntityType::Structure => self.structure,
        }
    }
}

pub fn load_lexicon(path: &Path, format: LexiconFormat) -> Result<(EntityLexicon, LoadReport)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        LexiconFormat::Tsv => {
            let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
            if let Some(first) = lines.peek() {
                if first.trim().eq_ignore_ascii_case("surface\ttype") {
                    lines.next();
                }
            }
            EntityLexicon::from_rows(lines.map(|line| match line.split_once('\t') {
                Some((surface, ty)) => (surface, ty),
                None => (line, ""),
            }))
        }
        LexiconFormat::Jsonl => {
            let mut rows = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let row: JsonRow = serde_json::from_str(line).map_err(|source| Error::Json {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source,
                })?;
                rows.push((row.surface.unwrap_or_default(), row.entity_type.unwrap_or_default()));
            }
            EntityLexicon::from_rows(rows)
        }
    }
}
