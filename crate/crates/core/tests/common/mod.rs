//! Naive reference implementations and generators shared by the
//! integration tests. Nothing here calls into the library's scoring code;
//! only `tokenize` is reused so inputs line up.

#![allow(dead_code)]

use molhallu::lexicon::{EntityLexicon, EntityType};
use molhallu::textproc::tokenize;
use rand::seq::SliceRandom;
use rand::Rng;

pub const THETA: f64 = 1e-5;

pub fn toks(s: &str) -> Vec<String> {
    tokenize(s).tokens
}

pub fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

fn occurrences(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

/// Σ over distinct grams of `a` of min(count in a, count in b).
pub fn clipped(a: &[Vec<String>], b: &[Vec<String>]) -> usize {
    let mut done: Vec<&Vec<String>> = Vec::new();
    let mut total = 0;
    for g in a {
        if done.contains(&g) {
            continue;
        }
        done.push(g);
        total += occurrences(a, g).min(occurrences(b, g));
    }
    total
}

// ---------------------------------------------------------------- entities

/// Distinct entity token sequences in load order (first occurrence wins).
pub fn oracle_entries(surfaces: &[&str]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for s in surfaces {
        let t = toks(s);
        if !t.is_empty() && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

/// `(start, len, entry index)` triples: at each uncovered position try every
/// window length from longest to shortest against every entry.
pub fn oracle_spans(tokens: &[String], entries: &[Vec<String>]) -> Vec<(usize, usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    'outer: while i < tokens.len() {
        for k in (1..=tokens.len() - i).rev() {
            if let Some(e) = entries.iter().position(|e| e.as_slice() == &tokens[i..i + k]) {
                spans.push((i, k, e));
                i += k;
                continue 'outer;
            }
        }
        i += 1;
    }
    spans
}

/// Every match `(start, len)` of any entry anywhere in `tokens`.
pub fn all_matches(tokens: &[String], entries: &[Vec<String>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..tokens.len() {
        for k in 1..=tokens.len() - i {
            if entries.iter().any(|e| e.as_slice() == &tokens[i..i + k]) {
                out.push((i, k));
            }
        }
    }
    out
}

/// All covers built from non-overlapping matches, filtered to those where
/// no match starts inside a gap and every chosen match is the longest one
/// at its start. Exponential; keep inputs short.
pub fn leftmost_longest_covers(tokens: &[String], entries: &[Vec<String>]) -> Vec<Vec<(usize, usize)>> {
    let matches = all_matches(tokens, entries);
    let mut covers = Vec::new();
    fn walk(
        m: &[(usize, usize)],
        from: usize,
        end: usize,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        out.push(cur.clone());
        for idx in from..m.len() {
            if m[idx].0 >= end {
                cur.push(m[idx]);
                walk(m, idx + 1, m[idx].0 + m[idx].1, cur, out);
                cur.pop();
            }
        }
    }
    walk(&matches, 0, 0, &mut Vec::new(), &mut covers);
    covers.retain(|c| {
        let mut pos = 0;
        for &(s, k) in c {
            let gap_hit = matches.iter().any(|&(ms, _)| ms >= pos && ms < s);
            let longest = matches.iter().filter(|m| m.0 == s).all(|m| m.1 <= k);
            if gap_hit || !longest {
                return false;
            }
            pos = s + k;
        }
        !matches.iter().any(|&(ms, _)| ms >= pos)
    });
    covers
}

// ---------------------------------------------------------------- Mol-Hallu

#[derive(Debug, Clone, Copy)]
pub struct OracleScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gamma: f64,
    pub n_wrong: usize,
    pub n_total: usize,
}

fn smoothed_geo(values: &[Option<f64>], theta: f64) -> Option<f64> {
    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    if present.is_empty() {
        None
    } else {
        let mut logs = 0.0;
        for v in &present {
            let v = if *v < theta { theta } else { *v };
            logs += v.ln();
        }
        Some((logs / present.len() as f64).exp())
    }
}

/// Straight-from-the-definitions score with the default orientation
/// `P = γ·P̄_∅ + (1−γ)·P̄_e`.
pub fn oracle_mol_hallu(pred: &str, gt: &str, desc: &str, entries: &[Vec<String>], theta: f64) -> OracleScore {
    let (p, g, d) = (toks(pred), toks(gt), toks(desc));
    let ps = oracle_spans(&p, entries);
    let gs = oracle_spans(&g, entries);
    let ds = oracle_spans(&d, entries);
    let in_g = |e: usize| gs.iter().any(|s| s.2 == e);
    let in_t = |e: usize| ds.iter().any(|s| s.2 == e);

    let w = |e: usize| if in_t(e) { 1.0 } else { 0.0 };
    // entity precision per order: 1 if in G, else w(e)
    let mut pe = Vec::new();
    for n in 1..=4 {
        let at: Vec<_> = ps.iter().filter(|s| s.1.min(4) == n).collect();
        if at.is_empty() {
            pe.push(None);
            continue;
        }
        let sum: f64 = at.iter().map(|s| if in_g(s.2) { 1.0 } else { w(s.2) }).sum();
        pe.push(Some(sum / at.len() as f64));
    }

    let covered = |spans: &[(usize, usize, usize)], i: usize| spans.iter().any(|s| i >= s.0 && i < s.0 + s.1);
    let mut pn = Vec::new();
    for n in 1..=4 {
        let pred_grams: Vec<Vec<String>> = (0..p.len().saturating_sub(n - 1))
            .filter(|&i| i + n <= p.len() && (i..i + n).all(|j| !covered(&ps, j)))
            .map(|i| p[i..i + n].to_vec())
            .collect();
        let gt_grams: Vec<Vec<String>> = (0..g.len().saturating_sub(n - 1))
            .filter(|&i| i + n <= g.len() && (i..i + n).all(|j| !covered(&gs, j)))
            .map(|i| g[i..i + n].to_vec())
            .collect();
        if pred_grams.is_empty() {
            pn.push(None);
        } else {
            pn.push(Some(clipped(&pred_grams, &gt_grams) as f64 / pred_grams.len() as f64));
        }
    }

    let n_total = ps.len();
    let n_wrong = ps.iter().filter(|s| !in_g(s.2) && !in_t(s.2)).count();
    let gamma = if n_total == 0 {
        1.0
    } else {
        1.0 - (n_wrong as f64 / n_total as f64).powf(0.5)
    };

    let e_bar = smoothed_geo(&pe, theta);
    let n_bar = smoothed_geo(&pn, theta);
    let precision = match (n_bar, e_bar) {
        (Some(a), Some(b)) => gamma * a + (1.0 - gamma) * b,
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => 0.0,
    };

    let mut rn = Vec::new();
    for n in 1..=4 {
        let gg = ngrams(&g, n);
        if gg.is_empty() {
            rn.push(None);
        } else {
            rn.push(Some(clipped(&gg, &ngrams(&p, n)) as f64 / gg.len() as f64));
        }
    }
    let recall = smoothed_geo(&rn, theta).unwrap_or(0.0);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    OracleScore {
        precision,
        recall,
        f1,
        gamma,
        n_wrong,
        n_total,
    }
}

// ---------------------------------------------------------------- baselines

pub fn oracle_bleu(pred: &[String], r: &[String], max_n: usize, theta: f64) -> f64 {
    let c = pred.len() as f64;
    let rl = r.len() as f64;
    if pred.is_empty() {
        return 0.0;
    }
    let bp = if c > rl { 1.0 } else { (1.0 - rl / c).exp() };
    let mut s = 0.0;
    for n in 1..=max_n {
        let cg = ngrams(pred, n);
        let pn = if cg.is_empty() {
            0.0
        } else {
            clipped(&cg, &ngrams(r, n)) as f64 / cg.len() as f64
        };
        s += (1.0 / max_n as f64) * pn.max(theta).ln();
    }
    bp * s.exp()
}

pub fn oracle_rouge_n(pred: &[String], r: &[String], n: usize) -> f64 {
    let rg = ngrams(r, n);
    if rg.is_empty() {
        return 0.0;
    }
    clipped(&rg, &ngrams(pred, n)) as f64 / rg.len() as f64
}

fn lcs_memo(a: &[String], b: &[String], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
    if i == a.len() || j == b.len() {
        return 0;
    }
    if let Some(v) = memo[i][j] {
        return v;
    }
    let v = if a[i] == b[j] {
        1 + lcs_memo(a, b, i + 1, j + 1, memo)
    } else {
        lcs_memo(a, b, i + 1, j, memo).max(lcs_memo(a, b, i, j + 1, memo))
    };
    memo[i][j] = Some(v);
    v
}

pub fn oracle_rouge_l(pred: &[String], r: &[String]) -> f64 {
    let mut memo = vec![vec![None; r.len() + 1]; pred.len() + 1];
    let l = lcs_memo(pred, r, 0, 0, &mut memo) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / pred.len() as f64;
    let rc = l / r.len() as f64;
    let b2 = 1.2f64 * 1.2;
    (1.0 + b2) * rc * p / (rc + b2 * p)
}

/// METEOR with the toolkit's alignment rule: a token extends the current
/// chunk when the next reference slot matches, otherwise it takes the first
/// free matching slot.
pub fn oracle_meteor(pred: &[String], r: &[String], gamma: f64, beta: f64) -> f64 {
    let mut taken = vec![false; r.len()];
    let mut align: Vec<Option<usize>> = vec![None; pred.len()];
    for i in 0..pred.len() {
        let mut slot = None;
        if i > 0 {
            if let Some(j) = align[i - 1] {
                if j + 1 < r.len() && !taken[j + 1] && r[j + 1] == pred[i] {
                    slot = Some(j + 1);
                }
            }
        }
        if slot.is_none() {
            for j in 0..r.len() {
                if !taken[j] && r[j] == pred[i] {
                    slot = Some(j);
                    break;
                }
            }
        }
        if let Some(j) = slot {
            taken[j] = true;
            align[i] = Some(j);
        }
    }
    let m = align.iter().filter(|a| a.is_some()).count();
    if m == 0 {
        return 0.0;
    }
    let mut chunks = 0;
    for i in 0..pred.len() {
        if let Some(j) = align[i] {
            let continues = i > 0 && j > 0 && align[i - 1] == Some(j - 1);
            if !continues {
                chunks += 1;
            }
        }
    }
    let p = m as f64 / pred.len() as f64;
    let rc = m as f64 / r.len() as f64;
    let f = 10.0 * p * rc / (rc + 9.0 * p);
    f * (1.0 - gamma * (chunks as f64 / m as f64).powf(beta))
}

// ---------------------------------------------------------------- generators

pub const VOCAB: [&str; 8] = ["ester", "amide", "ring", "acid", "the", "with", "group", "of"];

pub fn random_tokens<R: Rng>(rng: &mut R, vocab: &[&str], min: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(min..=max);
    (0..n).map(|_| vocab.choose(rng).unwrap().to_string()).collect()
}

/// Random lexicon over `vocab`: phrases of 1..=max_len tokens.
pub fn random_surfaces<R: Rng>(rng: &mut R, vocab: &[&str], count: usize, max_len: usize) -> Vec<String> {
    (0..count)
        .map(|_| random_tokens(rng, vocab, 1, max_len).join(" "))
        .collect()
}

pub fn lexicon_of(surfaces: &[String]) -> EntityLexicon {
    let entries: Vec<(String, EntityType)> = surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), EntityType::ALL[i % 4]))
        .collect();
    EntityLexicon::from_entries(&entries).expect("non-empty lexicon")
}

pub fn demo_lexicon() -> EntityLexicon {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_lexicon.tsv");
    molhallu::lexicon::load_lexicon(&path, molhallu::lexicon::LexiconFormat::Tsv)
        .expect("demo lexicon loads")
        .0
}
