//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use molhallu::attacks::mask_drug_names;
use molhallu::baselines::{bleu, meteor, rouge_l, rouge_n};
use molhallu::corpus::{read_corpus, write_jsonl, CorpusRecord};
use molhallu::lexicon::{EntityLexicon, EntityType};
use molhallu::molhallu::gamma;
use molhallu::prefdata::{build_preference_dataset, PrefConfig, Provenance};
use molhallu::reports::corpus_histogram;
use molhallu::rng::seeded;
use molhallu::textproc::{extract_entities, extract_entity_spans, tokenize};
use molhallu::{score_corpus, score_sample, MolHalluConfig, ScoringSample};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sample(pred: &str, gt: &str, desc: &str) -> ScoringSample {
    ScoringSample {
        id: "s".into(),
        answer_pred: pred.into(),
        answer_gt: gt.into(),
        description: desc.into(),
        ..Default::default()
    }
}

fn gamma_table() -> Outcome {
    let got = [gamma(0, 4).unwrap(), gamma(1, 4).unwrap(), gamma(4, 4).unwrap()];
    check(got == [1.0, 0.5, 0.0], format!("got {got:?}"))?;
    Ok(format!(
        "gamma(0,4)={} gamma(1,4)={} gamma(4,4)={}",
        got[0], got[1], got[2]
    ))
}

fn perfect_match() -> Outcome {
    let lex = demo_lexicon();
    let surfaces: Vec<&str> = lex.records().iter().map(|r| r.surface.as_str()).collect();
    let filler = ["it", "has", "a", "with", "and", "the", "is", "used", "as", ",", "."];
    let mut rng = seeded(2);
    let cases = 200;
    for i in 0..cases {
        let len = rng.gen_range(1..=14);
        // every tenth text is made of entities only
        let words: Vec<&str> = (0..len)
            .map(|_| {
                if i % 10 == 0 || rng.gen_bool(0.4) {
                    *surfaces.choose(&mut rng).unwrap()
                } else {
                    *filler.choose(&mut rng).unwrap()
                }
            })
            .collect();
        let text = words.join(" ");
        let s = score_sample(&sample(&text, &text, ""), &lex, &MolHalluConfig::default());
        check(
            (s.f1 - 1.0).abs() <= 1e-9 && s.n_counterfactual == 0,
            format!("{text:?}: f1={} N_c={}", s.f1, s.n_counterfactual),
        )?;
    }
    Ok(format!("{cases} random texts scored against themselves"))
}

const CORRECT: [&str; 5] = ["ester", "amide", "ketone", "lactone", "phenol"];
const WRONG: [&str; 5] = ["thiol", "imine", "nitrile", "alkyne", "epoxide"];

fn penalty_text(k: usize) -> String {
    let e: Vec<&str> = (0..5).map(|i| if i < k { WRONG[i] } else { CORRECT[i] }).collect();
    format!(
        "the molecule carries an {} and an {} group , a {} , a {} ring and a {} unit .",
        e[0], e[1], e[2], e[3], e[4]
    )
}

fn monotone_penalty() -> Outcome {
    let entries: Vec<(&str, EntityType)> = CORRECT
        .iter()
        .chain(&WRONG)
        .map(|n| (*n, EntityType::Structure))
        .collect();
    let lex = EntityLexicon::from_entries(&entries).unwrap();
    let gt = penalty_text(0);
    let gt_t = toks(&gt);
    let mut curves: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for k in 0..=5 {
        let pred = penalty_text(k);
        let p = toks(&pred);
        let s = score_sample(&sample(&pred, &gt, ""), &lex, &MolHalluConfig::default());
        curves.entry("mol_hallu").or_default().push(s.f1);
        curves
            .entry("bleu2")
            .or_default()
            .push(bleu(&p, &gt_t, 2, None, THETA).unwrap());
        curves.entry("rougeL").or_default().push(rouge_l(&p, &gt_t));
        curves.entry("meteor").or_default().push(meteor(&p, &gt_t, 0.5, 3.0));
    }
    let mh = &curves["mol_hallu"];
    check(
        mh.windows(2).all(|w| w[1] < w[0]),
        format!("not strictly decreasing: {mh:?}"),
    )?;
    let drop = |c: &[f64]| (c[0] - c[5]) / c[0];
    let mh_drop = drop(mh);
    let mut detail = format!("mol_hallu drop {:.3}", mh_drop);
    for name in ["bleu2", "rougeL", "meteor"] {
        let d = drop(&curves[name]);
        check(
            mh_drop > d,
            format!("{name} drop {d:.3} >= mol_hallu drop {mh_drop:.3}"),
        )?;
        detail += &format!(", {name} {d:.3}");
    }
    Ok(detail)
}

fn case_studies() -> Outcome {
    let lex = demo_lexicon();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo_corpus.jsonl");
    let records = read_corpus(&path).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    // the Hexaen source case and the reactivity case
    for id in ["case-04", "case-05"] {
        let rec = records.iter().find(|r| r.id == id).ok_or(format!("{id} missing"))?;
        let s = rec.to_sample().ok_or(format!("{id} has no prediction"))?;
        let mh = 100.0 * score_sample(&s, &lex, &MolHalluConfig::default()).f1;
        let m = 100.0 * meteor(&toks(&s.answer_pred), &toks(&s.answer_gt), 0.5, 3.0);
        check(m - mh >= 20.0, format!("{id}: M-H {mh:.1} vs METEOR {m:.1}"))?;
        detail.push(format!("{id} M-H {mh:.1} vs METEOR {m:.1}"));
    }
    Ok(detail.join("; "))
}

fn baseline_oracles() -> Outcome {
    let mut rng = seeded(5);
    let cases = 200;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let pred = random_tokens(&mut rng, &VOCAB, 0, 15);
        let reference = random_tokens(&mut rng, &VOCAB, 1, 15);
        let pairs = [
            (
                bleu(&pred, &reference, 2, None, THETA).unwrap(),
                oracle_bleu(&pred, &reference, 2, THETA),
            ),
            (
                bleu(&pred, &reference, 4, None, THETA).unwrap(),
                oracle_bleu(&pred, &reference, 4, THETA),
            ),
            (
                rouge_n(&pred, &reference, 1).unwrap(),
                oracle_rouge_n(&pred, &reference, 1),
            ),
            (
                rouge_n(&pred, &reference, 2).unwrap(),
                oracle_rouge_n(&pred, &reference, 2),
            ),
            (rouge_l(&pred, &reference), oracle_rouge_l(&pred, &reference)),
            (
                meteor(&pred, &reference, 0.5, 3.0),
                oracle_meteor(&pred, &reference, 0.5, 3.0),
            ),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-9, format!("max deviation {worst:e}"))?;
    Ok(format!("{cases} pairs, max deviation {worst:e}"))
}

fn extraction_oracle() -> Outcome {
    let mut rng = seeded(6);
    let cases = 500;
    for i in 0..cases {
        let n_entries = rng.gen_range(1..=100);
        let surfaces = random_surfaces(&mut rng, &VOCAB, n_entries, 4);
        let lex = lexicon_of(&surfaces);
        let refs: Vec<&str> = surfaces.iter().map(String::as_str).collect();
        let entries = oracle_entries(&refs);
        let text = random_tokens(&mut rng, &VOCAB, 0, 30);
        let got: Vec<(usize, usize, Vec<String>)> = extract_entity_spans(&text, &lex)
            .into_iter()
            .map(|s| (s.start, s.len, lex.get(s.record).tokens.clone()))
            .collect();
        let want: Vec<(usize, usize, Vec<String>)> = oracle_spans(&text, &entries)
            .into_iter()
            .map(|(s, k, e)| (s, k, entries[e].clone()))
            .collect();
        check(got == want, format!("instance {i}: {text:?}"))?;
    }
    Ok(format!("{cases} instances, exact match"))
}

fn mol_hallu_oracle() -> Outcome {
    let mut rng = seeded(7);
    let cases = 200;
    let mut worst = 0.0f64;
    for i in 0..cases {
        let n_entries = rng.gen_range(1..=10);
        let surfaces = random_surfaces(&mut rng, &VOCAB, n_entries, 3);
        let lex = lexicon_of(&surfaces);
        let refs: Vec<&str> = surfaces.iter().map(String::as_str).collect();
        let entries = oracle_entries(&refs);
        let pred = random_tokens(&mut rng, &VOCAB, 0, 12).join(" ");
        let gt = random_tokens(&mut rng, &VOCAB, 1, 12).join(" ");
        let desc = random_tokens(&mut rng, &VOCAB, 0, 6).join(" ");
        let got = score_sample(&sample(&pred, &gt, &desc), &lex, &MolHalluConfig::default());
        let want = oracle_mol_hallu(&pred, &gt, &desc, &entries, THETA);
        check(
            got.n_wrong == want.n_wrong && got.n_total == want.n_total,
            format!("case {i}: entity counts differ"),
        )?;
        for (a, b) in [
            (got.gamma, want.gamma),
            (got.precision, want.precision),
            (got.recall, want.recall),
            (got.f1, want.f1),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("{cases} samples, max deviation {worst:e}"))
}

const FILLER: [&str; 14] = [
    "what", "is", "the", "role", "of", "in", "why", "does", "how", "and", "with", "patients", "treat", "?",
];

fn attack_completeness() -> Outcome {
    let lex = demo_lexicon();
    for w in FILLER {
        check(lex.find(w).is_none(), format!("filler {w:?} is an entity"))?;
    }
    let mut rng = seeded(8);
    let cases = 100;
    let mut masked_total = 0;
    for i in 0..cases {
        let mut words: Vec<String> = random_tokens(&mut rng, &FILLER, 3, 10);
        for _ in 0..rng.gen_range(1..=3) {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, lex.records().choose(&mut rng).unwrap().surface.clone());
        }
        let q = words.join(" ");
        let (masked, n) = mask_drug_names(&q, &lex);
        masked_total += n;
        let left = extract_entities(&tokenize(&masked), &lex);
        check(
            left.is_empty(),
            format!("question {i}: {masked:?} still has {} entities", left.len()),
        )?;
    }
    Ok(format!("{cases} questions, {masked_total} entities masked, none left"))
}

fn generated_corpus(n: usize, seed: u64) -> Vec<CorpusRecord> {
    let lex = demo_lexicon();
    let mut rng = seeded(seed);
    let of_type = |ty: EntityType| -> Vec<String> {
        lex.records()
            .iter()
            .filter(|r| r.entity_type == ty)
            .map(|r| r.normalized.clone())
            .collect()
    };
    let (st, pr, ap, so) = (
        of_type(EntityType::Structure),
        of_type(EntityType::Property),
        of_type(EntityType::Application),
        of_type(EntityType::Source),
    );
    (0..n)
        .map(|i| {
            let a = st.choose(&mut rng).unwrap();
            let b = pr.choose(&mut rng).unwrap();
            let c = ap.choose(&mut rng).unwrap();
            let d = so.choose(&mut rng).unwrap();
            CorpusRecord {
                id: format!("gen-{i:04}"),
                smiles: "CC(=O)O".into(),
                question: format!("Is this molecule found in {d} ?"),
                answer_gt: format!("It contains a {a} , shows {b} and acts as an {c} ; it occurs in {d} ."),
                answer_pred: None,
                description: rng.gen_bool(0.5).then(|| format!("A {a} found in {d} .")),
            }
        })
        .collect()
}

fn preference_sensitivity() -> Outcome {
    let lex = demo_lexicon();
    let records = generated_corpus(150, 9);
    let mut cfg = PrefConfig::new(42);
    cfg.sample_count = 100;
    let (triples, _) = build_preference_dataset(&records, &lex, &cfg, None).map_err(|e| e.to_string())?;
    check(triples.len() == 100, format!("{} triples emitted", triples.len()))?;
    let scoring = MolHalluConfig::default();
    let mut negatives = 0;
    for t in &triples {
        let rec = records.iter().find(|r| r.id == t.id).unwrap();
        let desc = rec.description.clone().unwrap_or_default();
        let ceiling = score_sample(&sample(&t.g_plus, &t.g_plus, &desc), &lex, &scoring).f1;
        for neg in t.g_minus.iter().filter(|n| n.provenance == Provenance::EntityPerturbed) {
            let f = score_sample(&sample(&neg.text, &t.g_plus, &desc), &lex, &scoring).f1;
            check(f < ceiling, format!("{}: negative scores {f} vs {ceiling}", t.id))?;
            negatives += 1;
        }
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let write = |name: &str| -> Result<Vec<u8>, String> {
        let (again, _) = build_preference_dataset(&records, &lex, &cfg, None).map_err(|e| e.to_string())?;
        let p = dir.path().join(name);
        write_jsonl(&p, &again).map_err(|e| e.to_string())?;
        std::fs::read(&p).map_err(|e| e.to_string())
    };
    check(write("a.jsonl")? == write("b.jsonl")?, "reruns differ")?;
    Ok(format!(
        "{} triples, {negatives} perturbed negatives all below G+, reruns byte-identical",
        triples.len()
    ))
}

fn histogram_partition() -> Outcome {
    let planted = [0usize, 1, 1, 2, 3, 4, 5, 5, 6, 8, 0, 2, 7, 3, 1];
    let right = [
        "ester", "amide", "ketone", "lactone", "phenol", "thiol", "imine", "nitrile",
    ];
    let wrong = [
        "alkyne", "epoxide", "aldehyde", "alkene", "ether", "lactam", "purine", "indole",
    ];
    let entries: Vec<(&str, EntityType)> = right
        .iter()
        .chain(&wrong)
        .map(|n| (*n, EntityType::Structure))
        .collect();
    let lex = EntityLexicon::from_entries(&entries).unwrap();
    let gt = format!("groups : {} .", right.join(" , "));
    let samples: Vec<ScoringSample> = planted
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let ents: Vec<&str> = (0..8).map(|j| if j < k { wrong[j] } else { right[j] }).collect();
            ScoringSample {
                id: format!("h{i:02}"),
                ..sample(&format!("groups : {} .", ents.join(" , ")), &gt, "")
            }
        })
        .collect();
    let corpus = score_corpus(&samples, &lex, &MolHalluConfig::default()).map_err(|e| e.to_string())?;
    let hist = corpus_histogram(&corpus).map_err(|e| e.to_string())?;
    let n = planted.len();
    check(
        hist.counts.values().sum::<usize>() == n && hist.total == n,
        "counts do not sum to corpus size",
    )?;
    for (i, &k) in planted.iter().enumerate() {
        check(
            corpus.sample_scores[i].n_counterfactual == k,
            format!("sample {i}: N_c {} != {k}", corpus.sample_scores[i].n_counterfactual),
        )?;
    }
    let low = planted.iter().filter(|&&k| k > 0 && k < 3).count() as f64 / n as f64;
    let high = planted.iter().filter(|&&k| k > 4).count() as f64 / n as f64;
    check(
        hist.low_band_mass() == low,
        format!("low band {} != {low}", hist.low_band_mass()),
    )?;
    check(
        hist.high_band_mass() == high,
        format!("high band {} != {high}", hist.high_band_mass()),
    )?;
    Ok(format!("{n} samples, low band {:.3}, high band {:.3}", low, high))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gamma table", Duration::from_millis(100), gamma_table),
        ("perfect-match fixed point", Duration::from_secs(1), perfect_match),
        ("monotone penalty curve", Duration::from_secs(1), monotone_penalty),
        ("case-study direction", Duration::from_secs(1), case_studies),
        ("baseline oracle equivalence", Duration::from_secs(5), baseline_oracles),
        ("entity-extraction oracle", Duration::from_secs(5), extraction_oracle),
        ("Mol-Hallu oracle", Duration::from_secs(5), mol_hallu_oracle),
        ("attack completeness", Duration::from_secs(1), attack_completeness),
        (
            "preference-dataset sensitivity",
            Duration::from_secs(2),
            preference_sensitivity,
        ),
        ("histogram partition", Duration::from_secs(1), histogram_partition),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|d| {
            if elapsed <= *budget {
                Ok(d)
            } else {
                Err(format!("{d}; took {elapsed:?}, budget {budget:?}"))
            }
        });
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} ({:.1} ms): {detail}",
                i + 1,
                elapsed.as_secs_f64() * 1e3
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "criterion {:>2} FAIL  {name} ({:.1} ms): {why}",
                    i + 1,
                    elapsed.as_secs_f64() * 1e3
                );
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
