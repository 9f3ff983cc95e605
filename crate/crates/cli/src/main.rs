//! `molhallu` command-line tool.
//!
//! Exit codes: 0 on success, 1 for invalid input or flags, 2 when a file
//! can not be read or written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use molhallu::attacks::{attack_corpus_file, AttackKind, TypeFilter};
use molhallu::baselines::{BaselineConfig, BaselineScores};
use molhallu::corpus::{read_corpus, read_jsonl, write_json, write_jsonl};
use molhallu::lexicon::{load_lexicon, EntityLexicon, EntityType, LexiconFormat};
use molhallu::molhallu::{MolHalluScore, DEFAULT_THETA};
use molhallu::prefdata::{
    build_preference_dataset, build_sft_dataset, read_external_negatives, PerturbCount, PrefConfig, DATASET_README,
    DEFAULT_SAMPLE_COUNT,
};
use molhallu::reports::{comparison_table, corpus_histogram, diff_report};
use molhallu::{score_corpus, CorpusScore, MolHalluConfig};

#[derive(Parser)]
#[command(
    name = "molhallu",
    version,
    about = "Entity-level hallucination scoring for molecular QA corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Chart {
    Text,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Auto,
    Tsv,
    Jsonl,
}

#[derive(clap::Args)]
struct LexiconArgs {
    /// Entity lexicon (TSV `surface<TAB>type` or JSONL `{"surface", "type"}`).
    #[arg(long, env = "MOLHALLU_LEXICON")]
    lexicon: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    lexicon_format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// Score predicted answers and write per-sample and corpus reports.
    Score {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lexicon: LexiconArgs,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "as-printed")]
        gamma_orientation: String,
        #[arg(long, default_value_t = 0.5)]
        meteor_gamma: f64,
        #[arg(long, default_value_t = 3.0)]
        meteor_exponent: f64,
        /// Histogram rendering.
        #[arg(long, value_enum, default_value = "text")]
        chart: Chart,
    },
    /// Rewrite questions (or SMILES) to probe knowledge shortcuts.
    Attack {
        #[arg(long)]
        corpus: PathBuf,
        /// drug-mask, drug-distract or molecule-mask
        #[arg(long)]
        kind: String,
        /// Required for drug-distract.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        lexicon: LexiconArgs,
        /// Only touch these entity types (comma separated); default all.
        #[arg(long, value_delimiter = ',')]
        types: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the entity-perturbed preference dataset (and optionally SFT pairs).
    Prefs {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        lexicon: LexiconArgs,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
        n: usize,
        /// Entity-perturbed negatives per sample.
        #[arg(long, default_value_t = 1)]
        negatives: usize,
        /// Entities swapped per negative: a number or "random".
        #[arg(long, default_value = "random")]
        perturb: String,
        #[arg(long)]
        seed: u64,
        /// JSONL of model-sampled negatives: {"id", "texts": [...]}.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        allow_smaller: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write entity-masked SFT pairs for the whole corpus here.
        #[arg(long)]
        sft_out: Option<PathBuf>,
    },
    /// Validate a lexicon file and report type rates.
    Lexicon {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: FormatArg,
        #[arg(long)]
        stats: bool,
    },
    /// Compare two `samples.json` files produced by `score`.
    Diff {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_format(arg: FormatArg, path: &Path) -> LexiconFormat {
    match arg {
        FormatArg::Auto => LexiconFormat::from_path(path),
        FormatArg::Tsv => LexiconFormat::Tsv,
        FormatArg::Jsonl => LexiconFormat::Jsonl,
    }
}

fn open_lexicon(args: &LexiconArgs) -> Result<EntityLexicon> {
    let (lex, report) = load_lexicon(&args.lexicon, resolve_format(args.lexicon_format, &args.lexicon))
        .with_context(|| format!("loading lexicon {}", args.lexicon.display()))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(lex)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| molhallu::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_score(
    corpus: &Path,
    lexicon: &LexiconArgs,
    theta: f64,
    out_dir: &Path,
    gamma_orientation: &str,
    meteor_gamma: f64,
    meteor_exponent: f64,
    chart: Chart,
) -> Result<()> {
    let config = MolHalluConfig {
        theta,
        gamma_orientation: gamma_orientation.parse()?,
    };
    config.validate()?;
    let lex = open_lexicon(lexicon)?;
    let records = read_corpus(corpus)?;

    let mut samples = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for r in &records {
        match r.to_sample() {
            Some(s) => samples.push(s),
            None => skipped.push(r.id.clone()),
        }
    }
    if !skipped.is_empty() {
        eprintln!(
            "skipping {} record(s) without answer_pred: {}",
            skipped.len(),
            skipped.join(", ")
        );
    }
    if samples.is_empty() {
        bail!(molhallu::Error::Invalid("no record has an answer_pred to score".into()));
    }

    let scores = score_corpus(&samples, &lex, &config)?;
    let base_cfg = BaselineConfig {
        theta,
        meteor_gamma,
        meteor_exponent,
    };
    let baselines = samples
        .iter()
        .map(|s| {
            Ok((
                s.id.clone(),
                BaselineScores::compute(&s.answer_pred, &s.answer_gt, &base_cfg)?,
            ))
        })
        .collect::<molhallu::Result<Vec<_>>>()?;
    let table = comparison_table(&scores, &baselines)?;
    let hist = corpus_histogram(&scores)?;

    fs::create_dir_all(out_dir).map_err(|e| molhallu::Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    write_json(&out_dir.join("samples.json"), &scores.sample_scores)?;
    write_text(&out_dir.join("comparison.csv"), &table.to_csv())?;
    write_json(&out_dir.join("comparison.json"), &table.to_json())?;
    match chart {
        Chart::Text => write_text(&out_dir.join("histogram.txt"), &hist.render_text())?,
        Chart::Svg => write_text(&out_dir.join("histogram.svg"), &hist.render_svg())?,
    }
    let summary = json!({
        "samples": scores.len(),
        "skipped": skipped,
        "mean_f1": scores.mean_f1,
        "theta": theta,
        "gamma_orientation": config.gamma_orientation,
        "meteor_gamma": meteor_gamma,
        "meteor_exponent": meteor_exponent,
        "histogram": hist,
        "means": table.to_json()["mean"],
    });
    write_json(&out_dir.join("summary.json"), &summary)?;
    print!("{}", table.to_text());
    println!("Mol-Hallu: {:.1}", 100.0 * scores.mean_f1);
    Ok(())
}

fn parse_types(raw: &[String]) -> Result<TypeFilter> {
    let types = raw
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<EntityType>())
        .collect::<molhallu::Result<Vec<_>>>()?;
    Ok(TypeFilter(types))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score {
            corpus,
            lexicon,
            theta,
            out_dir,
            gamma_orientation,
            meteor_gamma,
            meteor_exponent,
            chart,
        } => cmd_score(
            &corpus,
            &lexicon,
            theta,
            &out_dir,
            &gamma_orientation,
            meteor_gamma,
            meteor_exponent,
            chart,
        ),
        Command::Attack {
            corpus,
            kind,
            seed,
            lexicon,
            types,
            out,
        } => {
            let kind: AttackKind = kind.parse()?;
            let filter = parse_types(&types)?;
            let lex = open_lexicon(&lexicon)?;
            let manifest = attack_corpus_file(&corpus, &out, kind, seed, &lex, &filter)?;
            let replaced: usize = manifest.per_sample.iter().map(|s| s.count).sum();
            println!(
                "{kind}: {} records, {replaced} replacements -> {}",
                manifest.per_sample.len(),
                out.display()
            );
            Ok(())
        }
        Command::Prefs {
            corpus,
            lexicon,
            n,
            negatives,
            perturb,
            seed,
            external,
            allow_smaller,
            out,
            sft_out,
        } => {
            let lex = open_lexicon(&lexicon)?;
            let records = read_corpus(&corpus)?;
            let external: Option<BTreeMap<String, Vec<String>>> =
                external.as_deref().map(read_external_negatives).transpose()?;
            let mut config = PrefConfig::new(seed);
            config.sample_count = n;
            config.negatives_per_sample = negatives;
            config.perturb = perturb.parse::<PerturbCount>()?;
            config.allow_smaller = allow_smaller;
            let (triples, report) = build_preference_dataset(&records, &lex, &config, external.as_ref())?;
            write_jsonl(&out, &triples)?;
            let mut readme = out.clone().into_os_string();
            readme.push(".README.md");
            write_text(Path::new(&readme), DATASET_README)?;
            if let Some(sft) = sft_out {
                write_jsonl(&sft, &build_sft_dataset(&records, &lex))?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Lexicon { input, format, stats } => {
            let (lex, report) = load_lexicon(&input, resolve_format(format, &input))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let mut out = json!({ "load": report });
            if stats {
                out["stats"] = serde_json::to_value(lex.stats()?)?;
            }
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(())
        }
        Command::Diff { before, after, out } => {
            let before = CorpusScore::from_scores(read_scores(&before)?)?;
            let after = CorpusScore::from_scores(read_scores(&after)?)?;
            let report = diff_report(&before, &after)?;
            match out {
                Some(path) => write_json(&path, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(())
        }
    }
}

fn read_scores(path: &Path) -> Result<Vec<MolHalluScore>> {
    let text = fs::read_to_string(path).map_err(|e| molhallu::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    match serde_json::from_str(&text) {
        Ok(v) => Ok(v),
        // also accept one score per line
        Err(_) => Ok(read_jsonl(path)?),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|c| {
        c.downcast_ref::<molhallu::Error>().is_some_and(|e| e.is_io()) || c.downcast_ref::<std::io::Error>().is_some()
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
