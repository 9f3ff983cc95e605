//! Comparison tables, counterfactual-count histograms and before/after diffs.
//!
//! Scores are stored on a 0–1 scale and shown on a 0–100 scale with one
//! decimal, the way result tables are usually printed.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineScores;
use crate::error::{Error, Result};
use crate::molhallu::CorpusScore;

pub const MEAN_ROW_ID: &str = "mean";

/// Upper bound (exclusive) of the low-hallucination band `0 < N_c < 3`.
pub const LOW_BAND_MAX: usize = 3;
/// Lower bound (exclusive) of the highly hallucinated band `N_c > 4`.
pub const HIGH_BAND_MIN: usize = 4;

pub const METRIC_COLUMNS: [&str; 8] = [
    "bleu2",
    "bleu4",
    "rouge1",
    "rouge2",
    "rougeL",
    "meteor",
    "mol_hallu",
    "n_counterfactual",
];

/// Round to one decimal for display.
pub fn display(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// One table row. Metrics are on the 0–100 scale, unrounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub id: String,
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    #[serde(rename = "rougeL")]
    pub rouge_l: f64,
    pub meteor: f64,
    pub mol_hallu: f64,
    pub n_counterfactual: f64,
}

impl ComparisonRow {
    pub fn values(&self) -> [f64; 8] {
        [
            self.bleu2,
            self.bleu4,
            self.rouge1,
            self.rouge2,
            self.rouge_l,
            self.meteor,
            self.mol_hallu,
            self.n_counterfactual,
        ]
    }

    fn from_values(id: String, v: [f64; 8]) -> Self {
        ComparisonRow {
            id,
            bleu2: v[0],
            bleu4: v[1],
            rouge1: v[2],
            rouge2: v[3],
            rouge_l: v[4],
            meteor: v[5],
            mol_hallu: v[6],
            n_counterfactual: v[7],
        }
    }

    fn rounded(&self) -> Self {
        Self::from_values(self.id.clone(), self.values().map(display))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    /// Sorted by id.
    pub rows: Vec<ComparisonRow>,
    pub mean: ComparisonRow,
}

/// Join Mol-Hallu and baseline scores by sample id.
pub fn comparison_table(corpus: &CorpusScore, baselines: &[(String, BaselineScores)]) -> Result<ComparisonTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let by_id: HashMap<&str, &BaselineScores> = baselines.iter().map(|(id, b)| (id.as_str(), b)).collect();
    if by_id.len() != baselines.len() || baselines.len() != corpus.len() {
        return Err(Error::IdMismatch(format!(
            "{} hallucination scores vs {} baseline scores",
            corpus.len(),
            baselines.len()
        )));
    }
    let mut rows = Vec::with_capacity(corpus.len());
    for s in &corpus.sample_scores {
        let b = by_id
            .get(s.id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("no baseline scores for {:?}", s.id)))?;
        rows.push(ComparisonRow {
            id: s.id.clone(),
            bleu2: 100.0 * b.bleu2,
            bleu4: 100.0 * b.bleu4,
            rouge1: 100.0 * b.rouge1,
            rouge2: 100.0 * b.rouge2,
            rouge_l: 100.0 * b.rouge_l,
            meteor: 100.0 * b.meteor,
            mol_hallu: 100.0 * s.f1,
            n_counterfactual: s.n_counterfactual as f64,
        });
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    let n = rows.len() as f64;
    let mut sums = [0.0; 8];
    for r in &rows {
        for (acc, v) in sums.iter_mut().zip(r.values()) {
            *acc += v;
        }
    }
    let mean = ComparisonRow::from_values(MEAN_ROW_ID.to_string(), sums.map(|s| s / n));
    Ok(ComparisonTable { rows, mean })
}

impl ComparisonTable {
    /// CSV with a header row; per-sample rows then the mean row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id"];
        header.extend(METRIC_COLUMNS);
        w.write_record(&header).expect("in-memory write");
        for row in self.rows.iter().chain(std::iter::once(&self.mean)) {
            let mut rec = vec![row.id.clone()];
            rec.extend(row.values().iter().map(|v| format!("{:.1}", display(*v))));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// The same table as JSON, values rounded to one decimal.
    pub fn to_json(&self) -> serde_json::Value {
        let rounded = ComparisonTable {
            rows: self.rows.iter().map(ComparisonRow::rounded).collect(),
            mean: self.mean.rounded(),
        };
        serde_json::to_value(rounded).expect("table serializes")
    }

    /// Fixed-width text table.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<width$}", "id");
        for c in METRIC_COLUMNS {
            let _ = write!(out, " {c:>9}");
        }
        out.push('\n');
        for row in self.rows.iter().chain(std::iter::once(&self.mean)) {
            let _ = write!(out, "{:<width$}", row.id);
            for v in row.values() {
                let _ = write!(out, " {:>9.1}", display(v));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub counts: BTreeMap<usize, usize>,
    pub total: usize,
    /// Samples with `0 < N_c < 3`.
    pub low_band: usize,
    /// Samples with `N_c > 4`.
    pub high_band: usize,
    pub mean: f64,
}

pub fn histogram_nc(values: &[usize]) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    Ok(Histogram {
        total: values.len(),
        low_band: values.iter().filter(|&&v| v > 0 && v < LOW_BAND_MAX).count(),
        high_band: values.iter().filter(|&&v| v > HIGH_BAND_MIN).count(),
        mean: values.iter().sum::<usize>() as f64 / values.len() as f64,
        counts,
    })
}

pub fn corpus_histogram(corpus: &CorpusScore) -> Result<Histogram> {
    let values: Vec<usize> = corpus.sample_scores.iter().map(|s| s.n_counterfactual).collect();
    histogram_nc(&values)
}

impl Histogram {
    pub fn low_band_mass(&self) -> f64 {
        self.low_band as f64 / self.total as f64
    }

    pub fn high_band_mass(&self) -> f64 {
        self.high_band as f64 / self.total as f64
    }

    /// Plain-text horizontal bars, one line per bin from 0 to the max count.
    pub fn render_text(&self) -> String {
        const WIDTH: usize = 40;
        let max_bin = self.counts.keys().copied().max().unwrap_or(0);
        let peak = self.counts.values().copied().max().unwrap_or(1);
        let mut out = String::from("N_c  samples\n");
        for bin in 0..=max_bin {
            let c = self.counts.get(&bin).copied().unwrap_or(0);
            let bar = (c * WIDTH).div_ceil(peak);
            let _ = writeln!(out, "{bin:>3}  {c:>5} {}", "#".repeat(bar));
        }
        let _ = writeln!(
            out,
            "low band (0<N_c<3): {} ({:.1}%)  high band (N_c>4): {} ({:.1}%)  mean N_c: {:.2}",
            self.low_band,
            100.0 * self.low_band_mass(),
            self.high_band,
            100.0 * self.high_band_mass(),
            self.mean
        );
        out
    }

    /// Static SVG bar chart.
    pub fn render_svg(&self) -> String {
        let max_bin = self.counts.keys().copied().max().unwrap_or(0);
        let peak = self.counts.values().copied().max().unwrap_or(1) as f64;
        let bins = max_bin + 1;
        let (bar_w, gap, plot_h, margin) = (32.0, 8.0, 200.0, 40.0);
        let width = margin * 2.0 + bins as f64 * (bar_w + gap);
        let height = plot_h + margin * 2.0;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n"
        );
        let _ = writeln!(svg, "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(
            svg,
            "  <text x=\"{margin}\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">counterfactual entities per sample (n={})</text>",
            self.total
        );
        for bin in 0..bins {
            let c = self.counts.get(&bin).copied().unwrap_or(0);
            let h = plot_h * c as f64 / peak;
            let x = margin + bin as f64 * (bar_w + gap);
            let y = margin + plot_h - h;
            let fill = if bin > HIGH_BAND_MIN {
                "#c0392b"
            } else if bin > 0 && bin < LOW_BAND_MAX {
                "#27ae60"
            } else {
                "#7f8c8d"
            };
            let _ = writeln!(
                svg,
                "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{bar_w:.1}\" height=\"{h:.1}\" fill=\"{fill}\"/>"
            );
            let _ = writeln!(
                svg,
                "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{bin}</text>",
                x + bar_w / 2.0,
                margin + plot_h + 14.0
            );
            let _ = writeln!(
                svg,
                "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{c}</text>",
                x + bar_w / 2.0,
                y - 3.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub samples: usize,
    pub mean_f1_before: f64,
    pub mean_f1_after: f64,
    pub delta_mean_f1: f64,
    pub delta_mean_precision: f64,
    pub delta_mean_recall: f64,
    /// Mean of per-sample F1 deltas; equals `delta_mean_f1`.
    pub mean_sample_delta_f1: f64,
    pub mean_nc_before: f64,
    pub mean_nc_after: f64,
    /// `mean_nc_after - mean_nc_before`; negative when hallucinations dropped.
    pub nc_shift: f64,
    pub histogram_before: Histogram,
    pub histogram_after: Histogram,
}

/// Compare two scorings of the same samples, matched by id.
pub fn diff_report(before: &CorpusScore, after: &CorpusScore) -> Result<DiffReport> {
    if before.len() != after.len() {
        return Err(Error::IdMismatch(format!(
            "{} samples before, {} after",
            before.len(),
            after.len()
        )));
    }
    let after_by_id: HashMap<&str, &crate::molhallu::MolHalluScore> =
        after.sample_scores.iter().map(|s| (s.id.as_str(), s)).collect();
    if after_by_id.len() != after.len() {
        return Err(Error::IdMismatch("duplicate ids in the second scoring".into()));
    }
    let n = before.len() as f64;
    let (mut dp, mut dr, mut df) = (0.0, 0.0, 0.0);
    for b in &before.sample_scores {
        let a = after_by_id
            .get(b.id.as_str())
            .ok_or_else(|| Error::IdMismatch(format!("{:?} missing from the second scoring", b.id)))?;
        dp += a.precision - b.precision;
        dr += a.recall - b.recall;
        df += a.f1 - b.f1;
    }
    let histogram_before = corpus_histogram(before)?;
    let histogram_after = corpus_histogram(after)?;
    Ok(DiffReport {
        samples: before.len(),
        mean_f1_before: before.mean_f1,
        mean_f1_after: after.mean_f1,
        delta_mean_f1: after.mean_f1 - before.mean_f1,
        delta_mean_precision: dp / n,
        delta_mean_recall: dr / n,
        mean_sample_delta_f1: df / n,
        mean_nc_before: histogram_before.mean,
        mean_nc_after: histogram_after.mean,
        nc_shift: histogram_after.mean - histogram_before.mean,
        histogram_before,
        histogram_after,
    })
}
