//! Image-quality indicators used to compare enhancement methods, and the
//! comparison report built from them.
//!
//! All indicators work on the 8-bit scale: unit-range pixel values are
//! multiplied by 255. Contrast and definition use the scaled real values
//! directly; entropy uses the 256-level quantized histogram.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::enhance::{Histogram, LEVELS};
use crate::error::{Error, Result};
use crate::image::GrayImage;

const SCALE: f64 = 255.0;

/// Population standard deviation of `255 * v`.
pub fn contrast(img: &GrayImage) -> f64 {
    // offsets from the first pixel keep constant images at exactly zero
    let px = img.as_slice();
    let origin = px[0];
    let n = px.len() as f64;
    let mean = px.iter().map(|&v| (v - origin) * SCALE).sum::<f64>() / n;
    let ss: f64 = px
        .iter()
        .map(|&v| {
            let d = (v - origin) * SCALE - mean;
            d * d
        })
        .sum();
    (ss / n).sqrt()
}

/// Logarithm base for [`entropy_with_base`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Nats,
    Bits,
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nats" | "e" | "ln" => Ok(LogBase::Nats),
            "bits" | "2" | "log2" => Ok(LogBase::Bits),
            other => Err(Error::param(format!(
                "log base must be `nats` or `bits`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for LogBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LogBase::Nats => "nats",
            LogBase::Bits => "bits",
        })
    }
}

/// Shannon entropy of the 256-level histogram in nats.
pub fn entropy(img: &GrayImage) -> f64 {
    entropy_with_base(img, LogBase::Nats)
}

pub fn entropy_with_base(img: &GrayImage, base: LogBase) -> f64 {
    let hist = Histogram::from_image(img);
    let total = hist.total() as f64;
    let nats: f64 = hist
        .bins()
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum();
    // a single occupied bin gives -1 * ln 1 = -0.0
    let nats = nats.max(0.0);
    match base {
        LogBase::Nats => nats,
        LogBase::Bits => nats / std::f64::consts::LN_2,
    }
}

/// Upper bound of [`entropy`] for 256 levels.
pub fn max_entropy() -> f64 {
    (LEVELS as f64).ln()
}

/// Mean gradient magnitude from backward differences,
/// `sqrt((f(m,n) - f(m-1,n))^2 + (f(m,n) - f(m,n-1))^2)`, with `m` the row
/// and `n` the column, on the 255 scale. Only pixels with both backward
/// neighbours contribute, so the mean is over `(M - 1)(N - 1)` terms.
pub fn definition(img: &GrayImage) -> Result<f64> {
    let (w, h) = img.dimensions();
    if w < 2 || h < 2 {
        return Err(Error::param(format!(
            "definition needs at least a 2x2 image, got {w}x{h}"
        )));
    }
    let mut sum = 0.0;
    for m in 1..h {
        let (prev, row) = (img.row(m - 1), img.row(m));
        for n in 1..w {
            let dx = (row[n] - prev[n]) * SCALE;
            let dy = (row[n] - row[n - 1]) * SCALE;
            sum += (dx * dx + dy * dy).sqrt();
        }
    }
    Ok(sum / ((h - 1) * (w - 1)) as f64)
}

/// The three indicators for one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityScores {
    pub contrast: f64,
    pub entropy: f64,
    pub definition: f64,
}

impl QualityScores {
    pub fn measure(img: &GrayImage, base: LogBase) -> Result<Self> {
        Ok(Self {
            contrast: contrast(img),
            entropy: entropy_with_base(img, base),
            definition: definition(img)?,
        })
    }
}

/// One row of a [`QualityReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub method: String,
    #[serde(flatten)]
    pub scores: QualityScores,
}

/// Relative gain of the proposed method over the strongest competitor on
/// one indicator. `percent` is `None` when the competitor scores zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub percent: Option<f64>,
    pub versus: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvements {
    pub contrast: Improvement,
    pub entropy: Improvement,
    pub definition: Improvement,
}

/// Table of indicators per method, plus the proposed method's improvement
/// over the best competing method.
///
/// The reference row (the unprocessed input) is listed but never counts as
/// a competitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub entropy_unit: LogBase,
    pub reference: Option<String>,
    pub proposed: String,
    pub entries: Vec<ReportEntry>,
    pub improvements: Option<Improvements>,
}

/// `100 * (proposed / best - 1)`, undefined when `best` is zero.
pub fn improvement_percent(proposed: f64, best: f64) -> Option<f64> {
    if best == 0.0 || !best.is_finite() || !proposed.is_finite() {
        None
    } else {
        Some(100.0 * (proposed / best - 1.0))
    }
}

impl QualityReport {
    /// Assembles a report from precomputed rows.
    pub fn from_entries(
        entries: Vec<ReportEntry>,
        reference: Option<&str>,
        proposed: &str,
        entropy_unit: LogBase,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::param("report needs at least one method"));
        }
        let proposed_scores = entries
            .iter()
            .find(|e| e.method == proposed)
            .map(|e| e.scores)
            .ok_or_else(|| {
                Error::param(format!("proposed method `{proposed}` is not in the report"))
            })?;
        let competitors: Vec<&ReportEntry> = entries
            .iter()
            .filter(|e| e.method != proposed && Some(e.method.as_str()) != reference)
            .collect();

        let improvements = if competitors.is_empty() {
            None
        } else {
            let best = |pick: fn(&QualityScores) -> f64| -> Improvement {
                // first maximum wins on ties
                let top = competitors
                    .iter()
                    .copied()
                    .reduce(|a, b| {
                        if pick(&b.scores) > pick(&a.scores) {
                            b
                        } else {
                            a
                        }
                    })
                    .expect("non-empty");
                Improvement {
                    percent: improvement_percent(pick(&proposed_scores), pick(&top.scores)),
                    versus: top.method.clone(),
                }
            };
            Some(Improvements {
                contrast: best(|s| s.contrast),
                entropy: best(|s| s.entropy),
                definition: best(|s| s.definition),
            })
        };

        Ok(Self {
            entropy_unit,
            reference: reference.map(str::to_owned),
            proposed: proposed.to_owned(),
            entries,
            improvements,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned Markdown table, rows = methods, four decimals per indicator.
    pub fn to_markdown(&self) -> String {
        let header = ["Method", "Contrast", "Entropy", "Definition"];
        let rows: Vec<[String; 4]> = self
            .entries
            .iter()
            .map(|e| {
                [
                    e.method.clone(),
                    format!("{:.4}", e.scores.contrast),
                    format!("{:.4}", e.scores.entropy),
                    format!("{:.4}", e.scores.definition),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }

        let mut out = String::new();
        let _ = writeln!(
            out,
            "| {:<w0$} | {:>w1$} | {:>w2$} | {:>w3$} |",
            header[0],
            header[1],
            header[2],
            header[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
        let _ = writeln!(
            out,
            "| {} | {}: | {}: | {}: |",
            "-".repeat(widths[0]),
            "-".repeat(widths[1] - 1),
            "-".repeat(widths[2] - 1),
            "-".repeat(widths[3] - 1)
        );
        for row in &rows {
            let _ = writeln!(
                out,
                "| {:<w0$} | {:>w1$} | {:>w2$} | {:>w3$} |",
                row[0],
                row[1],
                row[2],
                row[3],
                w0 = widths[0],
                w1 = widths[1],
                w2 = widths[2],
                w3 = widths[3]
            );
        }
        let _ = writeln!(out, "\nEntropy unit: {}.", self.entropy_unit);

        if let Some(imp) = &self.improvements {
            let fmt = |i: &Improvement| match i.percent {
                Some(p) => format!("{p:+.2}% vs {}", i.versus),
                None => format!("undefined vs {}", i.versus),
            };
            let _ = writeln!(
                out,
                "\nImprovement of {}: contrast {}, entropy {}, definition {}.",
                self.proposed,
                fmt(&imp.contrast),
                fmt(&imp.entropy),
                fmt(&imp.definition)
            );
        }
        out
    }
}

/// A named enhancement method for [`build_report`].
pub type EnhanceFn<'a> = &'a dyn Fn(&GrayImage) -> Result<GrayImage>;

/// Name of the reference row holding the unprocessed input.
pub const ORIGINAL: &str = "Original";

/// Runs each method on `raw`, measures all outputs and the input itself,
/// and compares `proposed` against the other methods.
pub fn build_report(
    raw: &GrayImage,
    methods: &[(&str, EnhanceFn<'_>)],
    proposed: &str,
    entropy_unit: LogBase,
) -> Result<QualityReport> {
    if methods.is_empty() {
        return Err(Error::param("report needs at least one method"));
    }
    if !methods.iter().any(|(name, _)| *name == proposed) {
        return Err(Error::param(format!(
            "proposed method `{proposed}` is not among the methods"
        )));
    }
    let mut entries = vec![ReportEntry {
        method: ORIGINAL.to_owned(),
        scores: QualityScores::measure(raw, entropy_unit)?,
    }];
    for (name, run) in methods {
        let out = run(raw)?;
        entries.push(ReportEntry {
            method: (*name).to_owned(),
            scores: QualityScores::measure(&out, entropy_unit)?,
        });
    }
    QualityReport::from_entries(entries, Some(ORIGINAL), proposed, entropy_unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_examples() {
        assert_eq!(contrast(&GrayImage::filled(5, 4, 0.3)), 0.0);
        let half = GrayImage::from_fn(4, 4, |x, _| if x < 2 { 0.0 } else { 1.0 });
        assert!((contrast(&half) - 127.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&GrayImage::filled(5, 4, 0.3)), 0.0);
        let levels = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as f64 / 255.0);
        assert!((entropy(&levels) - 256f64.ln()).abs() < 1e-12);
        assert!((entropy_with_base(&levels, LogBase::Bits) - 8.0).abs() < 1e-12);
        let two = GrayImage::from_fn(4, 4, |x, _| if x % 2 == 0 { 0.1 } else { 0.9 });
        assert!((entropy(&two) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn definition_examples() {
        assert_eq!(definition(&GrayImage::filled(5, 4, 0.3)).unwrap(), 0.0);
        let ramp = GrayImage::from_fn(7, 9, |_, y| y as f64 / 255.0);
        assert!((definition(&ramp).unwrap() - 1.0).abs() < 1e-9);
        assert!(definition(&GrayImage::filled(1, 5, 0.0)).is_err());
        assert!(definition(&GrayImage::filled(5, 1, 0.0)).is_err());
    }

    fn entry(name: &str, c: f64, e: f64, d: f64) -> ReportEntry {
        ReportEntry {
            method: name.into(),
            scores: QualityScores {
                contrast: c,
                entropy: e,
                definition: d,
            },
        }
    }

    #[test]
    fn identical_methods_give_zero_gain() {
        let rows = vec![entry("a", 3.0, 2.0, 1.0), entry("b", 3.0, 2.0, 1.0)];
        let r = QualityReport::from_entries(rows, None, "a", LogBase::Nats).unwrap();
        let imp = r.improvements.unwrap();
        assert_eq!(imp.contrast.percent, Some(0.0));
        assert_eq!(imp.entropy.percent, Some(0.0));
        assert_eq!(imp.definition.percent, Some(0.0));
    }

    #[test]
    fn zero_competitor_is_undefined() {
        let rows = vec![entry("p", 3.0, 2.0, 1.0), entry("z", 0.0, 0.0, 0.0)];
        let r = QualityReport::from_entries(rows, None, "p", LogBase::Nats).unwrap();
        let imp = r.improvements.as_ref().unwrap();
        assert_eq!(imp.contrast.percent, None);
        assert!(r.to_json().contains("\"percent\": null"));
        assert!(r.to_markdown().contains("undefined vs z"));
    }

    #[test]
    fn report_errors() {
        assert!(QualityReport::from_entries(vec![], None, "p", LogBase::Nats).is_err());
        let rows = vec![entry("a", 1.0, 1.0, 1.0)];
        assert!(QualityReport::from_entries(rows, None, "p", LogBase::Nats).is_err());
        let img = GrayImage::filled(4, 4, 0.5);
        assert!(build_report(&img, &[], "p", LogBase::Nats).is_err());
    }

    #[test]
    fn reference_row_is_not_a_competitor() {
        let id = |i: &GrayImage| Ok(i.clone());
        let img = GrayImage::from_fn(8, 8, |x, y| ((x + 2 * y) % 5) as f64 / 4.0);
        let r = build_report(&img, &[("ssr", &id)], "ssr", LogBase::Nats).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert!(r.improvements.is_none());
    }

    #[test]
    fn markdown_layout() {
        let rows = vec![
            entry("Original", 32.8224, 5.9618, 2.2416),
            entry("Proposed", 76.7143, 7.0119, 14.2746),
        ];
        let md = QualityReport::from_entries(rows, Some("Original"), "Proposed", LogBase::Nats)
            .unwrap()
            .to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Method   | Contrast | Entropy | Definition |");
        assert_eq!(lines[1], "| -------- | -------: | ------: | ---------: |");
        assert_eq!(lines[2], "| Original |  32.8224 |  5.9618 |     2.2416 |");
        assert_eq!(lines[3], "| Proposed |  76.7143 |  7.0119 |    14.2746 |");
    }

    #[test]
    fn json_round_trip() {
        let rows = vec![entry("a", 3.0, 2.0, 1.0), entry("b", 1.5, 2.5, 0.5)];
        let r = QualityReport::from_entries(rows, None, "a", LogBase::Bits).unwrap();
        let back: QualityReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
