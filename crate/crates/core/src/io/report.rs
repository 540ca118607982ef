//! Per-image evaluation records, their aggregate, and JSON/CSV emitters.
//!
//! Every real number is written rounded to 6 decimals so the two formats
//! carry identical values and repeated runs are byte-identical.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::metrics::{Confusion, Flag, ImageEval, MatchReport, StratifiedMetrics, StratumMetrics};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correctness: f64,
    pub completeness: f64,
    pub quality: f64,
    pub confusion: Confusion,
    pub matching: MatchReport,
    pub flags: Vec<Flag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratified: Option<StratifiedMetrics>,
}

impl EvalRecord {
    pub fn from_eval(id: impl Into<String>, eval: &ImageEval) -> Self {
        let mut flags = eval.pixel.flags.clone();
        flags.extend(&eval.topo.flags);
        Self {
            id: id.into(),
            precision: eval.pixel.precision,
            recall: eval.pixel.recall,
            f1: eval.pixel.f1,
            correctness: eval.topo.correctness,
            completeness: eval.topo.completeness,
            quality: eval.topo.quality,
            confusion: eval.confusion,
            matching: eval.matching,
            flags,
            stratified: eval.stratified.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateMode {
    /// Unweighted mean of per-image metrics.
    #[default]
    Mean,
    /// Metrics recomputed from counts summed over all images.
    Pooled,
}

impl FromStr for AggregateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(AggregateMode::Mean),
            "pooled" => Ok(AggregateMode::Pooled),
            _ => Err(Error::InvalidParameter(format!(
                "aggregate mode must be `mean` or `pooled`, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for AggregateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregateMode::Mean => "mean",
            AggregateMode::Pooled => "pooled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::InvalidParameter(format!(
                "report format must be `json` or `csv`, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumSummary {
    pub f1: f64,
    pub correctness: f64,
    pub completeness: f64,
    pub quality: f64,
    /// Images whose stratum was nonempty.
    pub images: usize,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratifiedSummary {
    pub thin: StratumSummary,
    pub thick: StratumSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub mode: AggregateMode,
    pub images: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correctness: f64,
    pub completeness: f64,
    pub quality: f64,
    pub confusion: Confusion,
    pub matching: MatchReport,
    pub flags: Vec<Flag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stratified: Option<StratifiedSummary>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn summarize_stratum(strata: &[&StratumMetrics], mode: AggregateMode) -> StratumSummary {
    let live: Vec<&StratumMetrics> = strata
        .iter()
        .copied()
        .filter(|s| !s.flags.contains(&Flag::EmptyStratum))
        .collect();
    if live.is_empty() {
        return StratumSummary {
            f1: 0.0,
            correctness: 0.0,
            completeness: 0.0,
            quality: 0.0,
            images: 0,
            flags: vec![Flag::EmptyStratum],
        };
    }
    match mode {
        AggregateMode::Mean => StratumSummary {
            f1: mean(live.iter().map(|s| s.f1)),
            correctness: mean(live.iter().map(|s| s.correctness)),
            completeness: mean(live.iter().map(|s| s.completeness)),
            quality: mean(live.iter().map(|s| s.quality)),
            images: live.len(),
            flags: Vec::new(),
        },
        AggregateMode::Pooled => {
            let confusion = live.iter().fold(Confusion::default(), |a, s| a.merge(&s.confusion));
            let matching = live[1..].iter().fold(live[0].matching, |a, s| a.merge(&s.matching));
            let pixel = confusion.metrics();
            let topo = crate::metrics::topo_metrics(&matching);
            let mut flags = pixel.flags;
            flags.extend(topo.flags);
            StratumSummary {
                f1: pixel.f1,
                correctness: topo.correctness,
                completeness: topo.completeness,
                quality: topo.quality,
                images: live.len(),
                flags,
            }
        }
    }
}

pub fn aggregate(records: &[EvalRecord], mode: AggregateMode) -> Result<Aggregate> {
    let Some(first) = records.first() else {
        return Err(Error::InvalidParameter("cannot aggregate an empty record set".into()));
    };
    let confusion = records.iter().fold(Confusion::default(), |a, r| a.merge(&r.confusion));
    let matching = records[1..].iter().fold(first.matching, |a, r| a.merge(&r.matching));
    let stratified = if records.iter().all(|r| r.stratified.is_some()) {
        let strata: Vec<&StratifiedMetrics> = records.iter().filter_map(|r| r.stratified.as_ref()).collect();
        Some(StratifiedSummary {
            thin: summarize_stratum(&strata.iter().map(|s| &s.thin).collect::<Vec<_>>(), mode),
            thick: summarize_stratum(&strata.iter().map(|s| &s.thick).collect::<Vec<_>>(), mode),
        })
    } else {
        None
    };
    let base = Aggregate {
        mode,
        images: records.len(),
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        correctness: 0.0,
        completeness: 0.0,
        quality: 0.0,
        confusion,
        matching,
        flags: Vec::new(),
        stratified,
    };
    Ok(match mode {
        AggregateMode::Mean => Aggregate {
            precision: mean(records.iter().map(|r| r.precision)),
            recall: mean(records.iter().map(|r| r.recall)),
            f1: mean(records.iter().map(|r| r.f1)),
            correctness: mean(records.iter().map(|r| r.correctness)),
            completeness: mean(records.iter().map(|r| r.completeness)),
            quality: mean(records.iter().map(|r| r.quality)),
            ..base
        },
        AggregateMode::Pooled => {
            let pixel = confusion.metrics();
            let topo = crate::metrics::topo_metrics(&matching);
            let mut flags = pixel.flags;
            flags.extend(topo.flags);
            Aggregate {
                precision: pixel.precision,
                recall: pixel.recall,
                f1: pixel.f1,
                correctness: topo.correctness,
                completeness: topo.completeness,
                quality: topo.quality,
                flags,
                ..base
            }
        }
    })
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x: f64 = fixed(n.as_f64().unwrap_or_default()).parse().unwrap_or_default();
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    records: Vec<&'a EvalRecord>,
    aggregate: &'a Aggregate,
}

fn sorted(records: &[EvalRecord]) -> Vec<&EvalRecord> {
    let mut out: Vec<&EvalRecord> = records.iter().collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

fn flag_list(flags: &[Flag]) -> String {
    flags.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(";")
}

const CSV_HEAD: [&str; 16] = [
    "id",
    "precision",
    "recall",
    "f1",
    "correctness",
    "completeness",
    "quality",
    "tp",
    "fp",
    "fn",
    "tn",
    "skel_matched_extracted",
    "skel_unmatched_extracted",
    "skel_matched_reference",
    "skel_unmatched_reference",
    "flags",
];

const STRATUM_COLUMNS: [&str; 5] = ["f1", "correctness", "completeness", "quality", "flags"];

#[allow(clippy::too_many_arguments)]
fn csv_row(
    id: &str,
    metrics: [f64; 6],
    confusion: &Confusion,
    matching: &MatchReport,
    flags: &[Flag],
    strata: Option<[([f64; 4], &[Flag]); 2]>,
    with_strata: bool,
) -> Vec<String> {
    let mut row = vec![id.to_string()];
    row.extend(metrics.iter().map(|&v| fixed(v)));
    row.extend([confusion.tp, confusion.fp, confusion.fn_, confusion.tn].map(|v| v.to_string()));
    row.extend(
        [
            matching.matched_extracted,
            matching.unmatched_extracted,
            matching.matched_reference,
            matching.unmatched_reference,
        ]
        .map(|v| v.to_string()),
    );
    row.push(flag_list(flags));
    if with_strata {
        match strata {
            Some(strata) => {
                for (vals, flags) in strata {
                    row.extend(vals.iter().map(|&v| fixed(v)));
                    row.push(flag_list(flags));
                }
            }
            None => row.extend(std::iter::repeat_n(String::new(), 2 * STRATUM_COLUMNS.len())),
        }
    }
    row
}

fn render_csv(records: &[&EvalRecord], agg: &Aggregate) -> Result<String> {
    let with_strata = records.iter().any(|r| r.stratified.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head: Vec<String> = CSV_HEAD.iter().map(|s| s.to_string()).collect();
    if with_strata {
        for stratum in ["thin", "thick"] {
            head.extend(STRATUM_COLUMNS.iter().map(|c| format!("{stratum}_{c}")));
        }
    }
    let fail = |e: csv::Error| Error::InvalidValue(format!("csv encoding failed: {e}"));
    w.write_record(&head).map_err(fail)?;
    for r in records {
        let strata = r.stratified.as_ref().map(|s| {
            [&s.thin, &s.thick].map(|m| ([m.f1, m.correctness, m.completeness, m.quality], m.flags.as_slice()))
        });
        w.write_record(csv_row(
            &r.id,
            [r.precision, r.recall, r.f1, r.correctness, r.completeness, r.quality],
            &r.confusion,
            &r.matching,
            &r.flags,
            strata,
            with_strata,
        ))
        .map_err(fail)?;
    }
    let strata = agg
        .stratified
        .as_ref()
        .map(|s| [&s.thin, &s.thick].map(|m| ([m.f1, m.correctness, m.completeness, m.quality], m.flags.as_slice())));
    w.write_record(csv_row(
        &format!("aggregate:{}", agg.mode),
        [
            agg.precision,
            agg.recall,
            agg.f1,
            agg.correctness,
            agg.completeness,
            agg.quality,
        ],
        &agg.confusion,
        &agg.matching,
        &agg.flags,
        strata,
        with_strata,
    ))
    .map_err(fail)?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidValue(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Serializes records (sorted by id) and their aggregate.
pub fn render_report(records: &[EvalRecord], agg: &Aggregate, format: ReportFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one record".into()));
    }
    let records = sorted(records);
    match format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(JsonReport {
                records,
                aggregate: agg,
            })
            .map_err(|e| Error::InvalidValue(format!("json encoding failed: {e}")))?;
            round_value(&mut v);
            let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => render_csv(&records, agg),
    }
}

pub fn write_report(
    records: &[EvalRecord],
    agg: &Aggregate,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    let text = render_report(records, agg, format)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mask;
    use crate::metrics::{evaluate, EvalConfig, StratifyConfig};

    fn record(id: &str, pred: &Mask, gt: &Mask, stratify: bool) -> EvalRecord {
        let cfg = EvalConfig {
            stratify: stratify.then(StratifyConfig::default),
            ..Default::default()
        };
        EvalRecord::from_eval(id, &evaluate(pred, gt, &cfg).unwrap())
    }

    fn vessel() -> Mask {
        Mask::from_fn(40, 30, |r, c| (10..13).contains(&r) || (20..31).contains(&c) && r > 5)
    }

    fn with_f1(id: &str, f1: f64) -> EvalRecord {
        let mut r = record(id, &vessel(), &vessel(), false);
        r.f1 = f1;
        r
    }

    #[test]
    fn single_perfect_image() {
        let recs = vec![record("a", &vessel(), &vessel(), true)];
        let agg = aggregate(&recs, AggregateMode::Mean).unwrap();
        for v in [
            agg.precision,
            agg.recall,
            agg.f1,
            agg.correctness,
            agg.completeness,
            agg.quality,
        ] {
            assert_eq!(v, 1.0);
        }
        assert!(agg.flags.is_empty());
    }

    #[test]
    fn mean_of_two() {
        let agg = aggregate(&[with_f1("a", 0.8), with_f1("b", 0.6)], AggregateMode::Mean).unwrap();
        assert!((agg.f1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn pooled_uses_summed_counts() {
        let gt = vessel();
        let half = Mask::from_fn(40, 30, |r, c| gt.get(r, c) && c < 20);
        let recs = vec![record("a", &gt, &gt, false), record("b", &half, &gt, false)];
        let agg = aggregate(&recs, AggregateMode::Pooled).unwrap();
        let c = agg.confusion;
        assert_eq!(agg.recall, c.tp as f64 / (c.tp + c.fn_) as f64);
        assert!(aggregate(&[], AggregateMode::Mean).is_err());
    }

    #[test]
    fn csv_and_json_agree() {
        let gt = vessel();
        let pred = Mask::from_fn(40, 30, |r, c| gt.get(r, c) && (r + c) % 7 != 0);
        let recs = vec![record("b", &pred, &gt, true), record("a", &gt, &gt, true)];
        let agg = aggregate(&recs, AggregateMode::Mean).unwrap();
        let json: Value = serde_json::from_str(&render_report(&recs, &agg, ReportFormat::Json).unwrap()).unwrap();
        let csv_text = render_report(&recs, &agg, ReportFormat::Csv).unwrap();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        let head = rdr.headers().unwrap().clone();
        let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(&rows[0][0], "a");
        for (i, row) in rows[..2].iter().enumerate() {
            let rec = &json["records"][i];
            for key in ["precision", "recall", "f1", "correctness", "completeness", "quality"] {
                let col = head.iter().position(|h| h == key).unwrap();
                let from_csv: f64 = row[col].parse().unwrap();
                assert_eq!(from_csv, rec[key].as_f64().unwrap(), "{key}");
            }
            let col = head.iter().position(|h| h == "thin_f1").unwrap();
            let from_csv: f64 = row[col].parse().unwrap();
            assert_eq!(from_csv, rec["stratified"]["thin"]["f1"].as_f64().unwrap());
        }
        let f1_col = head.iter().position(|h| h == "f1").unwrap();
        let from_csv: f64 = rows[2][f1_col].parse().unwrap();
        assert_eq!(from_csv, json["aggregate"]["f1"].as_f64().unwrap());
    }

    #[test]
    fn byte_stable() {
        let gt = vessel();
        let recs = vec![
            record("x", &gt, &gt, false),
            record("y", &Mask::empty(40, 30), &gt, false),
        ];
        let agg = aggregate(&recs, AggregateMode::Pooled).unwrap();
        for fmt in [ReportFormat::Json, ReportFormat::Csv] {
            let a = render_report(&recs, &agg, fmt).unwrap();
            let reversed: Vec<EvalRecord> = recs.iter().rev().cloned().collect();
            assert_eq!(a, render_report(&reversed, &agg, fmt).unwrap());
        }
        let json = render_report(&recs, &agg, ReportFormat::Json).unwrap();
        assert!(json.contains("\"precision_undefined\""));
    }
}
