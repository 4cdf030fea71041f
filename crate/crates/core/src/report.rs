//! Canonical report documents and plot-ready CSV emission.
//!
//! Documents are JSON with sorted keys, floats rounded to nine significant
//! digits, and a trailing newline, so identical results serialize to
//! identical bytes. Numbers that do not exist (no batches, no samples) are
//! serialized as `null` next to an explicit flag rather than as zero.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::dataset::{DatasetSummary, ObjectId, Violation};
use crate::error::{Error, Result};
use crate::pipeline::{
    ClassComparison, CompareConfig, CompareReport, PatchSweepRow, PointwiseReport, ThetaSweepRow,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Where a report's inputs came from.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    /// RFC 3339 timestamp; omitted entirely when `None` so byte-identical
    /// golden files stay possible.
    pub timestamp: Option<String>,
    pub tool: String,
    pub inputs: Vec<InputRef>,
}

/// One input directory with its content hash.
#[derive(Debug, Clone)]
pub struct InputRef {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Rounds to nine significant digits; reports carry no more precision than
/// that so their bytes do not depend on accumulated noise.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    format!("{v:.8e}").parse().expect("formatted float reparses")
}

fn num(v: f64) -> Value {
    Value::Number(
        serde_json::Number::from_f64(round_sig9(v)).expect("report numbers are finite"),
    )
}

fn opt_num(v: Option<f64>) -> Value {
    match v {
        Some(v) => num(v),
        None => Value::Null,
    }
}

fn ids(ids: &[ObjectId]) -> Value {
    Value::Array(ids.iter().map(|id| Value::String(id.to_string())).collect())
}

fn provenance_value(p: &Provenance) -> Value {
    let mut obj = Map::new();
    if let Some(ts) = &p.timestamp {
        obj.insert("timestamp".into(), json!(ts));
    }
    obj.insert("tool".into(), json!(p.tool));
    obj.insert(
        "inputs".into(),
        Value::Array(
            p.inputs
                .iter()
                .map(|i| json!({"role": i.role, "path": i.path, "sha256": i.sha256}))
                .collect(),
        ),
    );
    Value::Object(obj)
}

fn summary_value(s: &DatasetSummary) -> Value {
    json!({
        "image_count": s.image_count,
        "per_class_counts": Value::Object(
            s.per_class_counts
                .iter()
                .map(|(id, count)| (id.to_string(), json!(count)))
                .collect(),
        ),
        "box_height_quantiles": match &s.box_height_quantiles {
            None => Value::Null,
            Some(q) => json!({
                "min": num(q.min),
                "p25": num(q.p25),
                "median": num(q.median),
                "p75": num(q.p75),
                "max": num(q.max),
            }),
        },
    })
}

fn config_value(cfg: &CompareConfig) -> Value {
    json!({
        "theta": num(cfg.theta),
        "patch": {"h": cfg.patch.h(), "w": cfg.patch.w()},
        "confidence_floor": num(cfg.confidence_floor),
        "min_batch_size": cfg.min_batch_size,
        "classes": match &cfg.classes {
            None => Value::Null,
            Some(list) => Value::Array(list.iter().map(|c| json!(c.0)).collect()),
        },
        "reduction": cfg.reduction.name(),
        "pairing_radius": num(cfg.pairing_radius),
    })
}

fn class_comparison_value(c: &ClassComparison) -> Value {
    json!({
        "class_id": c.class_id.0,
        "class_name": c.class_name,
        "contexts_a": c.contexts_a,
        "contexts_b": c.contexts_b,
        "n_batches": c.batches.len(),
        "no_overlap": c.no_overlap(),
        "w1_reduced": opt_num(c.w1_reduced),
        "m_diff_reduced": opt_num(c.m_diff_reduced),
        "overlap_fraction_a": num(c.overlap_fraction_a),
        "overlap_fraction_b": num(c.overlap_fraction_b),
        "mean_batch_size_a": opt_num(c.mean_batch_size_a),
        "mean_batch_size_b": opt_num(c.mean_batch_size_b),
        "overlap_a": ids(&c.overlap_a),
        "overlap_b": ids(&c.overlap_b),
        "no_overlap_a": ids(&c.no_overlap_a),
        "no_overlap_b": ids(&c.no_overlap_b),
        "batches": Value::Array(
            c.batches
                .iter()
                .map(|b| json!({
                    "reference": b.reference.to_string(),
                    "size_a": b.members_a.len(),
                    "size_b": b.members_b.len(),
                    "w1": num(b.w1),
                    "m_diff": num(b.m_diff),
                    "members_a": ids(&b.members_a),
                    "members_b": ids(&b.members_b),
                }))
                .collect(),
        ),
    })
}

fn comparison_result_value(direction: &str, r: &CompareReport) -> Value {
    json!({
        "direction": direction,
        "set_a": r.set_a,
        "set_b": r.set_b,
        "summary_a": summary_value(&r.summary_a),
        "summary_b": summary_value(&r.summary_b),
        "classes": Value::Array(r.classes.iter().map(class_comparison_value).collect()),
    })
}

/// Document for `compare`; `results` carries one entry per requested
/// direction.
pub fn compare_document(results: &[(&str, &CompareReport)], prov: &Provenance) -> Value {
    let config = config_value(&results[0].1.config);
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "compare",
        "config": config,
        "provenance": provenance_value(prov),
        "results": Value::Array(
            results
                .iter()
                .map(|(direction, r)| comparison_result_value(direction, r))
                .collect(),
        ),
    })
}

fn sweep_class_value(s: &crate::pipeline::SweepClassStats) -> Value {
    json!({
        "class_id": s.class_id.0,
        "class_name": s.class_name,
        "n_batches": s.n_batches,
        "w1_reduced": opt_num(s.w1_reduced),
        "m_diff_reduced": opt_num(s.m_diff_reduced),
        "overlap_fraction_a": num(s.overlap_fraction_a),
        "overlap_fraction_b": num(s.overlap_fraction_b),
        "mean_batch_size_a": opt_num(s.mean_batch_size_a),
        "mean_batch_size_b": opt_num(s.mean_batch_size_b),
    })
}

pub fn theta_sweep_document(
    rows: &[ThetaSweepRow],
    cfg: &CompareConfig,
    prov: &Provenance,
) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "theta_sweep",
        "config": config_value(cfg),
        "provenance": provenance_value(prov),
        "points": Value::Array(
            rows.iter()
                .map(|row| json!({
                    "theta": num(row.theta),
                    "classes": Value::Array(row.per_class.iter().map(sweep_class_value).collect()),
                }))
                .collect(),
        ),
    })
}

pub fn patch_sweep_document(
    rows: &[PatchSweepRow],
    cfg: &CompareConfig,
    prov: &Provenance,
) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "patch_sweep",
        "config": config_value(cfg),
        "provenance": provenance_value(prov),
        "points": Value::Array(
            rows.iter()
                .map(|row| json!({
                    "patch": {"h": row.patch.h(), "w": row.patch.w()},
                    "classes": Value::Array(row.per_class.iter().map(sweep_class_value).collect()),
                }))
                .collect(),
        ),
    })
}

pub fn pointwise_document(r: &PointwiseReport, prov: &Provenance) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "pointwise",
        "config": config_value(&r.config),
        "provenance": provenance_value(prov),
        "set_a": r.set_a,
        "set_b": r.set_b,
        "classes": Value::Array(
            r.per_class
                .iter()
                .map(|c| json!({
                    "class_id": c.class_id.0,
                    "class_name": c.class_name,
                    "n_pairs": c.n_pairs,
                    "pointwise_mean_diff": opt_num(c.pointwise_mean_diff),
                    "distribution_w1": opt_num(c.distribution_w1),
                }))
                .collect(),
        ),
    })
}

pub fn summary_document(name: &str, s: &DatasetSummary, prov: &Provenance) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "provenance": provenance_value(prov),
        "dataset": name,
        "summary": summary_value(s),
    })
}

pub fn validation_document(violations: &[Violation]) -> Value {
    Value::Array(
        violations
            .iter()
            .map(|v| {
                json!({
                    "image_id": v.image_id,
                    "field": v.field,
                    "message": v.message,
                })
            })
            .collect(),
    )
}

/// Serializes a document canonically: two-space pretty printing, keys sorted
/// (the default `serde_json` map is ordered), newline-terminated.
pub fn write_document(doc: &Value, mut w: impl Write) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|e| Error::Report(format!("write failed: {e}")))
}

/// The plot families a CSV can be emitted for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    DiffVsOverlap,
    ThetaSweep,
    PatchSweep,
    PointwiseVsDistribution,
}

impl PlotKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::DiffVsOverlap => "diff_vs_overlap",
            PlotKind::ThetaSweep => "theta_sweep",
            PlotKind::PatchSweep => "patch_sweep",
            PlotKind::PointwiseVsDistribution => "pointwise_vs_distribution",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diff_vs_overlap" => Ok(PlotKind::DiffVsOverlap),
            "theta_sweep" => Ok(PlotKind::ThetaSweep),
            "patch_sweep" => Ok(PlotKind::PatchSweep),
            "pointwise_vs_distribution" => Ok(PlotKind::PointwiseVsDistribution),
            other => Err(Error::InvalidConfig(format!("unknown plot kind '{other}'"))),
        }
    }
}

/// Data source for [`emit_plot_csv`].
#[derive(Debug, Clone, Copy)]
pub enum PlotSource<'a> {
    Compare(&'a CompareReport),
    Theta(&'a [ThetaSweepRow]),
    Patch(&'a [PatchSweepRow]),
    Pointwise(&'a PointwiseReport),
}

fn fmt_f64(v: f64) -> String {
    format!("{}", round_sig9(v))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Writes one plot-ready CSV. Column sets per kind:
///
/// - `diff_vs_overlap`: `class,overlap_fraction_a,mean_w1,n_batches` — one
///   row per class that produced batches.
/// - `theta_sweep`: `class,theta,mean_w1,mean_m_diff,overlap_a,overlap_b,
///   mean_batch_a,mean_batch_b,n_batches` — one row per (theta, class).
/// - `patch_sweep`: same with `patch_h,patch_w` in place of `theta`.
/// - `pointwise_vs_distribution`: `class,pointwise_mean_diff,
///   distribution_w1,n_pairs` — one row per class with pairs.
///
/// The source must match the kind.
pub fn emit_plot_csv(source: PlotSource<'_>, kind: PlotKind, w: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    match (kind, source) {
        (PlotKind::DiffVsOverlap, PlotSource::Compare(report)) => {
            writer.write_record(["class", "overlap_fraction_a", "mean_w1", "n_batches"])?;
            for c in &report.classes {
                if c.no_overlap() {
                    continue;
                }
                writer.write_record([
                    c.class_id.to_string(),
                    fmt_f64(c.overlap_fraction_a),
                    fmt_opt(c.w1_reduced),
                    c.batches.len().to_string(),
                ])?;
            }
        }
        (PlotKind::ThetaSweep, PlotSource::Theta(rows)) => {
            writer.write_record([
                "class",
                "theta",
                "mean_w1",
                "mean_m_diff",
                "overlap_a",
                "overlap_b",
                "mean_batch_a",
                "mean_batch_b",
                "n_batches",
            ])?;
            for row in rows {
                for c in &row.per_class {
                    writer.write_record([
                        c.class_id.to_string(),
                        fmt_f64(row.theta),
                        fmt_opt(c.w1_reduced),
                        fmt_opt(c.m_diff_reduced),
                        fmt_f64(c.overlap_fraction_a),
                        fmt_f64(c.overlap_fraction_b),
                        fmt_opt(c.mean_batch_size_a),
                        fmt_opt(c.mean_batch_size_b),
                        c.n_batches.to_string(),
                    ])?;
                }
            }
        }
        (PlotKind::PatchSweep, PlotSource::Patch(rows)) => {
            writer.write_record([
                "class",
                "patch_h",
                "patch_w",
                "mean_w1",
                "mean_m_diff",
                "overlap_a",
                "overlap_b",
                "mean_batch_a",
                "mean_batch_b",
                "n_batches",
            ])?;
            for row in rows {
                for c in &row.per_class {
                    writer.write_record([
                        c.class_id.to_string(),
                        row.patch.h().to_string(),
                        row.patch.w().to_string(),
                        fmt_opt(c.w1_reduced),
                        fmt_opt(c.m_diff_reduced),
                        fmt_f64(c.overlap_fraction_a),
                        fmt_f64(c.overlap_fraction_b),
                        fmt_opt(c.mean_batch_size_a),
                        fmt_opt(c.mean_batch_size_b),
                        c.n_batches.to_string(),
                    ])?;
                }
            }
        }
        (PlotKind::PointwiseVsDistribution, PlotSource::Pointwise(report)) => {
            writer.write_record(["class", "pointwise_mean_diff", "distribution_w1", "n_pairs"])?;
            for c in &report.per_class {
                if c.n_pairs == 0 {
                    continue;
                }
                writer.write_record([
                    c.class_id.to_string(),
                    fmt_opt(c.pointwise_mean_diff),
                    fmt_opt(c.distribution_w1),
                    c.n_pairs.to_string(),
                ])?;
            }
        }
        (kind, _) => {
            return Err(Error::Report(format!(
                "plot source does not match kind '{}'",
                kind.name()
            )));
        }
    }
    writer.flush().map_err(|e| Error::Report(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_sig9_truncates_noise() {
        assert_eq!(round_sig9(0.1 + 0.2), 0.3);
        assert_eq!(round_sig9(1.0), 1.0);
        assert_eq!(round_sig9(0.0), 0.0);
        assert_eq!(round_sig9(-0.0), 0.0);
        assert_eq!(round_sig9(123456789.123), 123456789.0);
    }

    #[test]
    fn documents_serialize_byte_identically() {
        let prov = Provenance {
            timestamp: None,
            tool: "contextval 0.1.0".into(),
            inputs: vec![InputRef {
                role: "set_a".into(),
                path: "/tmp/a".into(),
                sha256: "abc".into(),
            }],
        };
        let doc = summary_document(
            "d",
            &crate::dataset::DatasetSummary {
                image_count: 0,
                per_class_counts: Default::default(),
                box_height_quantiles: None,
            },
            &prov,
        );
        let mut first = Vec::new();
        let mut second = Vec::new();
        write_document(&doc, &mut first).unwrap();
        write_document(&doc, &mut second).unwrap();
        assert_eq!(first, second);
        assert!(first.ends_with(b"\n"));
    }

    #[test]
    fn kind_source_mismatch_is_rejected() {
        let rows: Vec<ThetaSweepRow> = vec![];
        let err = emit_plot_csv(PlotSource::Theta(&rows), PlotKind::PatchSweep, Vec::new());
        assert!(matches!(err.unwrap_err(), Error::Report(_)));
    }

    #[test]
    fn empty_sweep_yields_header_only_csv() {
        let rows: Vec<ThetaSweepRow> = vec![];
        let mut out = Vec::new();
        emit_plot_csv(PlotSource::Theta(&rows), PlotKind::ThetaSweep, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("class,theta,"));
    }
}
