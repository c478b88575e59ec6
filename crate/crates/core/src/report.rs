//! Semicolon-delimited CSV report rendering.
//!
//! Every renderer returns the whole file as a `String` so callers can write
//! outputs atomically. Lines starting with `#` are run metadata and precede the
//! header, except in the rule CSVs whose first line is always the header.

use std::fmt::Write as _;

use csv::WriterBuilder;

use crate::complexity::ComplexityReport;
use crate::evolution::{CountSummary, EvolutionRule};
use crate::graphlets::{FrequencyReport, GraphletClass, MotifReport};

pub const RULES_HEADER: &str = "antecedent;consequent;stability;versions;mean_support;mean_confidence";
pub const COUNTS_HEADER: &str = "version;cgr_total;cger_distinct;stable";
pub const FREQUENCY_HEADER: &str = "size;class_id;canonical_code;version;count;rel_freq_percent";
pub const CATALOG_HEADER: &str = "size;class_id;canonical_code;edge_list";
pub const MOTIF_HEADER: &str =
    "size;class_id;canonical_code;mean_rel_freq_percent;cyclomatic;z_passed;z_tested;null_model_degenerate";
pub const COMPLEXITY_HEADER: &str = "version;cg_cx;degenerate";
pub const AGGREGATE_ROW: &str = "ECG-Cx";

fn table<I, R>(comments: &[String], header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(header);
    out.push('\n');
    let mut w = WriterBuilder::new()
        .delimiter(b';')
        .has_headers(false)
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(row).expect("in-memory csv write");
    }
    let bytes = w.into_inner().expect("in-memory csv flush");
    out.push_str(std::str::from_utf8(&bytes).expect("csv of utf-8 fields is utf-8"));
    out
}

/// Shortest round-trip decimal form.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn rules_csv(rules: &[EvolutionRule]) -> String {
    table(
        &[],
        RULES_HEADER,
        rules.iter().map(|r| {
            vec![
                r.key.antecedent.joined(),
                r.key.consequent.joined(),
                r.stability().to_string(),
                r.versions().collect::<Vec<_>>().join(","),
                num(r.mean_support()),
                num(r.mean_confidence()),
            ]
        }),
    )
}

pub fn counts_csv(summary: &CountSummary, comments: &[String]) -> String {
    table(
        comments,
        COUNTS_HEADER,
        summary.per_version.iter().chain([&summary.overall]).map(|c| {
            vec![
                c.version.clone(),
                c.cgr_total.to_string(),
                c.cger_distinct.to_string(),
                c.stable.to_string(),
            ]
        }),
    )
}

pub fn frequency_csv(freqs: &FrequencyReport) -> String {
    table(
        &[],
        FREQUENCY_HEADER,
        freqs.series.iter().flat_map(|s| {
            s.per_version.iter().zip(&freqs.versions).map(move |(f, v)| {
                vec![
                    s.class.size.to_string(),
                    s.class.class_id.to_string(),
                    s.class.code_string(),
                    v.clone(),
                    f.count.to_string(),
                    num(f.rel_freq_percent),
                ]
            })
        }),
    )
}

pub fn catalog_csv<'a>(classes: impl IntoIterator<Item = &'a GraphletClass>) -> String {
    table(
        &[],
        CATALOG_HEADER,
        classes.into_iter().map(|c| {
            vec![
                c.size.to_string(),
                c.class_id.to_string(),
                c.code_string(),
                c.edge_list(),
            ]
        }),
    )
}

pub fn motif_csv(report: &MotifReport) -> String {
    let c = &report.criterion;
    let mut comments = vec![format!("min_mean_freq_percent={}", c.min_mean_freq_percent)];
    match c.z_min {
        Some(z) => comments.push(format!(
            "z_min={z} null_samples={} swaps_per_edge={} seed={}",
            c.null_samples, c.swaps_per_edge, report.seed
        )),
        None => comments.push("z_min=none".into()),
    }
    table(
        &comments,
        MOTIF_HEADER,
        report.motifs.iter().map(|m| {
            let (passed, tested) = m.z.as_ref().map_or((String::new(), String::new()), |z| {
                (z.passed.to_string(), z.tested.to_string())
            });
            vec![
                m.class.size.to_string(),
                m.class.class_id.to_string(),
                m.class.code_string(),
                num(m.mean_rel_freq),
                m.class.cyclomatic().to_string(),
                passed,
                tested,
                (m.null_model_degenerate as u8).to_string(),
            ]
        }),
    )
}

pub fn complexity_csv(report: &ComplexityReport) -> String {
    let sizes: Vec<String> = report.sizes_used.iter().map(usize::to_string).collect();
    let comments = vec![report.formula().to_string(), format!("sizes={}", sizes.join(","))];
    let rows = report
        .versions
        .iter()
        .zip(&report.per_version)
        .map(|(v, c)| vec![v.clone(), num(c.value), (c.degenerate as u8).to_string()])
        .chain([vec![AGGREGATE_ROW.to_string(), num(report.ecg_cx), String::new()]]);
    table(&comments, COMPLEXITY_HEADER, rows)
}
