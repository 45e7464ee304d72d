//! Per-condition result tables in delimiter-separated and grid form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use super::experiment::{aggregate_file_name, load_aggregate, AggregateFile};
use super::HarnessError;
use crate::metrics::{AggregateMetrics, BaselineReport, MetricSummary};
use crate::world::Condition;

pub const UNDEFINED: &str = "--";
pub const CORE_COLUMNS: [&str; 6] = ["TSA", "TTD", "MCR", "MTATO", "CAAL", "CR"];
pub const EXTENDED_COLUMNS: [&str; 7] = ["TSA", "TSA-C", "MCR", "MGD", "CAAL", "SC", "AR_SC"];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub backend: String,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionTable {
    pub condition: Condition,
    pub core: Vec<ReportRow>,
    pub extended: Vec<ReportRow>,
    pub baseline: BaselineReport,
}

/// `mean ± sem`, with `--` for an undefined mean or SEM.
pub fn format_summary(s: &MetricSummary) -> String {
    match (s.mean, s.sem) {
        (None, _) => UNDEFINED.to_string(),
        (Some(m), Some(e)) => format!("{m:.4} ± {e:.4}"),
        (Some(m), None) => format!("{m:.4} ± {UNDEFINED}"),
    }
}

pub fn core_cells(agg: Option<&AggregateMetrics>) -> Vec<String> {
    match agg {
        None => vec![UNDEFINED.to_string(); CORE_COLUMNS.len()],
        Some(a) => [&a.tsa, &a.ttd, &a.mcr, &a.mtato, &a.caal, &a.cr]
            .into_iter()
            .map(format_summary)
            .collect(),
    }
}

pub fn extended_cells(agg: Option<&AggregateMetrics>) -> Vec<String> {
    match agg {
        None => vec![UNDEFINED.to_string(); EXTENDED_COLUMNS.len()],
        Some(a) => [&a.tsa, &a.tsa_c, &a.mcr, &a.mgd, &a.caal, &a.sc, &a.ar_sc]
            .into_iter()
            .map(format_summary)
            .collect(),
    }
}

pub fn baseline_note(b: &BaselineReport) -> String {
    match b {
        BaselineReport::Single { value, label } => format!("chance baseline (TSA): {label} = {value:.4}"),
        BaselineReport::References { values } => {
            let parts: Vec<String> = values.iter().map(|(l, v)| format!("{l} = {v:.4}")).collect();
            format!("chance references (TSA): {}", parts.join(", "))
        }
    }
}

/// Builds tables from aggregate files; rows are keyed by backend.
pub fn build_tables(files: &[AggregateFile]) -> Vec<ConditionTable> {
    let mut by_cond: BTreeMap<u8, Vec<&AggregateFile>> = BTreeMap::new();
    for f in files {
        by_cond.entry(f.condition.index()).or_default().push(f);
    }
    by_cond
        .into_values()
        .map(|mut group| {
            group.sort_by(|a, b| a.backend.cmp(&b.backend));
            let condition = group[0].condition;
            ConditionTable {
                condition,
                core: group
                    .iter()
                    .map(|f| ReportRow { backend: f.backend.clone(), cells: core_cells(f.aggregate.as_ref()) })
                    .collect(),
                extended: group
                    .iter()
                    .map(|f| ReportRow {
                        backend: f.backend.clone(),
                        cells: extended_cells(f.aggregate.as_ref()),
                    })
                    .collect(),
                baseline: group[0].baseline.clone(),
            }
        })
        .collect()
}

/// Loads every `aggregate_E*.json` under the given result directories.
pub fn report(dirs: &[PathBuf]) -> Result<Vec<ConditionTable>, HarnessError> {
    let mut files = Vec::new();
    for dir in dirs {
        let mut found = false;
        for c in Condition::ALL {
            let p = dir.join(aggregate_file_name(c));
            if p.exists() {
                files.push(load_aggregate(&p)?);
                found = true;
            }
        }
        if !found {
            return Err(HarnessError::Usage(format!("no aggregate files in {}", dir.display())));
        }
    }
    Ok(build_tables(&files))
}

fn csv_block(out: &mut String, name: &str, cond: Condition, cols: &[&str], rows: &[ReportRow]) {
    let _ = writeln!(out, "table,condition,backend,{}", cols.join(","));
    for r in rows {
        let _ = writeln!(out, "{name},{cond},{},{}", r.backend, r.cells.join(","));
    }
}

/// Comma-separated output; baseline annotations are `#` comment lines.
pub fn render_csv(tables: &[ConditionTable]) -> String {
    let mut out = String::new();
    for t in tables {
        csv_block(&mut out, "core", t.condition, &CORE_COLUMNS, &t.core);
        csv_block(&mut out, "extended", t.condition, &EXTENDED_COLUMNS, &t.extended);
        let _ = writeln!(out, "# {}: {}", t.condition, baseline_note(&t.baseline));
    }
    out
}

fn grid_block(out: &mut String, title: &str, cols: &[&str], rows: &[ReportRow], footer: &str) {
    let mut header = vec!["backend".to_string()];
    header.extend(cols.iter().map(|c| c.to_string()));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| std::iter::once(r.backend.clone()).chain(r.cells.iter().cloned()).collect())
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            std::iter::once(&header)
                .chain(&body)
                .map(|row| row[i].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let rule: String = widths.iter().map(|w| format!("+{}", "-".repeat(w + 2))).collect::<String>() + "+";
    let fmt_row = |row: &[String]| -> String {
        row.iter()
            .zip(&widths)
            .map(|(c, w)| format!("| {c}{} ", " ".repeat(w - c.chars().count())))
            .collect::<String>()
            + "|"
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "{}", fmt_row(&header));
    let _ = writeln!(out, "{rule}");
    for row in &body {
        let _ = writeln!(out, "{}", fmt_row(row));
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "{footer}");
    let _ = writeln!(out);
}

/// Human-readable boxed tables.
pub fn render_grid(tables: &[ConditionTable]) -> String {
    let mut out = String::new();
    for t in tables {
        let note = baseline_note(&t.baseline);
        grid_block(&mut out, &format!("{} core", t.condition), &CORE_COLUMNS, &t.core, &note);
        grid_block(&mut out, &format!("{} extended", t.condition), &EXTENDED_COLUMNS, &t.extended, &note);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_formatting() {
        let s = MetricSummary::from_values([1.0, 0.0, 1.0]);
        assert_eq!(format_summary(&s), "0.6667 ± 0.3333");
        assert_eq!(format_summary(&MetricSummary::from_values([1.0])), "1.0000 ± --");
        assert_eq!(format_summary(&MetricSummary::from_values([])), "--");
    }

    #[test]
    fn missing_aggregate_is_all_gaps() {
        assert_eq!(core_cells(None), vec!["--"; 6]);
        assert_eq!(extended_cells(None).len(), 7);
    }
}
