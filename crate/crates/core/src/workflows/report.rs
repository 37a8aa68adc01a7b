//! Metallographic preparation reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PermId, RepoState};

pub const PREP_ENTRY_TYPE: &str = "Metallographic Prep";
pub const PREP_STEP_TYPE: &str = "Preparation Step";
pub const PREP_COLUMNS: [&str; 5] = ["Step", "Protocol", "Abrasive", "Lubricant", "Duration"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ReportTable {
    /// Fails with SHAPE if any row's arity differs from the column count.
    pub fn new(title: impl Into<String>, columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::Shape(format!(
                "row {i} has {} cells, table has {} columns",
                r.len(),
                columns.len()
            )));
        }
        Ok(ReportTable {
            title: title.into(),
            columns,
            rows,
            warnings: Vec::new(),
        })
    }

    /// Standalone HTML page.
    pub fn to_html(&self) -> String {
        let mut out = String::from("<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\">");
        let _ = write!(out, "<title>{}</title>", escape_html(&self.title));
        out.push_str(
            "<style>table{border-collapse:collapse}th,td{border:1px solid #888;padding:4px 8px}</style>",
        );
        let _ = write!(out, "</head>\n<body>\n<h1>{}</h1>\n<table>\n<tr>", escape_html(&self.title));
        for c in &self.columns {
            let _ = write!(out, "<th>{}</th>", escape_html(c));
        }
        out.push_str("</tr>\n");
        for row in &self.rows {
            out.push_str("<tr>");
            for cell in row {
                let _ = write!(out, "<td>{}</td>", escape_html(cell));
            }
            out.push_str("</tr>\n");
        }
        out.push_str("</table>\n");
        for w in &self.warnings {
            let _ = writeln!(out, "<p class=\"warning\">{}</p>", escape_html(w));
        }
        out.push_str("</body>\n</html>\n");
        out
    }

    /// Fixed-width text with a rule under the header.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|i| {
                self.rows
                    .iter()
                    .map(|r| r[i].chars().count())
                    .chain([self.columns[i].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            padded.join(" | ").trim_end().to_string()
        };
        let mut out = format!("{}\n\n", self.title);
        out.push_str(&line(&self.columns));
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        out.push_str(&rule.join("-+-"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        for w in &self.warnings {
            let _ = writeln!(out, "\nwarning: {w}");
        }
        out
    }
}

pub fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Preparation-step children of `entry`, ordered by `sequence_index`.
pub fn preparation_steps(state: &RepoState, entry: &PermId) -> Result<Vec<PermId>> {
    let rec = state.object(entry)?;
    let mut steps: Vec<(i64, PermId)> = Vec::new();
    for child in &rec.children {
        let c = state.object(child)?;
        if c.type_name != PREP_STEP_TYPE {
            continue;
        }
        let idx = c.integer("sequence_index").ok_or_else(|| {
            Error::Domain(format!("preparation step {child} has no sequence_index"))
        })?;
        steps.push((idx, child.clone()));
    }
    steps.sort();
    if let Some(w) = steps.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Domain(format!(
            "steps {} and {} share sequence_index {}",
            w[0].1, w[1].1, w[0].0
        )));
    }
    Ok(steps.into_iter().map(|(_, id)| id).collect())
}

/// Tabulates the preparation steps under `entry`.
pub fn prep_report(state: &RepoState, entry: &PermId) -> Result<ReportTable> {
    let rec = state.object(entry)?;
    let mut rows = Vec::new();
    for id in preparation_steps(state, entry)? {
        let s = state.object(&id)?;
        let text = |k: &str| s.text(k).unwrap_or("").to_string();
        rows.push(vec![
            s.integer("sequence_index").unwrap_or_default().to_string(),
            text("protocol_name"),
            text("abrasive"),
            text("lubricant"),
            s.real("duration").map(|d| format!("{d} s")).unwrap_or_default(),
        ]);
    }
    let mut table = ReportTable::new(
        format!("Preparation report: {}", rec.label()),
        PREP_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows,
    )?;
    if table.rows.is_empty() {
        table
            .warnings
            .push(format!("entry {entry} has no preparation steps"));
    }
    Ok(table)
}
