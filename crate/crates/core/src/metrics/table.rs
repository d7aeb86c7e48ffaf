use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::mean_over_apis;

/// One API's metric values, keyed by metric name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ApiRow {
    pub api: String,
    pub values: BTreeMap<String, Option<f64>>,
}

/// Ratios are shown as percentages; usability stays a distance.
fn display_value(metric: &str, value: f64) -> f64 {
    if metric.starts_with("Usability") {
        value
    } else {
        value * 100.0
    }
}

/// Plain-text table with one row per API and an `Average` row. Undefined
/// values print as `n/a` and are left out of the average.
pub fn render_table(rows: &[ApiRow], metrics: &[&str]) -> String {
    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["API".to_string()];
    header.extend(metrics.iter().map(|m| m.to_string()));
    cells.push(header);
    for row in rows {
        let mut line = vec![row.api.clone()];
        for metric in metrics {
            line.push(match row.values.get(*metric).copied().flatten() {
                Some(v) => format!("{:.2}", display_value(metric, v)),
                None => "n/a".into(),
            });
        }
        cells.push(line);
    }
    let mut average = vec!["Average".to_string()];
    for metric in metrics {
        let defined: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.values.get(*metric).copied().flatten())
            .map(|v| display_value(metric, v))
            .collect();
        average.push(match mean_over_apis(&defined) {
            Ok(v) => format!("{v:.2}"),
            Err(_) => "n/a".into(),
        });
    }
    cells.push(average);

    let widths: Vec<usize> =
        (0..cells[0].len()).map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        }
    }
    out
}
