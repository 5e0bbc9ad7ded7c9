//! Plain-text metric table rendering. Stored values are fractions; the
//! table multiplies by 100 and rounds half-up to two decimals.

use listreward_core::metric::MetricReport;

use crate::eval::EvalReport;

/// Half-up rounding to two decimals, applied after scaling to percent.
/// A single multiply plus `round` (half-away-from-zero equals half-up for
/// non-negative input) keeps the result stable under FMA contraction.
pub fn percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

fn fmt_pct(value: Option<f64>) -> String {
    value.map_or_else(|| "-".to_string(), |v| format!("{:.2}", percent(v)))
}

fn fmt_raw(value: Option<f64>) -> String {
    value.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn row(name: &str, r: &MetricReport) -> Vec<String> {
    vec![
        name.to_string(),
        r.n.to_string(),
        fmt_pct(Some(r.acc)),
        fmt_pct(Some(r.mrr)),
        fmt_pct(r.acc_llm),
        fmt_pct(r.mrr_llm),
        fmt_raw(r.cp),
        fmt_raw(r.vll),
    ]
}

/// Renders the per-benchmark rows plus a final Average row, columns
/// aligned.
pub fn render_table(report: &EvalReport) -> String {
    let header = ["Benchmark", "N", "Acc", "MRR", "Acc^LLM", "MRR^LLM", "CP", "VLL"];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (name, r) in &report.benchmarks {
        rows.push(row(name, r));
    }
    rows.push(row("Average", &report.aggregate));

    let widths: Vec<usize> = (0..header.len())
        .map(|col| rows.iter().map(|r| r[col].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let line: Vec<String> = r
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
