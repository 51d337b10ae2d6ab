//! Plain-text metric reports: one `key: value` pair per line.
//!
//! ```text
//! samples: 1000        # scored samples
//! t0: 50               # first scored sample
//! rms: 0.000241        # physical units, full precision
//! sigma_y: 0.2447
//! nrms: 0.0987%        # four decimals
//! nrms_fraction: 0.000987...
//! ```
//!
//! Keys are lowercase identifiers; values never contain line breaks.

use ssenc_core::MetricReport;

pub fn format_metrics(r: &MetricReport) -> Vec<(String, String)> {
    vec![
        ("samples".into(), r.count.to_string()),
        ("t0".into(), r.t0.to_string()),
        ("rms".into(), r.rms.to_string()),
        ("sigma_y".into(), r.sigma_y.to_string()),
        ("nrms".into(), format!("{:.4}%", 100.0 * r.nrms)),
        ("nrms_fraction".into(), r.nrms.to_string()),
    ]
}

pub fn render(lines: &[(String, String)]) -> String {
    lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
}

/// Parses a report; `None` if any non-empty line breaks the grammar.
pub fn parse(text: &str) -> Option<Vec<(String, String)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once(": ")?;
            let ok = !k.is_empty() && k.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            ok.then(|| (k.to_owned(), v.to_owned()))
        })
        .collect()
}
