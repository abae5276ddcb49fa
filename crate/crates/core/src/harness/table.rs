use super::ResultRow;
use crate::metrics::Thresholds;

/// Shown in the k, Sim/Dist and Prompt cells of a no-example row.
pub const BASELINE_MARKER: &str = "\u{2013}";

/// Column names with the default thresholds.
pub const COLUMNS: [&str; 7] = ["k", "Sim/Dist", "Prompt", "EL<0.1", "EL>0.4", "BLEU", "chrF"];

fn header(thresholds: Thresholds) -> Vec<String> {
    let mut h: Vec<String> = COLUMNS.iter().map(|s| s.to_string()).collect();
    h[3] = format!("EL<{}", thresholds.low);
    h[4] = format!("EL>{}", thresholds.high);
    h
}

fn cells(row: &ResultRow) -> [String; 7] {
    let (k, measure, prompt) = match row.measure {
        Some(m) if row.k > 0 => (row.k.to_string(), m.label().to_owned(), row.prompt_id.to_string()),
        _ => (BASELINE_MARKER.to_owned(), BASELINE_MARKER.to_owned(), BASELINE_MARKER.to_owned()),
    };
    [
        k,
        measure,
        prompt,
        format!("{:.2}", row.el_lt_low),
        format!("{:.2}", row.el_gt_high),
        format!("{:.2}", row.bleu),
        format!("{:.2}", row.chrf),
    ]
}

/// CSV with the seven result columns. Item counts live in the per-row records.
pub fn results_csv(rows: &[ResultRow], thresholds: Thresholds) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(thresholds)).expect("in-memory csv");
    for row in rows {
        w.write_record(cells(row)).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

/// Fixed-width text rendering of the seven result columns.
pub fn results_table(rows: &[ResultRow], thresholds: Thresholds) -> String {
    let header = header(thresholds);
    let body: Vec<[String; 7]> = rows.iter().map(cells).collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{}{}", " ".repeat(w - c.chars().count()), c))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

/// Best `EL<low` first; equal values keep ascending k.
pub fn sort_by_el(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| b.el_lt_low.total_cmp(&a.el_lt_low).then(a.k.cmp(&b.k)));
}
