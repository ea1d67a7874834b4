use std::fmt::Write as _;

use super::run::RunMetrics;

/// Plain-text summary. Rates are printed with three decimals.
pub fn render_table(m: &RunMetrics) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<22}{:>9}{:>9}{:>7}{:>9}", "attack", "injected", "detected", "rate", "disputed");
    for (kind, k) in &m.attacks {
        let _ = writeln!(
            out,
            "{:<22}{:>9}{:>9}{:>7.3}{:>9}",
            kind.to_string(),
            k.injected,
            k.detected,
            k.detection_rate(),
            k.disputed
        );
    }
    let _ = writeln!(
        out,
        "legitimate {}  false-positives {}  fp-rate {:.3}",
        m.legitimate,
        m.false_positives,
        m.false_positive_rate()
    );
    let latency: Vec<String> = m
        .detection_latency
        .iter()
        .map(|l| l.map_or("-".to_string(), |n| n.to_string()))
        .collect();
    let _ = writeln!(out, "latency (events) [{}]", latency.join(" "));
    let f = &m.federation;
    let _ = writeln!(
        out,
        "federation queries={} responses={} pushes={} rejected={}",
        f.queries, f.responses, f.pushes, f.rejected
    );
    out
}

pub fn render_json(m: &RunMetrics) -> String {
    serde_json::to_string_pretty(m).expect("metrics always serialize")
}

pub fn parse_json(text: &str) -> Result<RunMetrics, serde_json::Error> {
    serde_json::from_str(text)
}
