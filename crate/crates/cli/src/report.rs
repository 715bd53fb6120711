//! Human-readable tables followed by one JSON object per metric, so
//! scripts can grep lines starting with `{`.

use std::io::{self, Write};

use packhe::slot::CostReport;
use packhe::wire::{CompareResponse, PackingSummary};
use serde_json::json;

pub fn human_bytes(b: u64) -> String {
    const UNITS: [&str; 5] = ["B", "KB", "MB", "GB", "TB"];
    let mut v = b as f64;
    let mut u = 0;
    while v >= 1000.0 && u + 1 < UNITS.len() {
        v /= 1000.0;
        u += 1;
    }
    if u == 0 {
        format!("{b} B")
    } else {
        format!("{v:.2} {}", UNITS[u])
    }
}

pub fn metric(out: &mut dyn Write, name: &str, value: serde_json::Value) -> io::Result<()> {
    writeln!(out, "{}", json!({ "metric": name, "value": value }))
}

pub fn cost(out: &mut dyn Write, title: &str, report: &CostReport, wall_time_ms: f64) -> io::Result<()> {
    writeln!(out, "{title}")?;
    for (name, v) in report.metrics() {
        if name == "estimated_ciphertext_bytes" {
            writeln!(out, "  {name:<28} {v:>14}  ({})", human_bytes(v))?;
        } else {
            writeln!(out, "  {name:<28} {v:>14}")?;
        }
    }
    writeln!(out, "  {:<28} {:>14.1}", "wall_time_ms", wall_time_ms)?;
    for (name, v) in report.metrics() {
        metric(out, name, v.into())?;
    }
    metric(out, "wall_time_ms", json!(wall_time_ms))
}

fn cell(s: &PackingSummary, v: u64, bytes: bool) -> String {
    match (&s.refused, bytes) {
        (Some(_), _) => "refused".into(),
        (None, true) => human_bytes(v),
        (None, false) => v.to_string(),
    }
}

/// Side-by-side table. A refused interleaved run shows `> cap` in its
/// memory cell.
pub fn compare(out: &mut dyn Write, resp: &CompareResponse, cap: Option<u64>) -> io::Result<()> {
    let (c, i) = (&resp.compact, &resp.interleaved);
    writeln!(out, "profile {}  slots_used {}", resp.profile, resp.slots_used)?;
    writeln!(out, "{:<28} {:>16} {:>16} {:>12}", "metric", "compact", "interleaved", "ratio")?;
    let ratio = |name: &str| resp.ratios.get(name).map_or("-".to_string(), |r| format!("{r:.1}"));
    writeln!(
        out,
        "{:<28} {:>16} {:>16} {:>12}",
        "input_ciphertexts",
        c.input_ciphertexts,
        i.input_ciphertexts,
        ratio("input_ciphertexts")
    )?;
    for ((name, cv), (_, iv)) in c.report.metrics().into_iter().zip(i.report.metrics()) {
        let bytes = name == "estimated_ciphertext_bytes";
        let icell = match (&i.refused, bytes, cap) {
            (Some(_), true, Some(cap)) => format!("> {}", human_bytes(cap)),
            (Some(_), false, _) => format!("({iv})"),
            _ => cell(i, iv, bytes),
        };
        let ccell = match (&c.refused, bytes) {
            (Some(_), _) => format!("({cv})"),
            _ => cell(c, cv, bytes),
        };
        writeln!(out, "{name:<28} {ccell:>16} {icell:>16} {:>12}", ratio(name))?;
    }
    let wall = |s: &PackingSummary| s.wall_time_ms.map_or("-".to_string(), |w| format!("{w:.1}"));
    writeln!(out, "{:<28} {:>16} {:>16} {:>12}", "sim_wall_time_ms", wall(c), wall(i), ratio("wall_time"))?;
    for (label, s) in [("compact", c), ("interleaved", i)] {
        if let Some(why) = &s.refused {
            writeln!(out, "{label} run refused: {why}; its column shows the plan in parentheses")?;
        } else if !s.measured {
            writeln!(out, "{label} column is the planner estimate")?;
        }
    }
    let agree = match (&c.logits, &i.logits) {
        (Some(a), Some(b)) => {
            let same = a == b;
            writeln!(
                out,
                "predictions: compact {} interleaved {} ({})",
                packhe::cnn::argmax(a),
                packhe::cnn::argmax(b),
                if same { "logits identical" } else { "LOGITS DIFFER" }
            )?;
            Some(same)
        }
        _ => None,
    };

    for (label, s) in [("compact", c), ("interleaved", i)] {
        writeln!(out, "{}", json!({ "metric": "input_ciphertexts", "packing": label, "value": s.input_ciphertexts }))?;
        for (name, v) in s.report.metrics() {
            writeln!(out, "{}", json!({ "metric": name, "packing": label, "value": v, "measured": s.measured }))?;
        }
        if let Some(w) = s.wall_time_ms {
            writeln!(out, "{}", json!({ "metric": "wall_time_ms", "packing": label, "value": w }))?;
        }
        writeln!(out, "{}", json!({ "metric": "refused", "packing": label, "value": s.refused.is_some() }))?;
    }
    for (name, r) in &resp.ratios {
        metric(out, &format!("{name}_ratio"), json!(r))?;
    }
    if let Some(same) = agree {
        metric(out, "logits_agree", json!(same))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_are_printed_in_decimal_units() {
        assert_eq!(human_bytes(999), "999 B");
        assert_eq!(human_bytes(188_000_000_000), "188.00 GB");
        assert_eq!(human_bytes(1_500_000), "1.50 MB");
    }

    #[test]
    fn cost_lines_are_json_per_metric() {
        let report = CostReport { mult_count: 3, rotation_count: 7, ..CostReport::default() };
        let mut buf = Vec::new();
        cost(&mut buf, "ops", &report, 1.25).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let json: Vec<serde_json::Value> =
            text.lines().filter(|l| l.starts_with('{')).map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(json.len(), 9);
        assert_eq!(json[0], json!({"metric": "mult_count", "value": 3}));
        assert_eq!(json[3], json!({"metric": "rotation_count", "value": 7}));
        assert!(text.starts_with("ops\n  mult_count"));
    }
}
