//! Minimal SVG line charts of daily-mean coverage.

use std::fmt::Write as _;
use std::io::Write;

use super::ExperimentResult;
use crate::error::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 400.0;
const PAD_L: f64 = 50.0;
const PAD_R: f64 = 190.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 40.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per result: daily-mean coverage against day index.
pub fn write_coverage_svg<W2: Write>(results: &[ExperimentResult], title: &str, mut w: W2) -> Result<()> {
    let max_day = results.iter().filter_map(|r| r.series.last_day()).max().unwrap_or(0).max(1) as f64;
    let pw = W - PAD_L - PAD_R;
    let ph = H - PAD_T - PAD_B;
    let x = |d: f64| PAD_L + d / max_day * pw;
    let y = |c: f64| PAD_T + (1.0 - c) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13">{}</text>"#, PAD_L, escape(title));
    for i in 0..=5 {
        let c = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{PAD_L}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{c:.1}</text>"##,
            PAD_L + pw,
            PAD_L - 6.0,
            y(c) + 4.0,
            yy = y(c)
        );
    }
    let step = ((max_day / 6.0).ceil() as u64).max(1);
    let mut d = 0;
    while d as f64 <= max_day {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{d}</text>"#, x(d as f64), H - PAD_B + 16.0);
        d += step;
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">day</text>"#, PAD_L + pw / 2.0, H - 6.0);
    let _ = writeln!(s, r#"<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    for (i, r) in results.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = r
            .series
            .daily_mean
            .iter()
            .map(|(d, c)| format!("{:.1},{:.1}", x(*d as f64), y(*c)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = PAD_T + 14.0 * i as f64 + 8.0;
        let lx = W - PAD_R + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{} {} {}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            r.scenario,
            r.strategy.name(),
            r.strategy.param()
        );
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes()).map_err(|e| Error::io("<svg>", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::CoverageSeries;
    use crate::experiments::{SamplingStrategy, Scenario};
    use crate::trace_model::UserId;
    use std::collections::BTreeMap;

    #[test]
    fn one_polyline_per_result() {
        let u = UserId::new("a").unwrap();
        let series = CoverageSeries::from_user_days([((u.clone(), 0), 0.5), ((u, 3), 1.0)].into_iter().collect());
        let r = ExperimentResult {
            strategy: SamplingStrategy::TopRouters { k: 2 },
            scenario: Scenario::Personal,
            series,
            histograms: BTreeMap::new(),
            mean_coverage: Some(0.75),
            training_pairs: 0,
        };
        let mut buf = Vec::new();
        write_coverage_svg(&[r.clone(), r], "a <b>", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.matches("<polyline").count(), 2);
        assert!(text.contains("a &lt;b&gt;"));
        assert!(text.trim_end().ends_with("</svg>"));
    }
}
