//! Minimal SVG line charts.

use std::fmt::Write as _;

use crate::harness::{EpochRecord, Prediction};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const TICKS: usize = 5;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub values: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Draws every series against shared x positions. `x_ticks` are `(x, label)`.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[Series],
    x_ticks: &[(f64, String)],
) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let (x0, x1) = match (x.first(), x.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (*a - 0.5, *a + 0.5),
        _ => (0.0, 1.0),
    };
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.values.iter().copied()));
    let px = |v: f64| LEFT + (v - x0) / (x1 - x0) * plot_w;
    let py = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black"><line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for k in 0..=TICKS {
        let v = y0 + (y1 - y0) * k as f64 / TICKS as f64;
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<g class="ytick"><line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text></g>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            format_tick(v, y1 - y0)
        );
    }
    for (v, label) in x_ticks {
        let xp = px(*v);
        let _ = writeln!(
            s,
            r#"<g class="xtick"><line x1="{xp:.2}" y1="{0}" x2="{xp:.2}" y2="{1}" stroke="black"/><text x="{xp:.2}" y="{2}" text-anchor="middle">{3}</text></g>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            escape(label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text class="ylabel" x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for (i, series) in series.iter().enumerate() {
        let points: Vec<String> = x
            .iter()
            .zip(series.values)
            .map(|(a, b)| format!("{:.2},{:.2}", px(*a), py(*b)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            escape(series.label),
            series.color,
            points.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
            lx + 25.0,
            series.color,
            lx + 30.0,
            ly + 4.0,
            escape(series.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64, span: f64) -> String {
    if span < 1e-2 {
        format!("{v:.1e}")
    } else if span < 10.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.1}")
    }
}

fn evenly_spaced(n: usize, count: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let count = count.min(n).max(1);
    let mut idx: Vec<usize> = (0..count)
        .map(|k| if count == 1 { 0 } else { k * (n - 1) / (count - 1) })
        .collect();
    idx.dedup();
    idx
}

/// Training and validation loss per epoch.
pub fn loss_chart(history: &[EpochRecord]) -> String {
    let x: Vec<f64> = history.iter().map(|r| r.epoch as f64).collect();
    let train: Vec<f64> = history.iter().map(|r| r.train_loss).collect();
    let val: Vec<f64> = history.iter().map(|r| r.val_loss).collect();
    let ticks: Vec<(f64, String)> = evenly_spaced(history.len(), 6)
        .into_iter()
        .map(|i| (x[i], history[i].epoch.to_string()))
        .collect();
    line_chart(
        "Model loss",
        "epoch",
        "loss (MSE, scaled)",
        &x,
        &[
            Series { label: "loss", color: "#1f77b4", values: &train },
            Series { label: "val_loss", color: "#ff7f0e", values: &val },
        ],
        &ticks,
    )
}

/// Actual and predicted prices over the target dates.
pub fn overlay_chart(preds: &[Prediction], title: &str) -> String {
    let x: Vec<f64> = preds
        .iter()
        .map(|p| (p.date - preds[0].date).num_days() as f64)
        .collect();
    let actual: Vec<f64> = preds.iter().map(|p| p.actual).collect();
    let predicted: Vec<f64> = preds.iter().map(|p| p.predicted).collect();
    let ticks: Vec<(f64, String)> = evenly_spaced(preds.len(), 5)
        .into_iter()
        .map(|i| (x[i], preds[i].date.format("%Y-%m-%d").to_string()))
        .collect();
    line_chart(
        title,
        "date",
        "price",
        &x,
        &[
            Series { label: "actual", color: "#1f77b4", values: &actual },
            Series { label: "predicted", color: "#ff7f0e", values: &predicted },
        ],
        &ticks,
    )
}
