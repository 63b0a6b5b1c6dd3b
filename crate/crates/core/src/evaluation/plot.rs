//! Seen/unseen diagram data and its SVG rendering.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "estimator_id,a_m,p_seen_db,p_unseen_db,gap_db";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramRow {
    pub estimator_id: String,
    pub a_m: f64,
    pub p_seen_db: f64,
    pub p_unseen_db: f64,
    pub gap_db: f64,
}

/// Reference marks drawn behind the estimator points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramReference {
    /// Mean power of random precoding; unseen power cannot usefully fall below it,
    /// which is the line `gap = bound - seen`.
    pub random_bound_db: f64,
    /// `(p_seen_db, gap_db)` of principal-component baselines.
    pub principal_component: Vec<(f64, f64)>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn diagram_csv(rows: &[DiagramRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.estimator_id),
            r.a_m,
            r.p_seen_db,
            r.p_unseen_db,
            r.gap_db
        );
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Seen power on the horizontal axis, gap on the vertical axis, one colour per estimator.
pub fn diagram_svg(rows: &[DiagramRow], reference: &DiagramReference) -> String {
    let (w, h, margin) = (640.0, 480.0, 60.0);
    let finite = |v: f64| v.is_finite();
    let xs = rows.iter().map(|r| r.p_seen_db).chain(reference.principal_component.iter().map(|p| p.0));
    let ys = rows.iter().map(|r| r.gap_db).chain(reference.principal_component.iter().map(|p| p.1));
    let x_min = xs.filter(|v| finite(*v)).fold(reference.random_bound_db, f64::min).floor() - 1.0;
    let y_min = ys.filter(|v| finite(*v)).fold(-1.0f64, f64::min).floor() - 1.0;
    let (x_max, y_max) = (1.0, 1.0);
    let px = |x: f64| margin + (x - x_min) / (x_max - x_min) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y - y_min) / (y_max - y_min) * (h - 2.0 * margin);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let step = if x_max - x_min > 12.0 { 2.0 } else { 1.0 };
    let mut t = x_min.ceil();
    while t <= x_max {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#e0e0e0"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
            px(t),
            py(y_max),
            py(y_min),
            h - margin + 16.0,
            t
        );
        t += step;
    }
    let ystep = if y_max - y_min > 12.0 { 2.0 } else { 1.0 };
    let mut t = y_min.ceil();
    while t <= y_max {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#e0e0e0"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            px(x_min),
            py(t),
            px(x_max),
            margin - 6.0,
            py(t) + 4.0,
            t
        );
        t += ystep;
    }
    let _ = writeln!(
        s,
        r##"<rect x="{margin}" y="{margin}" width="{0}" height="{1}" fill="none" stroke="black"/>"##,
        w - 2.0 * margin,
        h - 2.0 * margin
    );
    let _ = writeln!(
        s,
        r#"<text x="{0}" y="{1}" text-anchor="middle">mean power on seen squares (dB)</text>"#,
        w / 2.0,
        h - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">unseen minus seen (dB)</text>"#,
        h / 2.0
    );

    // random bound: gap = r - x, clipped to the plot
    let r = reference.random_bound_db;
    let (x0, x1) = ((r - y_max).max(x_min), (r - y_min).min(x_max));
    if x0 < x1 {
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-dasharray="6 4"/>"##,
            px(x0),
            py(r - x0),
            px(x1),
            py(r - x1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">random precoding</text>"#,
            px(x0) + 4.0,
            py(r - x0) + 14.0
        );
    }
    let _ = writeln!(
        s,
        r##"<path d="M {0:.2} {1:.2} l 12 12 m 0 -12 l -12 12" stroke="black" stroke-width="2"/><text x="{2:.2}" y="{3:.2}" text-anchor="end">TDD</text>"##,
        px(0.0) - 6.0,
        py(0.0) - 6.0,
        px(0.0) - 8.0,
        py(0.0) - 8.0
    );
    for (xp, yp) in &reference.principal_component {
        if xp.is_finite() && yp.is_finite() {
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="none" stroke="#555"/>"##,
                px(*xp) - 3.5,
                py(*yp) - 3.5
            );
        }
    }

    let mut ids: Vec<&str> = Vec::new();
    for r in rows {
        if !ids.contains(&r.estimator_id.as_str()) {
            ids.push(&r.estimator_id);
        }
    }
    for r in rows {
        if !(r.p_seen_db.is_finite() && r.gap_db.is_finite()) {
            continue;
        }
        let k = ids.iter().position(|i| *i == r.estimator_id).unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"><title>{} a={} m</title></circle>"#,
            px(r.p_seen_db),
            py(r.gap_db),
            PALETTE[k % PALETTE.len()],
            esc(&r.estimator_id),
            r.a_m
        );
    }
    for (k, id) in ids.iter().enumerate() {
        let y = margin + 14.0 + 14.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            margin + 10.0,
            y,
            PALETTE[k % PALETTE.len()],
            margin + 18.0,
            y + 4.0,
            esc(id)
        );
    }
    s.push_str("</svg>\n");
    s
}
