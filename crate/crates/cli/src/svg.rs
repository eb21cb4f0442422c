//! Minimal SVG plots: ROC curves and a labelled 2-D scatter.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 480.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn header(out: &mut String, comment: &str, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<!-- {comment} -->");
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (PAD, H - PAD, W - PAD / 2.0, PAD);
    let _ = writeln!(
        out,
        "<rect x=\"{x0}\" y=\"{y1}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        x1 - x0,
        y0 - y1
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (x0 + x1) / 2.0,
        H - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str)], x: f64, y: f64) {
    for (i, (label, colour)) in entries.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{colour}\"/>",
            yy - 9.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{yy}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            x + 14.0,
            escape(label)
        );
    }
}

/// One polyline per `(label, fpr, tpr)`.
pub fn roc_plot(comment: &str, curves: &[(String, &[f64], &[f64])]) -> String {
    let mut out = String::new();
    header(&mut out, comment, "ROC on held-out patients");
    frame(&mut out, "false positive rate", "true positive rate");
    let sx = |v: f64| PAD + v * (W - 1.5 * PAD);
    let sy = |v: f64| H - PAD - v * (H - 2.0 * PAD);
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#aaa\" stroke-dasharray=\"4 4\"/>",
        sx(0.0),
        sy(0.0),
        sx(1.0),
        sy(1.0)
    );
    let mut entries = Vec::new();
    for (i, (label, fpr, tpr)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = fpr
            .iter()
            .zip(tpr.iter())
            .map(|(&f, &t)| format!("{:.2},{:.2}", sx(f), sy(t)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\" points=\"{}\"/>",
            points.join(" ")
        );
        entries.push((label.clone(), colour));
    }
    legend(&mut out, &entries, sx(0.55), sy(0.25));
    out.push_str("</svg>\n");
    out
}

/// Points coloured by group label; groups are listed in first-seen order.
pub fn scatter_plot(comment: &str, title: &str, xy: &[(f64, f64)], groups: &[String]) -> String {
    let mut out = String::new();
    header(&mut out, comment, title);
    frame(&mut out, "PC 1", "PC 2");
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in xy {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let sx = |v: f64| PAD + 8.0 + (v - xmin) / span(xmin, xmax) * (W - 1.5 * PAD - 16.0);
    let sy = |v: f64| H - PAD - 8.0 - (v - ymin) / span(ymin, ymax) * (H - 2.0 * PAD - 16.0);
    let mut names: Vec<&str> = Vec::new();
    for g in groups {
        if !names.contains(&g.as_str()) {
            names.push(g);
        }
    }
    names.sort_unstable();
    for (&(x, y), g) in xy.iter().zip(groups) {
        let colour = PALETTE[names.iter().position(|n| n == g).unwrap_or(0) % PALETTE.len()];
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.2\" fill=\"{colour}\" fill-opacity=\"0.7\"/>",
            sx(x),
            sy(y)
        );
    }
    let entries: Vec<(String, &str)> = names
        .iter()
        .enumerate()
        .map(|(i, n)| (format!("group {n}"), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries, W - PAD - 70.0, PAD + 14.0);
    out.push_str("</svg>\n");
    out
}
