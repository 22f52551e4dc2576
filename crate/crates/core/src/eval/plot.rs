//! Static SVG charts.

use std::fmt::Write;

use super::{DetectionReport, TrainingLog};

const W: f64 = 720.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(values: &[f64], y_max: f64, color: &str) -> String {
    let n = values.len().max(2) - 1;
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = PAD + (W - 2.0 * PAD) * i as f64 / n as f64;
            let y = H - PAD - (H - 2.0 * PAD) * (v / y_max).clamp(0.0, 1.0);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        points.join(" ")
    )
}

/// Magnitude spectrum of an original and a reconstruction, overlaid.
pub fn spectrum_overlay_svg(original: &[f64], reconstruction: &[f64], title: &str) -> String {
    let y_max = original
        .iter()
        .chain(reconstruction)
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{PAD}" y="24" font-family="sans-serif" font-size="14">{}</text>"#, escape(title)).unwrap();
    writeln!(
        s,
        r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = H - PAD,
        x2 = W - PAD
    )
    .unwrap();
    writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{y}" stroke="black"/>"#, y = H - PAD).unwrap();
    writeln!(s, "{}", polyline(original, y_max, "#1f77b4")).unwrap();
    writeln!(s, "{}", polyline(reconstruction, y_max, "#d62728")).unwrap();
    writeln!(
        s,
        "<text x=\"{x}\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f77b4\">original</text>",
        x = W - 200.0
    )
    .unwrap();
    writeln!(
        s,
        "<text x=\"{x}\" y=\"24\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#d62728\">reconstruction</text>",
        x = W - 120.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Grouped bars of cosine, SSIM, P_d and 1 − P_f per report. All four lie
/// in [0, 1]; MSE is printed in the label.
pub fn metrics_bar_svg(reports: &[DetectionReport]) -> String {
    let metrics: [(&str, fn(&DetectionReport) -> f64); 4] = [
        ("cosine", |r| r.cosine),
        ("ssim", |r| r.ssim),
        ("p_d", |r| r.p_d.unwrap_or(0.0)),
        ("1-p_f", |r| 1.0 - r.p_f.unwrap_or(0.0)),
    ];
    let colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd"];
    let groups = reports.len().max(1) as f64;
    let group_w = (W - 2.0 * PAD) / groups;
    let bar_w = group_w / 5.0;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (g, r) in reports.iter().enumerate() {
        let x0 = PAD + g as f64 * group_w;
        for (k, ((_, get), color)) in metrics.iter().zip(colors).enumerate() {
            let v = get(r).clamp(0.0, 1.0);
            let h = (H - 2.0 * PAD) * v;
            writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                x0 + (k as f64 + 0.5) * bar_w,
                H - PAD - h,
                bar_w * 0.9,
                h
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{} ({}) mse={:.2e}</text>"#,
            x0 + 0.5 * bar_w,
            H - PAD + 16.0,
            escape(&r.method),
            r.band,
            r.mse
        )
        .unwrap();
    }
    for (k, ((name, _), color)) in metrics.iter().zip(colors).enumerate() {
        writeln!(
            s,
            r#"<text x="{:.2}" y="24" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#,
            PAD + k as f64 * 80.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Training and validation loss per epoch on a shared linear axis.
pub fn loss_curve_svg(log: &TrainingLog) -> String {
    let train: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
    let val: Vec<f64> = log.epochs.iter().map(|e| e.val_loss).collect();
    let mut s = spectrum_overlay_svg(&train, &val, "loss per epoch");
    s = s.replacen(">original<", ">train<", 1).replacen(">reconstruction<", ">validation<", 1);
    s
}
