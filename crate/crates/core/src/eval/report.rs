use serde::{Deserialize, Serialize};

use super::MetricSums;
use crate::channel::BandName;

/// Averages over a split. `snr_db` is `None` for noiseless data and
/// `compression_rate` is `None` for uncompressed methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub method: String,
    pub band: BandName,
    pub snr_db: Option<f64>,
    pub compression_rate: Option<f64>,
    pub sample_count: usize,
    pub mse: f64,
    pub cosine: f64,
    pub ssim: f64,
    pub p_d: Option<f64>,
    pub p_f: Option<f64>,
}

impl DetectionReport {
    pub fn from_sums(method: &str, band: BandName, snr_db: f64, compression_rate: Option<f64>, s: &MetricSums) -> Self {
        let n = s.count as f64;
        let mean = |sum: f64, k: usize| (k > 0).then(|| sum / k as f64);
        DetectionReport {
            method: method.to_string(),
            band,
            snr_db: snr_db.is_finite().then_some(snr_db),
            compression_rate,
            sample_count: s.count,
            mse: s.mse / n,
            cosine: s.cosine / n,
            ssim: s.ssim / n,
            p_d: mean(s.p_d, s.p_d_count),
            p_f: mean(s.p_f, s.p_f_count),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) => format!("{v:.3e}"),
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

/// Metrics as rows, one column per (method, band).
pub fn format_table(reports: &[DetectionReport]) -> String {
    let mut header = vec!["metric".to_string()];
    header.extend(reports.iter().map(|r| format!("{} ({})", r.method, r.band)));
    let rows: Vec<Vec<String>> = [
        ("MSE", reports.iter().map(|r| cell(Some(r.mse))).collect::<Vec<_>>()),
        ("Cosine", reports.iter().map(|r| cell(Some(r.cosine))).collect()),
        ("SSIM", reports.iter().map(|r| cell(Some(r.ssim))).collect()),
        ("P_d", reports.iter().map(|r| cell(r.p_d)).collect()),
        ("P_f", reports.iter().map(|r| cell(r.p_f)).collect()),
    ]
    .into_iter()
    .map(|(name, cells)| std::iter::once(name.to_string()).chain(cells).collect())
    .collect();

    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (s, w))| if i == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = line(&header);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in &rows {
        out.push('\n');
        out.push_str(&line(r));
    }
    out.push('\n');
    out
}
