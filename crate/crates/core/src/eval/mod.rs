//! Reconstruction and detection metrics.
//!
//! All metrics compare an estimate with the clean reference of a normalized
//! sample. Cosine similarity and SSIM use magnitude spectra. A bin counts as
//! occupied when its power strictly exceeds [`DETECTION_THRESHOLD`]; the
//! reference occupancy is energy detection on the clean spectrum.

mod estimates;
mod plot;
mod report;
mod training_log;

pub use estimates::{estimates_file, read_estimates, ESTIMATES_CONTENT};
pub use plot::{loss_curve_svg, metrics_bar_svg, spectrum_overlay_svg};
pub use report::{format_table, DetectionReport};
pub use training_log::{EpochLoss, TrainingLog, TrainingLogError, TRAINING_LOG_HEADER};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::cs::{dense_matrix, fista, omp, CsError, CsSolverConfig};
use crate::reconstructor::{ModelWeights, WeightsError};
use crate::sensing::{SensingError, SensingMatrix};
use crate::specgen::SpectrumSample;

pub const DETECTION_THRESHOLD: f64 = 0.5;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sample {index} is not normalized")]
    NotNormalized { index: usize },
    #[error("sample {index}: estimate has length {found}, expected {expected}")]
    Length { index: usize, expected: usize, found: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("expected {expected} estimates, found {found}")]
    Count { expected: usize, found: usize },
    #[error("file holds {0:?} records, expected estimates")]
    Content(String),
    #[error("sample {index}: {source}")]
    Cs {
        index: usize,
        #[source]
        source: CsError,
    },
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
}

/// Bit `k` is set iff `|x_k|² > threshold`.
pub fn energy_detect(x: &[Complex64], threshold: f64) -> Vec<bool> {
    x.iter().map(|c| c.norm_sqr() > threshold).collect()
}

/// `(p_d, p_f)`: the fraction of occupied bins flagged and of idle bins
/// flagged. Either is `None` when its denominator is empty.
pub fn detection_rates(estimated: &[bool], truth: &[bool]) -> (Option<f64>, Option<f64>) {
    let (mut hit, mut occ, mut false_alarm, mut idle) = (0usize, 0usize, 0usize, 0usize);
    for (&e, &t) in estimated.iter().zip(truth) {
        if t {
            occ += 1;
            hit += e as usize;
        } else {
            idle += 1;
            false_alarm += e as usize;
        }
    }
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    (rate(hit, occ), rate(false_alarm, idle))
}

/// Mean squared error over all `2·N` real components.
pub fn mse(estimate: &[Complex64], reference: &[Complex64]) -> f64 {
    let sum: f64 = estimate.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    sum / (2 * reference.len()) as f64
}

fn magnitudes(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|c| c.norm()).collect()
}

/// Cosine of the angle between the magnitude spectra. Two zero spectra
/// score 1; one zero spectrum scores 0.
pub fn cosine_similarity(estimate: &[Complex64], reference: &[Complex64]) -> f64 {
    let (a, b) = (magnitudes(estimate), magnitudes(reference));
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let (na, nb): (f64, f64) = (a.iter().map(|x| x * x).sum(), b.iter().map(|x| x * x).sum());
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => (dot / (na * nb).sqrt()).clamp(-1.0, 1.0),
    }
}

fn ssim_window(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let mu_a = a.iter().sum::<f64>() / n;
    let mu_b = b.iter().sum::<f64>() / n;
    let cov = |x: &[f64], mx: f64, y: &[f64], my: f64| x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / n;
    let var_a = cov(a, mu_a, a, mu_a);
    let var_b = cov(b, mu_b, b, mu_b);
    let cov_ab = cov(a, mu_a, b, mu_b);
    ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov_ab + SSIM_C2))
        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2))
}

/// Mean SSIM of the magnitude spectra over sliding windows of
/// [`SSIM_WINDOW`] bins at stride 1 (one window if shorter), with
/// population statistics and unit dynamic range.
pub fn ssim_1d(estimate: &[Complex64], reference: &[Complex64]) -> f64 {
    let (a, b) = (magnitudes(estimate), magnitudes(reference));
    if a.is_empty() {
        return 1.0;
    }
    let w = SSIM_WINDOW.min(a.len());
    let count = a.len() - w + 1;
    (0..count).map(|s| ssim_window(&a[s..s + w], &b[s..s + w])).sum::<f64>() / count as f64
}

/// Metrics for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    pub mse: f64,
    pub cosine: f64,
    pub ssim: f64,
    pub p_d: Option<f64>,
    pub p_f: Option<f64>,
}

pub fn score_sample(estimate: &[Complex64], reference: &[Complex64]) -> SampleMetrics {
    let truth = energy_detect(reference, DETECTION_THRESHOLD);
    let (p_d, p_f) = detection_rates(&energy_detect(estimate, DETECTION_THRESHOLD), &truth);
    SampleMetrics {
        mse: mse(estimate, reference),
        cosine: cosine_similarity(estimate, reference),
        ssim: ssim_1d(estimate, reference),
        p_d,
        p_f,
    }
}

/// Running sums; `merge` is associative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricSums {
    pub count: usize,
    pub mse: f64,
    pub cosine: f64,
    pub ssim: f64,
    pub p_d: f64,
    pub p_d_count: usize,
    pub p_f: f64,
    pub p_f_count: usize,
}

impl MetricSums {
    pub fn add(mut self, m: &SampleMetrics) -> Self {
        self.count += 1;
        self.mse += m.mse;
        self.cosine += m.cosine;
        self.ssim += m.ssim;
        if let Some(p) = m.p_d {
            self.p_d += p;
            self.p_d_count += 1;
        }
        if let Some(p) = m.p_f {
            self.p_f += p;
            self.p_f_count += 1;
        }
        self
    }

    pub fn merge(self, o: Self) -> Self {
        MetricSums {
            count: self.count + o.count,
            mse: self.mse + o.mse,
            cosine: self.cosine + o.cosine,
            ssim: self.ssim + o.ssim,
            p_d: self.p_d + o.p_d,
            p_d_count: self.p_d_count + o.p_d_count,
            p_f: self.p_f + o.p_f,
            p_f_count: self.p_f_count + o.p_f_count,
        }
    }
}

/// How each sample's estimate is produced.
#[derive(Debug, Clone, Copy)]
pub enum Method<'a> {
    /// The clean spectrum itself.
    Oracle,
    /// The noisy input, uncompressed.
    Noisy,
    Omp { phi: &'a SensingMatrix, config: CsSolverConfig },
    Fista { phi: &'a SensingMatrix, config: CsSolverConfig },
    Learned { weights: &'a ModelWeights },
    /// Estimates computed elsewhere, one per sample in order.
    Precomputed { name: &'a str, estimates: &'a [Vec<Complex64>], compression_rate: Option<f64> },
}

impl Method<'_> {
    pub fn name(&self) -> &str {
        match self {
            Method::Oracle => "oracle",
            Method::Noisy => "noisy",
            Method::Omp { .. } => "omp",
            Method::Fista { .. } => "fista",
            Method::Learned { .. } => "learned",
            Method::Precomputed { name, .. } => name,
        }
    }

    pub fn compression_rate(&self) -> Option<f64> {
        match self {
            Method::Oracle | Method::Noisy => None,
            Method::Omp { phi, .. } | Method::Fista { phi, .. } => Some(phi.m() as f64 / phi.n_s() as f64),
            Method::Learned { weights } => {
                let a = weights.architecture();
                Some(a.m as f64 / a.n_s as f64)
            }
            Method::Precomputed { compression_rate, .. } => *compression_rate,
        }
    }

    /// Estimate for sample `index`, computed from its noisy spectrum.
    pub fn reconstruct(&self, index: usize, sample: &SpectrumSample) -> Result<Vec<Complex64>, EvalError> {
        let cs = |source| EvalError::Cs { index, source };
        match self {
            Method::Oracle => Ok(sample.clean.clone()),
            Method::Noisy => Ok(sample.noisy.clone()),
            Method::Omp { phi, config } => {
                let y = phi.apply(&sample.noisy)?;
                Ok(omp(&dense_matrix(phi), &y, config).map_err(cs)?.estimate)
            }
            Method::Fista { phi, config } => {
                let y = phi.apply(&sample.noisy)?;
                Ok(fista(&dense_matrix(phi), &y, config).map_err(cs)?.estimate)
            }
            Method::Learned { weights } => Ok(weights.reconstruct(&sample.noisy)?),
            Method::Precomputed { estimates, .. } => estimates.get(index).cloned().ok_or(EvalError::Length {
                index,
                expected: sample.n_subcarriers(),
                found: 0,
            }),
        }
    }
}

/// Scores every sample and averages per metric. Samples are scored in
/// parallel and summed in index order, so the report does not depend on
/// the thread count.
pub fn evaluate_run(samples: &[SpectrumSample], method: &Method<'_>) -> Result<DetectionReport, EvalError> {
    let first = samples.first().ok_or(EvalError::Empty)?;
    let scores: Vec<SampleMetrics> = samples
        .par_iter()
        .enumerate()
        .map(|(index, sample)| {
            if !sample.normalized {
                return Err(EvalError::NotNormalized { index });
            }
            let estimate = method.reconstruct(index, sample)?;
            if estimate.len() != sample.n_subcarriers() {
                return Err(EvalError::Length {
                    index,
                    expected: sample.n_subcarriers(),
                    found: estimate.len(),
                });
            }
            Ok(score_sample(&estimate, &sample.clean))
        })
        .collect::<Result<_, _>>()?;
    let sums = scores.iter().fold(MetricSums::default(), MetricSums::add);
    Ok(DetectionReport::from_sums(
        method.name(),
        first.band,
        first.snr_db,
        method.compression_rate(),
        &sums,
    ))
}
