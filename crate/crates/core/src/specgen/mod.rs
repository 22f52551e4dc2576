//! Labelled wideband spectrum snapshots.
//!
//! Every active link occupies a random 5-subcarrier block with at least one
//! idle guard bin on each side (band edges included). Block amplitudes carry
//! the link's received power with a uniform random phase per bin. Receiver
//! noise is circular complex Gaussian, and each sample is finally scaled so
//! that its noisy spectrum peaks at magnitude 1.

mod alloc;
mod dataset;
mod dft;

pub use alloc::{allocate_subcarriers, max_blocks, validate_mask, BlockAssignment, MaskViolation, OccupancyMap, BLOCK_WIDTH};
pub use dataset::{
    check_sample, generate_dataset, DatasetFile, DatasetHeader, GenerateOptions, ScenarioConfig, Split, SplitCounts,
    DATASET_MAGIC, DATASET_VERSION,
};
pub use dft::{dft, idft};

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::channel::{BandName, ChannelError, ConnectionSet};
use crate::container::ContainerError;
use crate::mobility::MobilityError;
use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum SpecgenError {
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSample {
    pub clean: Vec<Complex64>,
    pub noisy: Vec<Complex64>,
    pub mask: Vec<bool>,
    /// Cumulative divisor applied by [`normalize`]; 1 for raw samples.
    pub scale: f64,
    /// `f64::INFINITY` for noiseless samples.
    pub snr_db: f64,
    pub band: BandName,
    pub normalized: bool,
}

impl SpectrumSample {
    pub fn n_subcarriers(&self) -> usize {
        self.clean.len()
    }
}

/// Aggregate frequency-domain signal of all placed links.
///
/// Block bins get magnitude `sqrt(P_rx / 5)` (milliwatts) so a block carries
/// the link's full received power; all other bins are zero.
pub fn synthesize_spectrum(
    occupancy: &OccupancyMap,
    connections: &ConnectionSet,
    rng: &mut SeededRng,
) -> Result<Vec<Complex64>, SpecgenError> {
    let mut x = vec![Complex64::new(0.0, 0.0); occupancy.n_subcarriers];
    for a in &occupancy.assignments {
        let link = connections.connections.get(a.connection).ok_or_else(|| {
            SpecgenError::Domain(format!("assignment references missing connection {}", a.connection))
        })?;
        let magnitude = (link.rx_power_mw() / BLOCK_WIDTH as f64).sqrt();
        for bin in &mut x[a.start..a.start + BLOCK_WIDTH] {
            let phase = rng.random::<f64>() * 2.0 * PI;
            *bin = Complex64::from_polar(magnitude, phase);
        }
    }
    Ok(x)
}

/// Adds CN(0, σ²) noise to every bin, with σ² equal to the mean power of
/// the nonzero bins divided by `10^(snr_db/10)`.
pub fn add_noise(clean: &[Complex64], snr_db: f64, rng: &mut SeededRng) -> Result<Vec<Complex64>, SpecgenError> {
    if snr_db == f64::INFINITY {
        return Ok(clean.to_vec());
    }
    if snr_db.is_nan() {
        return Err(SpecgenError::Domain("SNR is NaN".into()));
    }
    let occupied: Vec<f64> = clean.iter().map(|c| c.norm_sqr()).filter(|&p| p > 0.0).collect();
    if occupied.is_empty() {
        return Err(SpecgenError::Domain(
            "SNR is undefined for a spectrum with no occupied bins".into(),
        ));
    }
    let signal = occupied.iter().sum::<f64>() / occupied.len() as f64;
    let sigma = (signal / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    Ok(clean
        .iter()
        .map(|&c| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c + Complex64::new(re, im) * sigma
        })
        .collect())
}

/// Scales `clean` and `noisy` so that `max |noisy| = 1`, folding the divisor
/// into `scale`. A sample already at unit peak is left untouched.
pub fn normalize(mut sample: SpectrumSample) -> Result<SpectrumSample, SpecgenError> {
    let peak = sample.noisy.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(SpecgenError::Domain(format!(
            "cannot normalize a spectrum with peak magnitude {peak}"
        )));
    }
    if (peak - 1.0).abs() > 4.0 * f64::EPSILON {
        for c in sample.clean.iter_mut().chain(sample.noisy.iter_mut()) {
            *c /= peak;
        }
        sample.scale *= peak;
    }
    sample.normalized = true;
    Ok(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{BandConfig, Connection, LinkKind};
    use crate::rng::seeded;

    fn link(rx_power_dbm: f64) -> Connection {
        Connection {
            kind: LinkKind::V2I,
            tx_id: "a".into(),
            rx_id: "BS".into(),
            distance_m: 10.0,
            center_freq_hz: 1e9,
            rx_power_dbm,
        }
    }

    fn set(links: Vec<Connection>) -> ConnectionSet {
        ConnectionSet {
            time_s: 0.0,
            band: BandConfig::sub6ghz(),
            connections: links,
        }
    }

    fn occupancy(n: usize, blocks: &[(usize, usize)]) -> OccupancyMap {
        let mut mask = vec![false; n];
        for &(_, s) in blocks {
            mask[s..s + 5].iter_mut().for_each(|m| *m = true);
        }
        OccupancyMap {
            n_subcarriers: n,
            assignments: blocks
                .iter()
                .map(|&(connection, start)| BlockAssignment { connection, start })
                .collect(),
            mask,
        }
    }

    #[test]
    fn unit_magnitude_for_five_milliwatts() {
        // 5 mW = 10·log10(5) dBm spread over five bins.
        let conns = set(vec![link(10.0 * 5f64.log10())]);
        let x = synthesize_spectrum(&occupancy(32, &[(0, 10)]), &conns, &mut seeded(1)).unwrap();
        for (k, c) in x.iter().enumerate() {
            let expected = if (10..15).contains(&k) { 1.0 } else { 0.0 };
            assert!((c.norm() - expected).abs() < 1e-12, "bin {k}: {}", c.norm());
        }
    }

    #[test]
    fn total_power_is_sum_of_links() {
        let conns = set(vec![link(-3.0), link(7.5), link(-40.0)]);
        let occ = occupancy(64, &[(0, 1), (1, 20), (2, 40)]);
        let x = synthesize_spectrum(&occ, &conns, &mut seeded(2)).unwrap();
        let total: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let expected: f64 = conns.connections.iter().map(|c| c.rx_power_mw()).sum();
        assert!((total - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn ten_to_one_power_gives_sqrt_ten_ratio() {
        let conns = set(vec![link(10.0), link(0.0)]);
        let occ = occupancy(32, &[(0, 1), (1, 10)]);
        let x = synthesize_spectrum(&occ, &conns, &mut seeded(3)).unwrap();
        let ratio = x[1].norm() / x[10].norm();
        assert!((ratio - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn infinite_snr_is_identity() {
        let x: Vec<_> = (0..16).map(|k| Complex64::new(k as f64, -1.0)).collect();
        assert_eq!(add_noise(&x, f64::INFINITY, &mut seeded(1)).unwrap(), x);
    }

    #[test]
    fn zero_spectrum_rejects_finite_snr() {
        let x = vec![Complex64::new(0.0, 0.0); 8];
        assert!(matches!(add_noise(&x, 30.0, &mut seeded(1)), Err(SpecgenError::Domain(_))));
    }

    /// Monte Carlo estimate of the per-bin noise variance.
    fn empirical_noise_power(snr_db: f64, draws: usize) -> f64 {
        let mut x = vec![Complex64::new(0.0, 0.0); 10];
        x[3] = Complex64::new(1.0, 0.0);
        let mut rng = seeded(17);
        let mut acc = 0.0;
        let mut n = 0usize;
        while n < draws {
            let y = add_noise(&x, snr_db, &mut rng).unwrap();
            for (a, b) in y.iter().zip(&x) {
                acc += (a - b).norm_sqr();
                n += 1;
            }
        }
        acc / n as f64
    }

    #[test]
    fn zero_db_noise_variance_is_signal_power() {
        let p = empirical_noise_power(0.0, 200_000);
        assert!((p - 1.0).abs() < 0.01, "{p}");
    }

    #[test]
    fn thirty_db_noise_within_one_percent() {
        let p = empirical_noise_power(30.0, 200_000);
        assert!((p / 1e-3 - 1.0).abs() < 0.01, "{p}");
    }

    fn sample(noisy: Vec<Complex64>) -> SpectrumSample {
        SpectrumSample {
            clean: noisy.iter().map(|c| c * 0.5).collect(),
            mask: vec![false; noisy.len()],
            noisy,
            scale: 1.0,
            snr_db: 30.0,
            band: BandName::Sub6Ghz,
            normalized: false,
        }
    }

    #[test]
    fn normalize_peaks_at_one_and_is_idempotent() {
        let mut rng = seeded(5);
        let noisy: Vec<_> = (0..64)
            .map(|_| Complex64::new(rng.random::<f64>() * 9.0 - 4.0, rng.random::<f64>() * 3.0))
            .collect();
        let once = normalize(sample(noisy)).unwrap();
        let peak = once.noisy.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-15);
        let twice = normalize(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn normalize_already_unit_peak_is_unchanged() {
        let noisy = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.5)];
        let out = normalize(sample(noisy.clone())).unwrap();
        assert_eq!(out.noisy, noisy);
        assert_eq!(out.scale, 1.0);
    }

    #[test]
    fn normalize_is_homogeneous() {
        let noisy: Vec<_> = (0..16).map(|k| Complex64::new((k as f64).sin(), (k as f64).cos() * 0.3)).collect();
        let a = normalize(sample(noisy.clone())).unwrap();
        let b = normalize(sample(noisy.iter().map(|c| c * 7.0).collect())).unwrap();
        assert!((b.scale / a.scale - 7.0).abs() < 1e-12);
        for (x, y) in a.noisy.iter().zip(&b.noisy).chain(a.clean.iter().zip(&b.clean)) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_all_zero() {
        assert!(normalize(sample(vec![Complex64::new(0.0, 0.0); 4])).is_err());
    }
}
