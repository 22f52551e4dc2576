//! Dataset generation and the `V2XD` container.
//!
//! Layout (little-endian): `"V2XD"`, `u32` version, `u32` header length,
//! header JSON, then for each record in train, val, test order:
//! `clean` as `n_s × (re, im)` `f32`, `noisy` likewise, `mask` as `n_s`
//! bytes of 0/1, and `scale` as `f64`.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{add_noise, allocate_subcarriers, normalize, synthesize_spectrum, validate_mask, SpecgenError, SpectrumSample};
use crate::channel::{build_connections, BandConfig, BandName, LinkPolicy};
use crate::container::{read_frame, write_frame, Reader};
use crate::mobility::{RoadConfig, Simulation, Snapshot, VehicleParams};
use crate::rng::{derive_seed, seeded};

pub const DATASET_MAGIC: &[u8; 4] = b"V2XD";
pub const DATASET_VERSION: u32 = 1;

/// Time steps simulated per parallel batch during generation.
const CHUNK_STEPS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub road: RoadConfig,
    pub vehicles: VehicleParams,
    pub band: BandConfig,
    pub links: LinkPolicy,
    pub n_subcarriers: usize,
    /// Simulated time discarded before the first sample, so the road is
    /// populated.
    pub warmup_s: f64,
    /// Defaults to the middle of the road.
    pub bs_position: Option<(f64, f64)>,
}

impl ScenarioConfig {
    pub fn new(band: BandConfig) -> Self {
        ScenarioConfig {
            road: RoadConfig::default(),
            vehicles: VehicleParams::default(),
            band,
            links: LinkPolicy::default(),
            n_subcarriers: 256,
            warmup_s: 120.0,
            bs_position: None,
        }
    }

    pub fn bs_position(&self) -> (f64, f64) {
        self.bs_position.unwrap_or((self.road.length_m / 2.0, 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    fn tag(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = SpecgenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(SpecgenError::Domain(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub band: BandName,
    /// `null` for noiseless data.
    pub snr_db: Option<f64>,
    pub n_subcarriers: usize,
    pub counts: SplitCounts,
    pub seed: u64,
    /// `"dataset"` for generated data, `"estimates"` for reconstructions.
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl DatasetHeader {
    pub fn snr_db(&self) -> f64 {
        self.snr_db.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub train: Vec<SpectrumSample>,
    pub val: Vec<SpectrumSample>,
    pub test: Vec<SpectrumSample>,
}

impl DatasetFile {
    pub fn split(&self, split: Split) -> &[SpectrumSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SpecgenError> {
        let h = &self.header;
        let lens = [self.train.len(), self.val.len(), self.test.len()];
        if lens != [h.counts.train, h.counts.val, h.counts.test] {
            return Err(SpecgenError::Format(format!(
                "header counts {:?} disagree with records {lens:?}",
                h.counts
            )));
        }
        let n = h.n_subcarriers;
        let mut out = Vec::with_capacity(64 + h.counts.total() * record_len(n));
        write_frame(&mut out, DATASET_MAGIC, DATASET_VERSION, h).map_err(|e| SpecgenError::Format(e.to_string()))?;
        for s in self.train.iter().chain(&self.val).chain(&self.test) {
            if s.clean.len() != n || s.noisy.len() != n || s.mask.len() != n {
                return Err(SpecgenError::Format(format!(
                    "record length {} does not match n_subcarriers {n}",
                    s.clean.len()
                )));
            }
            for c in s.clean.iter().chain(&s.noisy) {
                out.extend_from_slice(&(c.re as f32).to_le_bytes());
                out.extend_from_slice(&(c.im as f32).to_le_bytes());
            }
            out.extend(s.mask.iter().map(|&m| m as u8));
            out.extend_from_slice(&s.scale.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SpecgenError> {
        let (header, payload): (DatasetHeader, _) = read_frame(bytes, DATASET_MAGIC, DATASET_VERSION)?;
        let n = header.n_subcarriers;
        let expected = header.counts.total() * record_len(n);
        if payload.len() != expected {
            return Err(SpecgenError::Format(format!(
                "payload is {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let mut r = Reader::new(payload);
        let snr_db = header.snr_db();
        let mut read_split = |count: usize| -> Result<Vec<SpectrumSample>, SpecgenError> {
            (0..count)
                .map(|_| {
                    let complex = |r: &mut Reader| -> Vec<Complex64> {
                        (0..n).map(|_| Complex64::new(r.f32() as f64, r.f32() as f64)).collect()
                    };
                    let clean = complex(&mut r);
                    let noisy = complex(&mut r);
                    let mask = (0..n)
                        .map(|k| match r.u8() {
                            0 => Ok(false),
                            1 => Ok(true),
                            b => Err(SpecgenError::Format(format!("mask byte {b} at bin {k}"))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let scale = r.f64();
                    let peak = noisy.iter().map(|c| c.norm()).fold(0.0, f64::max);
                    Ok(SpectrumSample {
                        clean,
                        noisy,
                        mask,
                        scale,
                        snr_db,
                        band: header.band,
                        normalized: (peak - 1.0).abs() < 1e-5,
                    })
                })
                .collect()
        };
        let train = read_split(header.counts.train)?;
        let val = read_split(header.counts.val)?;
        let test = read_split(header.counts.test)?;
        debug_assert_eq!(r.remaining(), 0);
        Ok(DatasetFile {
            header,
            train,
            val,
            test,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), SpecgenError> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|source| SpecgenError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, SpecgenError> {
        let bytes = fs::read(path).map_err(|source| SpecgenError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn record_len(n: usize) -> usize {
    n * 8 * 2 + n + 8
}

/// Full-scan check of one stored sample: guard/width rules on the mask,
/// clean energy confined to the mask, and a unit noisy peak.
pub fn check_sample(sample: &SpectrumSample) -> Result<(), String> {
    validate_mask(&sample.mask).map_err(|e| e.to_string())?;
    for (k, (c, &m)) in sample.clean.iter().zip(&sample.mask).enumerate() {
        if (c.norm_sqr() > 0.0) != m {
            return Err(format!("clean bin {k} disagrees with mask ({m})"));
        }
    }
    if !sample.mask.iter().any(|&m| m) {
        return Err("sample has no occupied bins".into());
    }
    let peak = sample.noisy.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if (peak - 1.0).abs() > 1e-5 {
        return Err(format!("noisy peak {peak} is not 1"));
    }
    if !(sample.scale > 0.0 && sample.scale.is_finite()) {
        return Err(format!("scale {} is not positive", sample.scale));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Worker threads; output does not depend on it.
    pub jobs: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { jobs: 1 }
    }
}

fn quantize(c: Complex64) -> Complex64 {
    Complex64::new(c.re as f32 as f64, c.im as f32 as f64)
}

/// Produces one normalized sample from one time step, or `None` when no
/// link is active. Depends only on the snapshot and `seed`.
fn sample_for_step(
    config: &ScenarioConfig,
    snr_db: f64,
    snapshot: &Snapshot,
    seed: u64,
) -> Result<Option<SpectrumSample>, SpecgenError> {
    let mut rng = seeded(seed);
    let links = build_connections(
        snapshot.time_s,
        &snapshot.poses,
        config.bs_position(),
        &config.band,
        &config.links,
        &mut rng,
    )?;
    let occupancy = allocate_subcarriers(links.len(), config.n_subcarriers, &mut rng)?;
    if occupancy.assignments.is_empty() {
        return Ok(None);
    }
    let clean = synthesize_spectrum(&occupancy, &links, &mut rng)?;
    let noisy = add_noise(&clean, snr_db, &mut rng)?;
    let mut sample = normalize(SpectrumSample {
        clean,
        noisy,
        mask: occupancy.mask,
        scale: 1.0,
        snr_db,
        band: config.band.name,
        normalized: false,
    })?;
    // Stored precision, so in-memory and on-disk datasets compare equal.
    sample.clean.iter_mut().for_each(|c| *c = quantize(*c));
    sample.noisy.iter_mut().for_each(|c| *c = quantize(*c));
    Ok(Some(sample))
}

fn generate_split(
    config: &ScenarioConfig,
    snr_db: f64,
    count: usize,
    seed: u64,
    split: Split,
) -> Result<Vec<SpectrumSample>, SpecgenError> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let mut sim = Simulation::new(
        config.road.clone(),
        config.vehicles.clone(),
        derive_seed(seed, &[split.tag(), 0]),
    )?;
    let warmup = (config.warmup_s / config.road.time_step_s).round() as usize;
    for _ in 0..warmup {
        sim.advance();
    }
    // Empty steps are skipped; give up if traffic never produces links.
    let step_budget = 100 * count + 10_000;
    let mut step = 0usize;
    while out.len() < count {
        if step >= step_budget {
            return Err(SpecgenError::Domain(format!(
                "only {} of {count} samples after {step} time steps; the scenario rarely has active links",
                out.len()
            )));
        }
        let chunk: Vec<(usize, Snapshot)> = (0..CHUNK_STEPS).map(|i| (step + i, sim.advance())).collect();
        step += CHUNK_STEPS;
        let samples: Vec<_> = chunk
            .par_iter()
            .map(|(i, snap)| sample_for_step(config, snr_db, snap, derive_seed(seed, &[split.tag(), 1, *i as u64])))
            .collect();
        for s in samples {
            if let Some(s) = s? {
                if out.len() < count {
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}

/// Runs traffic → links → allocation → synthesis → noise → normalization,
/// one candidate sample per time step, for each split on its own traffic
/// realization. Output is a pure function of `(config, snr_db, counts, seed)`.
pub fn generate_dataset(
    config: &ScenarioConfig,
    snr_db: f64,
    counts: SplitCounts,
    seed: u64,
    options: GenerateOptions,
) -> Result<DatasetFile, SpecgenError> {
    config.band.validate()?;
    if config.n_subcarriers < 7 {
        return Err(SpecgenError::Domain("at least 7 subcarriers are required".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| SpecgenError::Domain(e.to_string()))?;
    let [train, val, test] = pool.install(|| {
        [Split::Train, Split::Val, Split::Test].map(|split| {
            let count = match split {
                Split::Train => counts.train,
                Split::Val => counts.val,
                Split::Test => counts.test,
            };
            generate_split(config, snr_db, count, seed, split)
        })
    });
    Ok(DatasetFile {
        header: DatasetHeader {
            band: config.band.name,
            snr_db: snr_db.is_finite().then_some(snr_db),
            n_subcarriers: config.n_subcarriers,
            counts,
            seed,
            content: "dataset".into(),
            method: None,
            m: None,
        },
        train: train?,
        val: val?,
        test: test?,
    })
}
