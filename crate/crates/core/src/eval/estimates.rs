//! Reconstructions stored in the dataset container. Each record keeps the
//! estimate in the clean slot, the source noisy input in the noisy slot,
//! the energy-detection mask of the estimate and the source scale.

use num_complex::Complex64;

use super::{energy_detect, EvalError, DETECTION_THRESHOLD};
use crate::specgen::{DatasetFile, DatasetHeader, Split, SplitCounts, SpectrumSample};

pub const ESTIMATES_CONTENT: &str = "estimates";

/// Wraps one estimate per sample of `split` in `source`. Other splits are
/// left empty.
pub fn estimates_file(
    source: &DatasetFile,
    split: Split,
    estimates: Vec<Vec<Complex64>>,
    method: &str,
    m: Option<usize>,
) -> Result<DatasetFile, EvalError> {
    let samples = source.split(split);
    if estimates.len() != samples.len() {
        return Err(EvalError::Count {
            expected: samples.len(),
            found: estimates.len(),
        });
    }
    let records: Vec<SpectrumSample> = samples
        .iter()
        .zip(estimates)
        .enumerate()
        .map(|(index, (s, estimate))| {
            if estimate.len() != s.n_subcarriers() {
                return Err(EvalError::Length {
                    index,
                    expected: s.n_subcarriers(),
                    found: estimate.len(),
                });
            }
            Ok(SpectrumSample {
                mask: energy_detect(&estimate, DETECTION_THRESHOLD),
                clean: estimate,
                ..s.clone()
            })
        })
        .collect::<Result<_, _>>()?;
    let mut counts = SplitCounts::default();
    let mut file = DatasetFile {
        header: DatasetHeader {
            content: ESTIMATES_CONTENT.into(),
            method: Some(method.into()),
            m,
            counts,
            ..source.header.clone()
        },
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    match split {
        Split::Train => (counts.train, file.train) = (records.len(), records),
        Split::Val => (counts.val, file.val) = (records.len(), records),
        Split::Test => (counts.test, file.test) = (records.len(), records),
    }
    file.header.counts = counts;
    Ok(file)
}

/// The estimates of `split`, checked against the samples they claim to
/// reconstruct.
pub fn read_estimates(file: &DatasetFile, split: Split, samples: &[SpectrumSample]) -> Result<Vec<Vec<Complex64>>, EvalError> {
    if file.header.content != ESTIMATES_CONTENT {
        return Err(EvalError::Content(file.header.content.clone()));
    }
    let records = file.split(split);
    if records.len() != samples.len() {
        return Err(EvalError::Count {
            expected: samples.len(),
            found: records.len(),
        });
    }
    records
        .iter()
        .zip(samples)
        .enumerate()
        .map(|(index, (r, s))| {
            if r.clean.len() != s.n_subcarriers() {
                return Err(EvalError::Length {
                    index,
                    expected: s.n_subcarriers(),
                    found: r.clean.len(),
                });
            }
            Ok(r.clean.clone())
        })
        .collect()
}
