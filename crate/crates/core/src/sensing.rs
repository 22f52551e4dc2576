//! Sub-Nyquist compression operators.
//!
//! A [`SensingMatrix`] is an `m × n_s` complex matrix with `m < n_s`. Entries
//! are held in single precision, the precision of the `V2XM` file format and
//! of learned weights, so files round-trip bit-exactly; products are
//! accumulated in double precision.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{read_frame, write_frame, ContainerError, Reader};
use crate::rng::seeded;

pub const MATRIX_MAGIC: &[u8; 4] = b"V2XM";
pub const MATRIX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("dimension mismatch: expected length {expected}, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid sensing matrix: {0}")]
    Invalid(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    RandomBernoulli,
    RandomGaussian,
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    m: usize,
    n_s: usize,
    /// Row-major.
    entries: Vec<Complex32>,
    kind: MatrixKind,
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixHeader {
    m: usize,
    n_s: usize,
    kind: MatrixKind,
    seed: Option<u64>,
}

impl SensingMatrix {
    pub fn new(
        m: usize,
        n_s: usize,
        entries: Vec<Complex32>,
        kind: MatrixKind,
        seed: Option<u64>,
    ) -> Result<Self, SensingError> {
        if m == 0 || m >= n_s {
            return Err(SensingError::Invalid(format!("need 0 < m < n_s, got m = {m}, n_s = {n_s}")));
        }
        if entries.len() != m * n_s {
            return Err(SensingError::Dimension {
                expected: m * n_s,
                found: entries.len(),
            });
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(SensingError::Invalid("non-finite entry".into()));
        }
        Ok(SensingMatrix {
            m,
            n_s,
            entries,
            kind,
            seed,
        })
    }

    /// The first `m` rows of the `n_s × n_s` identity.
    pub fn identity_rows(m: usize, n_s: usize) -> Result<Self, SensingError> {
        let mut entries = vec![Complex32::new(0.0, 0.0); m * n_s];
        for i in 0..m.min(n_s) {
            entries[i * n_s + i] = Complex32::new(1.0, 0.0);
        }
        Self::new(m, n_s, entries, MatrixKind::Learned, None)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn entries(&self) -> &[Complex32] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        let c = self.entries[row * self.n_s + col];
        Complex64::new(c.re as f64, c.im as f64)
    }

    /// Short provenance tag, e.g. `random_gaussian:32x256:seed=7`.
    pub fn id(&self) -> String {
        let kind = serde_json::to_value(self.kind).unwrap();
        let mut id = format!("{}:{}x{}", kind.as_str().unwrap(), self.m, self.n_s);
        if let Some(seed) = self.seed {
            id.push_str(&format!(":seed={seed}"));
        }
        id
    }

    /// `Φ x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SensingError> {
        if x.len() != self.n_s {
            return Err(SensingError::Dimension {
                expected: self.n_s,
                found: x.len(),
            });
        }
        Ok(self
            .entries
            .chunks_exact(self.n_s)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .map(|(a, b)| Complex64::new(a.re as f64, a.im as f64) * b)
                    .sum()
            })
            .collect())
    }

    /// `Φᴴ r`.
    pub fn adjoint_apply(&self, r: &[Complex64]) -> Result<Vec<Complex64>, SensingError> {
        if r.len() != self.m {
            return Err(SensingError::Dimension {
                expected: self.m,
                found: r.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_s];
        for (row, ri) in self.entries.chunks_exact(self.n_s).zip(r) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += Complex64::new(a.re as f64, -a.im as f64) * ri;
            }
        }
        Ok(out)
    }

    /// Column `j` as a dense vector.
    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.m).map(|i| self.entry(i, j)).collect()
    }

    /// Real `2m × 2n_s` block form `[[Re, -Im], [Im, Re]]`, row-major,
    /// acting on the stacked vector `[Re x; Im x]`.
    pub fn to_real_block(&self) -> Vec<f64> {
        let (m, n) = (self.m, self.n_s);
        let mut out = vec![0.0; 4 * m * n];
        for i in 0..m {
            for j in 0..n {
                let c = self.entry(i, j);
                out[i * 2 * n + j] = c.re;
                out[i * 2 * n + n + j] = -c.im;
                out[(m + i) * 2 * n + j] = c.im;
                out[(m + i) * 2 * n + n + j] = c.re;
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = MatrixHeader {
            m: self.m,
            n_s: self.n_s,
            kind: self.kind,
            seed: self.seed,
        };
        let mut out = Vec::with_capacity(64 + self.entries.len() * 8);
        write_frame(&mut out, MATRIX_MAGIC, MATRIX_VERSION, &header).expect("header serializes");
        for c in &self.entries {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SensingError> {
        let (h, payload): (MatrixHeader, _) = read_frame(bytes, MATRIX_MAGIC, MATRIX_VERSION)?;
        let expected = h.m * h.n_s * 8;
        if payload.len() != expected {
            return Err(SensingError::Dimension {
                expected,
                found: payload.len(),
            });
        }
        let mut r = Reader::new(payload);
        let entries = (0..h.m * h.n_s).map(|_| Complex32::new(r.f32(), r.f32())).collect();
        Self::new(h.m, h.n_s, entries, h.kind, h.seed)
    }

    pub fn write(&self, path: &Path) -> Result<(), SensingError> {
        fs::write(path, self.to_bytes()).map_err(|source| SensingError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, SensingError> {
        let bytes = fs::read(path).map_err(|source| SensingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

/// Real-valued random matrix: Bernoulli entries `±1/√m`, or Gaussian
/// entries with mean 0 and variance `1/m`.
pub fn random_sensing_matrix(m: usize, n_s: usize, kind: MatrixKind, seed: u64) -> Result<SensingMatrix, SensingError> {
    let mut rng = seeded(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let entries = (0..m * n_s)
        .map(|_| {
            let v = match kind {
                MatrixKind::RandomBernoulli => {
                    if rng.random::<bool>() {
                        scale
                    } else {
                        -scale
                    }
                }
                MatrixKind::RandomGaussian => rng.sample::<f64, _>(StandardNormal) * scale,
                MatrixKind::Learned => {
                    return Err(SensingError::Invalid("learned matrices come from model weights".into()))
                }
            };
            Ok(Complex32::new(v as f32, 0.0))
        })
        .collect::<Result<_, _>>()?;
    SensingMatrix::new(m, n_s, entries, kind, Some(seed))
}

/// `M = round(rate · n_s)`.
pub fn measurements_for_rate(rate: f64, n_s: usize) -> usize {
    (rate * n_s as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub y: Vec<Complex64>,
    pub matrix_id: String,
}

/// `y = Φ X` for a spectrum `X`.
pub fn compress(spectrum: &[Complex64], phi: &SensingMatrix) -> Result<Measurements, SensingError> {
    Ok(Measurements {
        y: phi.apply(spectrum)?,
        matrix_id: phi.id(),
    })
}
