//! The learned compression/reconstruction network.
//!
//! Data flows as `n_s × 2` real arrays in (position, channel) order with
//! channels (real, imag):
//!
//! 1. compression: complex `Φ_DL` (`m × n_s`), no bias, no activation;
//! 2. coarse: a dense map from the flattened `2m` measurements to `2n_s`
//!    features, then batch-norm and PReLU per feature;
//! 3. fine: residual blocks of three same-padded 1-D convolutions with
//!    filter counts (64, 32, 2), each followed by batch-norm; PReLU after the
//!    first two, and after the skip add for the third.
//!
//! Inference runs in `f64` on `f32` weights.

mod io;

pub use io::{WeightsManifest, TensorEntry, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use std::path::PathBuf;

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::ContainerError;
use crate::rng::seeded;
use crate::sensing::{MatrixKind, SensingMatrix};

pub const RESIDUAL_BLOCKS: usize = 6;
pub const FILTERS: [usize; 3] = [64, 32, 2];
pub const KERNEL_SIZE: usize = 3;
pub const BN_EPS: f64 = 1e-5;
pub const LAYOUT: &str = "position,channel";
pub const COARSE_ORDER: &str = "linear,bn,prelu";
pub const SKIP: &str = "after_bn3_before_prelu";

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("unsupported weights version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error(transparent)]
    Container(ContainerError),
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    UnknownTensor(String),
    #[error("tensor {name}: unsupported dtype {dtype}")]
    Dtype { name: String, dtype: String },
    #[error("tensor {name}: offset {offset} runs past the {blob_len}-byte blob")]
    Offset { name: String, offset: usize, blob_len: usize },
    #[error("weights blob length mismatch: expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },
    #[error("tensor {name} has non-finite values")]
    NonFinite { name: String },
    #[error("input length mismatch: expected {expected}, got {found}")]
    Input { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<ContainerError> for WeightsError {
    fn from(e: ContainerError) -> Self {
        match e {
            ContainerError::Version { expected, found } => WeightsError::Version { expected, found },
            other => WeightsError::Container(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArchitecture {
    pub n_s: usize,
    pub m: usize,
    pub residual_blocks: usize,
    pub filters: [usize; 3],
    pub kernel_size: usize,
    pub bn_eps: f64,
    pub layout: String,
    pub coarse_order: String,
    pub skip: String,
}

impl ModelArchitecture {
    /// Six residual blocks.
    pub fn new(n_s: usize, m: usize) -> Self {
        Self::with_blocks(n_s, m, RESIDUAL_BLOCKS)
    }

    /// Reduced depth for small in-memory experiments. Files must use
    /// [`RESIDUAL_BLOCKS`].
    pub fn with_blocks(n_s: usize, m: usize, residual_blocks: usize) -> Self {
        ModelArchitecture {
            n_s,
            m,
            residual_blocks,
            filters: FILTERS,
            kernel_size: KERNEL_SIZE,
            bn_eps: BN_EPS,
            layout: LAYOUT.into(),
            coarse_order: COARSE_ORDER.into(),
            skip: SKIP.into(),
        }
    }

    /// Shape and convention checks shared by every instance.
    pub fn validate(&self) -> Result<(), WeightsError> {
        let bad = |msg: String| Err(WeightsError::Architecture(msg));
        if self.m == 0 || self.m >= self.n_s {
            return bad(format!("need 0 < m < n_s, got m = {}, n_s = {}", self.m, self.n_s));
        }
        if self.filters != FILTERS {
            return bad(format!("filter counts must be {FILTERS:?}, got {:?}", self.filters));
        }
        if self.kernel_size != KERNEL_SIZE {
            return bad(format!("kernel size must be {KERNEL_SIZE}, got {}", self.kernel_size));
        }
        if !(self.bn_eps > 0.0 && self.bn_eps.is_finite()) {
            return bad(format!("bn_eps must be positive, got {}", self.bn_eps));
        }
        for (field, got, want) in [
            ("layout", &self.layout, LAYOUT),
            ("coarse_order", &self.coarse_order, COARSE_ORDER),
            ("skip", &self.skip, SKIP),
        ] {
            if got != want {
                return bad(format!("{field} must be {want:?}, got {got:?}"));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the fixed depth required of files.
    pub fn validate_strict(&self) -> Result<(), WeightsError> {
        self.validate()?;
        if self.residual_blocks != RESIDUAL_BLOCKS {
            return Err(WeightsError::Architecture(format!(
                "residual block count must be {RESIDUAL_BLOCKS}, got {}",
                self.residual_blocks
            )));
        }
        Ok(())
    }

    /// Every tensor in canonical (file) order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        let (n, m) = (self.n_s, self.m);
        let mut specs = vec![
            ("compression.phi_re".to_string(), vec![m, n]),
            ("compression.phi_im".to_string(), vec![m, n]),
            ("coarse.weight".to_string(), vec![2 * n, 2 * m]),
            ("coarse.bias".to_string(), vec![2 * n]),
        ];
        for p in ["gamma", "beta", "mean", "var"] {
            specs.push((format!("coarse.bn.{p}"), vec![2 * n]));
        }
        specs.push(("coarse.prelu".to_string(), vec![2 * n]));
        for b in 0..self.residual_blocks {
            let mut c_in = 2;
            for (j, &c_out) in self.filters.iter().enumerate() {
                let j = j + 1;
                specs.push((format!("fine.{b}.conv{j}.weight"), vec![c_out, c_in, self.kernel_size]));
                for p in ["gamma", "beta", "mean", "var"] {
                    specs.push((format!("fine.{b}.bn{j}.{p}"), vec![c_out]));
                }
                specs.push((format!("fine.{b}.prelu{j}"), vec![c_out]));
                c_in = c_out;
            }
        }
        specs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major.
    pub data: Vec<f32>,
}

/// Immutable after construction; `forward` is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    arch: ModelArchitecture,
    tensors: Vec<Tensor>,
}

impl ModelWeights {
    /// Checks names, shapes and finiteness against `arch`. Tensors may come
    /// in any order; they are stored in canonical order.
    pub fn new(arch: ModelArchitecture, mut tensors: Vec<Tensor>) -> Result<Self, WeightsError> {
        arch.validate()?;
        let specs = arch.tensor_specs();
        if let Some(extra) = tensors.iter().find(|t| !specs.iter().any(|(n, _)| *n == t.name)) {
            return Err(WeightsError::UnknownTensor(extra.name.clone()));
        }
        let mut ordered = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let idx = tensors
                .iter()
                .position(|t| t.name == name)
                .ok_or_else(|| WeightsError::MissingTensor(name.clone()))?;
            let t = tensors.swap_remove(idx);
            if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(WeightsError::Shape {
                    name,
                    expected: shape,
                    found: t.shape,
                });
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(WeightsError::NonFinite { name });
            }
            ordered.push(t);
        }
        if let Some(dup) = tensors.first() {
            return Err(WeightsError::UnknownTensor(dup.name.clone()));
        }
        Ok(ModelWeights { arch, tensors: ordered })
    }

    /// Every weight zero, BN statistics neutral (`γ = 1`, `μ = 0`,
    /// `σ² = 1`, `β = 0`) and PReLU slopes zero.
    pub fn zeros(arch: ModelArchitecture) -> Result<Self, WeightsError> {
        let tensors = arch
            .tensor_specs()
            .into_iter()
            .map(|(name, shape)| {
                let fill = if name.ends_with(".gamma") || name.ends_with(".var") { 1.0 } else { 0.0 };
                Tensor {
                    data: vec![fill; shape.iter().product()],
                    name,
                    shape,
                }
            })
            .collect();
        Self::new(arch, tensors)
    }

    /// Seeded random weights with fan-in scaling and plausible BN statistics.
    pub fn random(arch: ModelArchitecture, seed: u64) -> Result<Self, WeightsError> {
        let mut rng = seeded(seed);
        let tensors = arch
            .tensor_specs()
            .into_iter()
            .map(|(name, shape)| {
                let len: usize = shape.iter().product();
                let fan_in: usize = shape[1..].iter().product::<usize>().max(1);
                let mut gauss = |std: f64| rng.sample::<f64, _>(StandardNormal) * std;
                let data = (0..len)
                    .map(|_| {
                        let v = if name.starts_with("compression.") {
                            gauss((1.0 / arch.n_s as f64).sqrt())
                        } else if name.ends_with(".weight") {
                            gauss((1.0 / fan_in as f64).sqrt())
                        } else if name.ends_with(".gamma") {
                            1.0 + gauss(0.2)
                        } else if name.ends_with(".var") {
                            0.5 + gauss(0.3).abs()
                        } else if name.contains("prelu") {
                            0.25 + gauss(0.1)
                        } else {
                            gauss(0.1)
                        };
                        v as f32
                    })
                    .collect();
                Tensor { name, shape, data }
            })
            .collect();
        Self::new(arch, tensors)
    }

    pub fn architecture(&self) -> &ModelArchitecture {
        &self.arch
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Replaces a tensor's values, keeping its shape.
    pub fn set(&mut self, name: &str, data: Vec<f32>) -> Result<(), WeightsError> {
        let t = self
            .tensors
            .iter_mut()
            .find(|t| t.name == name)
            .ok_or_else(|| WeightsError::UnknownTensor(name.into()))?;
        if data.len() != t.data.len() {
            return Err(WeightsError::Shape {
                name: name.into(),
                expected: t.shape.clone(),
                found: vec![data.len()],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(WeightsError::NonFinite { name: name.into() });
        }
        t.data = data;
        Ok(())
    }

    fn get(&self, name: &str) -> &[f32] {
        &self.tensor(name).expect("validated at construction").data
    }

    /// `Φ_DL` as a complex sensing matrix.
    pub fn extract_sensing_matrix(&self) -> SensingMatrix {
        let entries = self
            .get("compression.phi_re")
            .iter()
            .zip(self.get("compression.phi_im"))
            .map(|(&re, &im)| Complex32::new(re, im))
            .collect();
        SensingMatrix::new(self.arch.m, self.arch.n_s, entries, MatrixKind::Learned, None)
            .expect("shape validated at construction")
    }

    fn check_input(&self, input: &[f64]) -> Result<(), WeightsError> {
        if input.len() != 2 * self.arch.n_s {
            return Err(WeightsError::Input {
                expected: 2 * self.arch.n_s,
                found: input.len(),
            });
        }
        Ok(())
    }

    /// Compression stage: `n_s × 2` in, `m × 2` out.
    pub fn compress_stage(&self, input: &[f64]) -> Result<Vec<f64>, WeightsError> {
        self.check_input(input)?;
        let (m, n) = (self.arch.m, self.arch.n_s);
        let (re, im) = (self.get("compression.phi_re"), self.get("compression.phi_im"));
        let mut z = vec![0.0; 2 * m];
        for i in 0..m {
            let (mut zr, mut zi) = (0.0, 0.0);
            for j in 0..n {
                let (a, b) = (re[i * n + j] as f64, im[i * n + j] as f64);
                let (xr, xi) = (input[2 * j], input[2 * j + 1]);
                zr += a * xr - b * xi;
                zi += b * xr + a * xi;
            }
            z[2 * i] = zr;
            z[2 * i + 1] = zi;
        }
        Ok(z)
    }

    /// Coarse stage output (`n_s × 2`) from compressed measurements.
    pub fn coarse_stage(&self, z: &[f64]) -> Vec<f64> {
        let (rows, cols) = (2 * self.arch.n_s, 2 * self.arch.m);
        let w = self.get("coarse.weight");
        let bias = self.get("coarse.bias");
        let mut h: Vec<f64> = (0..rows)
            .map(|r| bias[r] as f64 + w[r * cols..(r + 1) * cols].iter().zip(z).map(|(&a, b)| a as f64 * b).sum::<f64>())
            .collect();
        let bn = self.bn("coarse.bn");
        let slope = self.get("coarse.prelu");
        for (r, v) in h.iter_mut().enumerate() {
            *v = prelu(bn.apply(r, *v), slope[r]);
        }
        h
    }

    /// One residual block on an `n_s × 2` activation.
    fn residual_block(&self, b: usize, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        let mut c_in = 2;
        for (j, &c_out) in self.arch.filters.iter().enumerate() {
            let j = j + 1;
            let w = self.get(&format!("fine.{b}.conv{j}.weight"));
            let mut out = conv1d_same(&h, c_in, c_out, self.arch.kernel_size, w);
            let bn = self.bn(&format!("fine.{b}.bn{j}"));
            for (k, v) in out.iter_mut().enumerate() {
                *v = bn.apply(k % c_out, *v);
            }
            if j == self.arch.filters.len() {
                for (v, s) in out.iter_mut().zip(x) {
                    *v += s;
                }
            }
            let slope = self.get(&format!("fine.{b}.prelu{j}"));
            for (k, v) in out.iter_mut().enumerate() {
                *v = prelu(*v, slope[k % c_out]);
            }
            h = out;
            c_in = c_out;
        }
        h
    }

    /// Fine stage: all residual blocks in sequence.
    pub fn fine_stage(&self, coarse: &[f64]) -> Vec<f64> {
        (0..self.arch.residual_blocks).fold(coarse.to_vec(), |h, b| self.residual_block(b, &h))
    }

    /// Full network on a flattened `n_s × 2` input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, WeightsError> {
        let z = self.compress_stage(input)?;
        Ok(self.fine_stage(&self.coarse_stage(&z)))
    }

    /// [`forward`](Self::forward) on complex spectra.
    pub fn reconstruct(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>, WeightsError> {
        let out = self.forward(&to_channels(spectrum))?;
        Ok(from_channels(&out))
    }

    fn bn(&self, prefix: &str) -> BatchNorm<'_> {
        BatchNorm {
            gamma: self.get(&format!("{prefix}.gamma")),
            beta: self.get(&format!("{prefix}.beta")),
            mean: self.get(&format!("{prefix}.mean")),
            var: self.get(&format!("{prefix}.var")),
            eps: self.arch.bn_eps,
        }
    }
}

struct BatchNorm<'a> {
    gamma: &'a [f32],
    beta: &'a [f32],
    mean: &'a [f32],
    var: &'a [f32],
    eps: f64,
}

impl BatchNorm<'_> {
    fn apply(&self, c: usize, x: f64) -> f64 {
        self.gamma[c] as f64 * (x - self.mean[c] as f64) / (self.var[c] as f64 + self.eps).sqrt() + self.beta[c] as f64
    }
}

fn prelu(x: f64, slope: f32) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope as f64 * x
    }
}

/// Same-padded stride-1 cross-correlation over positions; `x` is
/// `len × c_in`, `w` is `[c_out, c_in, k]`, output `len × c_out`.
fn conv1d_same(x: &[f64], c_in: usize, c_out: usize, k: usize, w: &[f32]) -> Vec<f64> {
    let len = x.len() / c_in;
    let half = (k / 2) as isize;
    let mut out = vec![0.0; len * c_out];
    for p in 0..len {
        for t in 0..k {
            let q = p as isize + t as isize - half;
            if q < 0 || q >= len as isize {
                continue;
            }
            let xin = &x[q as usize * c_in..(q as usize + 1) * c_in];
            for o in 0..c_out {
                let wrow = &w[o * c_in * k..(o + 1) * c_in * k];
                let mut acc = 0.0;
                for (i, xv) in xin.iter().enumerate() {
                    acc += wrow[i * k + t] as f64 * xv;
                }
                out[p * c_out + o] += acc;
            }
        }
    }
    out
}

/// Complex spectrum to flattened (position, channel) pairs.
pub fn to_channels(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn from_channels(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

#[cfg(test)]
mod tests;
