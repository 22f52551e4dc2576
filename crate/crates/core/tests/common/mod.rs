//! Straight-line reference implementation of the network forward pass.
//!
//! Activations are kept channel-major (`act[channel][position]`), unlike the
//! library's position-major layout, and every layer is spelled out with
//! explicit loops.

#![allow(dead_code)]

use v2xsense::reconstructor::ModelWeights;

fn t(w: &ModelWeights, name: &str) -> Vec<f64> {
    w.tensor(name).unwrap().data.iter().map(|&v| v as f64).collect()
}

fn batch_norm(w: &ModelWeights, prefix: &str, channel: usize, x: f64) -> f64 {
    let eps = w.architecture().bn_eps;
    let gamma = t(w, &format!("{prefix}.gamma"))[channel];
    let beta = t(w, &format!("{prefix}.beta"))[channel];
    let mean = t(w, &format!("{prefix}.mean"))[channel];
    let var = t(w, &format!("{prefix}.var"))[channel];
    (x - mean) / (var + eps).sqrt() * gamma + beta
}

fn prelu(x: f64, a: f64) -> f64 {
    if x < 0.0 {
        a * x
    } else {
        x
    }
}

/// `out[o][p] = Σ_i Σ_k w[o][i][k] · in[i][p + k − 1]`, zero outside.
fn conv(input: &[Vec<f64>], weight: &[f64], c_out: usize) -> Vec<Vec<f64>> {
    let c_in = input.len();
    let len = input[0].len();
    let mut out = vec![vec![0.0; len]; c_out];
    for o in 0..c_out {
        for p in 0..len {
            let mut s = 0.0;
            for i in 0..c_in {
                for k in 0..3 {
                    let q = p as i64 + k as i64 - 1;
                    if q >= 0 && (q as usize) < len {
                        s += weight[(o * c_in + i) * 3 + k] * input[i][q as usize];
                    }
                }
            }
            out[o][p] = s;
        }
    }
    out
}

/// Forward pass on a flattened `(position, channel)` input.
pub fn oracle_forward(w: &ModelWeights, x: &[f64]) -> Vec<f64> {
    let arch = w.architecture();
    let (n, m) = (arch.n_s, arch.m);
    let xr: Vec<f64> = (0..n).map(|p| x[2 * p]).collect();
    let xi: Vec<f64> = (0..n).map(|p| x[2 * p + 1]).collect();

    // y = Φ x with Φ = phi_re + i·phi_im.
    let phi_re = t(w, "compression.phi_re");
    let phi_im = t(w, "compression.phi_im");
    let mut z = Vec::new();
    for i in 0..m {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..n {
            re += phi_re[i * n + j] * xr[j] - phi_im[i * n + j] * xi[j];
            im += phi_im[i * n + j] * xr[j] + phi_re[i * n + j] * xi[j];
        }
        z.push(re);
        z.push(im);
    }

    let cw = t(w, "coarse.weight");
    let cb = t(w, "coarse.bias");
    let slopes = t(w, "coarse.prelu");
    let mut flat = Vec::new();
    for r in 0..2 * n {
        let mut s = cb[r];
        for c in 0..2 * m {
            s += cw[r * 2 * m + c] * z[c];
        }
        flat.push(prelu(batch_norm(w, "coarse.bn", r, s), slopes[r]));
    }
    let mut h = vec![vec![0.0; n]; 2];
    for p in 0..n {
        h[0][p] = flat[2 * p];
        h[1][p] = flat[2 * p + 1];
    }

    for b in 0..arch.residual_blocks {
        let skip = h.clone();
        let mut a = h;
        for (j, c_out) in [(1, 64), (2, 32), (3, 2)] {
            let mut out = conv(&a, &t(w, &format!("fine.{b}.conv{j}.weight")), c_out);
            let slopes = t(w, &format!("fine.{b}.prelu{j}"));
            for o in 0..c_out {
                for p in 0..n {
                    let mut v = batch_norm(w, &format!("fine.{b}.bn{j}"), o, out[o][p]);
                    if j == 3 {
                        v += skip[o][p];
                    }
                    out[o][p] = prelu(v, slopes[o]);
                }
            }
            a = out;
        }
        h = a;
    }

    let mut y = Vec::new();
    for p in 0..n {
        y.push(h[0][p]);
        y.push(h[1][p]);
    }
    y
}
