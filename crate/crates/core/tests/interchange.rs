//! File formats read and written by other tools, checked byte by byte.

mod common;

use v2xsense::channel::BandConfig;
use v2xsense::reconstructor::{ModelArchitecture, ModelWeights, WeightsError};
use v2xsense::specgen::{generate_dataset, DatasetFile, GenerateOptions, ScenarioConfig, SplitCounts};

fn frame(magic: &[u8; 4], json: &str) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(json.as_bytes());
    out
}

/// Weights file built by hand the way an external exporter would: tensors
/// in reverse canonical order with explicit offsets, values `k · 0.001`
/// counting through each tensor.
fn hand_built_weights() -> (Vec<u8>, Vec<(String, Vec<usize>)>) {
    let arch = ModelArchitecture::new(8, 2);
    let mut specs = arch.tensor_specs();
    specs.reverse();
    let mut entries = Vec::new();
    let mut blob = Vec::new();
    for (name, shape) in &specs {
        entries.push(serde_json::json!({
            "name": name,
            "shape": shape,
            "dtype": "float32",
            "offset": blob.len(),
        }));
        let len: usize = shape.iter().product();
        for k in 0..len {
            let v = if name.ends_with(".var") { 1.0 + k as f32 * 0.001 } else { k as f32 * 0.001 };
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = serde_json::json!({
        "architecture": {
            "n_s": 8, "m": 2, "residual_blocks": 6, "filters": [64, 32, 2], "kernel_size": 3,
            "bn_eps": 1e-5, "layout": "position,channel", "coarse_order": "linear,bn,prelu",
            "skip": "after_bn3_before_prelu"
        },
        "tensors": entries,
    });
    let mut bytes = frame(b"V2XW", &manifest.to_string());
    bytes.extend_from_slice(&blob);
    (bytes, specs)
}

#[test]
fn hand_built_weights_load() {
    let (bytes, specs) = hand_built_weights();
    let w = ModelWeights::from_bytes(&bytes).unwrap();
    for (name, shape) in specs {
        let t = w.tensor(&name).unwrap();
        assert_eq!(t.shape, shape);
        let last = t.data.len() - 1;
        let expected = if name.ends_with(".var") { 1.0 + last as f32 * 0.001 } else { last as f32 * 0.001 };
        assert_eq!(t.data[last], expected, "{name}");
    }
    let x: Vec<f64> = (0..16).map(|k| (k as f64 * 0.4).cos()).collect();
    let (got, want) = (w.forward(&x).unwrap(), common::oracle_forward(&w, &x));
    for (g, o) in got.iter().zip(&want) {
        assert!((g - o).abs() < 1e-6);
    }
    // Re-saving writes canonical order, which loads to the same weights.
    let again = ModelWeights::from_bytes(&w.to_bytes()).unwrap();
    assert_eq!(again, w);
}

#[test]
fn hand_built_weights_errors() {
    let (bytes, _) = hand_built_weights();
    let err = ModelWeights::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(matches!(err, WeightsError::Length { .. }), "{err}");
    assert!(err.to_string().contains("expected") && err.to_string().contains("found"));

    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let json = std::str::from_utf8(&bytes[12..12 + len]).unwrap().replacen("float32", "float16", 1);
    let mut swapped = frame(b"V2XW", &json);
    swapped.extend_from_slice(&bytes[12 + len..]);
    assert!(matches!(ModelWeights::from_bytes(&swapped), Err(WeightsError::Dtype { .. })));
}

/// Reads a dataset file using only the documented layout.
fn parse_dataset(bytes: &[u8]) -> (serde_json::Value, Vec<Vec<f32>>, Vec<Vec<u8>>, Vec<f64>) {
    assert_eq!(&bytes[..4], b"V2XD");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
    let n = header["n_subcarriers"].as_u64().unwrap() as usize;
    let counts = &header["counts"];
    let total: u64 = ["train", "val", "test"].iter().map(|k| counts[k].as_u64().unwrap()).sum();
    let mut pos = 12 + len;
    let (mut floats, mut masks, mut scales) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..total {
        // clean then noisy, each n interleaved (re, im) float32 pairs
        let f: Vec<f32> = (0..4 * n)
            .map(|i| f32::from_le_bytes(bytes[pos + 4 * i..pos + 4 * i + 4].try_into().unwrap()))
            .collect();
        pos += 16 * n;
        masks.push(bytes[pos..pos + n].to_vec());
        pos += n;
        scales.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
        pos += 8;
        floats.push(f);
    }
    assert_eq!(pos, bytes.len());
    (header, floats, masks, scales)
}

#[test]
fn dataset_layout_matches_documentation() {
    let config = ScenarioConfig::new(BandConfig::sub6ghz());
    let counts = SplitCounts { train: 3, val: 2, test: 1 };
    let data = generate_dataset(&config, 30.0, counts, 5, GenerateOptions::default()).unwrap();
    let bytes = data.to_bytes().unwrap();
    let (header, floats, masks, scales) = parse_dataset(&bytes);
    assert_eq!(header["band"], "sub6ghz");
    assert_eq!(header["snr_db"], 30.0);
    assert_eq!(header["content"], "dataset");
    assert_eq!(header["seed"], 5);
    let all: Vec<_> = data.train.iter().chain(&data.val).chain(&data.test).collect();
    for (i, s) in all.iter().enumerate() {
        for k in 0..256 {
            assert_eq!(floats[i][2 * k] as f64, s.clean[k].re);
            assert_eq!(floats[i][2 * k + 1] as f64, s.clean[k].im);
            assert_eq!(floats[i][512 + 2 * k] as f64, s.noisy[k].re);
            assert_eq!(masks[i][k], s.mask[k] as u8);
        }
        assert_eq!(scales[i], s.scale);
    }
    assert_eq!(DatasetFile::from_bytes(&bytes).unwrap(), data);
}

#[test]
fn noiseless_header_uses_null() {
    let config = ScenarioConfig::new(BandConfig::thz());
    let counts = SplitCounts { train: 0, val: 0, test: 2 };
    let data = generate_dataset(&config, f64::INFINITY, counts, 1, GenerateOptions::default()).unwrap();
    let (header, ..) = parse_dataset(&data.to_bytes().unwrap());
    assert!(header["snr_db"].is_null());
    assert_eq!(header["band"], "thz");
}
