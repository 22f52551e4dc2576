use super::*;
use crate::sensing::compress;
use proptest::prelude::*;
use rand::Rng;
use rayon::prelude::*;

fn input(n_s: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..2 * n_s).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn small() -> ModelWeights {
    ModelWeights::random(ModelArchitecture::new(16, 4), 3).unwrap()
}

#[test]
fn full_scale_shapes() {
    let w = ModelWeights::random(ModelArchitecture::new(256, 32), 1).unwrap();
    let x = input(256, 2);
    assert_eq!(w.compress_stage(&x).unwrap().len(), 64);
    assert_eq!(w.forward(&x).unwrap().len(), 512);
    assert_eq!(w.extract_sensing_matrix().m(), 32);
    assert_eq!(w.extract_sensing_matrix().n_s(), 256);
}

#[test]
fn zero_weights_give_zero_output() {
    let mut w = ModelWeights::zeros(ModelArchitecture::new(16, 4)).unwrap();
    assert!(w.forward(&input(16, 1)).unwrap().iter().all(|&v| v == 0.0));
    let gammas: Vec<String> = w.tensors().iter().filter(|t| t.name.ends_with(".gamma")).map(|t| t.name.clone()).collect();
    for name in gammas {
        let len = w.tensor(&name).unwrap().data.len();
        w.set(&name, vec![0.0; len]).unwrap();
    }
    assert!(w.forward(&input(16, 2)).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn residual_blocks_pass_through_when_convolutions_vanish() {
    let mut w = small();
    for b in 0..RESIDUAL_BLOCKS {
        for j in 1..=3 {
            let name = format!("fine.{b}.conv{j}.weight");
            let len = w.tensor(&name).unwrap().data.len();
            w.set(&name, vec![0.0; len]).unwrap();
        }
        w.set(&format!("fine.{b}.bn3.mean"), vec![0.0; 2]).unwrap();
        w.set(&format!("fine.{b}.bn3.beta"), vec![0.0; 2]).unwrap();
        w.set(&format!("fine.{b}.prelu3"), vec![1.0; 2]).unwrap();
    }
    let x = input(16, 4);
    let coarse = w.coarse_stage(&w.compress_stage(&x).unwrap());
    assert_eq!(w.fine_stage(&coarse), coarse);
}

#[test]
fn extracted_matrix_matches_compression_stage() {
    let w = small();
    let phi = w.extract_sensing_matrix();
    assert_eq!((phi.m(), phi.n_s()), (4, 16));
    for seed in 0..100 {
        let x = input(16, seed);
        let stage = w.compress_stage(&x).unwrap();
        let y = compress(&from_channels(&x), &phi).unwrap().y;
        for (a, b) in to_channels(&y).iter().zip(&stage) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn identity_embedding_extracts_identity_rows() {
    let mut w = ModelWeights::zeros(ModelArchitecture::new(16, 4)).unwrap();
    let mut eye = vec![0.0f32; 4 * 16];
    for i in 0..4 {
        eye[i * 16 + i] = 1.0;
    }
    w.set("compression.phi_re", eye).unwrap();
    let phi = w.extract_sensing_matrix();
    assert_eq!(phi.entries(), SensingMatrix::identity_rows(4, 16).unwrap().entries());
}

#[test]
fn forward_is_deterministic_across_threads() {
    let w = small();
    let inputs: Vec<_> = (0..64).map(|s| input(16, s)).collect();
    let serial: Vec<_> = inputs.iter().map(|x| w.forward(x).unwrap()).collect();
    let parallel: Vec<_> = inputs.par_iter().map(|x| w.forward(x).unwrap()).collect();
    assert_eq!(serial, parallel);
}

#[test]
fn wrong_input_length_is_rejected() {
    assert!(matches!(small().forward(&[0.0; 31]), Err(WeightsError::Input { expected: 32, found: 31 })));
}

#[test]
fn construction_checks_tensors() {
    let arch = ModelArchitecture::new(16, 4);
    let mut tensors = ModelWeights::zeros(arch.clone()).unwrap().tensors().to_vec();
    tensors.reverse();
    assert!(ModelWeights::new(arch.clone(), tensors.clone()).is_ok());

    let mut bad = tensors.clone();
    bad[0].data[0] = f32::NAN;
    let name = bad[0].name.clone();
    assert!(matches!(ModelWeights::new(arch.clone(), bad), Err(WeightsError::NonFinite { name: n }) if n == name));

    let mut bad = tensors.clone();
    bad.pop();
    assert!(matches!(ModelWeights::new(arch.clone(), bad), Err(WeightsError::MissingTensor(_))));

    let mut bad = tensors.clone();
    let i = bad.iter().position(|t| t.name == "coarse.weight").unwrap();
    bad[i].shape = vec![4, 8];
    assert!(matches!(ModelWeights::new(arch.clone(), bad), Err(WeightsError::Shape { name, .. }) if name == "coarse.weight"));

    let mut bad = tensors;
    bad.push(Tensor {
        name: "extra".into(),
        shape: vec![1],
        data: vec![0.0],
    });
    assert!(matches!(ModelWeights::new(arch, bad), Err(WeightsError::UnknownTensor(_))));

    let mut arch = ModelArchitecture::new(16, 4);
    arch.filters = [64, 32, 4];
    assert!(ModelWeights::zeros(arch).is_err());
    assert!(ModelWeights::zeros(ModelArchitecture::new(16, 16)).is_err());
}

#[test]
fn save_load_save_is_bit_exact() {
    let w = small();
    let bytes = w.to_bytes();
    assert_eq!(&bytes[..4], b"V2XW");
    let back = ModelWeights::from_bytes(&bytes).unwrap();
    assert_eq!(back, w);
    assert_eq!(back.to_bytes(), bytes);
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    let w = small();
    w.save(&path).unwrap();
    assert_eq!(ModelWeights::load(&path).unwrap(), w);
    let err = ModelWeights::load(&dir.path().join("absent.bin")).unwrap_err();
    assert!(err.to_string().contains("absent.bin"));
}

#[test]
fn five_blocks_rejected_on_load() {
    let w = ModelWeights::random(ModelArchitecture::with_blocks(16, 4, 5), 1).unwrap();
    let err = ModelWeights::from_bytes(&w.to_bytes()).unwrap_err();
    assert!(matches!(&err, WeightsError::Architecture(msg) if msg.contains("6")), "{err}");
}

#[test]
fn truncated_blob_reports_lengths() {
    let bytes = small().to_bytes();
    let err = ModelWeights::from_bytes(&bytes[..bytes.len() - 8]).unwrap_err();
    let blob_len: usize = small().tensors().iter().map(|t| t.data.len() * 4).sum();
    match err {
        WeightsError::Length { expected, actual } => {
            assert_eq!(expected, blob_len);
            assert_eq!(actual, blob_len - 8);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn version_mismatch_is_named() {
    let mut bytes = small().to_bytes();
    bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
    assert!(matches!(ModelWeights::from_bytes(&bytes), Err(WeightsError::Version { expected: 1, found: 2 })));
}

#[test]
fn nonfinite_file_values_rejected() {
    let w = small();
    let mut bytes = w.to_bytes();
    let n = bytes.len();
    bytes[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
    let last = w.tensors().last().unwrap().name.clone();
    assert!(matches!(ModelWeights::from_bytes(&bytes), Err(WeightsError::NonFinite { name }) if name == last));
}

#[test]
fn manifest_shape_mismatch_names_tensor() {
    let w = small();
    let mut manifest = w.manifest();
    manifest.tensors[2].shape = vec![2 * 16, 2 * 5];
    let mut bytes = Vec::new();
    crate::container::write_frame(&mut bytes, WEIGHTS_MAGIC, WEIGHTS_VERSION, &manifest).unwrap();
    bytes.extend_from_slice(&w.to_bytes()[w.to_bytes().len() - 4 * w.tensors().iter().map(|t| t.data.len()).sum::<usize>()..]);
    assert!(matches!(ModelWeights::from_bytes(&bytes), Err(WeightsError::Shape { name, .. }) if name == "coarse.weight"));
}

proptest! {
    #[test]
    fn compression_stage_is_linear(seed in 0u64..500, a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let w = ModelWeights::random(ModelArchitecture::with_blocks(16, 4, 1), seed).unwrap();
        let (x1, x2) = (input(16, seed + 1), input(16, seed + 2));
        let mix: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let lhs = w.compress_stage(&mix).unwrap();
        let (y1, y2) = (w.compress_stage(&x1).unwrap(), w.compress_stage(&x2).unwrap());
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (a * y1[i] + b * y2[i])).abs() < 1e-9);
        }
    }
}
