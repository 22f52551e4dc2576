//! Subcommand bodies.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use v2xsense::channel::BandConfig;
use v2xsense::cs::{dense_matrix, fista, omp, CsSolverConfig, Stopping};
use v2xsense::eval::{
    estimates_file, evaluate_run, format_table, loss_curve_svg, metrics_bar_svg, read_estimates, spectrum_overlay_svg,
    EvalError, Method, TrainingLog, TrainingLogError,
};
use v2xsense::mobility::{parse_fcd_trace, run_scenario, RoadConfig, VehicleParams};
use v2xsense::reconstructor::{ModelWeights, WeightsError};
use v2xsense::sensing::{measurements_for_rate, random_sensing_matrix, MatrixKind, SensingError, SensingMatrix};
use v2xsense::specgen::{generate_dataset, DatasetFile, GenerateOptions, ScenarioConfig, Split, SpecgenError};
use v2xsense::Complex64;

use crate::{
    resolve, Band, CliError, Evaluate, GenDataset, GenTraffic, MatrixChoice, ReconMethod, Reconstruct, Reference,
    SplitArg, TrainingLogArgs,
};

impl From<SpecgenError> for CliError {
    fn from(e: SpecgenError) -> Self {
        match e {
            SpecgenError::Io { .. } => CliError::Io(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<WeightsError> for CliError {
    fn from(e: WeightsError) -> Self {
        match e {
            WeightsError::Io { .. } => CliError::Io(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<SensingError> for CliError {
    fn from(e: SensingError) -> Self {
        match e {
            SensingError::Io { .. } => CliError::Io(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Sensing(e) => e.into(),
            EvalError::Weights(e) => e.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn split_of(s: SplitArg) -> Split {
    match s {
        SplitArg::Train => Split::Train,
        SplitArg::Val => Split::Val,
        SplitArg::Test => Split::Test,
    }
}

pub fn gen_traffic(a: &GenTraffic) -> Result<(), CliError> {
    let trajectories = match (&a.fcd, a.duration) {
        (Some(fcd), _) => {
            let path = resolve(fcd);
            let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
            parse_fcd_trace(&text).map_err(|e| CliError::Data(e.to_string()))?
        }
        (None, Some(duration)) => {
            let seed = a.seed.ok_or_else(|| CliError::Usage("--seed is required with --duration".into()))?;
            let mut params = VehicleParams::default();
            if let Some(interval) = a.spawn_interval {
                params.spawn_mean_interval_s = interval;
            }
            run_scenario(&RoadConfig::default(), &params, duration, seed).map_err(|e| CliError::Data(e.to_string()))?
        }
        (None, None) => return Err(CliError::Usage("one of --duration or --fcd is required".into())),
    };
    let out = resolve(&a.out);
    let file = fs::File::create(&out).map_err(|e| io_error(&out, e))?;
    trajectories.write_csv(file).map_err(|e| io_error(&out, e))?;
    let poses: usize = trajectories.steps.iter().map(|s| s.poses.len()).sum();
    println!("{} steps, {poses} vehicle positions -> {}", trajectories.len(), out.display());
    Ok(())
}

fn band_config(a: &GenDataset) -> Result<BandConfig, CliError> {
    let name = match a.band {
        Band::Sub6ghz => "sub6ghz",
        Band::Thz => "thz",
    };
    let Some(file) = &a.band_config else {
        return Ok(BandConfig::preset(name.parse().expect("known band")));
    };
    let path = resolve(file);
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    let named = text.lines().any(|l| l.split('=').next().is_some_and(|k| k.trim() == "name"));
    let text = if named { text } else { format!("name = {name}\n{text}") };
    BandConfig::from_config_text(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn gen_dataset(a: &GenDataset) -> Result<(), CliError> {
    if a.snr.is_nan() {
        return Err(CliError::Usage("--snr must be a number or inf".into()));
    }
    let mut config = ScenarioConfig::new(band_config(a)?);
    config.n_subcarriers = a.subcarriers;
    let counts = v2xsense::specgen::SplitCounts {
        train: a.train,
        val: a.val,
        test: a.test,
    };
    pool(a.jobs)?;
    if a.dry_run {
        config.band.validate().map_err(|e| CliError::Data(e.to_string()))?;
        let header = serde_json::json!({
            "band": config.band.name,
            "snr_db": a.snr.is_finite().then_some(a.snr),
            "n_subcarriers": config.n_subcarriers,
            "counts": counts,
            "seed": a.seed,
            "content": "dataset",
        });
        println!("{header}");
        return Ok(());
    }
    let data = generate_dataset(&config, a.snr, counts, a.seed, GenerateOptions { jobs: a.jobs })?;
    let bytes = data.to_bytes()?;
    let out = resolve(&a.out);
    write_file(&out, &bytes)?;
    let header = serde_json::to_string(&data.header).expect("header serializes");
    println!("{header}");
    println!("sha256 {}", hex::encode(Sha256::digest(&bytes)));
    println!("{} bytes -> {}", bytes.len(), out.display());
    Ok(())
}

fn sensing_matrix(a: &Reconstruct, n: usize) -> Result<SensingMatrix, CliError> {
    if let Some(file) = &a.matrix {
        let phi = SensingMatrix::read(&resolve(file))?;
        if phi.n_s() != n {
            return Err(CliError::Data(format!(
                "sensing matrix has n_s = {}, dataset has {n} subcarriers",
                phi.n_s()
            )));
        }
        return Ok(phi);
    }
    if !(a.rate > 0.0 && a.rate < 1.0) {
        return Err(CliError::Usage(format!("--rate must lie in (0, 1), got {}", a.rate)));
    }
    let seed = a
        .seed
        .ok_or_else(|| CliError::Usage("--seed is required unless --matrix is given".into()))?;
    let kind = match a.matrix_kind {
        MatrixChoice::Gaussian => MatrixKind::RandomGaussian,
        MatrixChoice::Bernoulli => MatrixKind::RandomBernoulli,
    };
    Ok(random_sensing_matrix(measurements_for_rate(a.rate, n), n, kind, seed)?)
}

pub fn reconstruct(a: &Reconstruct) -> Result<(), CliError> {
    let data = DatasetFile::read(&resolve(&a.data))?;
    let split = split_of(a.split);
    let samples = data.split(split);
    let n = data.header.n_subcarriers;
    let workers = pool(a.jobs)?;
    let (estimates, m, detail): (Vec<Vec<Complex64>>, usize, String) = match a.method {
        ReconMethod::Learned => {
            let path = resolve(a.weights.as_ref().expect("clap requires --weights"));
            let weights = ModelWeights::load(&path)?;
            let arch = weights.architecture();
            if arch.n_s != n {
                return Err(CliError::Data(format!(
                    "shape mismatch: weights expect n_s = {}, dataset has {n} subcarriers",
                    arch.n_s
                )));
            }
            let estimates = workers.install(|| {
                samples
                    .par_iter()
                    .map(|s| weights.reconstruct(&s.noisy))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            (estimates, arch.m, format!("weights {}", path.display()))
        }
        method => {
            let phi = sensing_matrix(a, n)?;
            let mut config = match (method, a.lambda) {
                (ReconMethod::Omp, _) => CsSolverConfig::sparsity(a.k),
                (_, Some(lambda)) => CsSolverConfig::lambda(lambda),
                (_, None) => CsSolverConfig::default(),
            };
            config.max_iterations = a.max_iterations;
            if let (ReconMethod::Omp, Stopping::Sparsity(k)) = (method, config.stopping) {
                if k == 0 || k > phi.m() {
                    return Err(CliError::Usage(format!("--k must lie in 1..={}, got {k}", phi.m())));
                }
            }
            let dense = dense_matrix(&phi);
            let estimates = workers.install(|| {
                samples
                    .par_iter()
                    .enumerate()
                    .map(|(index, s)| {
                        let y = phi.apply(&s.noisy)?;
                        let solved = match method {
                            ReconMethod::Omp => omp(&dense, &y, &config),
                            _ => fista(&dense, &y, &config),
                        };
                        solved
                            .map(|r| r.estimate)
                            .map_err(|source| EvalError::Cs { index, source })
                    })
                    .collect::<Result<Vec<_>, EvalError>>()
            })?;
            (estimates, phi.m(), format!("matrix {}", phi.id()))
        }
    };
    let name = format!("{:?}", a.method).to_lowercase();
    let file = estimates_file(&data, split, estimates, &name, Some(m))?;
    let out = resolve(&a.out);
    file.write(&out)?;
    println!(
        "{name}: {} estimates, m = {m}, {detail} -> {}",
        samples.len(),
        out.display()
    );
    Ok(())
}

fn magnitudes(x: &[Complex64]) -> Vec<f64> {
    x.iter().map(|c| c.norm()).collect()
}

pub fn evaluate(a: &Evaluate) -> Result<(), CliError> {
    let data = DatasetFile::read(&resolve(&a.data))?;
    let split = split_of(a.split);
    let samples = data.split(split);
    let n = data.header.n_subcarriers as f64;
    let stored;
    let method = match (a.reference, &a.estimates) {
        (Some(Reference::Oracle), _) => Method::Oracle,
        (Some(Reference::Noisy), _) => Method::Noisy,
        (None, Some(path)) => {
            let file = DatasetFile::read(&resolve(path))?;
            stored = (read_estimates(&file, split, samples)?, file.header);
            Method::Precomputed {
                name: stored.1.method.as_deref().unwrap_or("estimates"),
                estimates: &stored.0,
                compression_rate: stored.1.m.map(|m| m as f64 / n),
            }
        }
        (None, None) => return Err(CliError::Usage("one of --estimates or --reference is required".into())),
    };
    let report = pool(a.jobs)?.install(|| evaluate_run(samples, &method))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let table = format_table(std::slice::from_ref(&report));
    match &a.report {
        Some(path) => {
            let path = resolve(path);
            write_file(&path, format!("{json}\n").as_bytes())?;
            print!("{table}");
        }
        None => {
            eprint!("{table}");
            println!("{json}");
        }
    }
    if let Some(dir) = &a.plot {
        let dir = resolve(dir);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        for (index, sample) in samples.iter().enumerate().take(a.plot_samples) {
            let estimate = method.reconstruct(index, sample)?;
            let title = format!("{} sample {index} ({})", report.method, report.band);
            let svg = spectrum_overlay_svg(&magnitudes(&sample.clean), &magnitudes(&estimate), &title);
            write_file(&dir.join(format!("overlay_{index}.svg")), svg.as_bytes())?;
        }
        write_file(&dir.join("metrics.svg"), metrics_bar_svg(std::slice::from_ref(&report)).as_bytes())?;
    }
    Ok(())
}

pub fn training_log(a: &TrainingLogArgs) -> Result<(), CliError> {
    let path = resolve(&a.log);
    let file = fs::File::open(&path).map_err(|e| io_error(&path, e))?;
    let log = TrainingLog::read_csv(file).map_err(|e| match e {
        TrainingLogError::Csv(ref inner) if inner.is_io_error() => io_error(&path, e),
        e => CliError::Data(format!("{}: {e}", path.display())),
    })?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{} epochs", log.epochs.len());
    if let Some(best) = log.best_epoch() {
        let _ = writeln!(
            stdout,
            "best epoch {}: train_loss {} val_loss {}",
            best.epoch, best.train_loss, best.val_loss
        );
        let _ = writeln!(stdout, "final validation loss no higher than first: {}", log.improved());
    }
    if let Some(plot) = &a.plot {
        write_file(&resolve(plot), loss_curve_svg(&log).as_bytes())?;
    }
    Ok(())
}
