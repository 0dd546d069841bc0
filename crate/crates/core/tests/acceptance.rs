//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use common::{dft_power, gradient_check, mfcc_corpus, random_signal, reference_mfcc};
use pawsense::dsp::{mfcc, power_spectrum, MfccConfig};
use pawsense::modelstore::{audit, encode, load, save, ModelManifest, DEFAULT_RAM_CEILING};
use pawsense::nncore::{init_params, Loss, Matrix, MlpParams, MlpSpec};
use pawsense::pawsim::{
    generate_force_dataset, generate_terrain_dataset, write_force_dataset, write_terrain_dataset,
    AudioSimConfig, SimConfig,
};
use pawsense::pipeline::{
    evaluate_force, force_examples, grid_search_force, split, split_indices, stratified_kfold,
    terrain_features, train_force, train_terrain, ConfusionMatrix, ForceGrid, ForceScaler,
    GaussianNb, SplitSpec, TerrainFeatureConfig, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "parameter counts of the force model family",
            parameter_counts,
        ),
        ("backprop against finite differences", gradient_oracle),
        (
            "MFCC and spectrum against direct references",
            spectral_oracle,
        ),
        ("force regression on simulated sole images", force_training),
        (
            "terrain classification on simulated impacts",
            terrain_training,
        ),
        ("split and stratified fold sizes", stratification),
        ("model file size, RAM budget and round trip", budget_audit),
        ("seeded reproducibility", determinism),
        ("confusion matrix bookkeeping", confusion_invariants),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn parameter_counts() -> Outcome {
    // (frame rows, cols, hidden widths, expected count)
    let table: [(usize, usize, &[usize], usize); 7] = [
        (60, 90, &[4, 64, 64], 26_807),
        (30, 45, &[8, 64], 11_867),
        (30, 45, &[4, 128, 128], 23_983),
        (30, 45, &[8, 256], 14_939),
        (30, 45, &[8, 64, 64], 16_283),
        (30, 45, &[16, 32, 32], 23_635),
        (30, 45, &[16, 128], 24_755),
    ];
    for (rows, cols, widths, expected) in table {
        let spec = MlpSpec::force(rows, cols, widths);
        let got = spec.param_count();
        ensure!(
            got == expected,
            "{rows}x{cols} {widths:?}: {got} != {expected}"
        );
        let params: MlpParams = init_params(&spec, 1).map_err(|e| e.to_string())?;
        ensure!(
            params.param_count() == expected,
            "allocated tensors disagree for {widths:?}"
        );
    }
    let first = MlpSpec::force(60, 90, &[4, 128, 128]).param_count();
    ensure!(first == 40_183, "60x90 [4,128,128] gives {first}");
    Ok("7 of 7 exact; 60x90 [4,128,128] computes to 40,183, not 40,138".into())
}

fn gradient_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let (mut mae, mut ce, mut bn, mut plain) = (0, 0, 0, 0);
    for seed in 0..20 {
        let c = gradient_check(seed);
        ensure!(
            c.spec.param_count() <= 200,
            "seed {seed}: {} params",
            c.spec.param_count()
        );
        ensure!(
            c.max_rel_error <= 1e-4,
            "seed {seed}: relative error {:.3e} on {:?}",
            c.max_rel_error,
            c.spec
        );
        worst = worst.max(c.max_rel_error);
        match c.loss {
            Loss::Mae => mae += 1,
            Loss::CrossEntropy => ce += 1,
        }
        if c.spec.batch_norm_hidden {
            bn += 1;
        } else {
            plain += 1;
        }
    }
    ensure!(
        mae > 0 && ce > 0 && bn > 0 && plain > 0,
        "draws do not cover both losses and both BN settings"
    );
    Ok(format!(
        "20 nets ({mae} MAE / {ce} cross-entropy, {bn} with BN), worst relative error {worst:.2e}"
    ))
}

fn spectral_oracle() -> Outcome {
    let mut worst_spec = 0.0f64;
    for seed in 0..10 {
        let frame = random_signal(seed, 512);
        let fast = power_spectrum(&frame).map_err(|e| e.to_string())?;
        for (k, (&f, s)) in fast.iter().zip(dft_power(&frame)).enumerate() {
            let rel = (f as f64 - s).abs() / s.abs().max(f64::MIN_POSITIVE);
            ensure!(rel <= 1e-5, "frame {seed} bin {k}: {f} vs {s}");
            worst_spec = worst_spec.max(rel);
        }
    }
    let cfg = MfccConfig::default();
    let mut worst_mfcc = 0.0f64;
    for (i, clip) in mfcc_corpus().iter().enumerate() {
        let got = mfcc(clip, &cfg).map_err(|e| e.to_string())?;
        let want = reference_mfcc(clip.samples());
        ensure!(
            got.as_slice().len() == 13,
            "clip {i}: {} coefficients",
            got.as_slice().len()
        );
        for (k, (&g, w)) in got.as_slice().iter().zip(want).enumerate() {
            let err = (g as f64 - w).abs();
            ensure!(err <= 1e-4, "clip {i} coefficient {k}: {g} vs {w}");
            worst_mfcc = worst_mfcc.max(err);
        }
    }
    Ok(format!(
        "10 clips, worst MFCC error {worst_mfcc:.2e}; worst spectrum relative error {worst_spec:.2e}"
    ))
}

fn force_training() -> Outcome {
    let sim = SimConfig::default().with_seed(42);
    let samples = generate_force_dataset(4000, &sim).map_err(|e| e.to_string())?;
    let examples = force_examples(&samples).map_err(|e| e.to_string())?;
    let (train, val, test) =
        split(&examples, &SplitSpec::standard(42)).map_err(|e| e.to_string())?;
    let scaler = ForceScaler::from_ranges(&sim.force_range).map_err(|e| e.to_string())?;
    let spec = MlpSpec::force(30, 45, &[16, 128]);
    ensure!(
        spec.layer_dims() == vec![1350, 16, 128, 3],
        "layers {:?}",
        spec.layer_dims()
    );
    let config = TrainConfig::default();
    ensure!(config.epochs == 200, "epoch budget {}", config.epochs);
    let trained =
        train_force(&spec, &train, &val, &scaler, &config, 42).map_err(|e| e.to_string())?;
    let eval = evaluate_force(&trained.params, &scaler, &test).map_err(|e| e.to_string())?;
    let m = eval.metrics.axis_mae;
    ensure!(
        m.iter().all(|&v| v <= 0.05),
        "held-out normalized MAE {:.4} / {:.4} / {:.4} exceeds 0.05",
        m[0],
        m[1],
        m[2]
    );
    Ok(format!(
        "test MAE fx {:.4} fy {:.4} fz {:.4} (n={}), best epoch {:?}, |F| error {:.2} N",
        m[0],
        m[1],
        m[2],
        test.len(),
        trained.history.best_epoch,
        eval.metrics.magnitude_mae_n
    ))
}

fn terrain_training() -> Outcome {
    let data =
        generate_terrain_dataset(47, 42, &AudioSimConfig::default()).map_err(|e| e.to_string())?;
    ensure!(data.len() == 282, "{} clips", data.len());
    let features =
        terrain_features(&data, &TerrainFeatureConfig::default()).map_err(|e| e.to_string())?;
    let labels: Vec<usize> = data.iter().map(|s| s.label.index()).collect();
    let folds = stratified_kfold(&labels, 5, 42).map_err(|e| e.to_string())?;
    let spec = MlpSpec::terrain(13, &[16, 16], 6);
    let config = TrainConfig::default().with_learning_rate(1e-2);
    let nn =
        train_terrain(&spec, &features, &labels, &folds, &config, 42).map_err(|e| e.to_string())?;

    let mut gnb_acc = Vec::new();
    for fold in 0..folds.k {
        let tr = folds.training_indices(fold);
        let va = folds.validation_indices(fold);
        let x: Vec<&[f32]> = tr.iter().map(|&i| features[i].as_slice()).collect();
        let y: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
        let model = GaussianNb::fit(&x, &y, 6).map_err(|e| e.to_string())?;
        let hits = va
            .iter()
            .filter(|&&i| model.classify(&features[i]) == labels[i])
            .count();
        gnb_acc.push(hits as f64 / va.len() as f64);
    }
    let gnb_mean = gnb_acc.iter().sum::<f64>() / gnb_acc.len() as f64;
    ensure!(
        nn.cv_mean >= 0.85,
        "network cv mean {:.3} < 0.85",
        nn.cv_mean
    );
    ensure!(gnb_mean >= 0.60, "naive Bayes cv mean {gnb_mean:.3} < 0.60");
    Ok(format!(
        "network cv {:.3} ± {:.3}, naive Bayes cv {gnb_mean:.3}",
        nn.cv_mean, nn.cv_std
    ))
}

fn stratification() -> Outcome {
    let labels: Vec<usize> = (0..6).flat_map(|c| std::iter::repeat_n(c, 47)).collect();
    for seed in [0, 42, 7777] {
        let folds = stratified_kfold(&labels, 5, seed).map_err(|e| e.to_string())?;
        let mut sizes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (&c, &f) in labels.iter().zip(&folds.fold_of) {
            sizes.entry(c).or_insert_with(|| vec![0; 5])[f] += 1;
        }
        for (c, mut s) in sizes {
            s.sort_unstable_by(|a, b| b.cmp(a));
            ensure!(s == vec![10, 10, 9, 9, 9], "seed {seed} class {c}: {s:?}");
        }
    }
    let split = split_indices(17_975, &SplitSpec::standard(3)).map_err(|e| e.to_string())?;
    ensure!(
        split.sizes() == (14_381, 1_797, 1_797),
        "split sizes {:?}",
        split.sizes()
    );
    let mut all: Vec<usize> = split
        .train
        .iter()
        .chain(&split.val)
        .chain(&split.test)
        .copied()
        .collect();
    all.sort_unstable();
    ensure!(
        all == (0..17_975).collect::<Vec<_>>(),
        "split is not a partition"
    );
    Ok("every class {10,10,9,9,9}; 17,975 -> 14,381 / 1,797 / 1,797".into())
}

fn budget_audit() -> Outcome {
    let spec = MlpSpec::force(30, 45, &[16, 128]);
    let mut params: MlpParams = init_params(&spec, 8).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in &mut params.norms {
        n.moving_mean
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-0.5..0.5));
        n.moving_var
            .iter_mut()
            .for_each(|v| *v = rng.random_range(0.5..2.0));
    }
    let manifest = ModelManifest::force(spec.clone(), ForceScaler::default());
    let (bytes, signed) = encode(&params, &manifest).map_err(|e| e.to_string())?;
    ensure!(
        signed.blob_len == 99_020,
        "blob is {} bytes",
        signed.blob_len
    );
    let header = bytes.len() - 99_020;
    ensure!(
        bytes[..header].ends_with(b"\n"),
        "blob does not follow the header"
    );

    let report = audit(&signed, DEFAULT_RAM_CEILING);
    ensure!(
        report.param_count == 24_755,
        "audit counts {}",
        report.param_count
    );
    ensure!(
        report.weight_bytes == 99_020,
        "audit weight bytes {}",
        report.weight_bytes
    );
    ensure!(
        report.fits_ram,
        "peak {} B exceeds {} B",
        report.peak_ram_bytes,
        DEFAULT_RAM_CEILING
    );

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("model8.pawm");
    save(&params, &manifest, &path).map_err(|e| e.to_string())?;
    let (restored, _) = load(&path).map_err(|e| e.to_string())?;
    let x = Matrix::from_vec(
        16,
        1350,
        (0..16 * 1350).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .map_err(|e| e.to_string())?;
    let a = params.predict(&x).map_err(|e| e.to_string())?;
    let b = restored.predict(&x).map_err(|e| e.to_string())?;
    ensure!(
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(u, v)| u.to_bits() == v.to_bits()),
        "restored model predicts differently"
    );
    Ok(format!(
        "99,020-byte blob, peak RAM {} of {} B, outputs identical after reload",
        report.peak_ram_bytes, DEFAULT_RAM_CEILING
    ))
}

fn bits(p: &MlpParams) -> Vec<u32> {
    p.tensors()
        .iter()
        .flat_map(|t| t.iter().map(|v| v.to_bits()))
        .collect()
}

fn dir_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let key = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(key, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sim = SimConfig::default().with_seed(11);
    let audio = AudioSimConfig::default();
    let mut checked = Vec::new();

    let mut dumps = Vec::new();
    for run in 0..2 {
        let d = tmp.path().join(format!("force{run}"));
        write_force_dataset(&d, 40, &sim).map_err(|e| e.to_string())?;
        dumps.push(dir_bytes(&d));
    }
    ensure!(dumps[0] == dumps[1], "force dataset files differ");
    checked.push("force files");

    let mut dumps = Vec::new();
    for run in 0..2 {
        let d = tmp.path().join(format!("terrain{run}"));
        let clips = generate_terrain_dataset(4, 11, &audio).map_err(|e| e.to_string())?;
        write_terrain_dataset(&d, &clips, 11, 4, &audio).map_err(|e| e.to_string())?;
        dumps.push(dir_bytes(&d));
    }
    ensure!(dumps[0] == dumps[1], "terrain dataset files differ");
    checked.push("terrain files");

    let s = SplitSpec::standard(11);
    ensure!(
        split_indices(1000, &s).map_err(|e| e.to_string())?
            == split_indices(1000, &s).map_err(|e| e.to_string())?,
        "splits differ"
    );
    let labels: Vec<usize> = (0..120).map(|i| i % 6).collect();
    ensure!(
        stratified_kfold(&labels, 5, 11).map_err(|e| e.to_string())?
            == stratified_kfold(&labels, 5, 11).map_err(|e| e.to_string())?,
        "folds differ"
    );
    checked.push("splits and folds");

    let samples = generate_force_dataset(200, &sim).map_err(|e| e.to_string())?;
    let examples = force_examples(&samples).map_err(|e| e.to_string())?;
    let (train, val, _) = split(&examples, &s).map_err(|e| e.to_string())?;
    let scaler = ForceScaler::from_ranges(&sim.force_range).map_err(|e| e.to_string())?;
    let config = TrainConfig::default().with_epochs(4);
    let spec = MlpSpec::force(30, 45, &[8, 16])
        .with_dropout(0.2)
        .with_l2(1e-4);
    let runs: Vec<_> = (0..2)
        .map(|_| train_force(&spec, &train, &val, &scaler, &config, 11))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(
        bits(&runs[0].params) == bits(&runs[1].params),
        "force training differs"
    );
    ensure!(runs[0].history == runs[1].history, "force histories differ");
    let blobs: Vec<Vec<u8>> = runs
        .iter()
        .map(|r| encode(&r.params, &ModelManifest::force(spec.clone(), scaler)).map(|e| e.0))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(blobs[0] == blobs[1], "encoded models differ");
    checked.push("force training");

    let grid = ForceGrid {
        hidden: vec![vec![4, 8], vec![8]],
        learning_rates: vec![1e-3, 3e-3],
        dropouts: vec![0.0],
        l2_lambda: 0.0,
    };
    let ranking = || -> Result<Vec<(usize, u64)>, String> {
        Ok(grid_search_force(&grid, &train, &val, &scaler, &config, 11)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|t| (t.index, t.val_mae.to_bits()))
            .collect())
    };
    ensure!(ranking()? == ranking()?, "grid rankings differ");
    checked.push("grid search");

    let clips = generate_terrain_dataset(10, 11, &audio).map_err(|e| e.to_string())?;
    let features =
        terrain_features(&clips, &TerrainFeatureConfig::default()).map_err(|e| e.to_string())?;
    let labels: Vec<usize> = clips.iter().map(|c| c.label.index()).collect();
    let folds = stratified_kfold(&labels, 5, 11).map_err(|e| e.to_string())?;
    let tspec = MlpSpec::terrain(13, &[16, 16], 6);
    let tconfig = TrainConfig::default()
        .with_epochs(10)
        .with_learning_rate(1e-2);
    let t: Vec<_> = (0..2)
        .map(|_| train_terrain(&tspec, &features, &labels, &folds, &tconfig, 11))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    ensure!(
        bits(&t[0].final_params) == bits(&t[1].final_params),
        "terrain training differs"
    );
    ensure!(
        t[0].fold_params
            .iter()
            .zip(&t[1].fold_params)
            .all(|(a, b)| bits(a) == bits(b)),
        "fold models differ"
    );
    ensure!(
        t[0].fold_accuracies == t[1].fold_accuracies,
        "fold scores differ"
    );
    checked.push("terrain training");

    Ok(format!("identical twice: {}", checked.join(", ")))
}

fn confusion_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let n = rng.random_range(1..400);
        let skill = rng.random_range(0.0..1.0);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..6)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| {
                if rng.random_bool(skill) {
                    t
                } else {
                    rng.random_range(0..6)
                }
            })
            .collect();
        let m = ConfusionMatrix::from_pairs(6, &truth, &pred).map_err(|e| e.to_string())?;
        let mut support = [0usize; 6];
        truth.iter().for_each(|&t| support[t] += 1);
        for (c, row) in m.rows().iter().enumerate() {
            ensure!(
                row.iter().sum::<usize>() == support[c],
                "trial {trial} row {c}"
            );
        }
        let hits = truth.iter().zip(&pred).filter(|(a, b)| a == b).count();
        let diag: usize = (0..6).map(|c| m.get(c, c)).sum();
        ensure!(
            diag == hits && m.total() == n,
            "trial {trial}: trace or total off"
        );
        ensure!(
            m.accuracy() == hits as f64 / n as f64,
            "trial {trial}: accuracy {}",
            m.accuracy()
        );
        let weighted: f64 = m
            .recalls()
            .iter()
            .zip(support)
            .map(|(r, s)| r.unwrap_or(0.0) * s as f64)
            .sum::<f64>()
            / n as f64;
        ensure!(
            (weighted - m.accuracy()).abs() < 1e-12,
            "trial {trial}: recall mix {weighted}"
        );
    }
    Ok("100 random evaluations consistent".into())
}
