use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use pawsense::dsp::read_wav;
use pawsense::imaging::{read_pgm, MODEL_HEIGHT, MODEL_WIDTH};
use pawsense::modelstore::{self, audit, bench, write_bench_csv, ModelManifest, Task};
use pawsense::nncore::{Matrix2D, MlpParams, MlpSpec};
use pawsense::pawsim::{
    derive_seed, force_sample, generate_terrain_dataset, read_force_dataset, read_manifest,
    read_terrain_dataset, synth_impact, write_force_dataset, write_terrain_dataset, AudioSimConfig,
    DatasetManifest, SimConfig, Terrain,
};
use pawsense::pipeline::{
    argmax, evaluate_force, evaluate_terrain, force_examples, format_trials, grid_search_force,
    split, stratified_kfold, terrain_features, train_force, train_terrain, write_histograms_csv,
    ForceEvaluation, ForceExample, ForceGrid, ForceScaler, GaussianNb, SplitSpec,
    TerrainFeatureConfig, TrainConfig,
};
use pawsense::{Error, Result};
use serde::Serialize;

use crate::run::{out_dir, record};
use crate::{Command, OutArg, TrainArgs};

const FORCE_LR: f64 = 1e-3;
const TERRAIN_LR: f64 = 1e-2;
const BENCH_POOL: usize = 32;

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{} does not exist",
            path.display()
        )))
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    for path in command.inputs() {
        require(path)?;
    }
    match command {
        Command::GenForce { n, seed, out } => gen_force(n, seed, &out),
        Command::GenAudio {
            per_class,
            seed,
            out,
        } => gen_audio(per_class, seed, &out),
        Command::TrainForce {
            data,
            seed,
            hidden,
            dropout,
            l2,
            train,
            out,
        } => {
            let spec = MlpSpec::force(MODEL_HEIGHT, MODEL_WIDTH, &hidden)
                .with_dropout(dropout)
                .with_l2(l2);
            train_force_cmd(&data, seed, spec, train_config(&train, FORCE_LR), &out)
        }
        Command::TrainTerrain {
            data,
            seed,
            hidden,
            folds,
            dropout,
            l2,
            train,
            out,
        } => {
            let features = TerrainFeatureConfig::default();
            let spec = MlpSpec::terrain(features.mfcc.n_mfcc, &hidden, Terrain::ALL.len())
                .with_dropout(dropout)
                .with_l2(l2);
            let config = train_config(&train, TERRAIN_LR);
            train_terrain_cmd(&data, seed, spec, folds, features, config, &out)
        }
        Command::GridForce {
            data,
            seed,
            structures,
            lrs,
            dropouts,
            l2,
            train,
            out,
        } => {
            let grid = ForceGrid {
                hidden: parse_structures(&structures)?,
                learning_rates: lrs,
                dropouts,
                l2_lambda: l2,
            };
            grid_force(&data, seed, grid, train_config(&train, FORCE_LR), &out)
        }
        Command::EvalForce { model, data, out } => eval_force(&model, &data, &out),
        Command::EvalTerrain { model, data, out } => eval_terrain(&model, &data, &out),
        Command::Infer {
            model,
            image,
            audio,
            out,
        } => infer(&model, image.as_deref(), audio.as_deref(), &out),
        Command::Audit { model, ram, out } => audit_cmd(&model, ram, &out),
        Command::Bench {
            model,
            passes,
            warmup,
            seed,
            out,
        } => bench_cmd(&model, passes, warmup, seed, &out),
    }
}

fn train_config(args: &TrainArgs, default_lr: f64) -> TrainConfig {
    TrainConfig::default()
        .with_epochs(args.epochs)
        .with_batch_size(args.batch)
        .with_learning_rate(args.lr.unwrap_or(default_lr))
}

fn parse_structures(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.split(',')
                .map(|w| {
                    w.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad layer width {w:?} in {s:?}")))
                })
                .collect()
        })
        .collect()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn csv_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn gen_force(n: usize, seed: u64, out: &OutArg) -> Result<()> {
    let dir = out_dir("gen-force", out)?;
    let config = SimConfig::default().with_seed(seed);
    write_force_dataset(&dir, n, &config)?;
    record(&dir, "gen-force", Some(seed), &(n, &config))?;
    println!("wrote {n} force samples to {}", dir.display());
    Ok(())
}

fn gen_audio(per_class: usize, seed: u64, out: &OutArg) -> Result<()> {
    let dir = out_dir("gen-audio", out)?;
    let config = AudioSimConfig::default();
    let samples = generate_terrain_dataset(per_class, seed, &config)?;
    write_terrain_dataset(&dir, &samples, seed, per_class, &config)?;
    record(&dir, "gen-audio", Some(seed), &(per_class, &config))?;
    println!("wrote {} clips to {}", samples.len(), dir.display());
    Ok(())
}

fn force_scaler_for(data: &Path) -> Result<ForceScaler> {
    match read_manifest(data)? {
        DatasetManifest::Force { config, .. } => ForceScaler::from_ranges(&config.force_range),
        DatasetManifest::Terrain { .. } => Err(Error::Validation(format!(
            "{} is a terrain dataset, expected force",
            data.display()
        ))),
    }
}

fn load_force_examples(data: &Path) -> Result<Vec<ForceExample>> {
    force_scaler_for(data)?;
    force_examples(&read_force_dataset(data)?)
}

fn write_force_evaluation(dir: &Path, eval: &ForceEvaluation) -> Result<()> {
    eval.metrics.write_csv(csv_file(dir, "metrics.csv")?)?;
    write_histograms_csv(csv_file(dir, "histogram.csv")?, &eval.histograms)
}

fn print_force_metrics(eval: &ForceEvaluation) {
    let m = &eval.metrics;
    println!(
        "normalized MAE: fx {:.5}  fy {:.5}  fz {:.5}",
        m.axis_mae[0], m.axis_mae[1], m.axis_mae[2]
    );
    println!(
        "magnitude error: {:.3} N mean, {:.3} N std",
        m.magnitude_mae_n, m.magnitude_std_n
    );
}

#[derive(Serialize)]
struct TrainForceRun<'a> {
    data: String,
    spec: &'a MlpSpec,
    train: &'a TrainConfig,
    split: &'a SplitSpec,
}

fn train_force_cmd(
    data: &Path,
    seed: u64,
    spec: MlpSpec,
    config: TrainConfig,
    out: &OutArg,
) -> Result<()> {
    let scaler = force_scaler_for(data)?;
    let examples = load_force_examples(data)?;
    let split_spec = SplitSpec::standard(seed);
    let (train, val, test) = split(&examples, &split_spec)?;
    let dir = out_dir("train-force", out)?;
    record(
        &dir,
        "train-force",
        Some(seed),
        &TrainForceRun {
            data: path_str(data),
            spec: &spec,
            train: &config,
            split: &split_spec,
        },
    )?;
    let run = train_force(&spec, &train, &val, &scaler, &config, seed)?;
    run.history.write_csv(csv_file(&dir, "history.csv")?)?;
    let manifest = ModelManifest::force(spec, scaler);
    modelstore::save(&run.params, &manifest, &dir.join("model.pawm"))?;
    let eval = evaluate_force(&run.params, &scaler, &test)?;
    write_force_evaluation(&dir, &eval)?;
    println!(
        "trained on {} samples, best epoch {:?}, validation MAE {:.5}",
        train.len(),
        run.history.best_epoch,
        run.history.best_val_mae().unwrap_or(f64::NAN)
    );
    println!("test set ({} samples):", test.len());
    print_force_metrics(&eval);
    println!("model written to {}", dir.join("model.pawm").display());
    Ok(())
}

fn terrain_data(
    data: &Path,
    features: &TerrainFeatureConfig,
) -> Result<(Vec<Vec<f32>>, Vec<usize>)> {
    if let DatasetManifest::Force { .. } = read_manifest(data)? {
        return Err(Error::Validation(format!(
            "{} is a force dataset, expected terrain",
            data.display()
        )));
    }
    let samples = read_terrain_dataset(data)?;
    let labels = samples.iter().map(|s| s.label.index()).collect();
    Ok((terrain_features(&samples, features)?, labels))
}

#[derive(Serialize)]
struct TrainTerrainRun<'a> {
    data: String,
    spec: &'a MlpSpec,
    train: &'a TrainConfig,
    folds: usize,
    features: &'a TerrainFeatureConfig,
}

#[derive(Serialize)]
struct TerrainSummary {
    fold_accuracies: Vec<f64>,
    cv_mean: f64,
    cv_std: f64,
    test_samples: usize,
    test_accuracy: f64,
    gnb_test_accuracy: f64,
}

fn train_terrain_cmd(
    data: &Path,
    seed: u64,
    spec: MlpSpec,
    k: usize,
    features: TerrainFeatureConfig,
    config: TrainConfig,
    out: &OutArg,
) -> Result<()> {
    let (x, y) = terrain_data(data, &features)?;
    let dir = out_dir("train-terrain", out)?;
    record(
        &dir,
        "train-terrain",
        Some(seed),
        &TrainTerrainRun {
            data: path_str(data),
            spec: &spec,
            train: &config,
            folds: k,
            features: &features,
        },
    )?;
    // stratified 80/20 hold-out: one fifth of every class
    let holdout = stratified_kfold(&y, 5, seed)?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f32>>, Vec<usize>) {
        (
            idx.iter().map(|&i| x[i].clone()).collect(),
            idx.iter().map(|&i| y[i]).collect(),
        )
    };
    let (learn_x, learn_y) = pick(&holdout.training_indices(0));
    let (test_x, test_y) = pick(&holdout.validation_indices(0));

    let folds = stratified_kfold(&learn_y, k, derive_seed(seed, 1))?;
    let run = train_terrain(&spec, &learn_x, &learn_y, &folds, &config, seed)?;
    let (test_accuracy, confusion) = evaluate_terrain(&run.final_params, &test_x, &test_y)?;
    let gnb = GaussianNb::fit(&learn_x, &learn_y, Terrain::ALL.len())?;
    let gnb_hits = test_x
        .iter()
        .zip(&test_y)
        .filter(|(f, &l)| gnb.classify(f) == l)
        .count();
    let summary = TerrainSummary {
        fold_accuracies: run.fold_accuracies.clone(),
        cv_mean: run.cv_mean,
        cv_std: run.cv_std,
        test_samples: test_y.len(),
        test_accuracy,
        gnb_test_accuracy: gnb_hits as f64 / test_y.len() as f64,
    };
    let manifest = ModelManifest::terrain(spec, &features, Terrain::names());
    modelstore::save(&run.final_params, &manifest, &dir.join("model.pawm"))?;
    confusion.write_csv(csv_file(&dir, "confusion.csv")?, &Terrain::names())?;
    write_json(&dir, "summary.json", &summary)?;
    println!(
        "{k}-fold cross-validation accuracy {:.4} ± {:.4}",
        summary.cv_mean, summary.cv_std
    );
    println!(
        "held-out accuracy {:.4} on {} clips (naive Bayes {:.4})",
        summary.test_accuracy, summary.test_samples, summary.gnb_test_accuracy
    );
    println!("model written to {}", dir.join("model.pawm").display());
    Ok(())
}

#[derive(Serialize)]
struct GridRun<'a> {
    data: String,
    grid: &'a ForceGrid,
    train: &'a TrainConfig,
}

fn grid_force(
    data: &Path,
    seed: u64,
    grid: ForceGrid,
    config: TrainConfig,
    out: &OutArg,
) -> Result<()> {
    let scaler = force_scaler_for(data)?;
    let examples = load_force_examples(data)?;
    let (train, val, _) = split(&examples, &SplitSpec::standard(seed))?;
    let dir = out_dir("grid-force", out)?;
    record(
        &dir,
        "grid-force",
        Some(seed),
        &GridRun {
            data: path_str(data),
            grid: &grid,
            train: &config,
        },
    )?;
    let trials = grid_search_force(&grid, &train, &val, &scaler, &config, seed)?;
    let table = format_trials(&trials);
    fs::write(dir.join("trials.txt"), &table)?;
    let mut w = csv::Writer::from_writer(csv_file(&dir, "trials.csv")?);
    w.write_record([
        "rank",
        "hidden",
        "learning_rate",
        "dropout",
        "params",
        "val_mae",
        "best_epoch",
        "infer_micros",
    ])?;
    for (rank, t) in trials.iter().enumerate() {
        let hidden: Vec<String> = t.hidden.iter().map(usize::to_string).collect();
        w.write_record([
            (rank + 1).to_string(),
            hidden.join("-"),
            t.learning_rate.to_string(),
            t.dropout.to_string(),
            t.param_count.to_string(),
            t.val_mae.to_string(),
            t.best_epoch.map_or(String::new(), |e| e.to_string()),
            format!("{:.3}", t.infer_micros),
        ])?;
    }
    w.flush()?;
    print!("{table}");
    Ok(())
}

fn load_model(path: &Path, task: Task) -> Result<(MlpParams, ModelManifest)> {
    let (params, manifest) = modelstore::load(path)?;
    if manifest.task != task {
        return Err(Error::Validation(format!(
            "{} holds a {:?} model, this command needs {task:?}",
            path.display(),
            manifest.task
        )));
    }
    Ok((params, manifest))
}

#[derive(Serialize)]
struct EvalRun {
    model: String,
    data: String,
}

fn eval_force(model: &Path, data: &Path, out: &OutArg) -> Result<()> {
    let (params, manifest) = load_model(model, Task::Force)?;
    let scaler = manifest
        .scaler
        .expect("validated force manifest has a scaler");
    force_scaler_for(data)?;
    let samples = read_force_dataset(data)?;
    let examples = samples
        .iter()
        .map(|s| {
            Ok(ForceExample {
                input: manifest.preprocessing.image_input(&s.image)?,
                force_n: s.force_n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dir = out_dir("eval-force", out)?;
    record(
        &dir,
        "eval-force",
        None,
        &EvalRun {
            model: path_str(model),
            data: path_str(data),
        },
    )?;
    let eval = evaluate_force(&params, &scaler, &examples)?;
    write_force_evaluation(&dir, &eval)?;
    println!("{} samples:", examples.len());
    print_force_metrics(&eval);
    Ok(())
}

fn eval_terrain(model: &Path, data: &Path, out: &OutArg) -> Result<()> {
    let (params, manifest) = load_model(model, Task::Terrain)?;
    if let DatasetManifest::Force { .. } = read_manifest(data)? {
        return Err(Error::Validation(format!(
            "{} is a force dataset",
            data.display()
        )));
    }
    let samples = read_terrain_dataset(data)?;
    let features = samples
        .iter()
        .map(|s| manifest.preprocessing.audio_input(&s.clip))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label.index()).collect();
    let dir = out_dir("eval-terrain", out)?;
    record(
        &dir,
        "eval-terrain",
        None,
        &EvalRun {
            model: path_str(model),
            data: path_str(data),
        },
    )?;
    let (accuracy, confusion) = evaluate_terrain(&params, &features, &labels)?;
    let names = manifest.class_names.unwrap_or_else(Terrain::names);
    confusion.write_csv(csv_file(&dir, "confusion.csv")?, &names)?;
    println!("accuracy {accuracy:.4} on {} clips", labels.len());
    Ok(())
}

#[derive(Serialize)]
struct InferRun {
    model: String,
    input: String,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Inference {
    Force {
        force_newton: [f32; 3],
        force_normalized: [f32; 3],
    },
    Terrain {
        probabilities: Vec<(String, f32)>,
        label: String,
    },
}

fn infer(model: &Path, image: Option<&Path>, audio: Option<&Path>, out: &OutArg) -> Result<()> {
    let (params, manifest) = modelstore::load(model)?;
    let input_path: PathBuf = image
        .or(audio)
        .expect("clap requires one input")
        .to_path_buf();
    let input = match (manifest.task, image, audio) {
        (Task::Force, Some(p), _) => manifest.preprocessing.image_input(&read_pgm(p)?)?,
        (Task::Terrain, _, Some(p)) => manifest.preprocessing.audio_input(&read_wav(p)?)?,
        (Task::Force, _, _) => return Err(Error::Validation("force models take --image".into())),
        (Task::Terrain, _, _) => {
            return Err(Error::Validation("terrain models take --audio".into()))
        }
    };
    let x = Matrix2D::from_vec(1, input.len(), input)?;
    let y = params.predict(&x)?;
    let row = y.row(0);
    let result = match manifest.task {
        Task::Force => {
            let scaler = manifest
                .scaler
                .expect("validated force manifest has a scaler");
            let normalized = [row[0], row[1], row[2]];
            let newton = scaler.denormalize(normalized);
            println!(
                "fx {:.3} N  fy {:.3} N  fz {:.3} N",
                newton[0], newton[1], newton[2]
            );
            println!(
                "normalized {:.6} {:.6} {:.6}",
                normalized[0], normalized[1], normalized[2]
            );
            Inference::Force {
                force_newton: newton,
                force_normalized: normalized,
            }
        }
        Task::Terrain => {
            let names = manifest
                .class_names
                .expect("validated terrain manifest has names");
            for (name, p) in names.iter().zip(row) {
                println!("{name:<10} {p:.6}");
            }
            let label = names[argmax(row)].clone();
            println!("label {label}");
            Inference::Terrain {
                probabilities: names.iter().cloned().zip(row.iter().copied()).collect(),
                label,
            }
        }
    };
    let dir = out_dir("infer", out)?;
    record(
        &dir,
        "infer",
        None,
        &InferRun {
            model: path_str(model),
            input: path_str(&input_path),
        },
    )?;
    write_json(&dir, "inference.json", &result)
}

#[derive(Serialize)]
struct AuditRun {
    model: String,
    ram: usize,
}

fn audit_cmd(model: &Path, ram: usize, out: &OutArg) -> Result<()> {
    let (_, manifest) = modelstore::load(model)?;
    let report = audit(&manifest, ram);
    let dir = out_dir("audit", out)?;
    record(
        &dir,
        "audit",
        None,
        &AuditRun {
            model: path_str(model),
            ram,
        },
    )?;
    write_json(&dir, "audit.json", &report)?;
    println!("params        {}", report.param_count);
    println!("weight bytes  {}", report.weight_bytes);
    println!("activations   {}", report.activation_bytes);
    println!("input buffer  {}", report.input_bytes);
    println!(
        "peak RAM      {} / {}",
        report.peak_ram_bytes, report.ram_ceiling
    );
    println!("flops         {}", report.flops);
    println!("fits          {}", report.fits_ram);
    Ok(())
}

#[derive(Serialize)]
struct BenchRun {
    model: String,
    passes: usize,
    warmup: usize,
}

fn bench_cmd(model: &Path, passes: usize, warmup: usize, seed: u64, out: &OutArg) -> Result<()> {
    let (params, manifest) = modelstore::load(model)?;
    let pre = &manifest.preprocessing;
    let stats = match manifest.task {
        Task::Force => {
            let config = SimConfig::default().with_seed(seed);
            let frames = (0..BENCH_POOL as u64)
                .map(|i| Ok(force_sample(i, &config)?.image))
                .collect::<Result<Vec<_>>>()?;
            bench(
                &params,
                |i| pre.image_input(&frames[i % BENCH_POOL]),
                passes,
                warmup,
            )?
        }
        Task::Terrain => {
            let config = AudioSimConfig::default();
            let clips = (0..BENCH_POOL)
                .map(|i| {
                    let label = Terrain::ALL[i % Terrain::ALL.len()];
                    Ok(synth_impact(label, derive_seed(seed, i as u64), &config)?.clip)
                })
                .collect::<Result<Vec<_>>>()?;
            bench(
                &params,
                |i| pre.audio_input(&clips[i % BENCH_POOL]),
                passes,
                warmup,
            )?
        }
    };
    let dir = out_dir("bench", out)?;
    record(
        &dir,
        "bench",
        Some(seed),
        &BenchRun {
            model: path_str(model),
            passes,
            warmup,
        },
    )?;
    write_bench_csv(csv_file(&dir, "bench.csv")?, &stats)?;
    write_json(&dir, "bench.json", &stats)?;
    println!(
        "{} passes: mean {:.1} us  p50 {:.1} us  p95 {:.1} us  ({} flops)",
        stats.passes, stats.mean_micros, stats.p50_micros, stats.p95_micros, stats.flops
    );
    Ok(())
}
