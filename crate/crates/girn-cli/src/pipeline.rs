//! Pipeline stages shared by the subcommands: dataset loading, training,
//! reconstruction dispatch, and evaluation. Stages communicate only via the
//! documented file formats, so each is independently re-runnable.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use girn::data::{
    binarize_labels, contact_sheet, downscale, load_cifar10_bin, load_mnist_idx,
    load_reconstruction, save_reconstruction, synth_dataset, write_histogram_csv,
    write_history_csv, write_matches_csv, write_pgm, write_summary_csv, LabelScheme, SummaryRow,
};
use girn::diff::Arch;
use girn::eval::{
    match_invariant, mean_dssim, orbitope_histogram, symmetry_score, EvalReport,
    OrbitopeHistogram,
};
use girn::group::GroupSpec;
use girn::image::ImageTensor;
use girn::model::{load_checkpoint, save_checkpoint, InvariantModel};
use girn::recon::{
    reconstruct_dip, reconstruct_gd, reconstruct_same_gd, DipConfig, GdConfig, Objective,
    ReconstructionState,
};
use girn::train::{kkt_residual, train, HistoryRow, LabeledDataset, TrainConfig};

use crate::config::{DatasetConfig, ExperimentConfig, Normalize};

/// Load the configured dataset with binary labels on the configured grid.
pub fn load_dataset(config: &ExperimentConfig) -> Result<LabeledDataset> {
    let dataset = match &config.dataset {
        DatasetConfig::Synthetic { seed, n, grid } => {
            synth_dataset(*seed, *n, girn::image::Grid::new(grid[0], grid[1]))?
        }
        DatasetConfig::MnistIdx {
            images,
            labels,
            n,
            label_scheme,
            downscale: target,
        } => {
            let mut raw = load_mnist_idx(images, labels)?;
            raw.truncate(*n);
            if raw.len() < *n {
                bail!("requested n={n} but the IDX file holds only {}", raw.len());
            }
            let scheme = LabelScheme::parse(label_scheme)?;
            let mut data = binarize_labels(&raw, scheme)?;
            if let Some([h, w]) = target {
                data = downscale(&data, girn::image::Grid::new(*h, *w))?;
            }
            data
        }
        DatasetConfig::Cifar10Bin {
            path,
            n,
            label_scheme,
            downscale: target,
        } => {
            let mut raw = load_cifar10_bin(path)?;
            raw.truncate(*n);
            if raw.len() < *n {
                bail!("requested n={n} but the CIFAR file holds only {}", raw.len());
            }
            let scheme = LabelScheme::parse(label_scheme)?;
            let mut data = binarize_labels(&raw, scheme)?;
            if let Some([h, w]) = target {
                data = downscale(&data, girn::image::Grid::new(*h, *w))?;
            }
            data
        }
    };
    Ok(dataset)
}

pub struct TrainOutcome {
    pub model: InvariantModel,
    pub history: Vec<HistoryRow>,
    pub kkt_residual: f64,
}

/// Train a fresh model per the config and measure the stationarity residual.
pub fn train_model(config: &ExperimentConfig, dataset: &LabeledDataset) -> Result<TrainOutcome> {
    let grid = config.grid();
    let group = GroupSpec::new(config.group_name(), grid)?;
    let arch = Arch::new(grid.len(), config.arch.hidden1, config.arch.hidden2);
    let mut model =
        InvariantModel::init_scaled(arch, group, config.train.seed, config.arch.init_scale)?;
    let train_config = TrainConfig {
        learning_rate: config.train.learning_rate,
        epochs: config.train.epochs,
        target_loss: config.train.target_loss,
        seed: config.train.seed,
        log_every: config.train.log_every,
    };
    let history = train(&mut model, dataset, &train_config)?;
    let (residual, _) = kkt_residual(&model, dataset)?;
    Ok(TrainOutcome {
        model,
        history,
        kkt_residual: residual,
    })
}

/// Run `train` end to end: checkpoint + history.csv + resolved config.
pub fn cmd_train(config: &ExperimentConfig, quiet: bool) -> Result<()> {
    let dataset = load_dataset(config)?;
    let out = &config.out;
    fs::create_dir_all(out)?;
    config.write_resolved(out)?;
    let outcome = train_model(config, &dataset)?;
    save_checkpoint(&out.join("checkpoint.girn"), &outcome.model)?;
    write_history_csv(&out.join("history.csv"), &outcome.history)?;
    if !quiet {
        if let Some(last) = outcome.history.last() {
            println!(
                "trained {} epochs: loss {:.3e} accuracy {:.3} min_margin {:.4} kkt_residual {:.4}",
                last.epoch, last.loss, last.accuracy, last.min_margin, outcome.kkt_residual
            );
        }
    }
    Ok(())
}

/// Load the checkpoint written by [`cmd_train`] and rebuild the model,
/// enforcing that the stored group matches the config.
pub fn load_model(config: &ExperimentConfig) -> Result<InvariantModel> {
    let path = config.out.join("checkpoint.girn");
    let checkpoint = load_checkpoint(&path)
        .with_context(|| format!("loading checkpoint {}", path.display()))?;
    if checkpoint.group_name != config.group {
        bail!(
            "checkpoint group {:?} does not match config group {:?}",
            checkpoint.group_name,
            config.group
        );
    }
    let grid = config.grid();
    if grid.len() != checkpoint.arch.d {
        bail!(
            "checkpoint input dimension {} does not match config grid {}x{}",
            checkpoint.arch.d,
            grid.height,
            grid.width
        );
    }
    let group = GroupSpec::new(config.group_name(), grid)?;
    let params = girn::diff::ParamVector::new(checkpoint.arch, checkpoint.theta)?;
    Ok(InvariantModel::new(params, group)?)
}

/// Dispatch one reconstruction run for the configured method.
pub fn run_reconstruction(
    config: &ExperimentConfig,
    model: &InvariantModel,
    seed: u64,
) -> Result<ReconstructionState> {
    let gd = GdConfig {
        m: config.m(),
        steps: config.recon_steps(),
        lr: config.recon_lr(),
        lambda_lr: config.recon.lambda_lr,
        lambda_init: (config.recon.lambda_init[0], config.recon.lambda_init[1]),
        seed,
    };
    let state = match config.method.as_str() {
        "am" => reconstruct_gd(model, Objective::Am, &gd)?,
        "kkt" => reconstruct_gd(model, Objective::Kkt, &gd)?,
        "kkt_same_gd" => {
            let schedule = config.recon.same_gd.to_schedule()?;
            reconstruct_same_gd(model, Objective::Kkt, &gd, &schedule)?
        }
        "kkt_dip" => {
            let dip = DipConfig {
                channels: config.recon.dip.channels,
            };
            reconstruct_dip(model, Objective::Kkt, &gd, &dip)?
        }
        other => bail!("unknown method {other:?}"),
    };
    Ok(state)
}

/// Run `reconstruct`: one seeded attack, dumped to `recon.grec` (and PGMs
/// when requested).
pub fn cmd_reconstruct(config: &ExperimentConfig, seed: Option<u64>, quiet: bool) -> Result<()> {
    let model = load_model(config)?;
    let seed = seed.unwrap_or(config.recon.seeds[0]);
    let state = run_reconstruction(config, &model, seed)?;
    let out = &config.out;
    fs::create_dir_all(out)?;
    config.write_resolved(out)?;
    save_reconstruction(&out.join("recon.grec"), &state)?;
    if config.recon.dump_pgm {
        let dir = out.join(format!("candidates_{seed}"));
        fs::create_dir_all(&dir)?;
        for (i, candidate) in state.candidates.iter().enumerate() {
            write_pgm(&dir.join(format!("cand_{i:03}.pgm")), candidate)?;
        }
    }
    if !quiet {
        println!(
            "method {} seed {seed}: {} candidates -> {}",
            config.method,
            state.candidates.len(),
            out.join("recon.grec").display()
        );
    }
    Ok(())
}

/// Bring candidates into the `[0, 1]` range the image metric expects.
pub fn normalize_candidates(candidates: &[ImageTensor], mode: Normalize) -> Vec<ImageTensor> {
    candidates
        .iter()
        .map(|x| {
            let data: Vec<f64> = match mode {
                Normalize::None => x.data.clone(),
                Normalize::Clamp => x.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
                Normalize::Minmax => {
                    let lo = x.data.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = x.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    if hi - lo < 1e-12 {
                        vec![0.5; x.data.len()]
                    } else {
                        x.data.iter().map(|v| (v - lo) / (hi - lo)).collect()
                    }
                }
            };
            ImageTensor::new(data, x.grid).expect("same length")
        })
        .collect()
}

pub struct Evaluation {
    pub report: EvalReport,
    pub histogram: OrbitopeHistogram,
    pub mean_dssim: f64,
    pub symmetry_score: f64,
    pub normalized: Vec<ImageTensor>,
}

/// Normalize, match, and aggregate one batch of candidates.
pub fn evaluate_candidates(
    config: &ExperimentConfig,
    candidates: &[ImageTensor],
    dataset: &LabeledDataset,
    group: &GroupSpec,
) -> Result<Evaluation> {
    let normalized = normalize_candidates(candidates, config.eval.normalize);
    let report = match_invariant(&normalized, dataset, group)?;
    let resolution = config.orbitope_resolution(group.order());
    let histogram = orbitope_histogram(&report, &normalized, dataset, group, resolution)?;
    let mean = mean_dssim(&report);
    let sym = symmetry_score(&normalized, group)?;
    Ok(Evaluation {
        report,
        histogram,
        mean_dssim: mean,
        symmetry_score: sym,
        normalized,
    })
}

/// Run `evaluate`: read `recon.grec`, emit matches/summary/histogram CSVs
/// and the contact sheet.
pub fn cmd_evaluate(config: &ExperimentConfig, quiet: bool) -> Result<()> {
    let dataset = load_dataset(config)?;
    let grid = config.grid();
    let group = GroupSpec::new(config.group_name(), grid)?;
    let out = &config.out;
    let dump = load_reconstruction(&out.join("recon.grec"))?;
    if let Some(first) = dump.candidates.first() {
        if first.grid != grid {
            bail!(
                "reconstruction grid {}x{} does not match config grid {}x{}",
                first.grid.height,
                first.grid.width,
                grid.height,
                grid.width
            );
        }
    }
    let evaluation = evaluate_candidates(config, &dump.candidates, &dataset, &group)?;
    write_matches_csv(&out.join("matches.csv"), &evaluation.report, &group)?;
    write_summary_csv(
        &out.join("summary.csv"),
        &[SummaryRow {
            method: config.method.clone(),
            group: config.group.clone(),
            n: dataset.len(),
            m: dump.candidates.len(),
            mean_dssim: evaluation.mean_dssim,
            symmetry_score: evaluation.symmetry_score,
        }],
    )?;
    write_histogram_csv(&out.join("histogram.csv"), &evaluation.histogram)?;
    write_contact_sheet(
        &out.join("sheets"),
        &evaluation,
        &dataset,
        &group,
    )?;
    if !quiet {
        println!(
            "mean_dssim {:.4} symmetry_score {:.4} over {} candidates",
            evaluation.mean_dssim,
            evaluation.symmetry_score,
            dump.candidates.len()
        );
    }
    Ok(())
}

/// Pair every matched training sample with its best reconstruction (aligned
/// back through the inverse of the matching group element).
fn write_contact_sheet(
    dir: &Path,
    evaluation: &Evaluation,
    dataset: &LabeledDataset,
    group: &GroupSpec,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut rows = Vec::new();
    for (j, sample) in dataset.samples.iter().enumerate().take(50) {
        let best = evaluation
            .report
            .matches
            .iter()
            .enumerate()
            .filter(|(_, e)| e.nn_index == j)
            .min_by(|a, b| a.1.dssim.partial_cmp(&b.1.dssim).expect("finite"));
        if let Some((ci, entry)) = best {
            let inv = group
                .inverse_index(entry.best_g)
                .ok_or_else(|| anyhow!("group element without inverse"))?;
            let aligned = group.element(inv).apply(&evaluation.normalized[ci])?;
            rows.push(vec![sample.clone(), aligned]);
        }
    }
    if !rows.is_empty() {
        let sheet = contact_sheet(&rows)?;
        write_pgm(&dir.join("pairs.pgm"), &sheet)?;
    }
    Ok(())
}
