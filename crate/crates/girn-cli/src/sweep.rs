//! Sweep orchestration: the Cartesian product of group x n x method, each
//! cell trained, attacked over all configured seeds, and evaluated. One
//! summary row per cell with mean and standard deviation over seeds; cell
//! failures are recorded in the row and the sweep continues.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use girn::data::save_reconstruction;
use girn::group::GroupSpec;
use girn::model::save_checkpoint;

use crate::config::{DatasetConfig, ExperimentConfig, SweepConfig};
use crate::pipeline;

impl SweepConfig {
    pub fn load_from(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading sweep config {}", path.display()))?;
        let sweep: SweepConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))?;
        if sweep.groups.is_empty() || sweep.n_values.is_empty() || sweep.methods.is_empty() {
            anyhow::bail!("sweep lists must be nonempty");
        }
        for cell in sweep.cells() {
            cell.validate()?;
        }
        Ok(sweep)
    }

    /// Materialize the per-cell experiment configs.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut cells = Vec::new();
        for group in &self.groups {
            for &n in &self.n_values {
                for method in &self.methods {
                    let mut cell = self.base.clone();
                    cell.group = group.clone();
                    cell.method = method.clone();
                    match &mut cell.dataset {
                        DatasetConfig::Synthetic { n: nn, .. }
                        | DatasetConfig::MnistIdx { n: nn, .. }
                        | DatasetConfig::Cifar10Bin { n: nn, .. } => *nn = n,
                    }
                    cell.out = self
                        .base
                        .out
                        .join(format!("cell_{group}_n{n}_{method}"));
                    cells.push(cell);
                }
            }
        }
        cells
    }
}

struct CellOutcome {
    group: String,
    n: usize,
    method: String,
    m: usize,
    seeds: usize,
    mean_dssim: Vec<f64>,
    symmetry: Vec<f64>,
    error: Option<String>,
}

fn run_cell(cell: &ExperimentConfig) -> CellOutcome {
    let mut outcome = CellOutcome {
        group: cell.group.clone(),
        n: cell.dataset.n(),
        method: cell.method.clone(),
        m: cell.m(),
        seeds: cell.recon.seeds.len(),
        mean_dssim: Vec::new(),
        symmetry: Vec::new(),
        error: None,
    };
    let result = (|| -> Result<()> {
        fs::create_dir_all(&cell.out)?;
        cell.write_resolved(&cell.out)?;
        let dataset = pipeline::load_dataset(cell)?;
        let trained = pipeline::train_model(cell, &dataset)?;
        save_checkpoint(&cell.out.join("checkpoint.girn"), &trained.model)?;
        girn::data::write_history_csv(&cell.out.join("history.csv"), &trained.history)?;
        let group = GroupSpec::new(cell.group_name(), cell.grid())?;
        for &seed in &cell.recon.seeds {
            let state = pipeline::run_reconstruction(cell, &trained.model, seed)?;
            save_reconstruction(&cell.out.join(format!("recon_{seed}.grec")), &state)?;
            let evaluation =
                pipeline::evaluate_candidates(cell, &state.candidates, &dataset, &group)?;
            outcome.mean_dssim.push(evaluation.mean_dssim);
            outcome.symmetry.push(evaluation.symmetry_score);
        }
        Ok(())
    })();
    if let Err(err) = result {
        outcome.error = Some(format!("{err:#}").replace([',', '\n'], ";"));
    }
    outcome
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn cmd_sweep(sweep: &SweepConfig, jobs: usize, quiet: bool) -> Result<()> {
    let cells = sweep.cells();
    fs::create_dir_all(&sweep.base.out)?;

    let outcomes: Vec<CellOutcome> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building sweep thread pool")?;
        pool.install(|| cells.par_iter().map(run_cell).collect())
    } else {
        cells.iter().map(run_cell).collect()
    };

    let mut csv = String::from(
        "method,group,n,m,seeds,mean_dssim_mean,mean_dssim_std,symmetry_score_mean,symmetry_score_std,status\n",
    );
    for o in &outcomes {
        let (dm, ds) = mean_std(&o.mean_dssim);
        let (sm, ss) = mean_std(&o.symmetry);
        let status = o.error.clone().unwrap_or_else(|| "ok".to_string());
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            o.method, o.group, o.n, o.m, o.seeds, dm, ds, sm, ss, status
        ));
        if !quiet {
            println!(
                "cell {}/{} n={} -> dssim {dm:.4} (+/- {ds:.4}) sym {sm:.4} [{status}]",
                o.method, o.group, o.n
            );
        }
    }
    fs::write(sweep.base.out.join("summary.csv"), csv)?;
    Ok(())
}
