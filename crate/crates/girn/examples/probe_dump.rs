use girn::data::{contact_sheet, synth_dataset, write_pgm};
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

fn minmax(c: &[ImageTensor]) -> Vec<ImageTensor> {
    c.iter().map(|x| {
        let lo = x.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let data = if hi - lo < 1e-12 { vec![0.5; x.data.len()] }
            else { x.data.iter().map(|v| (v - lo) / (hi - lo)).collect() };
        ImageTensor::new(data, x.grid).unwrap()
    }).collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.1);
    let llr: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(0.0);
    let steps: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(6000);
    let lam0: f64 = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(0.002);

    let grid = Grid::new(14, 14);
    let n = 20; let m = 80;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    train(&mut model, &data, &tc).unwrap();

    let mut st = ReconstructionState::init(grid, m, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    for l in &mut st.lambdas { *l = rng.random::<f64>() * lam0; }
    for _ in 0..steps {
        gd_step(&model, Objective::Kkt, &mut st, lr, llr).unwrap();
    }
    let nc = minmax(&st.candidates);
    let report = match_invariant(&nc, &data, &group).unwrap();
    println!("dssim {:.4} nsym {:.4}", mean_dssim(&report), symmetry_score(&nc, &group).unwrap());

    // best-matched candidate per sample, aligned back to the sample
    let mut rows = Vec::new();
    for j in 0..n.min(10) {
        let best = report.matches.iter().enumerate()
            .filter(|(_, e)| e.nn_index == j)
            .min_by(|a, b| a.1.dssim.partial_cmp(&b.1.dssim).unwrap());
        if let Some((ci, entry)) = best {
            let g_inv_idx = group.inverse_index(entry.best_g).unwrap();
            let aligned = group.element(g_inv_idx).apply(&nc[ci]).unwrap();
            rows.push(vec![data.samples[j].clone(), aligned]);
        }
    }
    let sheet = contact_sheet(&rows).unwrap();
    write_pgm(Path::new("/tmp/pairs.pgm"), &sheet).unwrap();
    println!("wrote /tmp/pairs.pgm ({} pairs)", rows.len());
    // per-candidate dssim distribution
    let mut ds: Vec<f64> = report.matches.iter().map(|e| e.dssim).collect();
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("dssim quantiles: min {:.3} p25 {:.3} med {:.3} p75 {:.3} max {:.3}",
        ds[0], ds[ds.len()/4], ds[ds.len()/2], ds[3*ds.len()/4], ds[ds.len()-1]);
}
