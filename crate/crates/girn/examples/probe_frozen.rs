use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

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
    let steps: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(12000);
    let lam_lo: f64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(5e-4);
    let lam_hi: f64 = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(1e-3);

    let grid = Grid::new(14, 14);
    let n = 20; let m = 80;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    train(&mut model, &data, &tc).unwrap();

    let seed = 3u64;
    let t0 = Instant::now();
    let mut st = ReconstructionState::init(grid, m, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for l in &mut st.lambdas { *l = lam_lo + rng.random::<f64>() * (lam_hi - lam_lo); }
    for _ in 0..steps { gd_step(&model, Objective::Kkt, &mut st, lr, 1e-8).unwrap(); }
    let frozen = st.candidates.iter().filter(|c| c.norm() < 2.0).count();
    let mm = minmax(&st.candidates);
    let rep = match_invariant(&mm, &data, &group).unwrap();
    println!("lr {lr} steps {steps} lam [{lam_lo},{lam_hi}]: mm_sym {:.3} mm_dssim {:.4} frozen {frozen}/{m} ({:.0}s)",
        symmetry_score(&mm, &group).unwrap(), mean_dssim(&rep), t0.elapsed().as_secs_f64());
}
