use girn::data::{contact_sheet, synth_dataset, write_pgm};
use girn::diff::Arch;
use girn::eval::match_invariant;
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
    for l in &mut st.lambdas { *l = rng.random::<f64>() * 0.002; }
    for _ in 0..6000 {
        gd_step(&model, Objective::Kkt, &mut st, 0.1, 0.0).unwrap();
    }
    let nc = minmax(&st.candidates);
    let report = match_invariant(&nc, &data, &group).unwrap();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| report.matches[a].dssim.partial_cmp(&report.matches[b].dssim).unwrap());
    let mut rows = Vec::new();
    for &ci in order.iter().take(6) {
        let e = &report.matches[ci];
        println!("candidate {ci}: sample {} dssim {:.3} l2 {:.3} |x_raw| {:.2}", e.nn_index, e.dssim, e.l2, st.candidates[ci].norm());
        let g_inv = group.inverse_index(e.best_g).unwrap();
        let aligned = group.element(g_inv).apply(&nc[ci]).unwrap();
        rows.push(vec![data.samples[e.nn_index].clone(), aligned]);
    }
    let sheet = contact_sheet(&rows).unwrap();
    write_pgm(Path::new("/tmp/best_pairs.pgm"), &sheet).unwrap();
}
