use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, orbitope_histogram, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, objective_gradient, Objective, ReconstructionState};
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

fn redraw_lambdas(st: &mut ReconstructionState, seed: u64, lo: f64, hi: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for l in &mut st.lambdas { *l = lo + rng.random::<f64>() * (hi - lo); }
}

fn report(tag: &str, st: &ReconstructionState, data: &girn::train::LabeledDataset, group: &GroupSpec, t: f64) {
    let raw_sym = symmetry_score(&st.candidates, group).unwrap();
    let mm = minmax(&st.candidates);
    let rep = match_invariant(&mm, data, group).unwrap();
    let hist = orbitope_histogram(&rep, &mm, data, group, 10).unwrap();
    println!("{tag}: mm_dssim {:.4} mm_sym {:.3} raw_sym {raw_sym:.3} modal {:?} ({t:.0}s)",
        mean_dssim(&rep), symmetry_score(&mm, group).unwrap(), hist.modal_bin().unwrap());
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
    let ds = symmetry_score(&data.samples, &group).unwrap();
    println!("data_sym {ds:.3}, 0.5x = {:.3}", 0.5 * ds);

    let seed = 3u64;
    for (lr, steps) in [(0.4, 4000), (0.4, 8000)] {
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        redraw_lambdas(&mut st, seed, 2e-4, 1e-3);
        for _ in 0..steps { gd_step(&model, Objective::Kkt, &mut st, lr, 1e-8).unwrap(); }
        report(&format!("kkt  {steps}x{lr} lam[2e-4,1e-3]"), &st, &data, &group, t0.elapsed().as_secs_f64());
    }
    for (alpha, tu, ts) in [(0.98, 25, 50), (0.99, 25, 50)] {
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        redraw_lambdas(&mut st, seed, 2e-4, 1e-3);
        for t in 1..=4000usize {
            gd_step(&model, Objective::Kkt, &mut st, 0.4, 1e-8).unwrap();
            if t % tu == 0 {
                let prev = st.x_prev.clone();
                for (x, p) in st.candidates.iter_mut().zip(&prev) {
                    let avg = girn::group::orbit_average(p, &group).unwrap();
                    for ((xv, pv), av) in x.data.iter_mut().zip(&p.data).zip(&avg.data) {
                        *xv = alpha * *xv + (1.0 - alpha) * (pv - av);
                    }
                }
            }
            if t % ts == 0 {
                let g = objective_gradient(&model, Objective::Kkt, &st).unwrap();
                for ((p, x), gx) in st.x_prev.iter_mut().zip(&st.candidates).zip(&g.grad_candidates) {
                    for ((pv, xv), gv) in p.data.iter_mut().zip(&x.data).zip(gx) {
                        *pv = 0.9 * xv + 0.1 * gv * gv;
                    }
                }
            }
        }
        report(&format!("same a{alpha} tu{tu} ts{ts} 4000x0.4"), &st, &data, &group, t0.elapsed().as_secs_f64());
    }
}
