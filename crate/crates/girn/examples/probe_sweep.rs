use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, objective_gradient, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn minmax(c: &[ImageTensor]) -> Vec<ImageTensor> {
    c.iter().map(|x| {
        let lo = x.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let data = if hi - lo < 1e-12 { vec![0.5; x.data.len()] }
            else { x.data.iter().map(|v| (v - lo) / (hi - lo)).collect() };
        ImageTensor::new(data, x.grid).unwrap()
    }).collect()
}

#[allow(clippy::too_many_arguments)]
fn run(model: &InvariantModel, group: &GroupSpec, grid: Grid, m: usize, seed: u64,
       steps: usize, lr: f64, same: Option<(f64, usize, usize)>) -> ReconstructionState {
    let mut st = ReconstructionState::init(grid, m, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for l in &mut st.lambdas { *l = 5e-4 + rng.random::<f64>() * 5e-4; }
    for t in 1..=steps {
        gd_step(model, Objective::Kkt, &mut st, lr, 1e-8).unwrap();
        if let Some((alpha, tu, ts)) = same {
            if t % tu == 0 {
                let prev = st.x_prev.clone();
                for (x, p) in st.candidates.iter_mut().zip(&prev) {
                    let avg = girn::group::orbit_average(p, group).unwrap();
                    for ((xv, pv), av) in x.data.iter_mut().zip(&p.data).zip(&avg.data) {
                        *xv = alpha * *xv + (1.0 - alpha) * (pv - av);
                    }
                }
            }
            if t % ts == 0 {
                let g = objective_gradient(model, Objective::Kkt, &st).unwrap();
                for ((p, x), gx) in st.x_prev.iter_mut().zip(&st.candidates).zip(&g.grad_candidates) {
                    for ((pv, xv), gv) in p.data.iter_mut().zip(&x.data).zip(gx) {
                        *pv = 0.9 * xv + 0.1 * gv * gv;
                    }
                }
            }
        }
    }
    st
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
    println!("data_sym {:.3}", symmetry_score(&data.samples, &group).unwrap());

    for seed in [3u64, 4] {
        for lr in [0.2, 0.4] {
            let st = run(&model, &group, grid, m, seed, 5000, lr, None);
            let mm = minmax(&st.candidates);
            let rep = match_invariant(&mm, &data, &group).unwrap();
            println!("seed {seed} kkt lr{lr}: dssim {:.4} sym {:.3}", mean_dssim(&rep), symmetry_score(&mm, &group).unwrap());
        }
        for (alpha, tu, ts) in [(0.98, 25, 25), (0.99, 25, 25), (0.995, 10, 10)] {
            let st = run(&model, &group, grid, m, seed, 5000, 0.2, Some((alpha, tu, ts)));
            let mm = minmax(&st.candidates);
            let rep = match_invariant(&mm, &data, &group).unwrap();
            println!("seed {seed} same a{alpha} tu{tu} ts{ts}: dssim {:.4} sym {:.3}", mean_dssim(&rep), symmetry_score(&mm, &group).unwrap());
        }
    }
}
