use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, orbitope_histogram, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, objective_gradient, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};
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
fn clamp(c: &[ImageTensor]) -> Vec<ImageTensor> {
    c.iter().map(|x| ImageTensor::new(x.data.iter().map(|v| v.clamp(0.0,1.0)).collect(), x.grid).unwrap()).collect()
}

#[allow(clippy::too_many_arguments)]
fn run_same(model: &InvariantModel, group: &GroupSpec, m: usize, seed: u64,
            steps: usize, lr: f64, llr: f64, alpha: f64, t_update: usize, t_save: usize) -> ReconstructionState {
    let grid = group.grid();
    let mut st = ReconstructionState::init(grid, m, seed);
    for t in 1..=steps {
        gd_step(model, Objective::Kkt, &mut st, lr, llr).unwrap();
        if t % t_update == 0 {
            let prev = st.x_prev.clone();
            for (x, p) in st.candidates.iter_mut().zip(&prev) {
                let avg = girn::group::orbit_average(p, group).unwrap();
                for ((xv, pv), av) in x.data.iter_mut().zip(&p.data).zip(&avg.data) {
                    *xv = alpha * *xv + (1.0 - alpha) * (pv - av);
                }
            }
        }
        if t % t_save == 0 {
            let g = objective_gradient(model, Objective::Kkt, &st).unwrap();
            for ((p, x), gx) in st.x_prev.iter_mut().zip(&st.candidates).zip(&g.grad_candidates) {
                for ((pv, xv), gv) in p.data.iter_mut().zip(&x.data).zip(gx) {
                    *pv = 0.9 * xv + 0.1 * gv * gv;
                }
            }
        }
    }
    st
}

fn report(tag: &str, st: &ReconstructionState, data: &girn::train::LabeledDataset, group: &GroupSpec, t: f64) {
    let raw_sym = symmetry_score(&st.candidates, group).unwrap();
    let mm = minmax(&st.candidates);
    let rep = match_invariant(&mm, data, group).unwrap();
    let mm_d = mean_dssim(&rep);
    let mm_sym = symmetry_score(&mm, group).unwrap();
    let hist = orbitope_histogram(&rep, &mm, data, group, 10).unwrap();
    let cl = clamp(&st.candidates);
    let rep_c = match_invariant(&cl, data, group).unwrap();
    println!("{tag}: raw_sym {raw_sym:.3} mm_dssim {mm_d:.4} mm_sym {mm_sym:.3} cl_dssim {:.4} modal {:?} ({t:.0}s)",
        mean_dssim(&rep_c), hist.modal_bin().unwrap());
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
    // AM
    let t0 = Instant::now();
    let mut st = ReconstructionState::init(grid, m, seed);
    for _ in 0..3000 { gd_step(&model, Objective::Am, &mut st, 0.01, 0.0).unwrap(); }
    report("am   3000x0.01        ", &st, &data, &group, t0.elapsed().as_secs_f64());
    // KKT growth variants
    for (lr, steps) in [(0.4, 4000), (0.8, 4000)] {
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        for _ in 0..steps { gd_step(&model, Objective::Kkt, &mut st, lr, 1e-8).unwrap(); }
        report(&format!("kkt  {steps}x{lr}          "), &st, &data, &group, t0.elapsed().as_secs_f64());
    }
    // SAME variants
    for (alpha, tu, ts, tag) in [
        (0.99, 25, 1_000_000, "same a.99 tu25 ts-inf"),
        (0.98, 25, 50, "same a.98 tu25 ts50  "),
        (0.9, 10, 50, "same a.90 tu10 ts50  "),
    ] {
        let t0 = Instant::now();
        let st = run_same(&model, &group, m, seed, 4000, 0.4, 1e-8, alpha, tu, ts);
        report(tag, &st, &data, &group, t0.elapsed().as_secs_f64());
    }
}
