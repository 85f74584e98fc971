use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{objective_gradient, GdConfig, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};

fn clamp01(c: &[ImageTensor]) -> Vec<ImageTensor> {
    c.iter().map(|x| ImageTensor::new(x.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(), x.grid).unwrap()).collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.05);
    let llr: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(1e-5);
    let steps: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(2000);

    let grid = Grid::new(14, 14);
    let n = 20; let m = 80;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    train(&mut model, &data, &tc).unwrap();

    let mut st = ReconstructionState::init(grid, m, 3);
    let _cfg = GdConfig { m, steps, lr, lambda_lr: llr, seed: 3 };
    for t in 0..steps {
        let g = objective_gradient(&model, Objective::Kkt, &st).unwrap();
        let gx_norm: f64 = g.grad_candidates.iter().map(|v| v.iter().map(|a| a*a).sum::<f64>()).sum::<f64>().sqrt();
        let gl_norm: f64 = g.grad_lambdas.iter().map(|a| a*a).sum::<f64>().sqrt();
        if t % (steps/15).max(1) == 0 {
            let sym = symmetry_score(&st.candidates, &group).unwrap();
            println!("step {t:>5} obj {:.5e} |gx| {gx_norm:.3e} |gl| {gl_norm:.3e} sym {sym:.4}", g.value);
        }
        for (x, gx) in st.candidates.iter_mut().zip(&g.grad_candidates) {
            for (xv, gv) in x.data.iter_mut().zip(gx) { *xv -= lr * gv; }
        }
        for (l, gl) in st.lambdas.iter_mut().zip(&g.grad_lambdas) { *l = (*l - llr * gl).max(0.0); }
    }
    let sym = symmetry_score(&st.candidates, &group).unwrap();
    let clamped = clamp01(&st.candidates);
    let report = match_invariant(&clamped, &data, &group).unwrap();
    println!("FINAL sym {sym:.4} mean_dssim {:.4}", mean_dssim(&report));
}
