use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};

fn norm_mode(c: &[ImageTensor], mode: &str) -> Vec<ImageTensor> {
    c.iter().map(|x| {
        let data: Vec<f64> = match mode {
            "clamp" => x.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            "minmax" => {
                let lo = x.data.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = x.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo < 1e-12 { vec![0.5; x.data.len()] }
                else { x.data.iter().map(|v| (v - lo) / (hi - lo)).collect() }
            }
            _ => x.data.clone(),
        };
        ImageTensor::new(data, x.grid).unwrap()
    }).collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.01);
    let steps: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(1000);

    let grid = Grid::new(14, 14);
    let n = 20; let m = 80;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    train(&mut model, &data, &tc).unwrap();

    let mut st = ReconstructionState::init(grid, m, 3);
    for t in 0..steps {
        let v = gd_step(&model, Objective::Am, &mut st, lr, 0.0).unwrap();
        if t % (steps/8).max(1) == 0 {
            let sym = symmetry_score(&st.candidates, &group).unwrap();
            let cnorm: f64 = st.candidates.iter().map(|c| c.norm()).sum::<f64>() / m as f64;
            println!("step {t:>5} obj {v:.5e} sym {sym:.4} |x| {cnorm:.3}");
        }
    }
    let sym = symmetry_score(&st.candidates, &group).unwrap();
    println!("final sym {sym:.4}  (data {:.4}, init 0.7018)", symmetry_score(&data.samples, &group).unwrap());
    for mode in ["clamp", "minmax"] {
        let nc = norm_mode(&st.candidates, mode);
        let report = match_invariant(&nc, &data, &group).unwrap();
        println!("AM mean_dssim ({mode}): {:.4}", mean_dssim(&report));
    }
}
