use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, orbitope_histogram, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{reconstruct_gd, reconstruct_same_gd, GdConfig, Objective, SameGdConfig};
use girn::train::{train, TrainConfig};
use std::time::Instant;

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
    let grid = Grid::new(14, 14);
    let n = 20; let m = 80;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    let t0 = Instant::now();
    train(&mut model, &data, &tc).unwrap();
    eprintln!("trained {:.0}s", t0.elapsed().as_secs_f64());
    let data_sym = symmetry_score(&data.samples, &group).unwrap();
    println!("data sym {data_sym:.4}; threshold(0.5x) {:.4}", 0.5 * data_sym);

    for seed in [3u64, 4, 5] {
        for method in ["am", "kkt", "same"] {
            let cfg = GdConfig { m, steps: if method == "am" { 1000 } else { 2000 },
                lr: if method == "am" { 0.01 } else { 0.05 }, lambda_lr: 1e-5, seed };
            let t0 = Instant::now();
            let st = match method {
                "am" => reconstruct_gd(&model, Objective::Am, &cfg).unwrap(),
                "kkt" => reconstruct_gd(&model, Objective::Kkt, &cfg).unwrap(),
                _ => reconstruct_same_gd(&model, Objective::Kkt, &cfg, &SameGdConfig::default()).unwrap(),
            };
            let raw_sym = symmetry_score(&st.candidates, &group).unwrap();
            for mode in ["clamp", "minmax"] {
                let nc = norm_mode(&st.candidates, mode);
                let report = match_invariant(&nc, &data, &group).unwrap();
                let md = mean_dssim(&report);
                let nsym = symmetry_score(&nc, &group).unwrap();
                let hist = orbitope_histogram(&report, &nc, &data, &group, 10).unwrap();
                let modal = hist.modal_bin().cloned().unwrap_or_default();
                println!("seed {seed} {method:>4} [{mode:>6}]: dssim {md:.4} nsym {nsym:.4} raw_sym {raw_sym:.4} modal {modal:?} ({:.0}s)", t0.elapsed().as_secs_f64());
            }
        }
    }
}
