use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, orbitope_histogram, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, GdConfig, Objective, ReconstructionState, reconstruct_same_gd, SameGdConfig};
use girn::train::{train, TrainConfig};
use std::time::Instant;

fn clamp01(c: &[ImageTensor]) -> Vec<ImageTensor> {
    c.iter().map(|x| ImageTensor::new(x.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(), x.grid).unwrap()).collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let method = args.get(1).map(|s| s.as_str()).unwrap_or("kkt");
    let lr: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(0.01);
    let llr: f64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(1e-4);
    let steps: usize = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(1000);
    let n: usize = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(20);
    let m: usize = args.get(6).and_then(|v| v.parse().ok()).unwrap_or(80);
    let seed: u64 = args.get(7).and_then(|v| v.parse().ok()).unwrap_or(3);

    let grid = Grid::new(14, 14);
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    let t0 = Instant::now();
    train(&mut model, &data, &tc).unwrap();
    eprintln!("trained in {:.0}s", t0.elapsed().as_secs_f64());

    let data_sym = symmetry_score(&data.samples, &group).unwrap();
    println!("data symmetry score: {data_sym:.4}");

    let objective = if method.starts_with("am") { Objective::Am } else { Objective::Kkt };
    let cfg = GdConfig { m, steps, lr, lambda_lr: llr, seed };

    let t0 = Instant::now();
    let state = if method == "same" {
        reconstruct_same_gd(&model, Objective::Kkt, &cfg, &SameGdConfig::default()).unwrap()
    } else {
        let mut st = ReconstructionState::init(grid, m, seed);
        let init_sym = symmetry_score(&st.candidates, &group).unwrap();
        println!("init symmetry score: {init_sym:.4}");
        for t in 0..steps {
            let v = gd_step(&model, objective, &mut st, lr, llr).unwrap();
            if t % (steps / 10).max(1) == 0 {
                let sym = symmetry_score(&st.candidates, &group).unwrap();
                let cnorm: f64 = st.candidates.iter().map(|c| c.norm()).sum::<f64>() / m as f64;
                let lmax = st.lambdas.iter().cloned().fold(0.0, f64::max);
                println!("step {t:>5} obj {v:.5e} sym {sym:.4} |x| {cnorm:.3} lmax {lmax:.4}");
            }
        }
        st
    };
    eprintln!("recon in {:.0}s", t0.elapsed().as_secs_f64());

    let final_sym = symmetry_score(&state.candidates, &group).unwrap();
    let clamped = clamp01(&state.candidates);
    let report = match_invariant(&clamped, &data, &group).unwrap();
    let md = mean_dssim(&report);
    let hist = orbitope_histogram(&report, &clamped, &data, &group, 10).unwrap();
    println!("method {method}: final_sym {final_sym:.4} mean_dssim {md:.4}");
    let mut bins: Vec<_> = hist.counts.iter().collect();
    bins.sort_by(|a, b| b.1.cmp(a.1));
    for (w, c) in bins.iter().take(5) { println!("  bin {w:?}: {c}"); }
}
