use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::symmetry_score;
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, Objective, ReconstructionState};
use girn::train::{train, TrainConfig};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn mm_one(x: &ImageTensor) -> ImageTensor {
    let lo = x.data.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let data = if hi - lo < 1e-12 { vec![0.5; x.data.len()] }
        else { x.data.iter().map(|v| (v - lo) / (hi - lo)).collect() };
    ImageTensor::new(data, x.grid).unwrap()
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

    let seed = 3u64;
    let mut st = ReconstructionState::init(grid, m, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for l in &mut st.lambdas { *l = 2e-4 + rng.random::<f64>() * 8e-4; }
    let lam0 = st.lambdas.clone();
    for _ in 0..4000 { gd_step(&model, Objective::Kkt, &mut st, 0.4, 1e-8).unwrap(); }

    let mut per: Vec<(f64, f64, f64, f64)> = Vec::new(); // (mm_asym, lam0, label, scale)
    for i in 0..m {
        let mm = mm_one(&st.candidates[i]);
        let s = symmetry_score(std::slice::from_ref(&mm), &group).unwrap();
        per.push((s, lam0[i], st.labels[i], st.candidates[i].norm()));
    }
    let pos: Vec<f64> = per.iter().filter(|p| p.2 > 0.0).map(|p| p.0).collect();
    let neg: Vec<f64> = per.iter().filter(|p| p.2 < 0.0).map(|p| p.0).collect();
    println!("class +1 mm_asym mean {:.3}", pos.iter().sum::<f64>() / pos.len() as f64);
    println!("class -1 mm_asym mean {:.3}", neg.iter().sum::<f64>() / neg.len() as f64);
    let mut sorted = per.clone();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    println!("asym deciles: {:?}", (0..10).map(|q| (sorted[q * m / 10].0 * 100.0).round() / 100.0).collect::<Vec<_>>());
    // correlation with lambda and with final scale
    for (name, idx) in [("lam0", 1usize), ("scale", 3)] {
        let xs: Vec<f64> = per.iter().map(|p| if idx == 1 { p.1 } else { p.3 }).collect();
        let ys: Vec<f64> = per.iter().map(|p| p.0).collect();
        let mx = xs.iter().sum::<f64>() / m as f64;
        let my = ys.iter().sum::<f64>() / m as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = xs.iter().map(|a| (a - mx) * (a - mx)).sum();
        let vy: f64 = ys.iter().map(|b| (b - my) * (b - my)).sum();
        println!("corr(mm_asym, {name}) = {:.3}", cov / (vx * vy).sqrt());
    }
    let scales: Vec<f64> = per.iter().map(|p| p.3).collect();
    println!("scale deciles: {:?}", { let mut s = scales.clone(); s.sort_by(|a,b| a.partial_cmp(b).unwrap()); (0..10).map(|q| (s[q * m / 10] * 10.0).round() / 10.0).collect::<Vec<_>>() });
}
