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

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(20);
    let kkt_steps: usize = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(5000);
    let seeds: Vec<u64> = args.get(3).map(|s| s.split(',').map(|v| v.parse().unwrap()).collect()).unwrap_or(vec![3, 4, 5]);

    let grid = Grid::new(14, 14);
    let m = 4 * n;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    let t0 = Instant::now();
    train(&mut model, &data, &tc).unwrap();
    let ds = symmetry_score(&data.samples, &group).unwrap();
    println!("n={n} m={m} trained {:.0}s data_sym {ds:.3} (0.5x = {:.3})", t0.elapsed().as_secs_f64(), ds * 0.5);

    let mut means: Vec<(&str, f64, f64)> = vec![("am", 0.0, 0.0), ("kkt", 0.0, 0.0), ("same", 0.0, 0.0)];
    for &seed in &seeds {
        // AM
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        for _ in 0..3000 { gd_step(&model, Objective::Am, &mut st, 0.01, 0.0).unwrap(); }
        let mm = minmax(&st.candidates);
        let rep = match_invariant(&mm, &data, &group).unwrap();
        let hist = orbitope_histogram(&rep, &mm, &data, &group, 10).unwrap();
        let (d0, s0) = (mean_dssim(&rep), symmetry_score(&mm, &group).unwrap());
        println!("seed {seed}   am: dssim {d0:.4} sym {s0:.3} modal {:?} ({:.0}s)", hist.modal_bin().unwrap(), t0.elapsed().as_secs_f64());
        means[0].1 += d0; means[0].2 += s0;

        // KKT
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for l in &mut st.lambdas { *l = 5e-4 + rng.random::<f64>() * 5e-4; }
        for _ in 0..kkt_steps { gd_step(&model, Objective::Kkt, &mut st, 0.2, 1e-8).unwrap(); }
        let mm = minmax(&st.candidates);
        let rep = match_invariant(&mm, &data, &group).unwrap();
        let hist = orbitope_histogram(&rep, &mm, &data, &group, 10).unwrap();
        let (d1, s1) = (mean_dssim(&rep), symmetry_score(&mm, &group).unwrap());
        println!("seed {seed}  kkt: dssim {d1:.4} sym {s1:.3} modal {:?} ({:.0}s)", hist.modal_bin().unwrap(), t0.elapsed().as_secs_f64());
        means[1].1 += d1; means[1].2 += s1;

        // SAME
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for l in &mut st.lambdas { *l = 5e-4 + rng.random::<f64>() * 5e-4; }
        for t in 1..=kkt_steps {
            gd_step(&model, Objective::Kkt, &mut st, 0.2, 1e-8).unwrap();
            if t % 25 == 0 {
                let prev = st.x_prev.clone();
                for (x, p) in st.candidates.iter_mut().zip(&prev) {
                    let avg = girn::group::orbit_average(p, &group).unwrap();
                    for ((xv, pv), av) in x.data.iter_mut().zip(&p.data).zip(&avg.data) {
                        *xv = 0.98 * *xv + 0.02 * (pv - av);
                    }
                }
            }
            if t % 50 == 0 {
                let g = objective_gradient(&model, Objective::Kkt, &st).unwrap();
                for ((p, x), gx) in st.x_prev.iter_mut().zip(&st.candidates).zip(&g.grad_candidates) {
                    for ((pv, xv), gv) in p.data.iter_mut().zip(&x.data).zip(gx) {
                        *pv = 0.9 * xv + 0.1 * gv * gv;
                    }
                }
            }
        }
        let mm = minmax(&st.candidates);
        let rep = match_invariant(&mm, &data, &group).unwrap();
        let (d2, s2) = (mean_dssim(&rep), symmetry_score(&mm, &group).unwrap());
        println!("seed {seed} same: dssim {d2:.4} sym {s2:.3} ({:.0}s)", t0.elapsed().as_secs_f64());
        means[2].1 += d2; means[2].2 += s2;
    }
    let k = seeds.len() as f64;
    for (name, d, s) in &means {
        println!("MEAN {name:>4}: dssim {:.4} sym {:.3}", d / k, s / k);
    }
}
