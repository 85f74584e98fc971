use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::eval::{match_invariant, mean_dssim, orbitope_histogram, symmetry_score};
use girn::group::{GroupName, GroupSpec};
use girn::image::{Grid, ImageTensor};
use girn::model::InvariantModel;
use girn::recon::{gd_step, reconstruct_same_gd, GdConfig, Objective, ReconstructionState, SameGdConfig};
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
    let kkt_lr: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(0.1);
    let kkt_llr: f64 = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(1e-6);
    let kkt_steps: usize = args.get(4).and_then(|v| v.parse().ok()).unwrap_or(8000);
    let lam0: f64 = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(1e-3);
    let am_steps: usize = args.get(6).and_then(|v| v.parse().ok()).unwrap_or(2000);
    let alpha: f64 = args.get(7).and_then(|v| v.parse().ok()).unwrap_or(0.98);
    let t_update: usize = args.get(8).and_then(|v| v.parse().ok()).unwrap_or(25);

    let grid = Grid::new(14, 14);
    let m = 4 * n;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group.clone(), 7, 0.02).unwrap();
    let tc = TrainConfig { learning_rate: 0.5, epochs: 40000, target_loss: 1e-5, seed: 0, log_every: 100000 };
    let t0 = Instant::now();
    train(&mut model, &data, &tc).unwrap();
    let data_sym = symmetry_score(&data.samples, &group).unwrap();
    println!("n={n} m={m}: trained {:.0}s, data_sym {data_sym:.4} thresh {:.4}", t0.elapsed().as_secs_f64(), 0.5*data_sym);

    let mut agg: Vec<(String, Vec<f64>, Vec<f64>)> = vec![
        ("am".into(), vec![], vec![]), ("kkt".into(), vec![], vec![]), ("same".into(), vec![], vec![])];
    for seed in [3u64, 4, 5] {
        // AM
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        for _ in 0..am_steps { gd_step(&model, Objective::Am, &mut st, 0.01, 0.0).unwrap(); }
        let nc = minmax(&st.candidates);
        let rep = match_invariant(&nc, &data, &group).unwrap();
        let (md, ns) = (mean_dssim(&rep), symmetry_score(&nc, &group).unwrap());
        let hist = orbitope_histogram(&rep, &nc, &data, &group, 10).unwrap();
        println!("seed {seed}   am: dssim {md:.4} nsym {ns:.4} modal {:?} ({:.0}s)", hist.modal_bin().unwrap(), t0.elapsed().as_secs_f64());
        agg[0].1.push(md); agg[0].2.push(ns);
        // KKT (growth regime)
        let t0 = Instant::now();
        let mut st = ReconstructionState::init(grid, m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        for l in &mut st.lambdas { *l = rng.random::<f64>() * lam0; }
        for _ in 0..kkt_steps { gd_step(&model, Objective::Kkt, &mut st, kkt_lr, kkt_llr).unwrap(); }
        let nc = minmax(&st.candidates);
        let rep = match_invariant(&nc, &data, &group).unwrap();
        let (md, ns) = (mean_dssim(&rep), symmetry_score(&nc, &group).unwrap());
        let hist = orbitope_histogram(&rep, &nc, &data, &group, 10).unwrap();
        println!("seed {seed}  kkt: dssim {md:.4} nsym {ns:.4} modal {:?} ({:.0}s)", hist.modal_bin().unwrap(), t0.elapsed().as_secs_f64());
        agg[1].1.push(md); agg[1].2.push(ns);
        // SAME-GD (same base config as KKT)
        let t0 = Instant::now();
        let cfg = GdConfig { m, steps: kkt_steps, lr: kkt_lr, lambda_lr: kkt_llr, seed };
        let sch = SameGdConfig { alpha, t_update, t_save: 50, ..SameGdConfig::default() };
        // replicate lambda re-draw inside same-gd: do manually
        let mut st = ReconstructionState::init(grid, m, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        for l in &mut st.lambdas { *l = rng.random::<f64>() * lam0; }
        let _ = (&cfg, reconstruct_same_gd); // noop to keep signature handy
        for t in 1..=kkt_steps {
            gd_step(&model, Objective::Kkt, &mut st, kkt_lr, kkt_llr).unwrap();
            if t % sch.t_update == 0 {
                let prev = st.x_prev.clone();
                for (x, p) in st.candidates.iter_mut().zip(&prev) {
                    let avg = girn::group::orbit_average(p, &group).unwrap();
                    for ((xv, pv), av) in x.data.iter_mut().zip(&p.data).zip(&avg.data) {
                        *xv = sch.alpha * *xv + (1.0 - sch.alpha) * (pv - av);
                    }
                }
            }
            if t % sch.t_save == 0 {
                let g = girn::recon::objective_gradient(&model, Objective::Kkt, &st).unwrap();
                for ((p, x), gx) in st.x_prev.iter_mut().zip(&st.candidates).zip(&g.grad_candidates) {
                    for ((pv, xv), gv) in p.data.iter_mut().zip(&x.data).zip(gx) {
                        *pv = 0.9 * xv + 0.1 * gv * gv;
                    }
                }
            }
        }
        let nc = minmax(&st.candidates);
        let rep = match_invariant(&nc, &data, &group).unwrap();
        let (md, ns) = (mean_dssim(&rep), symmetry_score(&nc, &group).unwrap());
        println!("seed {seed} same: dssim {md:.4} nsym {ns:.4} ({:.0}s)", t0.elapsed().as_secs_f64());
        agg[2].1.push(md); agg[2].2.push(ns);
    }
    for (name, ds, ss) in &agg {
        let md: f64 = ds.iter().sum::<f64>() / ds.len() as f64;
        let ms: f64 = ss.iter().sum::<f64>() / ss.len() as f64;
        println!("MEAN {name:>4}: dssim {md:.4} nsym {ms:.4}");
    }
}
