use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::group::{GroupName, GroupSpec};
use girn::image::Grid;
use girn::model::InvariantModel;
use girn::recon::{gd_step, Objective, ReconstructionState};
use std::time::Instant;

fn main() {
    let grid = Grid::new(14, 14);
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let model = InvariantModel::init_scaled(Arch::new(196, 100, 100), group, 7, 0.02).unwrap();
    let _data = synth_dataset(1, 20, grid).unwrap();
    let mut st = ReconstructionState::init(grid, 80, 3);
    let t0 = Instant::now();
    for _ in 0..200 { gd_step(&model, Objective::Kkt, &mut st, 0.05, 0.0).unwrap(); }
    println!("kkt step: {:.1} ms", t0.elapsed().as_secs_f64() * 1000.0 / 200.0);
    let t0 = Instant::now();
    for _ in 0..200 { gd_step(&model, Objective::Am, &mut st, 0.001, 0.0).unwrap(); }
    println!("am step: {:.1} ms", t0.elapsed().as_secs_f64() * 1000.0 / 200.0);
}
