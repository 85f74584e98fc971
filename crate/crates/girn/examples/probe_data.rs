use girn::data::synth_dataset;
use girn::eval::symmetry_score;
use girn::group::{GroupName, GroupSpec};
use girn::image::Grid;

fn main() {
    let grid = Grid::new(14, 14);
    for seed in [1u64, 2, 3] {
        let data = synth_dataset(seed, 50, grid).unwrap();
        let flip = GroupSpec::new(GroupName::FlipH, grid).unwrap();
        let d4 = GroupSpec::new(GroupName::Dihedral4, grid).unwrap();
        println!(
            "seed {seed}: sym_flip {:.4} sym_d4 {:.4}",
            symmetry_score(&data.samples, &flip).unwrap(),
            symmetry_score(&data.samples, &d4).unwrap()
        );
    }
}
