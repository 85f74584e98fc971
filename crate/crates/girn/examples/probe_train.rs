use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::group::{GroupName, GroupSpec};
use girn::image::Grid;
use girn::model::InvariantModel;
use girn::train::{kkt_residual, train, TrainConfig};
use std::time::Instant;

fn main() {
    let grid = Grid::new(14, 14);
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(20);
    let lr: f64 = args.get(2).and_then(|v| v.parse().ok()).unwrap_or(0.5);
    let epochs: usize = args.get(3).and_then(|v| v.parse().ok()).unwrap_or(5000);
    let gname = args.get(4).map(|s| s.as_str()).unwrap_or("flip_h");
    let scale: f64 = args.get(5).and_then(|v| v.parse().ok()).unwrap_or(0.25);
    let target: f64 = args.get(6).and_then(|v| v.parse().ok()).unwrap_or(1e-5);

    let name = match gname {
        "trivial" => GroupName::Trivial,
        "flip_h" => GroupName::FlipH,
        "klein4" => GroupName::Klein4,
        _ => GroupName::Dihedral4,
    };
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(name, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init_scaled(arch, group, 7, scale).unwrap();
    let init_norm = model.params.norm();
    let config = TrainConfig {
        learning_rate: lr,
        epochs,
        target_loss: target,
        seed: 0,
        log_every: (epochs / 8).max(1),
    };
    let t0 = Instant::now();
    match train(&mut model, &data, &config) {
        Ok(history) => {
            for row in &history {
                println!(
                    "epoch {:>7} loss {:.6e} acc {:.3} min_margin {:+.4}",
                    row.epoch, row.loss, row.accuracy, row.min_margin
                );
            }
            println!("elapsed {:.1}s theta {:.3} (init {:.3})", t0.elapsed().as_secs_f64(), model.params.norm(), init_norm);
            let (res, lambdas) = kkt_residual(&model, &data).unwrap();
            let nz = lambdas.iter().filter(|&&l| l > 0.0).count();
            println!("kkt residual {res:.4e} ({nz}/{} active)", lambdas.len());
        }
        Err(e) => println!("TRAIN ERROR: {e}"),
    }
}
