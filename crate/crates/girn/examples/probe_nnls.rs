use girn::data::synth_dataset;
use girn::diff::Arch;
use girn::group::{GroupName, GroupSpec};
use girn::image::Grid;
use girn::model::InvariantModel;
use girn::train::{train, TrainConfig};

fn main() {
    let grid = Grid::new(14, 14);
    let n = 20;
    let data = synth_dataset(1, n, grid).unwrap();
    let group = GroupSpec::new(GroupName::FlipH, grid).unwrap();
    let arch = Arch::new(grid.len(), 100, 100);
    let mut model = InvariantModel::init(arch, group, 7).unwrap();
    let config = TrainConfig { learning_rate: 0.5, epochs: 3000, target_loss: 1e-7, seed: 0, log_every: 10000 };
    train(&mut model, &data, &config).unwrap();

    let theta = model.params.data.clone();
    let cols: Vec<Vec<f64>> = data.samples.iter().zip(&data.labels)
        .map(|(x, &y)| { let mut g = model.grad_params_sym(x).unwrap(); for v in &mut g { *v *= y; } g })
        .collect();
    let mut gram = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for i in 0..n {
        atb[i] = cols[i].iter().zip(&theta).map(|(a, b)| a * b).sum();
        for j in 0..n {
            gram[i][j] = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
        }
    }
    // unconstrained LS via Gaussian elimination with ridge
    let mut a = gram.clone();
    let mut b = atb.clone();
    for i in 0..n { a[i][i] += 1e-9 * a[i][i].abs().max(1e-12); }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        a.swap(col, piv); b.swap(col, piv);
        let d = a[col][col];
        for i in 0..n { if i != col && a[i][col] != 0.0 {
            let f = a[i][col] / d;
            for k in col..n { a[i][k] -= f * a[col][k]; }
            b[i] -= f * b[col];
        }}
    }
    let lam_ls: Vec<f64> = (0..n).map(|i| b[i] / a[i][i]).collect();
    let theta_norm2: f64 = theta.iter().map(|v| v * v).sum();
    let fit = |lam: &[f64]| -> f64 {
        let mut r2 = 0.0;
        for k in 0..theta.len() {
            let fitted: f64 = (0..n).map(|i| lam[i] * cols[i][k]).sum();
            let r = theta[k] - fitted;
            r2 += r * r;
        }
        (r2 / theta_norm2).sqrt()
    };
    println!("unconstrained LS rel residual: {:.4e}", fit(&lam_ls));
    println!("negative lambdas in LS: {}", lam_ls.iter().filter(|&&l| l < 0.0).count());

    // NNLS coordinate descent
    let mut lam = vec![0.0; n];
    for sweep in 0..2000 {
        for i in 0..n {
            let gi: f64 = (0..n).map(|j| gram[i][j] * lam[j]).sum();
            let new = (lam[i] + (atb[i] - gi) / gram[i][i]).max(0.0);
            lam[i] = new;
        }
        if sweep % 500 == 0 { println!("cd sweep {sweep}: rel residual {:.4e}", fit(&lam)); }
    }
    println!("NNLS cd final: {:.4e}, active {}", fit(&lam), lam.iter().filter(|&&l| l > 0.0).count());
}
