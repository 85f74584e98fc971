//! Numerical property suite.
//!
//! Every theoretical claim the library relies on is checked numerically on
//! seeded random instances: group axioms, model invariance and homogeneity,
//! invariance of the attack objectives under independent per-candidate group
//! actions, invariance of the parameter gradient, equivariance of the
//! gradient step, stabilizer nesting along plain-GD trajectories, and
//! finite-difference validation of every derivative path (including the DIP
//! generator's backward pass). Each check reports its measured residual
//! against a fixed tolerance.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diff::{self, Arch, ParamVector};
use crate::group::{stabilizer, GroupElement, GroupName, GroupSpec};
use crate::image::{Grid, ImageTensor};
use crate::model::InvariantModel;
use crate::recon::{
    am_loss, gd_step, kkt_loss, ConvGenerator, DipConfig, Generator, Objective,
    ReconstructionState,
};

/// One property check: measured residual against its tolerance.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn pass(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }
}

const ALL_GROUPS: [GroupName; 4] = [
    GroupName::Trivial,
    GroupName::FlipH,
    GroupName::Klein4,
    GroupName::Dihedral4,
];

fn random_image(grid: Grid, rng: &mut ChaCha8Rng) -> ImageTensor {
    let scale = 1.0 / (grid.len() as f64).sqrt();
    let data = (0..grid.len())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ImageTensor { data, grid }
}

/// Redraw until `|phi(x)|` is clear of cancellation, so relative checks of
/// exact identities are well conditioned.
fn image_with_clear_output(
    model: &InvariantModel,
    rng: &mut ChaCha8Rng,
    min_abs: f64,
) -> ImageTensor {
    let grid = model.group.grid();
    for _ in 0..2000 {
        let x = random_image(grid, rng);
        if model.forward(&x).expect("dims").abs() >= min_abs {
            return x;
        }
    }
    panic!("could not find an input with |phi(x)| >= {min_abs}");
}

/// The cyclic subgroup generated by one element.
fn cyclic_subgroup(g: &GroupElement) -> Vec<GroupElement> {
    let mut elems = vec![GroupElement::identity(g.len())];
    let mut cur = g.clone();
    while !cur.is_identity() {
        elems.push(cur.clone());
        cur = g.compose(&cur);
    }
    elems
}

/// Make `x` exactly fixed by every element of `subgroup` by assigning each
/// pixel orbit a single value (bitwise-identical floats, so the stabilizer
/// holds at tolerance zero).
fn exact_partial_symmetrization(x: &ImageTensor, subgroup: &[GroupElement]) -> ImageTensor {
    let d = x.len();
    let mut data = x.data.clone();
    let mut seen = vec![false; d];
    for start in 0..d {
        if seen[start] {
            continue;
        }
        let mut orbit: Vec<usize> = subgroup.iter().map(|g| g.perm()[start]).collect();
        orbit.sort_unstable();
        orbit.dedup();
        let value = x.data[orbit[0]];
        for &i in &orbit {
            data[i] = value;
            seen[i] = true;
        }
    }
    ImageTensor {
        data,
        grid: x.grid,
    }
}

/// Draw an input whose pre-activations (for every group translate) stay
/// clear of the ReLU kinks, so finite differences cannot flip a mask.
fn image_away_from_kinks(model: &InvariantModel, rng: &mut ChaCha8Rng) -> ImageTensor {
    let grid = model.group.grid();
    'outer: for _ in 0..1000 {
        let x = random_image(grid, rng);
        for g in model.group.elements() {
            let gx = g.apply(&x).expect("grid matches");
            if min_preactivation(&model.params, &gx) < 1e-6 {
                continue 'outer;
            }
        }
        return x;
    }
    panic!("could not find an input away from all ReLU kinks");
}

fn min_preactivation(theta: &ParamVector, x: &ImageTensor) -> f64 {
    let Arch { d, h1, h2 } = theta.arch;
    let mut min_abs = f64::INFINITY;
    let w1 = theta.w1();
    let mut a1 = Vec::with_capacity(h1);
    for r in 0..h1 {
        let z: f64 = w1[r * d..(r + 1) * d]
            .iter()
            .zip(&x.data)
            .map(|(a, b)| a * b)
            .sum();
        min_abs = min_abs.min(z.abs());
        a1.push(z.max(0.0));
    }
    let w2 = theta.w2();
    for r in 0..h2 {
        let z: f64 = w2[r * h1..(r + 1) * h1]
            .iter()
            .zip(&a1)
            .map(|(a, b)| a * b)
            .sum();
        min_abs = min_abs.min(z.abs());
    }
    min_abs
}

/// 0 when `elements` is closed, contains the identity, and every element
/// has an inverse in the list; otherwise the number of violations.
pub fn group_axioms_residual(elements: &[GroupElement]) -> f64 {
    let mut violations = 0usize;
    if !elements.iter().any(|g| g.is_identity()) {
        violations += 1;
    }
    for a in elements {
        if !elements.iter().any(|g| a.compose(g).is_identity()) {
            violations += 1;
        }
        for b in elements {
            let prod = a.compose(b);
            if !elements.iter().any(|g| *g == prod) {
                violations += 1;
            }
        }
    }
    violations as f64
}

fn push(results: &mut Vec<CheckResult>, name: impl Into<String>, residual: f64, tolerance: f64) {
    results.push(CheckResult {
        name: name.into(),
        residual,
        tolerance,
    });
}

/// Run the full suite with instances derived from `seed`.
pub fn run_suite(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    let grid = Grid::new(4, 4);
    let arch = Arch::new(grid.len(), 10, 8);

    // --- group axioms, orthogonality, orbit-stabilizer --------------------
    let mut axiom_residual = 0.0f64;
    let mut ortho_residual = 0.0f64;
    let mut orbit_stab_residual = 0.0f64;
    for name in ALL_GROUPS {
        let group = GroupSpec::new(name, grid).expect("square grid");
        axiom_residual = axiom_residual.max(group_axioms_residual(group.elements()));
        let x = random_image(grid, &mut rng);
        for g in group.elements() {
            let gx = g.apply(&x).expect("dims");
            ortho_residual = ortho_residual.max((gx.norm() - x.norm()).abs());
        }
        let orb = crate::group::orbit(&x, &group).expect("dims").len();
        let stab = stabilizer(&x, &group, 0.0).expect("dims").len();
        orbit_stab_residual =
            orbit_stab_residual.max((orb * stab) as f64 - group.order() as f64);
        let avg = crate::group::orbit_average(&x, &group).expect("dims");
        let orb = crate::group::orbit(&avg, &group).expect("dims").len();
        let stab = stabilizer(&avg, &group, 0.0).expect("dims").len();
        orbit_stab_residual =
            orbit_stab_residual.max(((orb * stab) as f64 - group.order() as f64).abs());
    }
    push(&mut results, "group axioms (closure/identity/inverses)", axiom_residual, 0.0);
    push(&mut results, "permutation orthogonality |‖gx‖-‖x‖|", ortho_residual, 1e-12);
    push(&mut results, "orbit-stabilizer product", orbit_stab_residual, 0.0);

    // --- model invariance / homogeneity / euler ---------------------------
    let mut inv_residual = 0.0f64;
    let mut hom_residual = 0.0f64;
    let mut euler_residual = 0.0f64;
    let mut grad_inv_residual = 0.0f64;
    let mut grad_equi_residual = 0.0f64;
    for name in ALL_GROUPS {
        let group = GroupSpec::new(name, grid).expect("square grid");
        let model = InvariantModel::init(arch, group, rng.random()).expect("arch matches grid");
        let x = image_with_clear_output(&model, &mut rng, 0.02);
        let fx = model.forward(&x).expect("dims");

        for g in model.group.elements() {
            let gx = g.apply(&x).expect("dims");
            let fgx = model.forward(&gx).expect("dims");
            inv_residual = inv_residual.max((fgx - fx).abs() / (1.0 + fx.abs()));
        }

        // degree 3 in theta, degree 1 in x
        let mut scaled = model.clone();
        for v in &mut scaled.params.data {
            *v *= 2.0;
        }
        let f_2theta = scaled.forward(&x).expect("dims");
        hom_residual =
            hom_residual.max((f_2theta - 8.0 * fx).abs() / (8.0 * fx).abs().max(1e-12));
        let x2 = ImageTensor::new(x.data.iter().map(|v| 2.0 * v).collect(), grid).expect("len");
        let f_2x = model.forward(&x2).expect("dims");
        hom_residual = hom_residual.max((f_2x - 2.0 * fx).abs() / (2.0 * fx).abs().max(1e-12));

        let gi = model.grad_input_sym(&x).expect("dims");
        let dot: f64 = gi.iter().zip(&x.data).map(|(a, b)| a * b).sum();
        euler_residual = euler_residual.max((dot - fx).abs() / fx.abs().max(1e-12));
        let gt = model.grad_params_sym(&x).expect("dims");
        let dot_t: f64 = gt.iter().zip(&model.params.data).map(|(a, b)| a * b).sum();
        euler_residual =
            euler_residual.max((dot_t - 3.0 * fx).abs() / (3.0 * fx).abs().max(1e-12));

        let gp = model.grad_params_sym(&x).expect("dims");
        for g in model.group.elements() {
            let gx = g.apply(&x).expect("dims");
            let gp_g = model.grad_params_sym(&gx).expect("dims");
            let dev = gp
                .iter()
                .zip(&gp_g)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            grad_inv_residual = grad_inv_residual.max(dev);

            let gi_g = model.grad_input_sym(&gx).expect("dims");
            let gi_img = ImageTensor::new(gi.clone(), grid).expect("len");
            let expected = g.apply(&gi_img).expect("dims");
            let dev = gi_g
                .iter()
                .zip(&expected.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            grad_equi_residual = grad_equi_residual.max(dev);
        }
    }
    push(&mut results, "model invariance |φ(gx)-φ(x)|", inv_residual, 1e-10);
    push(
        &mut results,
        "homogeneity |φ(x;2θ)-8φ(x;θ)| and |φ(2x)-2φ(x)|",
        hom_residual,
        1e-9,
    );
    push(
        &mut results,
        "euler identities <∇xφ,x>=φ and <∇θφ,θ>=3φ",
        euler_residual,
        1e-8,
    );
    push(&mut results, "parameter-gradient invariance", grad_inv_residual, 1e-9);
    push(&mut results, "input-gradient equivariance", grad_equi_residual, 1e-8);

    // --- objective invariance under independent per-candidate actions -----
    let mut am_residual = 0.0f64;
    let mut kkt_residual = 0.0f64;
    for name in [GroupName::FlipH, GroupName::Klein4, GroupName::Dihedral4] {
        let group = GroupSpec::new(name, grid).expect("square grid");
        let model =
            InvariantModel::init(arch, group.clone(), rng.random()).expect("arch matches grid");
        let state = ReconstructionState::init(grid, 4, rng.random());

        let am_base: f64 = state
            .candidates
            .iter()
            .zip(&state.labels)
            .map(|(x, &y)| am_loss(&model, x, y).expect("dims"))
            .sum();
        let kkt_base = kkt_loss(&model, &state).expect("dims");

        let mut moved = state.clone();
        for x in &mut moved.candidates {
            let g = group.element(rng.random_range(0..group.order()));
            *x = g.apply(x).expect("dims");
        }
        let am_moved: f64 = moved
            .candidates
            .iter()
            .zip(&moved.labels)
            .map(|(x, &y)| am_loss(&model, x, y).expect("dims"))
            .sum();
        let kkt_moved = kkt_loss(&model, &moved).expect("dims");
        am_residual = am_residual.max((am_moved - am_base).abs() / (1.0 + am_base.abs()));
        kkt_residual = kkt_residual.max((kkt_moved - kkt_base).abs() / (1.0 + kkt_base.abs()));
    }
    push(&mut results, "AM objective invariance", am_residual, 1e-9);
    push(&mut results, "KKT objective invariance", kkt_residual, 1e-9);

    // --- gradient-step equivariance (both objectives, all groups) ---------
    let mut step_residual = 0.0f64;
    for name in ALL_GROUPS {
        let group = GroupSpec::new(name, grid).expect("square grid");
        let model =
            InvariantModel::init(arch, group.clone(), rng.random()).expect("arch matches grid");
        for objective in [Objective::Am, Objective::Kkt] {
            let state_seed = rng.random();
            for gi in 0..group.order() {
                let g = group.element(gi);
                let mut plain = ReconstructionState::init(grid, 2, state_seed);
                let mut transformed = plain.clone();
                for x in &mut transformed.candidates {
                    *x = g.apply(x).expect("dims");
                }
                gd_step(&model, objective, &mut plain, 1e-3, 1e-6).expect("step");
                gd_step(&model, objective, &mut transformed, 1e-3, 1e-6).expect("step");
                for (xt, xp) in transformed.candidates.iter().zip(&plain.candidates) {
                    let expected = g.apply(xp).expect("dims");
                    step_residual = step_residual.max(xt.distance_inf(&expected));
                }
            }
        }
    }
    push(&mut results, "GD step equivariance step(gx)=g·step(x)", step_residual, 1e-8);

    // --- stabilizer nesting along 1000-step trajectories -------------------
    let mut nesting_residual = 0.0f64;
    for name in [GroupName::FlipH, GroupName::Klein4, GroupName::Dihedral4] {
        let group = GroupSpec::new(name, grid).expect("square grid");
        let model =
            InvariantModel::init(arch, group.clone(), rng.random()).expect("arch matches grid");
        for objective in [Objective::Am, Objective::Kkt] {
            let mut state = ReconstructionState::init(grid, 2, rng.random());
            // give candidate 0 a nontrivial stabilizer: exactly symmetric
            // under the cyclic subgroup generated by the first generator
            let subgroup = cyclic_subgroup(group.element(1));
            state.candidates[0] = exact_partial_symmetrization(&state.candidates[0], &subgroup);
            let stab: Vec<GroupElement> = stabilizer(&state.candidates[0], &group, 0.0)
                .expect("dims")
                .into_iter()
                .cloned()
                .collect();
            assert!(stab.len() >= 2, "fixture must have a nontrivial stabilizer");
            for _ in 0..1000 {
                gd_step(&model, objective, &mut state, 1e-4, 1e-7).expect("step");
                for g in &stab {
                    let gx = g.apply(&state.candidates[0]).expect("dims");
                    nesting_residual =
                        nesting_residual.max(gx.distance_inf(&state.candidates[0]));
                }
            }
        }
    }
    push(&mut results, "stabilizer nesting along GD", nesting_residual, 1e-10);

    // --- finite-difference validation --------------------------------------
    let theta = {
        let group = GroupSpec::new(GroupName::Trivial, grid).expect("grid");
        InvariantModel::init(arch, group, rng.random())
            .expect("arch matches grid")
            .params
    };
    let x = {
        let group = GroupSpec::new(GroupName::Trivial, grid).expect("grid");
        let model = InvariantModel::new(theta.clone(), group).expect("dims");
        image_away_from_kinks(&model, &mut rng)
    };
    let fd_step = 1e-5;

    let gi = diff::grad_input(&theta, &x).expect("dims");
    let mut gi_residual = 0.0f64;
    for i in 0..arch.d {
        let mut plus = x.clone();
        plus.data[i] += fd_step;
        let mut minus = x.clone();
        minus.data[i] -= fd_step;
        let fd = (diff::mlp_forward(&theta, &plus).expect("dims")
            - diff::mlp_forward(&theta, &minus).expect("dims"))
            / (2.0 * fd_step);
        let scale = gi[i].abs().max(fd.abs()).max(1e-6);
        gi_residual = gi_residual.max((gi[i] - fd).abs() / scale);
    }
    push(&mut results, "finite differences: grad_input", gi_residual, 1e-5);

    let gp = diff::grad_params(&theta, &x).expect("dims");
    let mut gp_residual = 0.0f64;
    for _ in 0..50 {
        let k = rng.random_range(0..theta.len());
        let mut plus = theta.clone();
        plus.data[k] += fd_step;
        let mut minus = theta.clone();
        minus.data[k] -= fd_step;
        let fd = (diff::mlp_forward(&plus, &x).expect("dims")
            - diff::mlp_forward(&minus, &x).expect("dims"))
            / (2.0 * fd_step);
        let scale = gp[k].abs().max(fd.abs()).max(1e-6);
        gp_residual = gp_residual.max((gp[k] - fd).abs() / scale);
    }
    push(&mut results, "finite differences: grad_params", gp_residual, 1e-5);

    let v: Vec<f64> = (0..theta.len())
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let mv = diff::mixed_vjp(&theta, &x, &v).expect("dims");
    let mut mv_residual = 0.0f64;
    for i in 0..arch.d {
        let h = |img: &ImageTensor| -> f64 {
            diff::grad_params(&theta, img)
                .expect("dims")
                .iter()
                .zip(&v)
                .map(|(g, vv)| g * vv)
                .sum()
        };
        let mut plus = x.clone();
        plus.data[i] += fd_step;
        let mut minus = x.clone();
        minus.data[i] -= fd_step;
        let fd = (h(&plus) - h(&minus)) / (2.0 * fd_step);
        let scale = mv[i].abs().max(fd.abs()).max(1e-5);
        mv_residual = mv_residual.max((mv[i] - fd).abs() / scale);
    }
    push(&mut results, "finite differences: mixed_vjp", mv_residual, 1e-4);

    // DIP generator backward
    let gen = ConvGenerator::seeded(&DipConfig { channels: 4 }, Grid::new(10, 10), rng.random())
        .expect("grid fits");
    let target: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
    let out = gen.output();
    let grad_out: Vec<f64> = out
        .data
        .iter()
        .zip(&target)
        .map(|(a, b)| 2.0 * (a - b))
        .collect();
    let gw = gen.vjp(&grad_out);
    let loss = |g: &ConvGenerator| -> f64 {
        g.output()
            .data
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut dip_residual = 0.0f64;
    let gen_step = 1e-6;
    for _ in 0..50 {
        let k = rng.random_range(0..gen.weights().len());
        let mut plus = gen.clone();
        plus.weights_mut()[k] += gen_step;
        let mut minus = gen.clone();
        minus.weights_mut()[k] -= gen_step;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * gen_step);
        let scale = gw[k].abs().max(fd.abs()).max(1e-6);
        dip_residual = dip_residual.max((gw[k] - fd).abs() / scale);
    }
    push(&mut results, "finite differences: DIP generator backward", dip_residual, 1e-4);

    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_default_seed() {
        for check in run_suite(0) {
            assert!(
                check.pass(),
                "{}: residual {} > tolerance {}",
                check.name,
                check.residual,
                check.tolerance
            );
        }
    }

    #[test]
    fn broken_group_table_fails_closure() {
        // {e, c} where c is a 3-cycle: c*c is missing, so not closed
        let e = GroupElement::identity(3);
        let c = GroupElement::new(vec![1, 2, 0]).unwrap();
        let residual = group_axioms_residual(&[e, c]);
        assert!(residual > 0.0, "negative control should fail closure");
    }

    #[test]
    fn trivial_group_checks_degenerate_to_identities() {
        let grid = Grid::new(4, 4);
        let group = GroupSpec::new(GroupName::Trivial, grid).unwrap();
        assert_eq!(group_axioms_residual(group.elements()), 0.0);
        // any image is fixed by the whole (trivial) group
        let x = ImageTensor::zeros(grid);
        assert_eq!(stabilizer(&x, &group, 0.0).unwrap().len(), 1);
    }
}
