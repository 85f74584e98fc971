//! Reconstruction attacks: activation maximization, stationarity-based
//! (KKT) reconstruction, the symmetry-aware SAME-GD variant, and the
//! deep-image-prior parameterization.
//!
//! All attacks share [`ReconstructionState`]: `m` candidate images with
//! fixed labels (half per class), dual variables `lambda_i >= 0` for the
//! stationarity objective, and the memory slot SAME-GD mixes back in.
//! Candidates are initialized i.i.d. `N(0, (1/d) I)`, a distribution that is
//! exactly invariant under pixel permutations, and optimized by plain
//! gradient descent; duals are clamped to zero from below after every step.

pub mod dip;

use rayon::prelude::*;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diff::Arch;
use crate::error::{Error, Result};
use crate::group::{orbit_average, GroupSpec};
use crate::image::ImageTensor;
use crate::model::InvariantModel;
use crate::train::LabeledDataset;

pub use dip::{ConvGenerator, DipConfig, Generator};

/// Which reconstruction objective to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Drive the (signed) model output up for the candidate's class:
    /// minimize `-y phi(x)`.
    Am,
    /// Stationarity fit: minimize
    /// `|| theta - sum_i lambda_i y_i grad_params_sym(x_i) ||^2`.
    Kkt,
}

/// Optimizer settings shared by the plain-GD attacks.
#[derive(Debug, Clone)]
pub struct GdConfig {
    /// Number of candidates (labels split evenly between the classes).
    pub m: usize,
    pub steps: usize,
    /// Step size for the candidates.
    pub lr: f64,
    /// Step size for the duals (KKT only). The candidate gradient of the
    /// stationarity objective is proportional to each dual, so the duals
    /// are kept on a much slower timescale than the candidates.
    pub lambda_lr: f64,
    /// Dual initialization range `[lo, hi]` (uniform).
    pub lambda_init: (f64, f64),
    pub seed: u64,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            m: 40,
            steps: 5000,
            lr: 0.2,
            lambda_lr: 1e-8,
            lambda_init: (0.0, 1e-3),
            seed: 0,
        }
    }
}

/// SAME-GD schedule. Every step takes a gradient step; on every
/// `t_update`-th step the iterate is additionally mixed with the asymmetric
/// component of a remembered point, and on every `t_save`-th step the memory
/// is refreshed.
#[derive(Debug, Clone)]
pub struct SameGdConfig {
    /// Convex weight on the current iterate during aggregation.
    pub alpha: f64,
    /// Convex weight on the current iterate during the memory refresh.
    pub beta: f64,
    pub t_update: usize,
    pub t_save: usize,
    /// How the gradient enters the memory refresh.
    pub memory_term: MemoryTerm,
}

/// The memory refresh mixes the iterate with a function of the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryTerm {
    /// `(grad L)^2` elementwise.
    ElementwiseSquare,
    /// The raw gradient.
    RawGradient,
}

impl Default for SameGdConfig {
    fn default() -> Self {
        SameGdConfig {
            alpha: 0.9,
            beta: 0.9,
            t_update: 10,
            t_save: 50,
            memory_term: MemoryTerm::ElementwiseSquare,
        }
    }
}

/// Candidates, duals, labels and optimizer bookkeeping for one attack run.
#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub candidates: Vec<ImageTensor>,
    pub lambdas: Vec<f64>,
    /// Fixed class labels, `+1` for the first half, `-1` for the rest.
    pub labels: Vec<f64>,
    /// SAME-GD memory; initialized to the starting candidates.
    pub x_prev: Vec<ImageTensor>,
    pub step: usize,
}

impl ReconstructionState {
    /// Draw `m` candidates i.i.d. `N(0, (1/d) I)` and duals uniform in
    /// `[0, 1e-3]`.
    pub fn init(grid: crate::image::Grid, m: usize, seed: u64) -> Self {
        Self::init_ranged(grid, m, seed, (0.0, 1e-3))
    }

    /// [`init`](Self::init) with an explicit dual range. Duals near zero
    /// leave their candidates without any stationarity gradient, so
    /// experiment configs draw them bounded away from zero.
    pub fn init_ranged(
        grid: crate::image::Grid,
        m: usize,
        seed: u64,
        lambda_init: (f64, f64),
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (grid.len() as f64).sqrt();
        let candidates: Vec<ImageTensor> = (0..m)
            .map(|_| {
                let data = (0..grid.len())
                    .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                ImageTensor { data, grid }
            })
            .collect();
        let (lo, hi) = lambda_init;
        let lambdas = (0..m)
            .map(|_| lo + rng.random::<f64>() * (hi - lo))
            .collect();
        let labels = (0..m)
            .map(|i| if i < m.div_ceil(2) { 1.0 } else { -1.0 })
            .collect();
        ReconstructionState {
            x_prev: candidates.clone(),
            candidates,
            lambdas,
            labels,
            step: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.candidates.len()
    }
}

/// Activation-maximization loss for one candidate: `-y phi(x)`.
pub fn am_loss(model: &InvariantModel, candidate: &ImageTensor, label: f64) -> Result<f64> {
    Ok(-label * model.forward(candidate)?)
}

/// Stationarity residual vector `theta - sum_i lambda_i y_i grad_params_sym(x_i)`.
fn kkt_residual_vector(model: &InvariantModel, state: &ReconstructionState) -> Result<Vec<f64>> {
    let grads: Vec<Vec<f64>> = state
        .candidates
        .par_iter()
        .map(|x| model.grad_params_sym(x))
        .collect::<Result<_>>()?;
    let mut r = model.params.data.clone();
    for ((g, &lambda), &y) in grads.iter().zip(&state.lambdas).zip(&state.labels) {
        let c = lambda * y;
        for (rv, gv) in r.iter_mut().zip(g) {
            *rv -= c * gv;
        }
    }
    Ok(r)
}

/// Stationarity loss `|| theta - sum_i lambda_i y_i grad_params_sym(x_i) ||^2`.
pub fn kkt_loss(model: &InvariantModel, state: &ReconstructionState) -> Result<f64> {
    let r = kkt_residual_vector(model, state)?;
    Ok(r.iter().map(|v| v * v).sum())
}

/// Objective value plus its gradients with respect to every candidate and
/// every dual, all from one pass.
pub struct StepGradients {
    /// Total objective (mean of per-candidate losses for AM, the squared
    /// residual norm for KKT).
    pub value: f64,
    pub grad_candidates: Vec<Vec<f64>>,
    pub grad_lambdas: Vec<f64>,
}

/// Evaluate the chosen objective and its gradients at the current state.
pub fn objective_gradient(
    model: &InvariantModel,
    objective: Objective,
    state: &ReconstructionState,
) -> Result<StepGradients> {
    match objective {
        Objective::Am => {
            let per: Vec<(f64, Vec<f64>)> = state
                .candidates
                .par_iter()
                .zip(&state.labels)
                .map(|(x, &y)| {
                    let value = -y * model.forward(x)?;
                    let mut g = model.grad_input_sym(x)?;
                    for v in &mut g {
                        *v *= -y;
                    }
                    Ok((value, g))
                })
                .collect::<Result<_>>()?;
            let m = state.m() as f64;
            let value = per.iter().map(|(v, _)| v).sum::<f64>() / m;
            let grad_candidates = per.into_iter().map(|(_, g)| g).collect();
            Ok(StepGradients {
                value,
                grad_candidates,
                grad_lambdas: vec![0.0; state.m()],
            })
        }
        Objective::Kkt => {
            // forward passes are shared between the parameter-gradient and
            // the mixed-derivative pass that follows
            let records: Vec<Vec<(ImageTensor, crate::diff::EvalRecord)>> = state
                .candidates
                .par_iter()
                .map(|x| model.records_for(x))
                .collect::<Result<_>>()?;
            let grads: Vec<Vec<f64>> = state
                .candidates
                .par_iter()
                .zip(&records)
                .map(|(x, recs)| model.grad_params_sym_from_records(x, recs))
                .collect();
            let mut r = model.params.data.clone();
            for ((g, &lambda), &y) in grads.iter().zip(&state.lambdas).zip(&state.labels) {
                let c = lambda * y;
                for (rv, gv) in r.iter_mut().zip(g) {
                    *rv -= c * gv;
                }
            }
            let value: f64 = r.iter().map(|v| v * v).sum();

            let grad_lambdas: Vec<f64> = grads
                .iter()
                .zip(&state.labels)
                .map(|(g, &y)| -2.0 * y * g.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>())
                .collect();

            let grad_candidates: Vec<Vec<f64>> = records
                .par_iter()
                .zip(&state.lambdas)
                .zip(&state.labels)
                .map(|((recs, &lambda), &y)| {
                    let mut g = model.mixed_vjp_sym_from_records(recs, &r);
                    let c = -2.0 * lambda * y;
                    for v in &mut g {
                        *v *= c;
                    }
                    g
                })
                .collect();
            Ok(StepGradients {
                value,
                grad_candidates,
                grad_lambdas,
            })
        }
    }
}

/// One plain gradient step on every candidate (and dual, for KKT), clamping
/// duals at zero. Returns the objective value *before* the step; errors if
/// it is not finite.
pub fn gd_step(
    model: &InvariantModel,
    objective: Objective,
    state: &mut ReconstructionState,
    lr: f64,
    lambda_lr: f64,
) -> Result<f64> {
    let grads = objective_gradient(model, objective, state)?;
    if !grads.value.is_finite() {
        return Err(Error::NonFinite { step: state.step });
    }
    for (x, g) in state.candidates.iter_mut().zip(&grads.grad_candidates) {
        for (xv, gv) in x.data.iter_mut().zip(g) {
            *xv -= lr * gv;
        }
    }
    if objective == Objective::Kkt {
        for (l, g) in state.lambdas.iter_mut().zip(&grads.grad_lambdas) {
            *l = (*l - lambda_lr * g).max(0.0);
        }
    }
    state.step += 1;
    Ok(grads.value)
}

/// Plain gradient-descent reconstruction (AM or KKT).
pub fn reconstruct_gd(
    model: &InvariantModel,
    objective: Objective,
    config: &GdConfig,
) -> Result<ReconstructionState> {
    let mut state =
        ReconstructionState::init_ranged(model.group.grid(), config.m, config.seed, config.lambda_init);
    for _ in 0..config.steps {
        gd_step(model, objective, &mut state, config.lr, config.lambda_lr)?;
    }
    Ok(state)
}

/// Mix a candidate with the asymmetric component of the memory point:
/// `alpha * x + (1 - alpha) * (x_prev - orbit_average(x_prev))`.
pub(crate) fn same_gd_aggregate(
    x: &ImageTensor,
    x_prev: &ImageTensor,
    group: &GroupSpec,
    alpha: f64,
) -> Result<ImageTensor> {
    let avg = orbit_average(x_prev, group)?;
    let data = x
        .data
        .iter()
        .zip(&x_prev.data)
        .zip(&avg.data)
        .map(|((&xv, &pv), &av)| alpha * xv + (1.0 - alpha) * (pv - av))
        .collect();
    Ok(ImageTensor {
        data,
        grid: x.grid,
    })
}

/// Symmetry-aware memory-enhanced gradient descent.
///
/// Each step is a plain gradient step; every `t_update` steps the fresh
/// iterate is aggregated with the asymmetric component of the memory point
/// (which can *shrink* a candidate's stabilizer — the whole point), and
/// every `t_save` steps the memory is refreshed from the iterate and its
/// gradient. With `alpha = 1` the aggregation is the identity and the
/// trajectory matches [`reconstruct_gd`] bit for bit.
pub fn reconstruct_same_gd(
    model: &InvariantModel,
    objective: Objective,
    config: &GdConfig,
    schedule: &SameGdConfig,
) -> Result<ReconstructionState> {
    let mut state =
        ReconstructionState::init_ranged(model.group.grid(), config.m, config.seed, config.lambda_init);
    for t in 1..=config.steps {
        gd_step(model, objective, &mut state, config.lr, config.lambda_lr)?;
        if t % schedule.t_update == 0 {
            let aggregated: Result<Vec<ImageTensor>> = state
                .candidates
                .iter()
                .zip(&state.x_prev)
                .map(|(x, prev)| same_gd_aggregate(x, prev, &model.group, schedule.alpha))
                .collect();
            state.candidates = aggregated?;
        }
        if t % schedule.t_save == 0 {
            let grads = objective_gradient(model, objective, &state)?;
            for ((prev, x), g) in state
                .x_prev
                .iter_mut()
                .zip(&state.candidates)
                .zip(&grads.grad_candidates)
            {
                for ((pv, &xv), &gv) in prev.data.iter_mut().zip(&x.data).zip(g) {
                    let term = match schedule.memory_term {
                        MemoryTerm::ElementwiseSquare => gv * gv,
                        MemoryTerm::RawGradient => gv,
                    };
                    *pv = schedule.beta * xv + (1.0 - schedule.beta) * term;
                }
            }
        }
    }
    Ok(state)
}

/// Deep-image-prior reconstruction: candidates are the outputs of
/// per-candidate randomly initialized convolutional generators, and the
/// gradient flows through the generator into its weights. Only the weights
/// are optimized; the latent inputs stay frozen.
pub fn reconstruct_dip(
    model: &InvariantModel,
    objective: Objective,
    config: &GdConfig,
    dip: &DipConfig,
) -> Result<ReconstructionState> {
    let grid = model.group.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut generators: Vec<ConvGenerator> = (0..config.m)
        .map(|_| ConvGenerator::seeded(dip, grid, rng.random::<u64>()))
        .collect::<Result<_>>()?;
    let (lam_lo, lam_hi) = config.lambda_init;
    let lambdas: Vec<f64> = (0..config.m)
        .map(|_| lam_lo + rng.random::<f64>() * (lam_hi - lam_lo))
        .collect();
    let labels: Vec<f64> = (0..config.m)
        .map(|i| if i < config.m.div_ceil(2) { 1.0 } else { -1.0 })
        .collect();
    let candidates: Vec<ImageTensor> = generators.iter().map(|g| g.output()).collect();
    let mut state = ReconstructionState {
        x_prev: candidates.clone(),
        candidates,
        lambdas,
        labels,
        step: 0,
    };
    for _ in 0..config.steps {
        dip_step(
            model,
            objective,
            &mut generators,
            &mut state,
            config.lr,
            config.lambda_lr,
        )?;
    }
    Ok(state)
}

/// One generator-space gradient step: refresh candidates from the
/// generators, differentiate the objective with respect to the candidates,
/// pull the gradient back through each generator, and step its weights.
pub fn dip_step<G: Generator + Send + Sync>(
    model: &InvariantModel,
    objective: Objective,
    generators: &mut [G],
    state: &mut ReconstructionState,
    lr: f64,
    lambda_lr: f64,
) -> Result<f64> {
    for (x, g) in state.candidates.iter_mut().zip(generators.iter()) {
        *x = g.output();
    }
    let grads = objective_gradient(model, objective, state)?;
    if !grads.value.is_finite() {
        return Err(Error::NonFinite { step: state.step });
    }
    generators
        .par_iter_mut()
        .zip(&grads.grad_candidates)
        .for_each(|(gen, gx)| {
            let gw = gen.vjp(gx);
            for (w, g) in gen.weights_mut().iter_mut().zip(&gw) {
                *w -= lr * g;
            }
        });
    if objective == Objective::Kkt {
        for (l, g) in state.lambdas.iter_mut().zip(&grads.grad_lambdas) {
            *l = (*l - lambda_lr * g).max(0.0);
        }
    }
    for (x, g) in state.candidates.iter_mut().zip(generators.iter()) {
        *x = g.output();
    }
    state.step += 1;
    Ok(grads.value)
}

/// Construct a model whose parameters satisfy the stationarity condition
/// exactly on the given dataset: `theta = sum_i lambda_i y_i grad_params_sym(x_i)`
/// with the returned nonnegative duals.
///
/// Runs the damped normalized iteration `v <- normalize(v/2 + F(v)/(2 ||F(v)||))`
/// with `F(theta) = sum_i lambda_i y_i grad_params_sym(x_i; theta)` (the
/// damping suppresses period-2 cycling). At a fixed point `F(v) = ||F(v)|| v`,
/// and since `F` is 2-homogeneous in `theta`, `theta = v / ||F(v)||` is a true
/// fixed point. Used as a ground-truth instance for validating the
/// stationarity objective.
///
/// Converges reliably for image-like samples (nonnegative pixels); signed
/// noise inputs can drive the iteration onto a limit cycle, in which case
/// this returns an error after exhausting its restart budget.
pub fn stationary_model(
    arch: Arch,
    group: GroupSpec,
    dataset: &LabeledDataset,
    seed: u64,
) -> Result<(InvariantModel, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas: Vec<f64> = (0..dataset.len())
        .map(|_| 0.5 + rng.random::<f64>())
        .collect();

    let apply_f = |model: &InvariantModel| -> Result<Vec<f64>> {
        let mut f = vec![0.0; model.params.len()];
        for ((x, &y), &lambda) in dataset.samples.iter().zip(&dataset.labels).zip(&lambdas) {
            let g = model.grad_params_sym(x)?;
            let c = lambda * y;
            for (fv, gv) in f.iter_mut().zip(&g) {
                *fv += c * gv;
            }
        }
        Ok(f)
    };

    'attempt: for attempt in 0..16 {
        let mut model = InvariantModel::init(arch, group.clone(), seed.wrapping_add(attempt))?;
        let norm0 = model.params.norm();
        for v in &mut model.params.data {
            *v /= norm0;
        }
        for _ in 0..2000 {
            let f = apply_f(&model)?;
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue 'attempt; // dead network, retry with a new init
            }
            let ray_residual = f
                .iter()
                .zip(&model.params.data)
                .map(|(fv, v)| (fv / norm - v).abs())
                .fold(0.0, f64::max);
            if ray_residual < 1e-14 {
                // on the fixed ray; rescale to the true fixed point
                for v in &mut model.params.data {
                    *v /= norm;
                }
                let f = apply_f(&model)?;
                let residual: f64 = f
                    .iter()
                    .zip(&model.params.data)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if residual <= 1e-16 {
                    return Ok((model, lambdas.clone()));
                }
                continue 'attempt;
            }
            let mut next: Vec<f64> = model
                .params
                .data
                .iter()
                .zip(&f)
                .map(|(v, fv)| 0.5 * v + 0.5 * fv / norm)
                .collect();
            let nn = next.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nn < 1e-12 {
                continue 'attempt;
            }
            for v in &mut next {
                *v /= nn;
            }
            model.params.data.copy_from_slice(&next);
        }
    }
    Err(Error::Unsupported {
        what: "stationary model construction",
        detail: "fixed-point iteration did not converge".to_string(),
    })
}
