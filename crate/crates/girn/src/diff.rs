//! Derivatives for the fixed bias-free two-hidden-layer ReLU architecture.
//!
//! The network is `phi(x; theta) = w3 . relu(W2 . relu(W1 . x))` with no
//! biases, so `phi` is positively 1-homogeneous in `x` and 3-homogeneous in
//! `theta` (one degree per layer) — the latter is what the margin-
//! maximization stationarity theory requires.
//! Because the architecture is fixed, all derivatives are hand-derived
//! closed forms rather than a general tape:
//!
//! * [`grad_input`] — `d phi / d x` by a reverse pass,
//! * [`grad_params`] — `d phi / d theta`, flattened in [`ParamVector`] order,
//! * [`mixed_vjp`] — `d/dx <v, d phi / d theta>`, the mixed second derivative
//!   needed to differentiate stationarity-style objectives with respect to
//!   candidate inputs. ReLU masks are frozen during this pass; the network is
//!   piecewise multilinear, so the result is exact almost everywhere.
//!
//! The ReLU derivative at exactly zero is taken to be zero. All arithmetic
//! is `f64`.

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Layer sizes `(d, h1, h2)` of the fixed architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arch {
    /// Input dimension.
    pub d: usize,
    /// First hidden width.
    pub h1: usize,
    /// Second hidden width.
    pub h2: usize,
}

impl Arch {
    pub fn new(d: usize, h1: usize, h2: usize) -> Self {
        Arch { d, h1, h2 }
    }

    /// Total parameter count `h1*d + h2*h1 + h2`.
    pub fn param_count(&self) -> usize {
        self.h1 * self.d + self.h2 * self.h1 + self.h2
    }
}

/// Flat parameter vector with fixed layout: `W1` (h1 x d, row-major), then
/// `W2` (h2 x h1, row-major), then `w3` (h2).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub arch: Arch,
    pub data: Vec<f64>,
}

impl ParamVector {
    pub fn new(arch: Arch, data: Vec<f64>) -> Result<Self> {
        if data.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_count(),
                got: data.len(),
            });
        }
        Ok(ParamVector { arch, data })
    }

    pub fn zeros(arch: Arch) -> Self {
        ParamVector {
            arch,
            data: vec![0.0; arch.param_count()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn w1(&self) -> &[f64] {
        &self.data[..self.arch.h1 * self.arch.d]
    }

    pub fn w2(&self) -> &[f64] {
        let start = self.arch.h1 * self.arch.d;
        &self.data[start..start + self.arch.h2 * self.arch.h1]
    }

    pub fn w3(&self) -> &[f64] {
        let start = self.arch.h1 * self.arch.d + self.arch.h2 * self.arch.h1;
        &self.data[start..]
    }

    /// Euclidean norm of the flat vector.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn check_input(&self, x: &ImageTensor) -> Result<()> {
        if x.len() != self.arch.d {
            return Err(Error::DimensionMismatch {
                expected: self.arch.d,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Cached pre-activations and ReLU masks from one forward pass.
///
/// The masks are exactly the indicators of `pre-activation > 0`; backward
/// passes reuse them so forward and backward always see the same kinks.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    /// First-layer post-activations `a1 = relu(W1 x)`.
    pub a1: Vec<f64>,
    /// Second-layer post-activations `a2 = relu(W2 a1)`.
    pub a2: Vec<f64>,
    /// `z1 > 0` mask.
    pub m1: Vec<bool>,
    /// `z2 > 0` mask.
    pub m2: Vec<bool>,
    /// Network output.
    pub output: f64,
}

fn matvec(rows: usize, cols: usize, w: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        out.push(acc);
    }
}

/// Forward pass that keeps the intermediates needed by the backward passes.
pub fn forward_record(theta: &ParamVector, x: &ImageTensor) -> Result<EvalRecord> {
    theta.check_input(x)?;
    let Arch { d, h1, h2 } = theta.arch;

    let mut a1 = Vec::with_capacity(h1);
    matvec(h1, d, theta.w1(), &x.data, &mut a1);
    let m1: Vec<bool> = a1.iter().map(|&z| z > 0.0).collect();
    for (a, &m) in a1.iter_mut().zip(&m1) {
        if !m {
            *a = 0.0;
        }
    }

    let mut a2 = Vec::with_capacity(h2);
    matvec(h2, h1, theta.w2(), &a1, &mut a2);
    let m2: Vec<bool> = a2.iter().map(|&z| z > 0.0).collect();
    for (a, &m) in a2.iter_mut().zip(&m2) {
        if !m {
            *a = 0.0;
        }
    }

    let output = theta.w3().iter().zip(&a2).map(|(w, a)| w * a).sum();
    Ok(EvalRecord {
        a1,
        a2,
        m1,
        m2,
        output,
    })
}

/// Scalar output `w3 . relu(W2 . relu(W1 . x))`.
pub fn mlp_forward(theta: &ParamVector, x: &ImageTensor) -> Result<f64> {
    Ok(forward_record(theta, x)?.output)
}

/// Input gradient `d phi / d x` (length `d`).
pub fn grad_input(theta: &ParamVector, x: &ImageTensor) -> Result<Vec<f64>> {
    let rec = forward_record(theta, x)?;
    Ok(grad_input_from_record(theta, &rec))
}

pub(crate) fn grad_input_from_record(theta: &ParamVector, rec: &EvalRecord) -> Vec<f64> {
    let Arch { d, h1, h2 } = theta.arch;
    // delta2 = m2 o w3
    let delta2: Vec<f64> = theta
        .w3()
        .iter()
        .zip(&rec.m2)
        .map(|(&w, &m)| if m { w } else { 0.0 })
        .collect();
    // delta1 = m1 o (W2^T delta2)
    let w2 = theta.w2();
    let mut delta1 = vec![0.0; h1];
    for r in 0..h2 {
        let dr = delta2[r];
        if dr == 0.0 {
            continue;
        }
        let row = &w2[r * h1..(r + 1) * h1];
        for (dl, &w) in delta1.iter_mut().zip(row) {
            *dl += dr * w;
        }
    }
    for (dl, &m) in delta1.iter_mut().zip(&rec.m1) {
        if !m {
            *dl = 0.0;
        }
    }
    // grad = W1^T delta1
    let w1 = theta.w1();
    let mut grad = vec![0.0; d];
    for r in 0..h1 {
        let dr = delta1[r];
        if dr == 0.0 {
            continue;
        }
        let row = &w1[r * d..(r + 1) * d];
        for (g, &w) in grad.iter_mut().zip(row) {
            *g += dr * w;
        }
    }
    grad
}

/// Parameter gradient `d phi / d theta` in [`ParamVector`] layout (length `p`).
pub fn grad_params(theta: &ParamVector, x: &ImageTensor) -> Result<Vec<f64>> {
    let rec = forward_record(theta, x)?;
    let mut out = vec![0.0; theta.len()];
    accumulate_grad_params(theta, x, &rec, 1.0, &mut out);
    Ok(out)
}

/// Add `scale * d phi / d theta` into `acc` (shared by the trainer so the
/// full-batch gradient needs no per-sample allocation).
pub(crate) fn accumulate_grad_params(
    theta: &ParamVector,
    x: &ImageTensor,
    rec: &EvalRecord,
    scale: f64,
    acc: &mut [f64],
) {
    let Arch { d, h1, h2 } = theta.arch;
    debug_assert_eq!(acc.len(), theta.len());

    let delta2: Vec<f64> = theta
        .w3()
        .iter()
        .zip(&rec.m2)
        .map(|(&w, &m)| if m { w } else { 0.0 })
        .collect();
    let w2 = theta.w2();
    let mut delta1 = vec![0.0; h1];
    for r in 0..h2 {
        let dr = delta2[r];
        if dr == 0.0 {
            continue;
        }
        let row = &w2[r * h1..(r + 1) * h1];
        for (dl, &w) in delta1.iter_mut().zip(row) {
            *dl += dr * w;
        }
    }
    for (dl, &m) in delta1.iter_mut().zip(&rec.m1) {
        if !m {
            *dl = 0.0;
        }
    }

    // dphi/dW1 = delta1 x^T
    for r in 0..h1 {
        let dr = scale * delta1[r];
        if dr == 0.0 {
            continue;
        }
        let row = &mut acc[r * d..(r + 1) * d];
        for (a, &xv) in row.iter_mut().zip(&x.data) {
            *a += dr * xv;
        }
    }
    // dphi/dW2 = delta2 a1^T
    let w2_off = h1 * d;
    for r in 0..h2 {
        let dr = scale * delta2[r];
        if dr == 0.0 {
            continue;
        }
        let row = &mut acc[w2_off + r * h1..w2_off + (r + 1) * h1];
        for (a, &h) in row.iter_mut().zip(&rec.a1) {
            *a += dr * h;
        }
    }
    // dphi/dw3 = a2
    let w3_off = h1 * d + h2 * h1;
    for (a, &h) in acc[w3_off..].iter_mut().zip(&rec.a2) {
        *a += scale * h;
    }
}

/// Mixed second derivative: `d/dx <v, d phi / d theta>` with the ReLU masks
/// of the forward pass at `x` held fixed.
///
/// With masks frozen, `a1 = M1 W1 x` is linear in `x` while `delta1, delta2`
/// are constant, so the directional parameter-gradient `h(x) = <v, grad_params>`
/// is linear in `x` within the region and its gradient is
/// `V1^T delta1 + W1^T (m1 o (V2^T delta2 + W2^T (m2 o v3)))`.
pub fn mixed_vjp(theta: &ParamVector, x: &ImageTensor, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: v.len(),
        });
    }
    let rec = forward_record(theta, x)?;
    Ok(mixed_vjp_from_record(theta, &rec, v))
}

pub(crate) fn mixed_vjp_from_record(theta: &ParamVector, rec: &EvalRecord, v: &[f64]) -> Vec<f64> {
    let Arch { d, h1, h2 } = theta.arch;
    let v1 = &v[..h1 * d];
    let v2 = &v[h1 * d..h1 * d + h2 * h1];
    let v3 = &v[h1 * d + h2 * h1..];

    let delta2: Vec<f64> = theta
        .w3()
        .iter()
        .zip(&rec.m2)
        .map(|(&w, &m)| if m { w } else { 0.0 })
        .collect();
    let w2 = theta.w2();
    let mut delta1 = vec![0.0; h1];
    for r in 0..h2 {
        let dr = delta2[r];
        if dr == 0.0 {
            continue;
        }
        let row = &w2[r * h1..(r + 1) * h1];
        for (dl, &w) in delta1.iter_mut().zip(row) {
            *dl += dr * w;
        }
    }
    for (dl, &m) in delta1.iter_mut().zip(&rec.m1) {
        if !m {
            *dl = 0.0;
        }
    }

    // u = V2^T delta2 + W2^T (m2 o v3), masked by m1
    let mut u = vec![0.0; h1];
    for r in 0..h2 {
        let dr = delta2[r];
        let vr = if rec.m2[r] { v3[r] } else { 0.0 };
        if dr == 0.0 && vr == 0.0 {
            continue;
        }
        let vrow = &v2[r * h1..(r + 1) * h1];
        let wrow = &w2[r * h1..(r + 1) * h1];
        for i in 0..h1 {
            u[i] += dr * vrow[i] + vr * wrow[i];
        }
    }
    for (ui, &m) in u.iter_mut().zip(&rec.m1) {
        if !m {
            *ui = 0.0;
        }
    }

    // out = V1^T delta1 + W1^T u
    let w1 = theta.w1();
    let mut out = vec![0.0; d];
    for r in 0..h1 {
        let dl = delta1[r];
        let ur = u[r];
        if dl == 0.0 && ur == 0.0 {
            continue;
        }
        let vrow = &v1[r * d..(r + 1) * d];
        let wrow = &w1[r * d..(r + 1) * d];
        for i in 0..d {
            out[i] += dl * vrow[i] + ur * wrow[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Grid;
    use crate::testutil::{
        central_diff, random_image_std, random_params, resample_away_from_kinks,
    };
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_output_and_gradients() {
        let arch = Arch::new(4, 3, 3);
        let theta = ParamVector::zeros(arch);
        let x = ImageTensor::new(vec![1.0, -2.0, 0.5, 3.0], Grid::new(2, 2)).unwrap();
        assert_eq!(mlp_forward(&theta, &x).unwrap(), 0.0);
        assert!(grad_input(&theta, &x).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_input_gives_zero_output_and_param_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Arch::new(6, 5, 4);
        let theta = random_params(arch, &mut rng);
        let x = ImageTensor::zeros(Grid::new(2, 3));
        assert_eq!(mlp_forward(&theta, &x).unwrap(), 0.0);
        assert!(grad_params(&theta, &x).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn homogeneous_degree_three_in_params_and_one_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arch = Arch::new(9, 7, 5);
        let theta = random_params(arch, &mut rng);
        let x = random_image_std(Grid::new(3, 3), &mut rng);
        let fx = mlp_forward(&theta, &x).unwrap();

        // doubling all parameters multiplies the output by 2^3
        let theta2 = ParamVector::new(arch, theta.data.iter().map(|v| 2.0 * v).collect()).unwrap();
        let f_2theta = mlp_forward(&theta2, &x).unwrap();
        assert!((f_2theta - 8.0 * fx).abs() <= 1e-9 * (8.0 * fx).abs().max(1e-12));

        // doubling the input multiplies the output by 2
        let x2 = ImageTensor::new(x.data.iter().map(|v| 2.0 * v).collect(), x.grid).unwrap();
        let f_2x = mlp_forward(&theta, &x2).unwrap();
        assert!((f_2x - 2.0 * fx).abs() <= 1e-9 * (2.0 * fx).abs().max(1e-12));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let arch = Arch::new(4, 3, 3);
        let theta = ParamVector::zeros(arch);
        let x = ImageTensor::zeros(Grid::new(3, 3));
        assert!(mlp_forward(&theta, &x).is_err());
        assert!(mixed_vjp(&theta, &ImageTensor::zeros(Grid::new(2, 2)), &[0.0; 3]).is_err());
    }

    #[test]
    fn grad_input_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let arch = Arch::new(8, 6, 5);
            let theta = random_params(arch, &mut rng);
            let x = resample_away_from_kinks(&theta, Grid::new(2, 4), &mut rng);
            let grad = grad_input(&theta, &x).unwrap();
            let step = 1e-5;
            for i in 0..arch.d {
                let fd = central_diff(
                    |v| {
                        let mut xp = x.clone();
                        xp.data[i] = v;
                        mlp_forward(&theta, &xp).unwrap()
                    },
                    x.data[i],
                    step,
                );
                let scale = grad[i].abs().max(fd.abs()).max(1e-6);
                assert!(
                    (grad[i] - fd).abs() / scale <= 1e-5,
                    "coord {i}: analytic {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn grad_params_matches_finite_differences_on_random_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let arch = Arch::new(8, 6, 5);
            let theta = random_params(arch, &mut rng);
            let x = resample_away_from_kinks(&theta, Grid::new(2, 4), &mut rng);
            let grad = grad_params(&theta, &x).unwrap();
            let step = 1e-5;
            for _ in 0..50 {
                let k = rng.random_range(0..theta.len());
                let fd = central_diff(
                    |v| {
                        let mut tp = theta.clone();
                        tp.data[k] = v;
                        mlp_forward(&tp, &x).unwrap()
                    },
                    theta.data[k],
                    step,
                );
                let scale = grad[k].abs().max(fd.abs()).max(1e-6);
                assert!(
                    (grad[k] - fd).abs() / scale <= 1e-5,
                    "param {k}: analytic {} vs fd {fd}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn grad_params_directional_probe_increases_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let arch = Arch::new(6, 5, 4);
        let theta = random_params(arch, &mut rng);
        let x = resample_away_from_kinks(&theta, Grid::new(2, 3), &mut rng);
        let grad = grad_params(&theta, &x).unwrap();
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 < 1e-12 {
            return; // degenerate draw: all units dead
        }
        let eps = 1e-6;
        let mut tp = theta.clone();
        for (t, g) in tp.data.iter_mut().zip(&grad) {
            *t += eps * g;
        }
        let f0 = mlp_forward(&theta, &x).unwrap();
        let f1 = mlp_forward(&tp, &x).unwrap();
        let predicted = eps * gnorm2;
        assert!(
            ((f1 - f0) - predicted).abs() <= 1e-4 * predicted.abs().max(1e-10),
            "directional probe: moved {} predicted {predicted}",
            f1 - f0
        );
    }

    #[test]
    fn mixed_vjp_zero_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = Arch::new(6, 5, 4);
        let theta = random_params(arch, &mut rng);
        let x = random_image_std(Grid::new(2, 3), &mut rng);
        let out = mixed_vjp(&theta, &x, &vec![0.0; theta.len()]).unwrap();
        assert!(out.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mixed_vjp_reduces_to_v_in_linear_case() {
        // Hidden layers wired as identities on a positive input: W1 = I,
        // W2 = I, so phi = w3 . x and <v3, dphi/dw3> = <v3, x> has gradient v3.
        let d = 4;
        let arch = Arch::new(d, d, d);
        let mut data = vec![0.0; arch.param_count()];
        for i in 0..d {
            data[i * d + i] = 1.0; // W1 = I
            data[d * d + i * d + i] = 1.0; // W2 = I
            data[2 * d * d + i] = 0.3 + i as f64; // w3 arbitrary
        }
        let theta = ParamVector::new(arch, data).unwrap();
        let x = ImageTensor::new(vec![0.5, 1.0, 2.0, 0.25], Grid::new(2, 2)).unwrap();
        let mut v = vec![0.0; theta.len()];
        let v3 = [1.5, -2.0, 0.5, 3.0];
        v[2 * d * d..].copy_from_slice(&v3);
        let out = mixed_vjp(&theta, &x, &v).unwrap();
        for (o, e) in out.iter().zip(&v3) {
            assert!((o - e).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_vjp_matches_finite_differences_of_directional_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let arch = Arch::new(8, 6, 5);
            let theta = random_params(arch, &mut rng);
            let x = resample_away_from_kinks(&theta, Grid::new(2, 4), &mut rng);
            let v: Vec<f64> = (0..theta.len())
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let out = mixed_vjp(&theta, &x, &v).unwrap();
            // h(x) = <v, grad_params(theta, x)>
            let h = |xi: &ImageTensor| -> f64 {
                grad_params(&theta, xi)
                    .unwrap()
                    .iter()
                    .zip(&v)
                    .map(|(g, vv)| g * vv)
                    .sum()
            };
            let step = 1e-5;
            for i in 0..arch.d {
                let fd = central_diff(
                    |val| {
                        let mut xp = x.clone();
                        xp.data[i] = val;
                        h(&xp)
                    },
                    x.data[i],
                    step,
                );
                let scale = out[i].abs().max(fd.abs()).max(1e-5);
                assert!(
                    (out[i] - fd).abs() / scale <= 1e-4,
                    "coord {i}: analytic {} vs fd {fd}",
                    out[i]
                );
            }
        }
    }

    #[test]
    fn euler_identities_for_both_homogeneity_degrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let arch = Arch::new(9, 6, 5);
            let theta = random_params(arch, &mut rng);
            let x = crate::testutil::image_with_clear_output(
                |img| mlp_forward(&theta, img).unwrap(),
                Grid::new(3, 3),
                &mut rng,
                0.02,
            );
            let f = mlp_forward(&theta, &x).unwrap();

            // degree 1 in the input: <grad_x phi, x> = phi
            let gx = grad_input(&theta, &x).unwrap();
            let dot_x: f64 = gx.iter().zip(&x.data).map(|(a, b)| a * b).sum();
            assert!(
                (dot_x - f).abs() <= 1e-8 * f.abs().max(1e-9),
                "input euler: <grad, x> = {dot_x}, phi = {f}"
            );

            // degree 3 in the parameters: <grad_theta phi, theta> = 3 phi
            let gt = grad_params(&theta, &x).unwrap();
            let dot_t: f64 = gt.iter().zip(&theta.data).map(|(a, b)| a * b).sum();
            assert!(
                (dot_t - 3.0 * f).abs() <= 1e-8 * (3.0 * f).abs().max(1e-9),
                "parameter euler: <grad, theta> = {dot_t}, 3 phi = {}",
                3.0 * f
            );
        }
    }
}
