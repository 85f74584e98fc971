//! Helpers shared by the unit tests: seeded random instances and the
//! central finite-difference oracle the derivative tests check against.

use crate::diff::{forward_record, Arch, ParamVector};
use crate::image::{Grid, ImageTensor};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Central difference `(f(a + eps) - f(a - eps)) / (2 eps)`.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, a: f64, eps: f64) -> f64 {
    (f(a + eps) - f(a - eps)) / (2.0 * eps)
}

/// Gaussian parameters with per-layer std `1/sqrt(fan_in)`.
pub fn random_params(arch: Arch, rng: &mut ChaCha8Rng) -> ParamVector {
    let mut data = Vec::with_capacity(arch.param_count());
    let s1 = 1.0 / (arch.d as f64).sqrt();
    let s2 = 1.0 / (arch.h1 as f64).sqrt();
    let s3 = 1.0 / (arch.h2 as f64).sqrt();
    for _ in 0..arch.h1 * arch.d {
        data.push(s1 * rng.sample::<f64, _>(StandardNormal));
    }
    for _ in 0..arch.h2 * arch.h1 {
        data.push(s2 * rng.sample::<f64, _>(StandardNormal));
    }
    for _ in 0..arch.h2 {
        data.push(s3 * rng.sample::<f64, _>(StandardNormal));
    }
    ParamVector::new(arch, data).unwrap()
}

/// I.i.d. `N(0, 1/d)` image, the reconstruction initializer's distribution.
pub fn random_image_std(grid: Grid, rng: &mut ChaCha8Rng) -> ImageTensor {
    let scale = 1.0 / (grid.len() as f64).sqrt();
    let data = (0..grid.len())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ImageTensor { data, grid }
}

/// Draw inputs until the model output is clear of cancellation
/// (`|phi(x)| >= min_abs`), so exact-identity checks are well conditioned.
pub fn image_with_clear_output(
    forward: impl Fn(&ImageTensor) -> f64,
    grid: Grid,
    rng: &mut ChaCha8Rng,
    min_abs: f64,
) -> ImageTensor {
    for _ in 0..2000 {
        let x = random_image_std(grid, rng);
        if forward(&x).abs() >= min_abs {
            return x;
        }
    }
    panic!("could not find an input with |phi(x)| >= {min_abs}");
}

/// Draw inputs until every pre-activation is at least `1e-6` from its ReLU
/// kink, so finite-difference probes cannot flip a mask.
pub fn resample_away_from_kinks(
    theta: &ParamVector,
    grid: Grid,
    rng: &mut ChaCha8Rng,
) -> ImageTensor {
    for _ in 0..1000 {
        let x = random_image_std(grid, rng);
        let rec = forward_record(theta, &x).unwrap();
        // a1/a2 store post-activations; a zero entry means the unit is off,
        // which is only dangerous if the raw pre-activation was near zero.
        // Recompute pre-activation magnitudes directly.
        let mut ok = true;
        let w1 = theta.w1();
        for r in 0..theta.arch.h1 {
            let z: f64 = w1[r * theta.arch.d..(r + 1) * theta.arch.d]
                .iter()
                .zip(&x.data)
                .map(|(a, b)| a * b)
                .sum();
            if z.abs() < 1e-6 {
                ok = false;
                break;
            }
        }
        if ok {
            let w2 = theta.w2();
            for r in 0..theta.arch.h2 {
                let z: f64 = w2[r * theta.arch.h1..(r + 1) * theta.arch.h1]
                    .iter()
                    .zip(&rec.a1)
                    .map(|(a, b)| a * b)
                    .sum();
                if z.abs() < 1e-6 {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return x;
        }
    }
    panic!("could not find an input away from all ReLU kinks");
}
