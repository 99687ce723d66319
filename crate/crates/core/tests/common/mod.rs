//! Test-side oracles and property checks shared by the integration tests.
#![allow(dead_code)]

pub mod props;

use std::f64::consts::PI;

use num_complex::Complex64;

/// Hopf point of the blowflies DDE at fixed `mu`: bisection on
/// `ω cot ω = -μ` over `(π/2, π)`, then `b2 = -ω / sin ω` and
/// `β = μ exp(1 - b2/μ)`. Independent of the library.
pub fn blowflies_hopf_oracle(mu: f64) -> (f64, f64) {
    let g = |w: f64| w * w.cos() / w.sin() + mu;
    let (mut lo, mut hi) = (PI / 2.0, PI - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let w = 0.5 * (lo + hi);
    let b2 = -w / w.sin();
    (w, mu * (1.0 - b2 / mu).exp())
}

/// `β/μ` on the DDE Hopf curve of the blowflies at `mu`.
pub fn beta_over_mu_oracle(mu: f64) -> f64 {
    let (_, beta) = blowflies_hopf_oracle(mu);
    beta / mu
}

/// Roots of the monic polynomial `z^m + c[1] z^{m-1} + ... + c[m]`
/// (`c[0]` must be 1) by Durand-Kerner iteration.
pub fn durand_kerner(c: &[f64]) -> Vec<Complex64> {
    let m = c.len() - 1;
    let p = |z: Complex64| c.iter().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a);
    let seed = Complex64::new(0.4, 0.9);
    let radius = 1.0 + c.iter().skip(1).map(|a| a.abs()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..m).map(|k| seed.powu(k as u32) * radius).collect();
    for _ in 0..2000 {
        let mut delta = 0.0f64;
        for i in 0..m {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..m {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = p(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * radius {
            break;
        }
    }
    // Newton polish on the polynomial itself.
    let dp = |x: Complex64| {
        c.iter()
            .take(m)
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (k, &a)| acc * x + a * (m - k) as f64)
    };
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let d = dp(*zi);
            if d.norm() > 0.0 {
                *zi -= p(*zi) / d;
            }
        }
    }
    z
}

/// Largest distance from a point of `a` to the nearest point of `b`.
pub fn max_nearest(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// `A_2` characteristic cubic `(λ - b1)(λ² + 3λ + 4) - b2(4 - λ)`.
pub fn cubic_n2(b1: f64, b2: f64) -> [f64; 4] {
    [1.0, 3.0 - b1, 4.0 - 3.0 * b1 + b2, -4.0 * b1 - 4.0 * b2]
}
