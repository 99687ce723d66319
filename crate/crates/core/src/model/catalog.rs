//! Built-in models.

use super::DdeModel;

pub const BUILTIN_NAMES: [&str; 2] = ["blowflies", "fluidflow"];

/// Nicholson's blowflies with `h(x) = e^{-x}`, time scaled so the delay is 1:
/// `N'(t) = -μ N(t) + β N(t-1) e^{-N(t-1)}`.
pub fn blowflies() -> DdeModel {
    DdeModel::new(
        1,
        vec![0.0, 1.0],
        &["-mu*x0@0 + beta*x0@1*exp(-x0@1)"],
        &[("mu", 7.0), ("beta", 105.0)],
        Some(vec![2.0]),
    )
    .expect("built-in blowflies model is valid")
}

/// Sender/receiver fluid-flow model with window `w = x0` and queue `q = x1`,
/// round-trip time scaled to 1:
/// `w' = 1 - k w(t) w(t-1) q(t-1) / 2`, `q' = w(t) - c`.
/// The queue enters with the round-trip delay; with an undelayed `q(t)` the
/// equilibrium at `c = k = 1.5` is stable.
pub fn fluidflow() -> DdeModel {
    DdeModel::new(
        2,
        vec![0.0, 1.0],
        &["1 - k*x0@0*x0@1*x1@1/2", "x0@0 - c"],
        &[("k", 1.5), ("c", 1.5)],
        Some(vec![1.5, 0.6]),
    )
    .expect("built-in fluid-flow model is valid")
}

pub fn builtin(name: &str) -> Option<DdeModel> {
    match name {
        "blowflies" => Some(blowflies()),
        "fluidflow" => Some(fluidflow()),
        _ => None,
    }
}
