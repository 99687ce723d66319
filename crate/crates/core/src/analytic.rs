//! Exact characteristic matrix of point-delay DDEs and closed-form results for
//! the scalar equation `x' = b_1 x(t) + b_2 x(t-1) + G(x(t-1))`, in particular
//! Nicholson's blowflies with `h(x) = e^{-x}`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::charfn::CharFn;
use crate::discretize::CharFnN;
use crate::error::{Error, Result};
use crate::model::LinearPart;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Exact characteristic matrix `Δ_0(λ) = λI - Σ_k C_k e^{-λτ_k}`.
#[derive(Debug, Clone)]
pub struct CharFn0 {
    linear: LinearPart,
}

impl CharFn0 {
    pub fn new(linear: LinearPart) -> Self {
        Self { linear }
    }
}

impl CharFn for CharFn0 {
    fn linear(&self) -> &LinearPart {
        &self.linear
    }

    fn lag_values(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        Ok(self.linear.delays.iter().map(|&t| (-lambda * t).exp()).collect())
    }

    fn lag_derivatives(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        Ok(self
            .linear
            .delays
            .iter()
            .map(|&t| -t * (-lambda * t).exp())
            .collect())
    }

    fn degree(&self) -> Option<usize> {
        None
    }
}

/// `(b_1, b_2)` such that `λ - b_1 - b_2 e^{-λ}` vanishes at `λ = iω`.
pub fn dde_boundary(omega: f64) -> Result<(f64, f64)> {
    if omega.abs() < 1e-4 {
        let w2 = omega * omega;
        return Ok((
            1.0 - w2 / 3.0 - w2 * w2 / 45.0,
            -(1.0 + w2 / 6.0 + 7.0 * w2 * w2 / 360.0),
        ));
    }
    let (s, c) = omega.sin_cos();
    if s.abs() < 1e-12 {
        return Err(Error::Domain(format!(
            "the delay boundary is singular at ω = {omega} (a multiple of π)"
        )));
    }
    Ok((omega * c / s, -omega / s))
}

/// Last entry of `(D - λI)^{-1} D𝟏` for the degree-`n` mesh.
fn last_lag(n: usize, lambda: Complex64) -> Result<Complex64> {
    let cf = CharFnN::new(LinearPart::scalar(0.0, 0.0), n)?;
    let ls = cf.lag_solve(lambda)?;
    Ok(ls.v[n - 1])
}

fn lag_solves(n: usize, lambda: Complex64) -> Result<(Complex64, Complex64)> {
    let cf = CharFnN::new(LinearPart::scalar(0.0, 0.0), n)?;
    let ls = cf.lag_solve(lambda)?;
    Ok((ls.v[n - 1], ls.dv[n - 1]))
}

/// `(b_1, b_2)` such that the degree-`n` discrete characteristic function
/// vanishes at `λ = iω`.
pub fn ps_boundary(n: usize, omega: f64) -> Result<(f64, f64)> {
    let v = last_lag(n, Complex64::new(0.0, omega))?;
    if v.im.abs() <= 1e-14 * (1.0 + omega.abs()) {
        return Err(Error::Domain(format!(
            "the degree-{n} boundary is singular at ω = {omega}"
        )));
    }
    Ok((-omega * v.re / v.im, omega / v.im))
}

/// `(μ, β)` from `(b_1, b_2) = (-μ, μ(1 - ln(β/μ)))`.
pub fn to_mu_beta(b1: f64, b2: f64) -> Result<(f64, f64)> {
    if !(b1 < 0.0) {
        return Err(Error::Domain(format!(
            "b1 = {b1} corresponds to a nonpositive μ"
        )));
    }
    Ok((-b1, -b1 * (1.0 + b2 / b1).exp()))
}

/// `(b_1, b_2)` of the blowflies equation linearized at `ln(β/μ)`.
pub fn from_mu_beta(mu: f64, beta: f64) -> (f64, f64) {
    (-mu, mu * (1.0 - (beta / mu).ln()))
}

/// Second and third derivative of the shifted nonlinearity at zero.
pub fn blowfly_derivatives(mu: f64, beta: f64) -> (f64, f64) {
    let l = (beta / mu).ln();
    (mu * l - 2.0 * mu, -mu * l + 3.0 * mu)
}

fn assemble_c(b1: f64, b2: f64, b1w: Complex64, b2w: Complex64) -> Result<Complex64> {
    if (b1 + b2).abs() < 1e-14 * (1.0 + b1.abs()) {
        return Err(Error::Domain("b1 + b2 = 0: zero is a characteristic root".into()));
    }
    let (mu, beta) = to_mu_beta(b1, b2)?;
    let (g2, g3) = blowfly_derivatives(mu, beta);
    Ok(b1w * (0.5 * g3) - b1w * (g2 * g2 / (b1 + b2)) + b2w * (0.5 * g2 * g2))
}

/// Lyapunov coefficient `c_0(ω)` of the blowflies DDE along its Hopf boundary.
pub fn c0_blowfly(omega: f64) -> Result<Complex64> {
    let (b1, b2) = dde_boundary(omega)?;
    let e1 = (-I * omega).exp();
    let e2 = (-I * 2.0 * omega).exp();
    let den1 = 1.0 + b2 * e1;
    let den2 = 2.0 * I * omega - b1 - b2 * e2;
    if den1.norm() < 1e-14 || den2.norm() < 1e-14 {
        return Err(Error::Domain(format!("singular denominator at ω = {omega}")));
    }
    let b10 = e1 / den1;
    let b20 = e2 / den2 * b10;
    assemble_c(b1, b2, b10, b20)
}

/// Lyapunov coefficient `c_n(ω)` of the degree-`n` pseudospectral blowflies
/// system along its Hopf boundary.
pub fn cn_blowfly(n: usize, omega: f64) -> Result<Complex64> {
    let (b1, b2) = ps_boundary(n, omega)?;
    let (v1, dv1) = lag_solves(n, Complex64::new(0.0, omega))?;
    let v2 = last_lag(n, Complex64::new(0.0, 2.0 * omega))?;
    let den1 = 1.0 - b2 * dv1;
    let den2 = 2.0 * I * omega - b1 - b2 * v2;
    if den1.norm() < 1e-14 || den2.norm() < 1e-14 {
        return Err(Error::Domain(format!("singular denominator at ω = {omega}")));
    }
    let b1n = v1 * v1 * v1.conj() / den1;
    let b2n = v2 / den2 * b1n;
    assemble_c(b1, b2, b1n, b2n)
}

/// Closed forms of the degree-2 boundary.
pub fn ps_boundary_n2_closed(omega: f64) -> (f64, f64) {
    let w2 = omega * omega;
    let b1 = (7.0 * w2 - 16.0) / (w2 - 16.0);
    (b1, w2 - 4.0 + 3.0 * b1)
}

/// Closed forms of the degree-3 boundary.
pub fn ps_boundary_n3_closed(omega: f64) -> (f64, f64) {
    let w2 = omega * omega;
    let den = 9.0 * w2 * w2 - 1088.0 * w2 + 9216.0;
    (
        17.0 + 2048.0 * (7.0 * w2 - 72.0) / den,
        -(9.0 * w2 * w2 * w2 - 23.0 * w2 * w2 + 448.0 * w2 + 9216.0) / den,
    )
}

/// Branch derivative along the degree-2 boundary when `b_2` varies: the
/// complex closed form and its real part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaPrime {
    pub value: Complex64,
    pub re_closed: f64,
}

pub fn lambda_prime_n2(omega: f64) -> Result<LambdaPrime> {
    if omega == 0.0 || omega.abs() >= 4.0 || !omega.is_finite() {
        return Err(Error::Domain(format!("ω = {omega} outside (-4, 4) \\ {{0}}")));
    }
    let (b1, _) = ps_boundary_n2_closed(omega);
    let value = (I * omega - 4.0) / (omega * (-2.0 * omega + 6.0 * I - 2.0 * b1 * I));
    let re_closed = (14.0 - 2.0 * b1) / (4.0 * omega * omega + (6.0 - 2.0 * b1).powi(2));
    Ok(LambdaPrime { value, re_closed })
}

/// One sample of a Hopf boundary in the `(b_1, b_2)` plane with its image in
/// `(μ, β/μ)` where admissible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartRow {
    pub curve: String,
    pub branch: usize,
    pub omega: f64,
    pub b1: f64,
    pub b2: f64,
    pub mu: Option<f64>,
    pub beta_over_mu: Option<f64>,
    pub re_c: Option<f64>,
}

/// Radius of the ω-interval skipped around each boundary singularity.
pub const SINGULAR_EXCLUSION: f64 = 1e-3;

fn grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

fn bisect_root(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Singular frequencies of the degree-`n` boundary in `[lo, hi]`, located by
/// sign changes of `Im v_n(iω)` on the grid and refined by bisection.
pub fn ps_singularities(n: usize, lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    let h = |w: f64| last_lag(n, Complex64::new(0.0, w)).map(|v| v.im).unwrap_or(f64::NAN);
    let g = grid(lo, hi, steps.max(2));
    let mut out = Vec::new();
    for w in g.windows(2) {
        let (ha, hb) = (h(w[0]), h(w[1]));
        if ha == 0.0 {
            out.push(w[0]);
        } else if ha * hb < 0.0 {
            out.push(bisect_root(&h, w[0], w[1]));
        }
    }
    if h(hi) == 0.0 {
        out.push(hi);
    }
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    Ok(out)
}

fn chart_row(curve: &str, branch: usize, omega: f64, b: (f64, f64), c: Result<Complex64>) -> ChartRow {
    let mb = to_mu_beta(b.0, b.1).ok();
    ChartRow {
        curve: curve.to_string(),
        branch,
        omega,
        b1: b.0,
        b2: b.1,
        mu: mb.map(|m| m.0),
        beta_over_mu: mb.map(|m| m.1 / m.0),
        re_c: if mb.is_some() { c.ok().map(|z| z.re) } else { None },
    }
}

/// Samples of the exact (`curve = "dde"`) and degree-`n` (`curve = "ps"`)
/// boundaries on a uniform ω-grid. Branch indices increase across each
/// singularity; grid points within [`SINGULAR_EXCLUSION`] of one are skipped.
pub fn chart_blowfly(n: usize, omega_min: f64, omega_max: f64, steps: usize) -> Result<Vec<ChartRow>> {
    if !(omega_max > omega_min) || !omega_min.is_finite() || !omega_max.is_finite() {
        return Err(Error::InvalidArgument("empty ω-range".into()));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("at least two ω samples are required".into()));
    }
    let g = grid(omega_min, omega_max, steps);
    let mut rows = Vec::new();

    let dde_sing: Vec<f64> = {
        let kmin = (omega_min / PI).floor() as i64;
        let kmax = (omega_max / PI).ceil() as i64;
        (kmin..=kmax)
            .map(|k| k as f64 * PI)
            .filter(|s| *s != 0.0)
            .collect()
    };
    for &w in &g {
        if dde_sing.iter().any(|s| (w - s).abs() < SINGULAR_EXCLUSION) {
            continue;
        }
        let branch = dde_sing.iter().filter(|&&s| s < w).count();
        if let Ok(b) = dde_boundary(w) {
            rows.push(chart_row("dde", branch, w, b, c0_blowfly(w)));
        }
    }

    let ps_sing: Vec<f64> = ps_singularities(n, omega_min, omega_max, steps)?
        .into_iter()
        .filter(|s| s.abs() > 1e-9)
        .collect();
    for &w in &g {
        if ps_sing.iter().any(|s| (w - s).abs() < SINGULAR_EXCLUSION) {
            continue;
        }
        let branch = ps_sing.iter().filter(|&&s| s < w).count();
        if let Ok(b) = ps_boundary(n, w) {
            rows.push(chart_row("ps", branch, w, b, cn_blowfly(n, w)));
        }
    }
    Ok(rows)
}

/// `v(λ) = (D - λI)^{-1} D𝟏` for the degree-`n` mesh, exposed for oracles.
pub fn lag_vector(n: usize, lambda: Complex64) -> Result<DVector<Complex64>> {
    let cf = CharFnN::new(LinearPart::scalar(0.0, 0.0), n)?;
    Ok(cf.lag_solve(lambda)?.v.clone())
}
