//! Hopf points of parametrized DDEs and of their pseudospectral
//! discretizations: Newton location on `det Δ(iω, α) = 0`, genericity
//! diagnostics, the first Lyapunov coefficient `c` and the direction
//! coefficient `a2 = Re c / σ`.

mod converge;
mod curve;

pub use converge::{convergence_study, ConvergenceRow, ConvergenceStudy};
pub use curve::{trace_hopf_curve, CurveOptions, CurvePoint, StabilityCurve, Termination, MIN_STEP};

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use crate::analytic::CharFn0;
use crate::charfn::{self, CharFn};
use crate::discretize::CharFnN;
use crate::eigen;
use crate::error::{Error, Result};
use crate::model::{DdeModel, LinearPart};

pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
pub const SIMPLICITY_FLOOR: f64 = 1e-10;
pub const RESONANCE_FLOOR: f64 = 1e-8;
pub const AXIS_WINDOW: f64 = 1e-6;
pub const DEFAULT_K_MAX: usize = 10;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which characteristic matrix to work with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// The DDE itself, `Δ_0`.
    Analytic,
    /// The pseudospectral ODE of the given polynomial degree, `Δ_n`.
    Pseudospectral(usize),
}

impl Discretization {
    pub fn degree(&self) -> Option<usize> {
        match self {
            Discretization::Analytic => None,
            Discretization::Pseudospectral(n) => Some(*n),
        }
    }

    pub fn evaluator(&self, linear: LinearPart) -> Result<Evaluator> {
        Ok(match self {
            Discretization::Analytic => Evaluator::Analytic(CharFn0::new(linear)),
            Discretization::Pseudospectral(n) => Evaluator::Pseudospectral(CharFnN::new(linear, *n)?),
        })
    }
}

/// `Δ_0` or `Δ_n` behind one type.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Evaluator {
    Analytic(CharFn0),
    Pseudospectral(CharFnN),
}

impl Evaluator {
    pub fn discrete(&self) -> Option<&CharFnN> {
        match self {
            Evaluator::Pseudospectral(cf) => Some(cf),
            Evaluator::Analytic(_) => None,
        }
    }

    /// Spectrum of `A_n` (discretized case only).
    pub fn spectrum(&self) -> Option<Result<Vec<Complex64>>> {
        self.discrete().map(|cf| eigen::eigenvalues(&cf.matrix()))
    }
}

impl CharFn for Evaluator {
    fn linear(&self) -> &LinearPart {
        match self {
            Evaluator::Analytic(cf) => cf.linear(),
            Evaluator::Pseudospectral(cf) => cf.linear(),
        }
    }

    fn lag_values(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        match self {
            Evaluator::Analytic(cf) => cf.lag_values(lambda),
            Evaluator::Pseudospectral(cf) => cf.lag_values(lambda),
        }
    }

    fn lag_derivatives(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        match self {
            Evaluator::Analytic(cf) => cf.lag_derivatives(lambda),
            Evaluator::Pseudospectral(cf) => cf.lag_derivatives(lambda),
        }
    }

    fn degree(&self) -> Option<usize> {
        match self {
            Evaluator::Analytic(_) => None,
            Evaluator::Pseudospectral(cf) => Some(cf.n()),
        }
    }
}

/// A model at fixed parameter values, linearized at an equilibrium.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: DdeModel,
    pub equilibrium: Vec<f64>,
    pub charfn: Evaluator,
}

impl Instance {
    /// Solves for the equilibrium starting from `guess` and registers
    /// `dC_k/dα` for each name in `params`. Parameter derivatives come from
    /// jets; central differences take over where the jets are unavailable.
    pub fn new(model: DdeModel, disc: Discretization, params: &[&str], guess: &[f64]) -> Result<Self> {
        let equilibrium = model.equilibrium(guess)?;
        let mut linear = model.linearize(&equilibrium)?;
        for &p in params {
            let d = match model.coefficient_derivatives(&equilibrium, p) {
                Ok(d) => d,
                Err(Error::NonDifferentiable { .. }) => model.coefficient_derivatives_fd(&equilibrium, p)?,
                Err(e) => return Err(e),
            };
            linear = linear.with_derivative(p, d)?;
        }
        let charfn = disc.evaluator(linear)?;
        Ok(Self {
            model,
            equilibrium,
            charfn,
        })
    }

    /// Starting guess for the equilibrium of `model`: its hint or the origin.
    pub fn initial_guess(model: &DdeModel) -> Vec<f64> {
        model
            .equilibrium_hint()
            .map(|h| h.to_vec())
            .unwrap_or_else(|| vec![0.0; model.dim()])
    }
}

/// Residual tolerance for `det Δ(iω)`.
pub fn residual_tolerance(omega: f64, dim: usize) -> f64 {
    NEWTON_TOL * (1.0 + omega.abs()).powi(dim as i32)
}

/// Critical eigenvectors at `λ = iω`: `p` with `Δ p = 0`, first component 1,
/// and `q` with `q Δ = 0`, normalized so that `q·D₁Δ p = 1`.
#[derive(Debug, Clone)]
pub struct CriticalVectors {
    pub p: Vec<Complex64>,
    pub q: Vec<Complex64>,
    /// `|d/dλ det Δ(iω)|`; equals `|D₁Δ(iω)|` in the scalar case.
    pub simplicity_margin: f64,
}

pub fn critical_vectors(cf: &dyn CharFn, omega: f64) -> Result<CriticalVectors> {
    let lambda = I * omega;
    let delta = cf.eval(lambda)?;
    let d1 = cf.dlambda(lambda)?;
    let margin = cf.det_dlambda(lambda)?.norm();
    if !(margin >= SIMPLICITY_FLOOR) {
        return Err(Error::NotSimple(margin));
    }
    let adj = charfn::adjugate(&delta);
    let d = delta.nrows();
    // adj Δ = (const) p qᵀ at a simple root: any nonzero column is p, any row is q.
    let col = (0..d)
        .max_by(|&a, &b| adj.column(a).norm().total_cmp(&adj.column(b).norm()))
        .unwrap_or(0);
    let row = (0..d)
        .max_by(|&a, &b| adj.row(a).norm().total_cmp(&adj.row(b).norm()))
        .unwrap_or(0);
    let mut p: Vec<Complex64> = adj.column(col).iter().copied().collect();
    let q0: Vec<Complex64> = adj.row(row).iter().copied().collect();
    let pivot = if p[0].norm() > 1e-12 * p.iter().map(|z| z.norm()).fold(0.0, f64::max) {
        p[0]
    } else {
        p.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(p[0])
    };
    for z in &mut p {
        *z /= pivot;
    }
    let m = bilinear(&q0, &d1, &p);
    if m.norm() == 0.0 {
        return Err(Error::NotSimple(0.0));
    }
    let q = q0.iter().map(|z| z / m).collect();
    Ok(CriticalVectors {
        p,
        q,
        simplicity_margin: margin,
    })
}

/// `qᵀ M p`.
fn bilinear(q: &[Complex64], m: &DMatrix<Complex64>, p: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..q.len() {
        for j in 0..p.len() {
            acc += q[i] * m[(i, j)] * p[j];
        }
    }
    acc
}

/// `σ = Re(q·D₂Δ(iω) p)`. The critical root moves with `Re λ'(α) = -σ`.
pub fn transversality(cf: &dyn CharFn, omega: f64, param: &str) -> Result<f64> {
    let v = critical_vectors(cf, omega)?;
    transversality_with(cf, omega, param, &v)
}

fn transversality_with(cf: &dyn CharFn, omega: f64, param: &str, v: &CriticalVectors) -> Result<f64> {
    let d2 = cf.dalpha(I * omega, param)?;
    Ok(bilinear(&v.q, &d2, &v.p).re)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceMargin {
    pub k: usize,
    /// `|det Δ(k iω)| / (1 + kω)^d`; `None` when it could not be evaluated.
    pub margin: Option<f64>,
}

/// Non-resonance verdict. Never an error: failures are recorded.
#[derive(Debug, Clone, Serialize)]
pub struct Nonresonance {
    pub margins: Vec<ResonanceMargin>,
    /// Smallest `|Re λ|` over the eigenvalues of `A_n` other than `±iω`.
    pub axis_clearance: Option<f64>,
    /// Eigenvalues of `A_n` other than `±iω` within the axis window.
    #[serde(with = "crate::serde_cx::vec")]
    pub axis_eigenvalues: Vec<Complex64>,
    pub passed: bool,
}

impl Nonresonance {
    pub fn min_margin(&self) -> Option<f64> {
        self.margins.iter().filter_map(|m| m.margin).reduce(f64::min)
    }
}

/// Margins `|det Δ(k iω)|` for `k ∈ {0, 2, ..., k_max}`, plus a scan of
/// `spectrum` (eigenvalues of `A_n`) for other roots near the imaginary axis.
pub fn nonresonance(
    cf: &dyn CharFn,
    omega: f64,
    k_max: usize,
    spectrum: Option<&[Complex64]>,
) -> Nonresonance {
    let d = cf.dim() as i32;
    let margins: Vec<ResonanceMargin> = std::iter::once(0)
        .chain(2..=k_max)
        .map(|k| {
            let kw = k as f64 * omega;
            let margin = cf
                .det(I * kw)
                .ok()
                .map(|det| det.norm() / (1.0 + kw).powi(d))
                .filter(|m| m.is_finite());
            ResonanceMargin { k, margin }
        })
        .collect();
    let mut passed = margins.iter().all(|m| m.margin.is_some_and(|v| v > RESONANCE_FLOOR));

    let mut axis_clearance = None;
    let mut axis_eigenvalues = Vec::new();
    if let Some(ev) = spectrum {
        let mut others: Vec<Complex64> = ev.to_vec();
        for target in [I * omega, -I * omega] {
            let nearest = others
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()));
            if let Some((idx, z)) = nearest {
                if (z - target).norm() < AXIS_WINDOW * (1.0 + omega) {
                    others.remove(idx);
                }
            }
        }
        axis_clearance = others.iter().map(|z| z.re.abs()).reduce(f64::min);
        axis_eigenvalues = others.into_iter().filter(|z| z.re.abs() < AXIS_WINDOW).collect();
        passed &= axis_eigenvalues.is_empty();
    }
    Nonresonance {
        margins,
        axis_clearance,
        axis_eigenvalues,
        passed,
    }
}

/// Lagged-state argument `(x(-τ_k))_k` of the eigenfunction `θ ↦ s(θ) p`:
/// slot `(k, i)` is `p_i s_k`.
fn lagged(p: &[Complex64], s: &[Complex64]) -> Vec<Complex64> {
    s.iter().flat_map(|&sk| p.iter().map(move |&pi| pi * sk)).collect()
}

/// First Lyapunov coefficient at the Hopf point `iω` of `cf`, the
/// linearization of `model` at `xbar`:
///
/// `c = ½ q·D³g(φ,φ,φ̄) + q·D²g(h₀,φ) + ½ q·D²g(h₂,φ̄)`
///
/// with `h₀ = Δ(0)^{-1} D²g(φ,φ̄)` and `h₂ = Δ(2iω)^{-1} D²g(φ,φ)` spread over
/// the lags like eigenfunctions at `0` and `2iω`.
pub fn lyapunov_c(model: &DdeModel, xbar: &[f64], cf: &dyn CharFn, omega: f64) -> Result<Complex64> {
    let v = critical_vectors(cf, omega)?;
    lyapunov_with(model, xbar, cf, omega, &v)
}

fn lyapunov_with(
    model: &DdeModel,
    xbar: &[f64],
    cf: &dyn CharFn,
    omega: f64,
    v: &CriticalVectors,
) -> Result<Complex64> {
    let lam = I * omega;
    let phi = lagged(&v.p, &cf.lag_values(lam)?);
    let phib: Vec<Complex64> = phi.iter().map(|z| z.conj()).collect();

    let t1 = model.d3(xbar, &phi, &phi, &phib)?;

    let zero = Complex64::new(0.0, 0.0);
    let s0 = cf.lag_values(zero)?;
    let r0 = model.d2(xbar, &phi, &phib)?;
    let scale0 = charfn::characteristic_scale(cf.linear(), zero, &s0);
    let h0 = charfn::solve_characteristic(&cf.eval(zero)?, &r0, zero, scale0)?;
    let t2 = model.d2(xbar, &lagged(&h0, &s0), &phi)?;

    let lam2 = lam * 2.0;
    let s2 = cf.lag_values(lam2)?;
    let r2 = model.d2(xbar, &phi, &phi)?;
    let scale2 = charfn::characteristic_scale(cf.linear(), lam2, &s2);
    let h2 = charfn::solve_characteristic(&cf.eval(lam2)?, &r2, lam2, scale2)?;
    let t3 = model.d2(xbar, &lagged(&h2, &s2), &phib)?;

    Ok((0..v.q.len())
        .map(|i| v.q[i] * (t1[i] * 0.5 + t2[i] + t3[i] * 0.5))
        .sum())
}

/// `a2 = Re c / σ`.
pub fn direction_a2(c: Complex64, sigma: f64) -> Result<f64> {
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(Error::NotTransversal(format!("sigma = {sigma}")));
    }
    Ok(c.re / sigma)
}

/// A located Hopf point with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct HopfPoint {
    pub param: String,
    pub alpha: f64,
    pub omega: f64,
    /// Polynomial degree, absent for the DDE itself.
    pub n: Option<usize>,
    pub equilibrium: Vec<f64>,
    #[serde(with = "crate::serde_cx::option")]
    pub c: Option<Complex64>,
    pub sigma: f64,
    pub a2: Option<f64>,
    pub simplicity_margin: f64,
    pub nonresonance: Nonresonance,
    pub residual: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    #[serde(with = "crate::serde_cx::vec")]
    pub p_star: Vec<Complex64>,
    #[serde(with = "crate::serde_cx::vec")]
    pub q_star: Vec<Complex64>,
    /// Non-fatal findings, e.g. `degenerate_hopf` or a failed Lyapunov evaluation.
    pub flags: Vec<String>,
}

/// Newton iteration on `h(ω, α) = (Re F, Im F)` with `F = det Δ(iω, α)`
/// (`F = Δ` for scalar models). The equilibrium is re-solved at every `α`.
pub fn find_hopf(
    model: &DdeModel,
    disc: Discretization,
    param: &str,
    omega_guess: f64,
    alpha_guess: f64,
) -> Result<HopfPoint> {
    if !(omega_guess > 0.0) {
        return Err(Error::Domain(format!("frequency guess must be positive, got {omega_guess}")));
    }
    model.param(param)?;
    let dim = model.dim();
    let mut guess = Instance::initial_guess(model);
    let (mut omega, mut alpha) = (omega_guess, alpha_guess);
    let mut inst = Instance::new(model.with_param(param, alpha)?, disc, &[param], &guess)?;
    let mut history = Vec::new();
    for it in 0..=NEWTON_MAX_ITER {
        guess.clone_from(&inst.equilibrium);
        let lam = I * omega;
        let f = inst.charfn.det(lam)?;
        let r = f.norm();
        history.push(r);
        if !r.is_finite() {
            break;
        }
        if r < residual_tolerance(omega, dim) {
            return finish(inst, param, alpha, omega, it, history);
        }
        if it == NEWTON_MAX_ITER {
            break;
        }
        let fl = inst.charfn.det_dlambda(lam)?;
        let fa = inst.charfn.det_dalpha(lam, param)?;
        let jac = Matrix2::new(-fl.im, fa.re, fl.re, fa.im);
        let det = jac.determinant();
        if !(det.abs() > 1e-14 * fl.norm() * fa.norm()) {
            return Err(Error::SingularJacobian(format!(
                "Hopf Jacobian singular at omega = {omega}, {param} = {alpha}"
            )));
        }
        let step = jac.try_inverse().expect("nonzero determinant") * Vector2::new(f.re, f.im);
        // Halve the step while the new parameter leaves the model's domain.
        let mut t = 1.0;
        loop {
            let (w, a) = (omega - t * step[0], alpha - t * step[1]);
            if !(w > 0.0) {
                return Err(Error::Domain(format!("frequency collapsed to {w}")));
            }
            match model
                .with_param(param, a)
                .and_then(|m| Instance::new(m, disc, &[param], &guess))
            {
                Ok(next) => {
                    inst = next;
                    omega = w;
                    alpha = a;
                    break;
                }
                Err(e) if t < 1e-3 => return Err(e),
                Err(_) => t *= 0.5,
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: NEWTON_MAX_ITER,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Fills in the diagnostics of a converged Hopf point.
fn finish(
    inst: Instance,
    param: &str,
    alpha: f64,
    omega: f64,
    iterations: usize,
    history: Vec<f64>,
) -> Result<HopfPoint> {
    let cf = &inst.charfn;
    let vecs = critical_vectors(cf, omega)?;
    let sigma = transversality_with(cf, omega, param, &vecs)?;
    let spectrum = cf.spectrum().transpose()?;
    let nonres = nonresonance(cf, omega, DEFAULT_K_MAX, spectrum.as_deref());
    let mut flags = Vec::new();
    if !nonres.passed {
        flags.push("resonance".to_string());
    }
    let c = match lyapunov_with(&inst.model, &inst.equilibrium, cf, omega, &vecs) {
        Ok(c) => Some(c),
        Err(e) => {
            flags.push(format!("lyapunov_{}", e.kind()));
            None
        }
    };
    let a2 = match c {
        Some(c) => match direction_a2(c, sigma) {
            Ok(a) => {
                if c.re == 0.0 {
                    flags.push("degenerate_hopf".into());
                }
                Some(a)
            }
            Err(_) => {
                flags.push("not_transversal".into());
                None
            }
        },
        None => None,
    };
    Ok(HopfPoint {
        param: param.to_string(),
        alpha,
        omega,
        n: cf.degree(),
        equilibrium: inst.equilibrium.clone(),
        c,
        sigma,
        a2,
        simplicity_margin: vecs.simplicity_margin,
        nonresonance: nonres,
        residual: history.last().copied().unwrap_or(0.0),
        iterations,
        residual_history: history,
        p_star: vecs.p,
        q_star: vecs.q,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{self, c0_blowfly, cn_blowfly};
    use crate::model::catalog;

    fn blowflies_at(mu: f64, beta: f64) -> DdeModel {
        catalog::blowflies().with_param("mu", mu).unwrap().with_param("beta", beta).unwrap()
    }

    #[test]
    fn analytic_blowflies_hopf_point() {
        let m = blowflies_at(3.0, 30.0);
        let h = find_hopf(&m, Discretization::Analytic, "beta", 2.0, 30.0).unwrap();
        let (b1, b2) = analytic::dde_boundary(h.omega).unwrap();
        let (mu, beta) = analytic::to_mu_beta(b1, b2).unwrap();
        assert!((mu - 3.0).abs() < 1e-9);
        assert!((beta - h.alpha).abs() < 1e-8 * beta);
        assert!(h.residual < residual_tolerance(h.omega, 1));
        assert!(h.nonresonance.passed);
        assert!(h.a2.is_some());
        let c0 = c0_blowfly(h.omega).unwrap();
        assert!((h.c.unwrap() - c0).norm() < 1e-10 * (1.0 + c0.norm()));
    }

    #[test]
    fn discrete_lyapunov_matches_closed_form() {
        let omega = 2.0;
        let (b1, b2) = analytic::ps_boundary(5, omega).unwrap();
        let (mu, beta) = analytic::to_mu_beta(b1, b2).unwrap();
        let m = blowflies_at(mu, beta);
        let inst = Instance::new(m.clone(), Discretization::Pseudospectral(5), &[], &[2.0]).unwrap();
        let c = lyapunov_c(&m, &inst.equilibrium, &inst.charfn, omega).unwrap();
        let cn = cn_blowfly(5, omega).unwrap();
        assert!((c - cn).norm() < 1e-10 * (1.0 + cn.norm()), "{c} vs {cn}");
    }

    #[test]
    fn resonance_at_transcritical_endpoint() {
        let cf = CharFn0::new(LinearPart::scalar(1.0, -1.0));
        let v = nonresonance(&cf, 1e-6, 10, None);
        assert!(!v.passed);
        assert!(v.margins[0].margin.unwrap() < 1e-8);
    }

    #[test]
    fn rejects_nonpositive_frequency_guess() {
        let m = blowflies_at(3.0, 30.0);
        assert!(matches!(
            find_hopf(&m, Discretization::Analytic, "beta", 0.0, 30.0),
            Err(Error::Domain(_))
        ));
    }
}
