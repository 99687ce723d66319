//! Delay differential equation models `x'(t) = f(x(t - τ_0), ..., x(t - τ_m); α)`
//! with point delays `0 = τ_0 < τ_1 < ... ≤ 1` and an expression right-hand side.

pub mod catalog;
pub mod expr;
pub mod jet;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use expr::{Bound, Symbol};
use jet::{Jet3, Scalar};

pub use catalog::{blowflies, builtin, fluidflow, BUILTIN_NAMES};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dim: usize,
    pub delays: Vec<f64>,
    pub rhs: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium_hint: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdeModel {
    dim: usize,
    delays: Vec<f64>,
    rhs_text: Vec<String>,
    rhs: Vec<Bound>,
    param_names: Vec<String>,
    param_values: Vec<f64>,
    equilibrium_hint: Option<Vec<f64>>,
}

impl DdeModel {
    pub fn new(
        dim: usize,
        delays: Vec<f64>,
        rhs: &[&str],
        params: &[(&str, f64)],
        equilibrium_hint: Option<Vec<f64>>,
    ) -> Result<Self> {
        Self::from_file(ModelFile {
            dim,
            delays,
            rhs: rhs.iter().map(|s| s.to_string()).collect(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            equilibrium_hint,
        })
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        let ModelFile {
            dim,
            delays,
            rhs,
            params,
            equilibrium_hint,
        } = file;
        let invalid = |m: String| Err(Error::InvalidModel(m));
        if dim == 0 {
            return invalid("dimension must be positive".into());
        }
        if rhs.len() != dim {
            return invalid(format!("expected {dim} right-hand sides, got {}", rhs.len()));
        }
        if delays.first() != Some(&0.0) {
            return invalid("the first delay must be 0".into());
        }
        if delays.iter().any(|t| !t.is_finite() || !(0.0..=1.0).contains(t)) {
            return invalid("delays must lie in [0, 1]".into());
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("delays must be strictly increasing".into());
        }
        if let Some(h) = &equilibrium_hint {
            if h.len() != dim {
                return invalid(format!("equilibrium hint has length {}, expected {dim}", h.len()));
            }
        }
        for (name, v) in &params {
            let ok = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !ok {
                return invalid(format!("`{name}` is not a valid parameter name"));
            }
            if !v.is_finite() {
                return invalid(format!("parameter `{name}` is not finite"));
            }
        }
        let param_names: Vec<String> = params.keys().cloned().collect();
        let param_values: Vec<f64> = params.values().copied().collect();
        let nlags = delays.len();
        let slots = nlags * dim;
        let mut names: Vec<String> = (0..nlags)
            .flat_map(|k| (0..dim).map(move |i| format!("x{i}@{k}")))
            .collect();
        names.extend(param_names.iter().cloned());
        let resolve = |s: &Symbol| match s {
            Symbol::State { component, lag } if *component < dim && *lag < nlags => {
                Some(lag * dim + component)
            }
            Symbol::State { .. } => None,
            Symbol::Name(n) => param_names.iter().position(|p| p == n).map(|p| slots + p),
        };
        let bound = rhs
            .iter()
            .map(|text| expr::parse(text)?.bind(&resolve, names.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            delays,
            rhs_text: rhs,
            rhs: bound,
            param_names,
            param_values,
            equilibrium_hint,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidModel(e.to_string()))?;
        Self::from_file(file)
    }

    /// Built-in name or path to a JSON model file.
    pub fn load(source: &str) -> Result<Self> {
        if let Some(m) = builtin(source) {
            return Ok(m);
        }
        let path = Path::new(source);
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidModel(format!("cannot read `{source}`: {e}")))?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            dim: self.dim,
            delays: self.delays.clone(),
            rhs: self.rhs_text.clone(),
            params: self.params(),
            equilibrium_hint: self.equilibrium_hint.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn n_lags(&self) -> usize {
        self.delays.len()
    }

    /// Length of the lagged state vector `(x(t-τ_0), ..., x(t-τ_m))`.
    pub fn n_slots(&self) -> usize {
        self.delays.len() * self.dim
    }

    pub fn rhs_text(&self) -> &[String] {
        &self.rhs_text
    }

    pub fn equilibrium_hint(&self) -> Option<&[f64]> {
        self.equilibrium_hint.as_deref()
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.param_names
            .iter()
            .cloned()
            .zip(self.param_values.iter().copied())
            .collect()
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    fn param_index(&self, name: &str) -> Result<usize> {
        self.param_names
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        Ok(self.param_values[self.param_index(name)?])
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.param_index(name)?;
        self.param_values[i] = value;
        Ok(())
    }

    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut m = self.clone();
        m.set_param(name, value)?;
        Ok(m)
    }

    /// Evaluates the right-hand side on a lagged state, `lags[k*d + i] = x_i(t - τ_k)`.
    pub fn eval<S: Scalar>(&self, lags: &[S]) -> Result<Vec<S>> {
        let params: Vec<S> = self.param_values.iter().map(|&v| S::constant(v)).collect();
        self.eval_with_params(lags, &params)
    }

    pub fn eval_with_params<S: Scalar>(&self, lags: &[S], params: &[S]) -> Result<Vec<S>> {
        if lags.len() != self.n_slots() {
            return Err(Error::LengthMismatch {
                expected: self.n_slots(),
                got: lags.len(),
            });
        }
        let mut vars = Vec::with_capacity(lags.len() + params.len());
        vars.extend_from_slice(lags);
        vars.extend_from_slice(params);
        self.rhs.iter().map(|f| f.eval(&vars)).collect()
    }

    fn replicate<T: Copy>(&self, x: &[T]) -> Vec<T> {
        (0..self.n_lags()).flat_map(|_| x.iter().copied()).collect()
    }

    /// Right-hand side with every lag equal to `x`.
    pub fn collapsed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        self.eval(&self.replicate(x))
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Jets of all right-hand sides along `base + t·dir` in the full variable
    /// space (lagged state followed by parameters).
    fn jets(&self, base: &[f64], dir_state: &[Complex64], dir_params: &[Complex64]) -> Result<Vec<Jet3>> {
        let lags: Vec<Jet3> = base
            .iter()
            .zip(dir_state)
            .map(|(&x, &u)| Jet3::variable(Complex64::new(x, 0.0), u))
            .collect();
        let params: Vec<Jet3> = self
            .param_values
            .iter()
            .zip(dir_params)
            .map(|(&x, &u)| Jet3::variable(Complex64::new(x, 0.0), u))
            .collect();
        self.eval_with_params(&lags, &params)
    }

    fn zero_param_dir(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.param_values.len()]
    }

    /// Jacobian of the collapsed right-hand side.
    pub fn collapsed_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x.len())?;
        let base = self.replicate(x);
        let pz = self.zero_param_dir();
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let mut e = vec![Complex64::new(0.0, 0.0); self.dim];
            e[j] = Complex64::new(1.0, 0.0);
            let jets = self.jets(&base, &self.replicate(&e), &pz)?;
            for (i, f) in jets.iter().enumerate() {
                jac[(i, j)] = f.c[1].re;
            }
        }
        Ok(jac)
    }

    /// Newton iteration on the collapsed right-hand side.
    pub fn equilibrium(&self, guess: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(guess.len())?;
        let mut x = DVector::from_column_slice(guess);
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let f = DVector::from_vec(self.collapsed(x.as_slice())?);
            residual = f.amax();
            if !residual.is_finite() {
                break;
            }
            if residual < NEWTON_TOL * (1.0 + x.amax()) {
                return Ok(x.as_slice().to_vec());
            }
            let jac = self.collapsed_jacobian(x.as_slice())?;
            let step = jac.lu().solve(&f).ok_or_else(|| {
                Error::SingularJacobian(format!("equilibrium Jacobian singular at {:?}", x.as_slice()))
            })?;
            x -= step;
        }
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITER,
            residual,
        })
    }

    /// Equilibrium from the model's hint (or the origin).
    pub fn default_equilibrium(&self) -> Result<Vec<f64>> {
        let guess = self
            .equilibrium_hint
            .clone()
            .unwrap_or_else(|| vec![0.0; self.dim]);
        self.equilibrium(&guess)
    }

    /// `C_k = ∂f/∂x(t - τ_k)` at the constant state `x̄`.
    pub fn linearize(&self, xbar: &[f64]) -> Result<LinearPart> {
        self.check_dim(xbar.len())?;
        let base = self.replicate(xbar);
        let pz = self.zero_param_dir();
        let mut coeffs = vec![DMatrix::zeros(self.dim, self.dim); self.n_lags()];
        for (k, ck) in coeffs.iter_mut().enumerate() {
            for j in 0..self.dim {
                let mut dir = vec![Complex64::new(0.0, 0.0); self.n_slots()];
                dir[k * self.dim + j] = Complex64::new(1.0, 0.0);
                let jets = self.jets(&base, &dir, &pz)?;
                for (i, f) in jets.iter().enumerate() {
                    ck[(i, j)] = f.c[1].re;
                }
            }
        }
        LinearPart::new(self.delays.clone(), coeffs)
    }

    /// Linearization with parameter derivatives `dC_k/dα` registered for each
    /// named parameter (analytic, through the equilibrium's dependence on α).
    pub fn linearize_with(&self, xbar: &[f64], params: &[&str]) -> Result<LinearPart> {
        let mut lin = self.linearize(xbar)?;
        for &p in params {
            let d = self.coefficient_derivatives(xbar, p)?;
            lin = lin.with_derivative(p, d)?;
        }
        Ok(lin)
    }

    /// `dx̄/dα = -J^{-1} ∂f/∂α` with `J` the collapsed Jacobian.
    pub fn equilibrium_sensitivity(&self, xbar: &[f64], name: &str) -> Result<Vec<f64>> {
        let p = self.param_index(name)?;
        let base = self.replicate(xbar);
        let mut pdir = self.zero_param_dir();
        pdir[p] = Complex64::new(1.0, 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); self.n_slots()];
        let fa = DVector::from_iterator(
            self.dim,
            self.jets(&base, &zero, &pdir)?.iter().map(|j| j.c[1].re),
        );
        let jac = self.collapsed_jacobian(xbar)?;
        let dx = jac.lu().solve(&(-fa)).ok_or_else(|| {
            Error::SingularJacobian("equilibrium Jacobian singular in parameter sensitivity".into())
        })?;
        Ok(dx.as_slice().to_vec())
    }

    /// Analytic `dC_k/dα` along the equilibrium branch through `x̄`.
    pub fn coefficient_derivatives(&self, xbar: &[f64], name: &str) -> Result<Vec<DMatrix<f64>>> {
        let p = self.param_index(name)?;
        let dx = self.equilibrium_sensitivity(xbar, name)?;
        let to_c = |v: &[f64]| v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
        let w_state = to_c(&self.replicate(&dx));
        let mut w_param = self.zero_param_dir();
        w_param[p] = Complex64::new(1.0, 0.0);
        let mut out = vec![DMatrix::zeros(self.dim, self.dim); self.n_lags()];
        let pz = self.zero_param_dir();
        for (k, dk) in out.iter_mut().enumerate() {
            for j in 0..self.dim {
                let mut e = vec![Complex64::new(0.0, 0.0); self.n_slots()];
                e[k * self.dim + j] = Complex64::new(1.0, 0.0);
                let d2 = self.bilinear_full(xbar, (&e, &pz), (&w_state, &w_param))?;
                for (i, v) in d2.iter().enumerate() {
                    dk[(i, j)] = v.re;
                }
            }
        }
        Ok(out)
    }

    /// Central finite-difference `dC_k/dα` with step `1e-6·max(1, |α|)`,
    /// re-solving the equilibrium from `x̄` at the shifted parameters.
    pub fn coefficient_derivatives_fd(&self, xbar: &[f64], name: &str) -> Result<Vec<DMatrix<f64>>> {
        let a = self.param(name)?;
        let h = 1e-6 * a.abs().max(1.0);
        let side = |s: f64| -> Result<LinearPart> {
            let m = self.with_param(name, a + s * h)?;
            let x = m.equilibrium(xbar)?;
            m.linearize(&x)
        };
        let (plus, minus) = (side(1.0)?, side(-1.0)?);
        Ok(plus
            .coeffs
            .iter()
            .zip(&minus.coeffs)
            .map(|(p, m)| (p - m) / (2.0 * h))
            .collect())
    }

    fn bilinear_full(
        &self,
        xbar: &[f64],
        u: (&[Complex64], &[Complex64]),
        v: (&[Complex64], &[Complex64]),
    ) -> Result<Vec<Complex64>> {
        let base = self.replicate(xbar);
        let comb = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> {
            a.iter().zip(b).map(|(x, y)| x + y * s).collect()
        };
        let q = |s: f64| -> Result<Vec<Complex64>> {
            let jets = self.jets(&base, &comb(u.0, v.0, s), &comb(u.1, v.1, s))?;
            Ok(jets.iter().map(|j| j.derivative(2)).collect())
        };
        let (qp, qm) = (q(1.0)?, q(-1.0)?);
        Ok(qp.iter().zip(&qm).map(|(a, b)| (a - b) / 4.0).collect())
    }

    fn check_slots(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.n_slots() {
            return Err(Error::LengthMismatch {
                expected: self.n_slots(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Complex-bilinear `D²f(x̄)(u, v)` in the lagged-state variables.
    pub fn d2(&self, xbar: &[f64], u: &[Complex64], v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_dim(xbar.len())?;
        self.check_slots(u)?;
        self.check_slots(v)?;
        let pz = self.zero_param_dir();
        self.bilinear_full(xbar, (u, &pz), (v, &pz))
    }

    /// Complex-trilinear `D³f(x̄)(u, v, w)` in the lagged-state variables.
    pub fn d3(
        &self,
        xbar: &[f64],
        u: &[Complex64],
        v: &[Complex64],
        w: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        self.check_dim(xbar.len())?;
        self.check_slots(u)?;
        self.check_slots(v)?;
        self.check_slots(w)?;
        let base = self.replicate(xbar);
        let pz = self.zero_param_dir();
        let mut acc = vec![Complex64::new(0.0, 0.0); self.dim];
        for e2 in [1.0, -1.0] {
            for e3 in [1.0, -1.0] {
                let dir: Vec<Complex64> = (0..u.len()).map(|i| u[i] + v[i] * e2 + w[i] * e3).collect();
                let jets = self.jets(&base, &dir, &pz)?;
                for (a, j) in acc.iter_mut().zip(&jets) {
                    *a += j.derivative(3) * (e2 * e3);
                }
            }
        }
        Ok(acc.into_iter().map(|a| a / 24.0).collect())
    }

    /// `k`-th directional derivative `D^k f(x̄)(u, ..., u)`, `k ≤ 3`.
    pub fn directional(&self, xbar: &[f64], u: &[Complex64], k: usize) -> Result<Vec<Complex64>> {
        self.check_dim(xbar.len())?;
        self.check_slots(u)?;
        if k > 3 {
            return Err(Error::InvalidArgument("derivative order above 3".into()));
        }
        let jets = self.jets(&self.replicate(xbar), u, &self.zero_param_dir())?;
        Ok(jets.iter().map(|j| j.derivative(k)).collect())
    }
}

/// Point-delay linear operator `Lφ = Σ_k C_k φ(-τ_k)`, optionally with
/// parameter derivatives `C_k'`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPart {
    pub delays: Vec<f64>,
    pub coeffs: Vec<DMatrix<f64>>,
    derivs: BTreeMap<String, Vec<DMatrix<f64>>>,
}

impl LinearPart {
    pub fn new(delays: Vec<f64>, coeffs: Vec<DMatrix<f64>>) -> Result<Self> {
        if delays.len() != coeffs.len() || coeffs.is_empty() {
            return Err(Error::InvalidModel(
                "one coefficient matrix per delay is required".into(),
            ));
        }
        let d = coeffs[0].nrows();
        if coeffs.iter().any(|c| c.nrows() != d || c.ncols() != d) {
            return Err(Error::InvalidModel("coefficient matrices must be square of equal size".into()));
        }
        if coeffs.iter().any(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidModel("non-finite linear coefficient".into()));
        }
        Ok(Self {
            delays,
            coeffs,
            derivs: BTreeMap::new(),
        })
    }

    /// Scalar `b_1 x(t) + b_2 x(t - 1)`, with derivatives for `b1` and `b2`.
    pub fn scalar(b1: f64, b2: f64) -> Self {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        let lin = Self::new(vec![0.0, 1.0], vec![m(b1), m(b2)]).expect("valid scalar operator");
        lin.with_derivative("b1", vec![m(1.0), m(0.0)])
            .and_then(|l| l.with_derivative("b2", vec![m(0.0), m(1.0)]))
            .expect("consistent derivative shapes")
    }

    pub fn with_derivative(mut self, name: &str, d: Vec<DMatrix<f64>>) -> Result<Self> {
        if d.len() != self.coeffs.len() || d.iter().any(|m| m.shape() != self.coeffs[0].shape()) {
            return Err(Error::InvalidModel(format!(
                "derivative matrices for `{name}` do not match the operator shape"
            )));
        }
        self.derivs.insert(name.to_string(), d);
        Ok(self)
    }

    pub fn derivative(&self, name: &str) -> Result<&[DMatrix<f64>]> {
        self.derivs
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// `Σ_k C_k`, the Jacobian of the collapsed right-hand side.
    pub fn total(&self) -> DMatrix<f64> {
        self.coeffs.iter().fold(DMatrix::zeros(self.dim(), self.dim()), |a, c| a + c)
    }
}
