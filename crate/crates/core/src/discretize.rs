//! Pseudospectral discretization: the ODE on `R^{(n+1)d}`, its linearization
//! `A_n`, and the discrete characteristic matrix `Δ_n`.
//!
//! State layout is `(y_0, y_1, ..., y_n)`, one block of length `d` per node.
//! With `v(λ) = (D - λI)^{-1} D𝟏`, the eigenfunction `e^{λθ}` is replaced by
//! the interpolant of `(1, v(λ))` and `s_k(λ)` is its value at `-τ_k`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;

use crate::charfn::{self, CharFn};
use crate::error::{Error, Result};
use crate::mesh::{DiffOp, Mesh};
use crate::model::{DdeModel, LinearPart};

/// Condition estimate above which `D - λI` is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e14;
const CACHE_LIMIT: usize = 512;

type ComplexLu = LU<Complex64, Dyn, Dyn>;

/// Factorization of `D - λI` together with the two lag-solves.
pub struct LagSolve {
    lu: ComplexLu,
    /// `(D - λI)^{-1} D𝟏`
    pub v: DVector<Complex64>,
    /// `(D - λI)^{-2} D𝟏`, the λ-derivative of `v`.
    pub dv: DVector<Complex64>,
    pub condition: f64,
}

impl LagSolve {
    /// `(D - λI)^{-1} b`.
    pub fn solve(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        self.lu.solve(b).expect("factorization checked at construction")
    }
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Discrete characteristic matrix `Δ_n(λ) = λI - Σ_k C_k s_k(λ)`.
pub struct CharFnN {
    linear: LinearPart,
    mesh: Mesh,
    diff: DiffOp,
    d_ones: DVector<f64>,
    lag_basis: Vec<Vec<f64>>,
    cache: Mutex<HashMap<(u64, u64), Arc<LagSolve>>>,
}

impl Clone for CharFnN {
    fn clone(&self) -> Self {
        Self {
            linear: self.linear.clone(),
            mesh: self.mesh.clone(),
            diff: self.diff.clone(),
            d_ones: self.d_ones.clone(),
            lag_basis: self.lag_basis.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for CharFnN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharFnN")
            .field("n", &self.mesh.degree())
            .field("linear", &self.linear)
            .finish_non_exhaustive()
    }
}

impl CharFnN {
    pub fn new(linear: LinearPart, n: usize) -> Result<Self> {
        let mesh = Mesh::chebyshev(n)?;
        let diff = mesh.diff_op();
        let d_ones = diff.d_ones();
        let lag_basis = linear.delays.iter().map(|&tau| mesh.basis(-tau)).collect();
        Ok(Self {
            linear,
            mesh,
            diff,
            d_ones,
            lag_basis,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn diff(&self) -> &DiffOp {
        &self.diff
    }

    pub fn n(&self) -> usize {
        self.mesh.degree()
    }

    /// `ℓ_0..ℓ_n` evaluated at `-τ_k`.
    pub fn lag_basis(&self) -> &[Vec<f64>] {
        &self.lag_basis
    }

    /// Factorizes `D - λI` (cached per λ) and performs the lag-solves.
    pub fn lag_solve(&self, lambda: Complex64) -> Result<Arc<LagSolve>> {
        let key = (lambda.re.to_bits(), lambda.im.to_bits());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let n = self.n();
        let m = to_complex(&self.diff.d) - DMatrix::<Complex64>::identity(n, n) * lambda;
        let condition = charfn::condition_1(&m);
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned { lambda, condition });
        }
        let lu = m.lu();
        let rhs = self.d_ones.map(|v| Complex64::new(v, 0.0));
        let v = lu.solve(&rhs).ok_or(Error::IllConditioned {
            lambda,
            condition: f64::INFINITY,
        })?;
        let dv = lu.solve(&v).ok_or(Error::IllConditioned {
            lambda,
            condition: f64::INFINITY,
        })?;
        let solved = Arc::new(LagSolve { lu, v, dv, condition });
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, solved.clone());
        Ok(solved)
    }

    fn at_lags(&self, head: Complex64, tail: &DVector<Complex64>) -> Vec<Complex64> {
        self.lag_basis
            .iter()
            .map(|b| {
                tail.iter()
                    .zip(&b[1..])
                    .fold(head * b[0], |acc, (y, &l)| acc + y * l)
            })
            .collect()
    }

    /// `M_j = Σ_k C_k ℓ_j(-τ_k)`, `j = 0..n`.
    pub fn top_blocks(&self) -> Vec<DMatrix<f64>> {
        let d = self.linear.dim();
        (0..=self.n())
            .map(|j| {
                self.linear
                    .coeffs
                    .iter()
                    .zip(&self.lag_basis)
                    .fold(DMatrix::zeros(d, d), |acc, (c, b)| acc + c * b[j])
            })
            .collect()
    }

    /// The matrix `A_n` of the linearized pseudospectral ODE.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let d = self.linear.dim();
        let size = (n + 1) * d;
        let mut a = DMatrix::zeros(size, size);
        for (j, mj) in self.top_blocks().iter().enumerate() {
            a.view_mut((0, j * d), (d, d)).copy_from(mj);
        }
        for i in 0..n {
            for c in 0..d {
                let row = (i + 1) * d + c;
                a[(row, c)] = -self.d_ones[i];
                for j in 0..n {
                    a[(row, (j + 1) * d + c)] = self.diff.d[(i, j)];
                }
            }
        }
        a
    }

    /// Right eigenvector `(p*, p* ⊗ v(λ))` of `A_n` for a kernel vector `p*` of `Δ_n(λ)`.
    pub fn eigvec_right(&self, lambda: Complex64, p_star: &[Complex64]) -> Result<Vec<Complex64>> {
        let d = self.dim();
        if p_star.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: p_star.len(),
            });
        }
        let p = DVector::from_column_slice(p_star);
        let res = (self.eval(lambda)? * &p).norm();
        if res > 1e-8 * (1.0 + lambda.norm()) * p.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::Residual(res));
        }
        let ls = self.lag_solve(lambda)?;
        let mut out = p_star.to_vec();
        for j in 0..self.n() {
            out.extend(p_star.iter().map(|&pc| pc * ls.v[j]));
        }
        Ok(out)
    }

    /// Left eigenvector `q` of `A_n` (`qᵀ A_n = λ qᵀ`), with head `q*` a left
    /// kernel vector of `Δ_n(λ)`, normalized so that `q·p = 1` for the right
    /// eigenvector built from `p*` (bilinear dot, no conjugation).
    pub fn eigvec_left(&self, lambda: Complex64, p_star: &[Complex64], q_star: &[Complex64]) -> Result<Vec<Complex64>> {
        let d = self.dim();
        let n = self.n();
        let p = self.eigvec_right(lambda, p_star)?;
        let margin = {
            let qs = DVector::from_column_slice(q_star);
            let ps = DVector::from_column_slice(p_star);
            (qs.transpose() * self.dlambda(lambda)? * ps)[(0, 0)].norm()
        };
        if margin < 1e-10 * (1.0 + lambda.norm()) {
            return Err(Error::NotSimple(margin));
        }
        // (λI - Dᵀ) Q = (M_iᵀ q*)_i, one column per component
        let m = DMatrix::<Complex64>::identity(n, n) * lambda - to_complex(&self.diff.d.transpose());
        let lu = m.lu();
        let blocks = self.top_blocks();
        let qs = DVector::from_column_slice(q_star);
        let mut tail = DMatrix::<Complex64>::zeros(n, d);
        let mut rhs = DMatrix::<Complex64>::zeros(n, d);
        for i in 0..n {
            let r = to_complex(&blocks[i + 1]).transpose() * &qs;
            rhs.row_mut(i).copy_from(&r.transpose());
        }
        for c in 0..d {
            let col = lu.solve(&rhs.column(c).into_owned()).ok_or(Error::IllConditioned {
                lambda,
                condition: f64::INFINITY,
            })?;
            tail.set_column(c, &col);
        }
        let mut q = q_star.to_vec();
        for i in 0..n {
            q.extend(tail.row(i).iter().copied());
        }
        let qp: Complex64 = q.iter().zip(&p).map(|(a, b)| a * b).sum();
        Ok(q.into_iter().map(|v| v / qp).collect())
    }

    /// `(λI - A_n)^{-1} ζ` via two lag-solves and one `d×d` solve.
    pub fn resolvent_apply(&self, lambda: Complex64, zeta: &[Complex64]) -> Result<Vec<Complex64>> {
        let d = self.dim();
        let n = self.n();
        if zeta.len() != (n + 1) * d {
            return Err(Error::LengthMismatch {
                expected: (n + 1) * d,
                got: zeta.len(),
            });
        }
        let ls = self.lag_solve(lambda)?;
        // W = (D - λI)^{-1} Z, per component
        let mut w = DMatrix::<Complex64>::zeros(n, d);
        for c in 0..d {
            let z = DVector::from_iterator(n, (0..n).map(|i| zeta[(i + 1) * d + c]));
            w.set_column(c, &ls.solve(&z));
        }
        let blocks = self.top_blocks();
        let mut rhs = DVector::from_column_slice(&zeta[..d]);
        for j in 0..n {
            rhs -= to_complex(&blocks[j + 1]) * w.row(j).transpose();
        }
        let delta = self.eval(lambda)?;
        let scale = charfn::characteristic_scale(&self.linear, lambda, &self.lag_values(lambda)?);
        let x0 = charfn::solve_characteristic(&delta, rhs.as_slice(), lambda, scale)?;
        let mut out = x0.clone();
        for j in 0..n {
            out.extend((0..d).map(|c| ls.v[j] * x0[c] - w[(j, c)]));
        }
        Ok(out)
    }
}

impl CharFn for CharFnN {
    fn linear(&self) -> &LinearPart {
        &self.linear
    }

    fn lag_values(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        let ls = self.lag_solve(lambda)?;
        Ok(self.at_lags(Complex64::new(1.0, 0.0), &ls.v))
    }

    fn lag_derivatives(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        let ls = self.lag_solve(lambda)?;
        Ok(self.at_lags(Complex64::new(0.0, 0.0), &ls.dv))
    }

    fn degree(&self) -> Option<usize> {
        Some(self.n())
    }
}

/// The pseudospectral ODE of a model at fixed parameters.
#[derive(Debug, Clone)]
pub struct PsSystem {
    model: DdeModel,
    equilibrium: Vec<f64>,
    charfn: CharFnN,
}

impl PsSystem {
    /// Discretizes `model` at degree `n` around the equilibrium `x̄`.
    pub fn new(model: DdeModel, n: usize, equilibrium: Vec<f64>) -> Result<Self> {
        let linear = model.linearize(&equilibrium)?;
        let charfn = CharFnN::new(linear, n)?;
        Ok(Self {
            model,
            equilibrium,
            charfn,
        })
    }

    /// Discretizes around the equilibrium reached from the model's hint.
    pub fn at_default_equilibrium(model: DdeModel, n: usize) -> Result<Self> {
        let x = model.default_equilibrium()?;
        Self::new(model, n, x)
    }

    pub fn model(&self) -> &DdeModel {
        &self.model
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    pub fn charfn(&self) -> &CharFnN {
        &self.charfn
    }

    pub fn n(&self) -> usize {
        self.charfn.n()
    }

    pub fn mesh(&self) -> &Mesh {
        self.charfn.mesh()
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn state_len(&self) -> usize {
        (self.n() + 1) * self.dim()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        self.charfn.matrix()
    }

    /// The equilibrium replicated on every node.
    pub fn equilibrium_state(&self) -> Vec<f64> {
        (0..=self.n()).flat_map(|_| self.equilibrium.iter().copied()).collect()
    }

    /// Right-hand side of the pseudospectral ODE.
    pub fn rhs(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; state.len()];
        self.rhs_into(state, &mut out)?;
        Ok(out)
    }

    pub fn rhs_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let n = self.n();
        if state.len() != (n + 1) * d || out.len() != state.len() {
            return Err(Error::LengthMismatch {
                expected: (n + 1) * d,
                got: state.len(),
            });
        }
        let mut lags = vec![0.0; self.model.n_slots()];
        for (k, b) in self.charfn.lag_basis().iter().enumerate() {
            for c in 0..d {
                lags[k * d + c] = b.iter().enumerate().map(|(j, l)| l * state[j * d + c]).sum();
            }
        }
        let top = self.model.eval(&lags)?;
        out[..d].copy_from_slice(&top);
        let dm = &self.charfn.diff().d;
        let d1 = &self.charfn.d_ones;
        for i in 0..n {
            for c in 0..d {
                let mut acc = -d1[i] * state[c];
                for j in 0..n {
                    acc += dm[(i, j)] * state[(j + 1) * d + c];
                }
                out[(i + 1) * d + c] = acc;
            }
        }
        Ok(())
    }
}
