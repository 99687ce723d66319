//! Characteristic matrices `Δ(λ) = λI - Σ_k C_k s_k(λ)` of linear point-delay
//! operators, where `s_k(λ)` is the value at `-τ_k` of the (exact or
//! discretized) eigenfunction `θ ↦ e^{λθ}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::LinearPart;

/// Evaluator of a characteristic matrix and its derivatives.
pub trait CharFn: Send + Sync {
    fn linear(&self) -> &LinearPart;

    /// `s_k(λ)` for every delay.
    fn lag_values(&self, lambda: Complex64) -> Result<Vec<Complex64>>;

    /// `d s_k / dλ` for every delay.
    fn lag_derivatives(&self, lambda: Complex64) -> Result<Vec<Complex64>>;

    /// Polynomial degree of the discretization, `None` for the exact DDE.
    fn degree(&self) -> Option<usize>;

    fn dim(&self) -> usize {
        self.linear().dim()
    }

    fn eval(&self, lambda: Complex64) -> Result<DMatrix<Complex64>> {
        let s = self.lag_values(lambda)?;
        let d = self.dim();
        Ok(DMatrix::<Complex64>::identity(d, d) * lambda - weighted(&self.linear().coeffs, &s))
    }

    fn dlambda(&self, lambda: Complex64) -> Result<DMatrix<Complex64>> {
        let s = self.lag_derivatives(lambda)?;
        let d = self.dim();
        Ok(DMatrix::<Complex64>::identity(d, d) - weighted(&self.linear().coeffs, &s))
    }

    /// `-Σ_k C_k'(α) s_k(λ)` from the registered parameter derivatives.
    fn dalpha(&self, lambda: Complex64, param: &str) -> Result<DMatrix<Complex64>> {
        let dc = self.linear().derivative(param)?;
        let s = self.lag_values(lambda)?;
        Ok(-weighted(dc, &s))
    }

    fn det(&self, lambda: Complex64) -> Result<Complex64> {
        Ok(self.eval(lambda)?.determinant())
    }

    /// `d/dλ det Δ = tr(adj Δ · D₁Δ)`.
    fn det_dlambda(&self, lambda: Complex64) -> Result<Complex64> {
        Ok((adjugate(&self.eval(lambda)?) * self.dlambda(lambda)?).trace())
    }

    fn det_dalpha(&self, lambda: Complex64, param: &str) -> Result<Complex64> {
        Ok((adjugate(&self.eval(lambda)?) * self.dalpha(lambda, param)?).trace())
    }
}

/// `Σ_k C_k s_k` as a complex matrix.
pub fn weighted(coeffs: &[DMatrix<f64>], s: &[Complex64]) -> DMatrix<Complex64> {
    let d = coeffs[0].nrows();
    coeffs
        .iter()
        .zip(s)
        .fold(DMatrix::zeros(d, d), |acc, (c, &sk)| acc + c.map(|v| Complex64::new(v, 0.0)) * sk)
}

/// Classical adjugate (transposed cofactor matrix); `[1]` for `1×1`.
pub fn adjugate(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = m.nrows();
    if d == 1 {
        return DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    }
    DMatrix::from_fn(d, d, |i, j| {
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        minor.determinant() * sign
    })
}

/// 1-norm condition estimate of a square complex matrix (infinite when singular).
pub fn condition_1(m: &DMatrix<Complex64>) -> f64 {
    let norm1 = |a: &DMatrix<Complex64>| {
        a.column_iter()
            .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    match m.clone().try_inverse() {
        Some(inv) => {
            let c = norm1(m) * norm1(&inv);
            if c.is_finite() {
                c
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Solves `Δ x = b` for a characteristic matrix. `Δ` counts as singular when
/// its smallest singular value falls below `1e-12·scale`, where `scale`
/// measures the size of the terms that make up `Δ`.
pub fn solve_characteristic(
    delta: &DMatrix<Complex64>,
    b: &[Complex64],
    lambda: Complex64,
    scale: f64,
) -> Result<Vec<Complex64>> {
    let sv = delta.clone().singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > 1e-12 * scale) {
        return Err(Error::SingularCharacteristic(lambda));
    }
    let rhs = nalgebra::DVector::from_column_slice(b);
    delta
        .clone()
        .lu()
        .solve(&rhs)
        .map(|x| x.as_slice().to_vec())
        .ok_or(Error::SingularCharacteristic(lambda))
}

/// `1 + |λ| + Σ_k ‖C_k‖ |s_k|`, the magnitude of the terms of `Δ(λ)`.
pub fn characteristic_scale(lin: &LinearPart, lambda: Complex64, s: &[Complex64]) -> f64 {
    1.0 + lambda.norm()
        + lin
            .coeffs
            .iter()
            .zip(s)
            .map(|(c, sk)| c.amax() * sk.norm())
            .sum::<f64>()
}
