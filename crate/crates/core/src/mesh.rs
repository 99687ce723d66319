//! Chebyshev extremal meshes on `[-1, 0]`, barycentric Lagrange interpolation
//! and the collocation differentiation matrix.
//!
//! Node `θ_0 = 0` carries the "head" value of a discretized history, nodes
//! `θ_1..θ_n` the tail. Interpolation always uses the full `n + 1` point basis.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::error::{Error, Result};

/// Number of uniform grid points used when maximizing the Lebesgue function.
pub const LEBESGUE_GRID: usize = 2048;

/// Chebyshev extremal mesh `θ_j = (cos(jπ/n) - 1) / 2`, `j = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Differentiation data of a mesh: `D[i][j] = ℓ_j'(θ_i)` for `i, j = 1..n`
/// (stored zero-based) and `d0[i] = ℓ_0'(θ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOp {
    pub d: DMatrix<f64>,
    pub d0: DVector<f64>,
}

impl Mesh {
    pub fn chebyshev(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::DegenerateMesh);
        }
        let mut nodes: Vec<f64> = (0..=n)
            .map(|j| 0.5 * ((j as f64 * PI / n as f64).cos() - 1.0))
            .collect();
        nodes[0] = 0.0;
        nodes[n] = -1.0;
        let weights = barycentric_weights(&nodes);
        Ok(Self { n, nodes, weights })
    }

    /// Polynomial degree `n`; the mesh has `n + 1` nodes.
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Values `ℓ_0(θ), ..., ℓ_n(θ)` of the full Lagrange basis.
    pub fn basis(&self, theta: f64) -> Vec<f64> {
        basis_values(&self.nodes, &self.weights, theta)
    }

    /// `ℓ_j(θ)`.
    pub fn lagrange(&self, j: usize, theta: f64) -> f64 {
        assert!(j <= self.n, "basis index {j} out of range for degree {}", self.n);
        self.basis(theta)[j]
    }

    /// `y_0 ℓ_0(θ) + Σ_{j≥1} ℓ_j(θ) y_j`.
    pub fn interpolate<T>(&self, head: T, tail: &[T], theta: f64) -> Result<T>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        if tail.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: tail.len(),
            });
        }
        let basis = self.basis(theta);
        Ok(combine(&basis, head, tail))
    }

    /// Componentwise interpolation of a blocked state `(y_0, y_1, ..., y_n)`,
    /// each block of length `dim`.
    pub fn interpolate_blocks<T>(&self, state: &[T], dim: usize, theta: f64) -> Result<Vec<T>>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        let expected = (self.n + 1) * dim;
        if state.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: state.len(),
            });
        }
        let basis = self.basis(theta);
        Ok((0..dim)
            .map(|c| {
                basis
                    .iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (j, &l)| acc + state[j * dim + c] * l)
            })
            .collect())
    }

    pub fn diff_op(&self) -> DiffOp {
        let n = self.n;
        let x = &self.nodes;
        let w = &self.weights;
        let mut full = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..=n {
            let mut diag = 0.0;
            for j in 0..=n {
                if i != j {
                    let v = (w[j] / w[i]) / (x[i] - x[j]);
                    full[(i, j)] = v;
                    diag -= v;
                }
            }
            full[(i, i)] = diag;
        }
        DiffOp {
            d: full.view((1, 1), (n, n)).into_owned(),
            d0: full.view((1, 0), (n, 1)).column(0).into_owned(),
        }
    }

    /// Lebesgue constant of the reduced mesh `{θ_1, ..., θ_n}`, maximized over
    /// a uniform grid of [`LEBESGUE_GRID`] points. A grid maximum is a lower
    /// bound on the true constant.
    pub fn lebesgue_constant(&self) -> f64 {
        let reduced = &self.nodes[1..];
        let weights = barycentric_weights(reduced);
        (0..LEBESGUE_GRID)
            .map(|k| -(k as f64) / (LEBESGUE_GRID - 1) as f64)
            .map(|theta| {
                basis_values(reduced, &weights, theta)
                    .iter()
                    .map(|l| l.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl DiffOp {
    pub fn size(&self) -> usize {
        self.d.nrows()
    }

    /// `D𝟏`.
    pub fn d_ones(&self) -> DVector<f64> {
        DVector::from_iterator(self.size(), self.d.row_iter().map(|r| r.sum()))
    }
}

pub(crate) fn combine<T>(basis: &[f64], head: T, tail: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
{
    tail.iter()
        .zip(&basis[1..])
        .fold(head * basis[0], |acc, (&y, &l)| acc + y * l)
}

/// Barycentric weights `1 / Π_{m≠j} (x_j - x_m)`, rescaled so the largest has
/// unit magnitude. Differences are doubled to keep the products away from
/// underflow on a unit-length interval.
fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = (0..x.len())
        .map(|j| {
            let prod: f64 = (0..x.len())
                .filter(|&m| m != j)
                .map(|m| 2.0 * (x[j] - x[m]))
                .product();
            1.0 / prod
        })
        .collect();
    let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    w.iter_mut().for_each(|v| *v /= scale);
    w
}

/// Second (true) barycentric form with an exact-hit branch at the nodes.
fn basis_values(x: &[f64], w: &[f64], theta: f64) -> Vec<f64> {
    if let Some(hit) = x.iter().position(|&xj| theta == xj) {
        let mut out = vec![0.0; x.len()];
        out[hit] = 1.0;
        return out;
    }
    let mut out: Vec<f64> = x
        .iter()
        .zip(w)
        .map(|(&xj, &wj)| wj / (theta - xj))
        .collect();
    let denom: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= denom);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_meshes() {
        let m1 = Mesh::chebyshev(1).unwrap();
        assert_eq!(m1.nodes(), &[0.0, -1.0]);
        let m2 = Mesh::chebyshev(2).unwrap();
        assert_eq!(m2.nodes()[0], 0.0);
        assert!((m2.nodes()[1] + 0.5).abs() < 1e-16);
        assert_eq!(m2.nodes()[2], -1.0);
        let m4 = Mesh::chebyshev(4).unwrap();
        assert!((m4.nodes()[2] + 0.5).abs() < 1e-16);
    }

    #[test]
    fn zero_degree_rejected() {
        assert_eq!(Mesh::chebyshev(0), Err(Error::DegenerateMesh));
    }

    #[test]
    fn nodes_decrease_and_weights_alternate() {
        for n in 1..30 {
            let m = Mesh::chebyshev(n).unwrap();
            assert!(m.nodes().windows(2).all(|p| p[1] < p[0]));
            assert!(m.nodes().iter().all(|&t| (-1.0..=0.0).contains(&t)));
            assert!(m.weights().iter().all(|&w| w != 0.0));
            assert!(m.weights().windows(2).all(|p| p[0] * p[1] < 0.0));
        }
    }

    #[test]
    fn cardinality_and_unity() {
        let m = Mesh::chebyshev(5).unwrap();
        for (i, &t) in m.nodes().iter().enumerate() {
            for j in 0..=5 {
                assert_eq!(m.lagrange(j, t), if i == j { 1.0 } else { 0.0 });
            }
        }
        let m7 = Mesh::chebyshev(7).unwrap();
        let s: f64 = m7.basis(-0.3).iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn linear_basis() {
        let m = Mesh::chebyshev(1).unwrap();
        assert!((m.lagrange(0, -0.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn degree_two_differentiation_matrix() {
        let op = Mesh::chebyshev(2).unwrap().diff_op();
        let expected = [[0.0, -1.0], [4.0, -3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((op.d[(i, j)] - expected[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn d0_is_minus_d_ones() {
        for n in 1..=40 {
            let op = Mesh::chebyshev(n).unwrap().diff_op();
            let d1 = op.d_ones();
            let scale = op.d.amax().max(1.0);
            for i in 0..n {
                assert!((op.d0[i] + d1[i]).abs() <= 1e-13 * scale, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn cubic_derivative() {
        let m = Mesh::chebyshev(6).unwrap();
        let op = m.diff_op();
        let x = m.nodes();
        let y = DVector::from_iterator(6, x[1..].iter().map(|t| t.powi(3)));
        let dy = &op.d * y + &op.d0 * x[0].powi(3);
        for i in 0..6 {
            assert!((dy[i] - 3.0 * x[i + 1].powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces() {
        let m = Mesh::chebyshev(10).unwrap();
        let ones = vec![1.0; 10];
        assert!((m.interpolate(1.0, &ones, -0.41).unwrap() - 1.0).abs() < 1e-14);
        let tail: Vec<f64> = m.nodes()[1..].to_vec();
        assert!((m.interpolate(0.0, &tail, -0.41).unwrap() + 0.41).abs() < 1e-14);
        let tail: Vec<f64> = m.nodes()[1..].iter().map(|t| t.exp()).collect();
        let v = m.interpolate(1.0, &tail, -0.33).unwrap();
        assert!((v - (-0.33f64).exp()).abs() < 1e-10);
        assert!(matches!(
            m.interpolate(1.0, &tail[1..], -0.33),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn lebesgue_small_cases() {
        assert_eq!(Mesh::chebyshev(1).unwrap().lebesgue_constant(), 1.0);
        // n = 2: reduced nodes -1/2 and -1, basis (θ+1)/(1/2) and (θ+1/2)/(-1/2);
        // on [-1, 0] the sum of magnitudes peaks at θ = 0 with 2 + 1 = 3.
        let grid_oracle = (0..LEBESGUE_GRID)
            .map(|k| -(k as f64) / (LEBESGUE_GRID - 1) as f64)
            .map(|t| (2.0 * (t + 1.0)).abs() + (2.0 * (t + 0.5)).abs())
            .fold(0.0, f64::max);
        let l2 = Mesh::chebyshev(2).unwrap().lebesgue_constant();
        assert!((l2 - grid_oracle).abs() < 1e-13);
        assert!((l2 - 3.0).abs() < 1e-13);
    }
}
