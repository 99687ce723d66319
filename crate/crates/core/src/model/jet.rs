//! Truncated Taylor jets of order three over complex scalars.
//!
//! A [`Jet3`] holds `c_0..c_3` of `f(x + t u) = Σ c_k t^k + O(t^4)`. Evaluating
//! an expression on jets seeded with `c_0 = x`, `c_1 = u` yields the directional
//! derivatives `D^k f(x)(u, ..., u) = k! c_k`.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Scalar type the expression evaluator is generic over.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Value at the base point.
    fn base(&self) -> Complex64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, k: i32) -> Self;
    fn powf(self, r: f64) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn base(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
    fn powf(self, r: f64) -> Self {
        f64::powf(self, r)
    }
}

#[derive(Clone, Copy, PartialEq)]
pub struct Jet3 {
    pub c: [Complex64; 4],
}

impl fmt::Debug for Jet3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet3{:?}", self.c)
    }
}

impl Jet3 {
    pub fn new(c0: Complex64, c1: Complex64, c2: Complex64, c3: Complex64) -> Self {
        Self { c: [c0, c1, c2, c3] }
    }

    pub fn constant_c(v: Complex64) -> Self {
        Self::new(v, ZERO, ZERO, ZERO)
    }

    /// Seed `x + t u`.
    pub fn variable(x: Complex64, u: Complex64) -> Self {
        Self::new(x, u, ZERO, ZERO)
    }

    /// `k`-th directional derivative, `k! c_k`.
    pub fn derivative(&self, k: usize) -> Complex64 {
        const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
        self.c[k] * FACT[k]
    }

    /// Multiplication by a complex constant.
    pub fn scaled(self, s: Complex64) -> Self {
        Self { c: self.c.map(|v| v * s) }
    }

    /// Composes `f(self)` given `f^{(k)}(c_0) / k!` for `k = 0..3`.
    fn compose(self, taylor: [Complex64; 4]) -> Self {
        let [_, a1, a2, a3] = self.c;
        Self::new(
            taylor[0],
            taylor[1] * a1,
            taylor[1] * a2 + taylor[2] * a1 * a1,
            taylor[1] * a3 + taylor[2] * 2.0 * a1 * a2 + taylor[3] * a1 * a1 * a1,
        )
    }
}

impl Add for Jet3 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self { c: std::array::from_fn(|k| self.c[k] + o.c[k]) }
    }
}

impl Sub for Jet3 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self { c: std::array::from_fn(|k| self.c[k] - o.c[k]) }
    }
}

impl Neg for Jet3 {
    type Output = Self;
    fn neg(self) -> Self {
        Self { c: self.c.map(|v| -v) }
    }
}

impl Mul for Jet3 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.c, o.c);
        Self {
            c: std::array::from_fn(|k| (0..=k).map(|j| a[j] * b[k - j]).sum()),
        }
    }
}

impl Mul<f64> for Jet3 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { c: self.c.map(|v| v * s) }
    }
}

impl Div for Jet3 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let (a, b) = (self.c, o.c);
        let mut q = [ZERO; 4];
        for k in 0..4 {
            let s: Complex64 = (1..=k).map(|j| b[j] * q[k - j]).sum();
            q[k] = (a[k] - s) / b[0];
        }
        Self { c: q }
    }
}

impl num_traits::Zero for Jet3 {
    fn zero() -> Self {
        Self::constant_c(ZERO)
    }
    fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == ZERO)
    }
}

impl Scalar for Jet3 {
    fn constant(v: f64) -> Self {
        Self::constant_c(Complex64::new(v, 0.0))
    }

    fn base(&self) -> Complex64 {
        self.c[0]
    }

    fn exp(self) -> Self {
        let e = self.c[0].exp();
        self.compose([e, e, e / 2.0, e / 6.0])
    }

    fn ln(self) -> Self {
        let x = self.c[0];
        let r = x.inv();
        self.compose([x.ln(), r, -r * r / 2.0, r * r * r / 3.0])
    }

    fn sin(self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        self.compose([s, c, -s / 2.0, -c / 6.0])
    }

    fn cos(self) -> Self {
        let (s, c) = (self.c[0].sin(), self.c[0].cos());
        self.compose([c, -s, -c / 2.0, s / 6.0])
    }

    fn powi(self, k: i32) -> Self {
        if k < 0 {
            return Self::constant(1.0) / self.powi(-k);
        }
        let mut out = Self::constant(1.0);
        let mut base = self;
        let mut e = k as u32;
        while e > 0 {
            if e & 1 == 1 {
                out = out * base;
            }
            base = base * base;
            e >>= 1;
        }
        out
    }

    fn powf(self, r: f64) -> Self {
        let x = self.c[0];
        let p0 = x.powf(r);
        let d1 = p0 * r / x;
        let d2 = d1 * (r - 1.0) / x;
        let d3 = d2 * (r - 2.0) / x;
        self.compose([p0, d1, d2 / 2.0, d3 / 6.0])
    }
}
