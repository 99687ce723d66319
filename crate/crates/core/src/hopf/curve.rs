//! Two-parameter continuation of Hopf points in `(ω, p1, p2)`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use super::{Discretization, HopfPoint, Instance};
use crate::charfn::CharFn;
use crate::error::{Error, Result};
use crate::model::DdeModel;

pub const CORRECTOR_TOL: f64 = 1e-10;
pub const MIN_STEP: f64 = 1e-8;
const CORRECTOR_MAX_ITER: usize = 8;

#[derive(Debug, Clone)]
pub struct CurveOptions {
    pub discretization: Discretization,
    /// Initial arclength step; its sign selects the direction.
    pub step: f64,
    pub max_points: usize,
    /// Admissible ranges of `p1` and `p2`.
    pub bounds: [(f64, f64); 2],
    /// Tracing stops once the frequency drops below this value.
    pub omega_min: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            discretization: Discretization::Analytic,
            step: 0.05,
            max_points: 1000,
            bounds: [(f64::NEG_INFINITY, f64::INFINITY); 2],
            omega_min: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePoint {
    pub p1: f64,
    pub p2: f64,
    pub omega: f64,
    pub residual: f64,
    pub corrector_iterations: usize,
    /// Arclength step that produced this point (0 for the start).
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    MaxPoints,
    OutOfBounds,
    FrequencyCollapsed,
    /// The step fell below the floor; the last accepted point is `last`.
    StepUnderflow { last: [f64; 3] },
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCurve {
    pub params: (String, String),
    pub points: Vec<CurvePoint>,
    pub termination: Termination,
}

struct Eval {
    f: Complex64,
    /// Rows `Re`, `Im`; columns `ω`, `p1`, `p2`.
    jac: [[f64; 3]; 2],
    equilibrium: Vec<f64>,
}

struct Problem<'a> {
    model: &'a DdeModel,
    names: [&'a str; 2],
    disc: Discretization,
}

impl Problem<'_> {
    fn eval(&self, x: &Vector3<f64>, guess: &[f64]) -> Result<Eval> {
        let m = self
            .model
            .with_param(self.names[0], x[1])?
            .with_param(self.names[1], x[2])?;
        let inst = Instance::new(m, self.disc, &self.names, guess)?;
        let lam = Complex64::new(0.0, x[0]);
        let cf = &inst.charfn;
        let f = cf.det(lam)?;
        let fl = cf.det_dlambda(lam)?;
        let f1 = cf.det_dalpha(lam, self.names[0])?;
        let f2 = cf.det_dalpha(lam, self.names[1])?;
        Ok(Eval {
            f,
            jac: [[-fl.im, f1.re, f2.re], [fl.re, f1.im, f2.im]],
            equilibrium: inst.equilibrium,
        })
    }

    fn tolerance(&self, omega: f64) -> f64 {
        CORRECTOR_TOL * (1.0 + omega.abs()).powi(self.model.dim() as i32)
    }

    /// Newton on `G(X) = 0`, `t·(X - X_pred) = 0`.
    fn correct(
        &self,
        pred: Vector3<f64>,
        t: &Vector3<f64>,
        guess: &[f64],
    ) -> Result<(Vector3<f64>, Eval, usize)> {
        let mut x = pred;
        let mut eq = guess.to_vec();
        let newton_step = |x: &Vector3<f64>, e: &Eval| -> Result<Vector3<f64>> {
            let m = Matrix3::new(
                e.jac[0][0], e.jac[0][1], e.jac[0][2],
                e.jac[1][0], e.jac[1][1], e.jac[1][2],
                t[0], t[1], t[2],
            );
            let rhs = Vector3::new(e.f.re, e.f.im, t.dot(&(x - pred)));
            m.lu()
                .solve(&rhs)
                .ok_or_else(|| Error::SingularJacobian("continuation corrector".into()))
        };
        for it in 0..=CORRECTOR_MAX_ITER {
            let e = self.eval(&x, &eq)?;
            eq.clone_from(&e.equilibrium);
            if e.f.norm() < self.tolerance(x[0]) && it > 0 {
                // One more step is nearly free at quadratic convergence and
                // brings the residual down to rounding level.
                let polished = newton_step(&x, &e).map(|dx| x - dx).and_then(|xp| {
                    let ep = self.eval(&xp, &eq)?;
                    Ok((xp, ep))
                });
                return Ok(match polished {
                    Ok((xp, ep)) if ep.f.norm() < e.f.norm() => (xp, ep, it + 1),
                    _ => (x, e, it),
                });
            }
            if it == CORRECTOR_MAX_ITER {
                break;
            }
            x -= newton_step(&x, &e)?;
        }
        Err(Error::NoConvergence {
            iterations: CORRECTOR_MAX_ITER,
            residual: f64::NAN,
        })
    }
}

fn tangent(jac: &[[f64; 3]; 2]) -> Vector3<f64> {
    let r1 = Vector3::from(jac[0]);
    let r2 = Vector3::from(jac[1]);
    r1.cross(&r2).normalize()
}

/// Pseudo-arclength continuation of the Hopf curve through `start` in the
/// parameters `params`. One of them must be `start.param`; the other is read
/// from `model`. Reaching a bound, the frequency floor or the point budget
/// ends the curve normally; so does a step underflow, which is reported in
/// `termination` together with the last accepted point. Underflow before
/// the first step is an error.
pub fn trace_hopf_curve(
    model: &DdeModel,
    params: (&str, &str),
    start: &HopfPoint,
    opts: &CurveOptions,
) -> Result<StabilityCurve> {
    if !(opts.step.abs() >= MIN_STEP) || !opts.step.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid step {}", opts.step)));
    }
    let (p1, p2) = if start.param == params.0 {
        (start.alpha, model.param(params.1)?)
    } else if start.param == params.1 {
        (model.param(params.0)?, start.alpha)
    } else {
        return Err(Error::InvalidArgument(format!(
            "start point is parametrized by {}, not by {} or {}",
            start.param, params.0, params.1
        )));
    };
    let prob = Problem {
        model,
        names: [params.0, params.1],
        disc: opts.discretization,
    };
    let mut x = Vector3::new(start.omega, p1, p2);
    let e0 = prob.eval(&x, &start.equilibrium)?;
    if !(e0.f.norm() < prob.tolerance(x[0])) {
        return Err(Error::InvalidArgument(format!(
            "start is not a Hopf point of this problem (residual {:e})",
            e0.f.norm()
        )));
    }
    let inside = |v: &Vector3<f64>| {
        (opts.bounds[0].0..=opts.bounds[0].1).contains(&v[1])
            && (opts.bounds[1].0..=opts.bounds[1].1).contains(&v[2])
    };

    let mut dir = tangent(&e0.jac);
    let lead = if dir[1].abs() > 1e-8 { dir[1] } else { dir[2] };
    if lead * opts.step < 0.0 {
        dir = -dir;
    }
    let h0 = opts.step.abs();
    let mut h = h0;
    let mut eq = e0.equilibrium;
    let mut points = vec![CurvePoint {
        p1,
        p2,
        omega: start.omega,
        residual: e0.f.norm(),
        corrector_iterations: 0,
        step: 0.0,
    }];

    let termination = loop {
        if points.len() >= opts.max_points {
            break Termination::MaxPoints;
        }
        let pred = x + dir * h;
        match prob.correct(pred, &dir, &eq) {
            Ok((xn, e, iters)) if (xn - x).norm() <= 2.0 * h && (xn - x).dot(&dir) > 0.0 => {
                if xn[0] < opts.omega_min {
                    break Termination::FrequencyCollapsed;
                }
                if !inside(&xn) {
                    break Termination::OutOfBounds;
                }
                // Secant direction for the next predictor.
                dir = (xn - x).normalize();
                x = xn;
                eq = e.equilibrium;
                points.push(CurvePoint {
                    p1: x[1],
                    p2: x[2],
                    omega: x[0],
                    residual: e.f.norm(),
                    corrector_iterations: iters,
                    step: h,
                });
                if iters <= 3 {
                    h = (2.0 * h).min(4.0 * h0);
                }
            }
            _ => {
                h *= 0.5;
                if h < MIN_STEP {
                    if points.len() == 1 {
                        return Err(Error::ContinuationUnderflow {
                            points: 1,
                            last: [x[1], x[2], x[0]],
                        });
                    }
                    break Termination::StepUnderflow { last: [x[1], x[2], x[0]] };
                }
            }
        }
    };
    Ok(StabilityCurve {
        params: (params.0.to_string(), params.1.to_string()),
        points,
        termination,
    })
}
