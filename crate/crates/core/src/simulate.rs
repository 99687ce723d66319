//! Time integration of the pseudospectral ODE and period measurement on the
//! attractor.

use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::PsSystem;
use crate::error::{Error, Result};
use crate::model::expr::{self, Bound, Symbol};
use crate::model::DdeModel;

/// Initial history on `[-1, 0]`.
#[derive(Debug, Clone)]
pub enum History {
    /// One value per component (a single value is replicated).
    Constant(Vec<f64>),
    /// One expression in `theta` per component.
    Expression(Vec<Bound>),
}

impl History {
    /// Parses `const:VAL` or `expr:STRING`. Components are separated by `;`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let split = |body: &str| -> Vec<String> { body.split(';').map(|s| s.trim().to_string()).collect() };
        let check = |n: usize| -> Result<()> {
            if n == 1 || n == dim {
                Ok(())
            } else {
                Err(Error::LengthMismatch { expected: dim, got: n })
            }
        };
        if let Some(body) = text.strip_prefix("const:") {
            let vals = split(body)
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("not a number: `{s}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            check(vals.len())?;
            Ok(History::Constant(vals))
        } else if let Some(body) = text.strip_prefix("expr:") {
            let resolve = |s: &Symbol| match s {
                Symbol::Name(n) if n == "theta" => Some(0),
                _ => None,
            };
            let exprs = split(body)
                .iter()
                .map(|s| expr::parse(s)?.bind(&resolve, vec!["theta".into()]))
                .collect::<Result<Vec<Bound>>>()?;
            check(exprs.len())?;
            Ok(History::Expression(exprs))
        } else {
            Err(Error::InvalidArgument(format!(
                "history must be `const:VALUE` or `expr:EXPRESSION`, got `{text}`"
            )))
        }
    }

    pub fn eval(&self, theta: f64, dim: usize) -> Result<Vec<f64>> {
        match self {
            History::Constant(v) if v.len() == 1 => Ok(vec![v[0]; dim]),
            History::Constant(v) => Ok(v.clone()),
            History::Expression(e) if e.len() == 1 => Ok(vec![e[0].eval(&[theta])?; dim]),
            History::Expression(e) => e.iter().map(|b| b.eval(&[theta])).collect(),
        }
    }
}

/// State whose blocks are `φ(θ_j)` at the mesh nodes.
pub fn sample_history<F>(ps: &PsSystem, phi: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let d = ps.dim();
    let mut out = Vec::with_capacity(ps.state_len());
    for &theta in ps.mesh().nodes() {
        let v = phi(theta)?;
        if v.len() != d {
            return Err(Error::LengthMismatch { expected: d, got: v.len() });
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("history value {bad} at theta = {theta}")));
        }
        out.extend(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Scaled error estimate of each accepted step (0 for the initial point).
    pub errors: Vec<f64>,
}

impl Trajectory {
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[index]).collect()
    }
}

// Dormand-Prince 5(4) tableau (the system is autonomous, so no nodes).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order weights minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) integration of `y' = f(y)` from `t = 0`.
pub fn integrate_with<F>(f: F, y0: &[f64], t_end: f64, rel_tol: f64, abs_tol: f64) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    for (name, tol) in [("relative", rel_tol), ("absolute", abs_tol)] {
        if !(1e-12..=1e-2).contains(&tol) {
            return Err(Error::InvalidArgument(format!("{name} tolerance {tol} outside [1e-12, 1e-2]")));
        }
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid end time {t_end}")));
    }
    let m = y0.len();
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; m]; 7];
    let mut tmp = vec![0.0; m];
    let mut ynew = vec![0.0; m];
    f(&y, &mut k[0])?;
    let mut t = 0.0;
    let mut h = (1e-3 * t_end).min(1e-2);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y.clone()],
        errors: vec![0.0],
    };
    while t_end - t > 1e-12 * t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        if h < 1e-12 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, state: y });
        }
        for s in 1..7 {
            for i in 0..m {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                tmp[i] = y[i] + h * acc;
            }
            f(&tmp, &mut k[s])?;
        }
        // The last stage is evaluated at the fifth-order solution.
        ynew.copy_from_slice(&tmp);
        let mut err = 0.0;
        for i in 0..m {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * h;
            let sc = abs_tol + rel_tol * y[i].abs().max(ynew[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / m as f64).sqrt();
        if !err.is_finite() {
            if h < 1e-8 {
                return Err(Error::NonFinite { t });
            }
            h *= 0.2;
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            t += h;
            std::mem::swap(&mut y, &mut ynew);
            let last = k.pop().expect("seven stages");
            k.insert(0, last);
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.errors.push(err);
            h *= factor.min(5.0);
        } else {
            h *= factor.min(1.0);
        }
    }
    Ok(traj)
}

/// Integrates the pseudospectral ODE of `ps` from the state `y0`.
pub fn integrate(ps: &PsSystem, y0: &[f64], t_end: f64, rel_tol: f64, abs_tol: f64) -> Result<Trajectory> {
    if y0.len() != ps.state_len() {
        return Err(Error::LengthMismatch {
            expected: ps.state_len(),
            got: y0.len(),
        });
    }
    integrate_with(|y, out| ps.rhs_into(y, out), y0, t_end, rel_tol, abs_tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodEstimate {
    pub period: f64,
    /// `(max - min) / mean` of the measured periods.
    pub spread: f64,
    pub crossings: usize,
    /// Number of mean-level crossings per period (above 1 for signals with
    /// several lobes per period, e.g. after period doubling).
    pub multiplicity: usize,
    pub mean_level: f64,
}

const MAX_MULTIPLICITY: usize = 4;
const EXACT_SPREAD: f64 = 1e-3;
const PERIODIC_SPREAD: f64 = 0.2;
/// Relative peak-to-peak amplitude below which the signal counts as settled.
const FLAT_AMPLITUDE: f64 = 1e-6;

/// Period of component `component` after time `skip`: mean spacing of the
/// upward crossings of the mean level, each refined by a parabola through
/// three neighbouring samples.
pub fn estimate_period(traj: &Trajectory, component: usize, skip: f64) -> Result<PeriodEstimate> {
    if traj.states.first().is_none_or(|s| component >= s.len()) {
        return Err(Error::InvalidArgument(format!("component {component} out of range")));
    }
    let start = traj.times.partition_point(|&t| t < skip);
    let t = &traj.times[start..];
    let x: Vec<f64> = traj.states[start..].iter().map(|s| s[component]).collect();
    if t.len() < 3 {
        return Err(Error::NotOscillatory { crossings: 0 });
    }
    let span = t[t.len() - 1] - t[0];
    let mean = (1..t.len())
        .map(|i| 0.5 * (x[i] + x[i - 1]) * (t[i] - t[i - 1]))
        .sum::<f64>()
        / span;
    // Rounding noise around a settled state crosses the mean level as well.
    let tail = &x[3 * x.len() / 4..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi - lo > FLAT_AMPLITUDE * (1.0 + mean.abs())) {
        return Err(Error::NotOscillatory { crossings: 0 });
    }

    let mut cross = Vec::new();
    for i in 0..t.len() - 1 {
        if x[i] < mean && x[i + 1] >= mean {
            cross.push(refine_crossing(t, &x, i, mean));
        }
    }
    if cross.len() < 3 {
        return Err(Error::NotOscillatory { crossings: cross.len() });
    }
    let spread_of = |m: usize| -> Option<(f64, f64)> {
        if cross.len() < m + 2 {
            return None;
        }
        let p: Vec<f64> = (0..cross.len() - m).map(|j| cross[j + m] - cross[j]).collect();
        let avg = p.iter().sum::<f64>() / p.len() as f64;
        let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        Some(((cross[cross.len() - 1] - cross[0]) / (cross.len() - 1) as f64 * m as f64, (hi - lo) / avg))
    };
    let candidates: Vec<(usize, f64, f64)> = (1..=MAX_MULTIPLICITY)
        .filter_map(|m| spread_of(m).map(|(p, s)| (m, p, s)))
        .collect();
    // Smallest multiplicity that is periodic to within the exactness level;
    // otherwise the one with the smallest spread.
    let best = candidates
        .iter()
        .find(|c| c.2 < EXACT_SPREAD)
        .or_else(|| candidates.iter().min_by(|a, b| a.2.total_cmp(&b.2)))
        .copied()
        .expect("at least one candidate with three crossings");
    if best.2 > PERIODIC_SPREAD {
        return Err(Error::NotPeriodic { spread: best.2 });
    }
    Ok(PeriodEstimate {
        period: best.1,
        spread: best.2,
        crossings: cross.len(),
        multiplicity: best.0,
        mean_level: mean,
    })
}

/// Root of the interpolating parabola through samples `i-1, i, i+1` (or
/// `i, i+1, i+2` at the left edge) inside `[t_i, t_{i+1}]`.
fn refine_crossing(t: &[f64], x: &[f64], i: usize, level: f64) -> f64 {
    let linear = t[i] + (level - x[i]) * (t[i + 1] - t[i]) / (x[i + 1] - x[i]);
    let j = if i > 0 { i - 1 } else if i + 2 < t.len() { i } else { return linear };
    let (t0, t1, t2) = (t[j], t[j + 1], t[j + 2]);
    let (y0, y1, y2) = (x[j] - level, x[j + 1] - level, x[j + 2] - level);
    // Newton form p(s) = y0 + d1 (s - t0) + d2 (s - t0)(s - t1).
    let d1 = (y1 - y0) / (t1 - t0);
    let d2 = ((y2 - y1) / (t2 - t1) - d1) / (t2 - t0);
    let mut s = linear;
    for _ in 0..20 {
        let p = y0 + d1 * (s - t0) + d2 * (s - t0) * (s - t1);
        let dp = d1 + d2 * (2.0 * s - t0 - t1);
        if dp == 0.0 {
            return linear;
        }
        let next = s - p / dp;
        if (next - s).abs() < 1e-15 * (1.0 + s.abs()) {
            s = next;
            break;
        }
        s = next;
    }
    if s >= t[i] && s <= t[i + 1] {
        s
    } else {
        linear
    }
}

/// Settings of a simulation run used in period sweeps.
#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub n: usize,
    pub t_end: f64,
    /// Absolute time after which the signal counts as settled.
    pub skip: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub history: History,
    pub component: usize,
}

impl SimulationOptions {
    pub fn new(n: usize, t_end: f64, history: History) -> Self {
        Self {
            n,
            t_end,
            skip: 0.6 * t_end,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            history,
            component: 0,
        }
    }
}

/// Attractor period of `model` at its current parameters.
pub fn attractor_period(model: &DdeModel, opts: &SimulationOptions) -> Result<PeriodEstimate> {
    let xbar = model.default_equilibrium().unwrap_or_else(|_| vec![0.0; model.dim()]);
    let ps = PsSystem::new(model.clone(), opts.n, xbar)?;
    let y0 = sample_history(&ps, |th| opts.history.eval(th, model.dim()))?;
    let traj = integrate(&ps, &y0, opts.t_end, opts.rel_tol, opts.abs_tol)?;
    estimate_period(&traj, opts.component, opts.skip)
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodBracket {
    pub lo: f64,
    pub hi: f64,
    pub period_lo: f64,
    pub period_hi: f64,
    pub evaluations: usize,
}

const JUMP_RATIO: f64 = 1.5;

fn jumped(a: f64, b: f64) -> bool {
    a.max(b) / a.min(b) > JUMP_RATIO
}

/// Bisection on `param` over `range` for a jump of the attractor period by
/// more than a factor 1.5, down to an interval of width `width`.
pub fn bracket_period_doubling(
    model: &DdeModel,
    param: &str,
    range: (f64, f64),
    width: f64,
    opts: &SimulationOptions,
) -> Result<PeriodBracket> {
    let (mut lo, mut hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("empty parameter range [{lo}, {hi}]")));
    }
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("bracket width must be positive, got {width}")));
    }
    model.param(param)?;
    let period_at = |v: f64| -> Result<f64> { Ok(attractor_period(&model.with_param(param, v)?, opts)?.period) };
    let ends: Vec<Result<f64>> = [lo, hi].par_iter().map(|&v| period_at(v)).collect();
    let mut ends = ends.into_iter();
    let mut p_lo = ends.next().expect("two ends")?;
    let mut p_hi = ends.next().expect("two ends")?;
    let mut evaluations = 2;
    if !jumped(p_lo, p_hi) {
        return Err(Error::NoPeriodJump { lo, hi });
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let p = period_at(mid)?;
        evaluations += 1;
        if jumped(p_lo, p) {
            hi = mid;
            p_hi = p;
        } else {
            lo = mid;
            p_lo = p;
        }
    }
    Ok(PeriodBracket {
        lo,
        hi,
        period_lo: p_lo,
        period_hi: p_hi,
        evaluations,
    })
}
