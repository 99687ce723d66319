//! Convergence of discretized Hopf data towards the DDE as `n` grows.

use rayon::prelude::*;
use serde::Serialize;

use super::{find_hopf, Discretization, HopfPoint};
use crate::error::{Error, Result};
use crate::model::DdeModel;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub alpha: Option<f64>,
    pub omega: Option<f64>,
    pub err_alpha: Option<f64>,
    pub err_omega: Option<f64>,
    pub err_a2: Option<f64>,
    pub sigma: Option<f64>,
    pub simplicity: Option<f64>,
    pub min_margin: Option<f64>,
    /// Error kind when the Hopf point could not be located.
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    /// `None` for the DDE, otherwise the degree used as reference.
    pub reference_n: Option<usize>,
    pub reference: HopfPoint,
    pub rows: Vec<ConvergenceRow>,
}

/// Locates the Hopf point for every `n` in `n_list` (in parallel) and
/// compares with the DDE Hopf point, or with the finest successful `n` when
/// the DDE one cannot be found. `fixed` overrides parameters beforehand.
pub fn convergence_study(
    model: &DdeModel,
    param: &str,
    fixed: &[(String, f64)],
    omega_guess: f64,
    alpha_guess: f64,
    n_list: &[usize],
) -> Result<ConvergenceStudy> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("empty list of degrees".into()));
    }
    let mut m = model.clone();
    for (k, v) in fixed {
        m.set_param(k, *v)?;
    }
    let analytic = find_hopf(&m, Discretization::Analytic, param, omega_guess, alpha_guess);
    let points: Vec<Result<HopfPoint>> = n_list
        .par_iter()
        .map(|&n| find_hopf(&m, Discretization::Pseudospectral(n), param, omega_guess, alpha_guess))
        .collect();

    let (reference_n, reference) = match analytic {
        Ok(h) => (None, h),
        Err(e) => {
            let finest = n_list
                .iter()
                .zip(&points)
                .filter_map(|(&n, p)| p.as_ref().ok().map(|h| (n, h)))
                .max_by_key(|(n, _)| *n);
            match finest {
                Some((n, h)) => (Some(n), h.clone()),
                None => return Err(e),
            }
        }
    };

    let rows = n_list
        .iter()
        .zip(points)
        .map(|(&n, p)| match p {
            Ok(h) => ConvergenceRow {
                n,
                alpha: Some(h.alpha),
                omega: Some(h.omega),
                err_alpha: Some((h.alpha - reference.alpha).abs()),
                err_omega: Some((h.omega - reference.omega).abs()),
                err_a2: h.a2.zip(reference.a2).map(|(a, b)| (a - b).abs()),
                sigma: Some(h.sigma),
                simplicity: Some(h.simplicity_margin),
                min_margin: h.nonresonance.min_margin(),
                error: None,
            },
            Err(e) => ConvergenceRow {
                n,
                alpha: None,
                omega: None,
                err_alpha: None,
                err_omega: None,
                err_a2: None,
                sigma: None,
                simplicity: None,
                min_margin: None,
                error: Some(e.kind().to_string()),
            },
        })
        .collect();
    Ok(ConvergenceStudy {
        reference_n,
        reference,
        rows,
    })
}
