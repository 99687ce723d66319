//! Property checks run through proptest's `TestRunner`, so that both the
//! property test targets and the acceptance report can drive them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use psdde::charfn::CharFn;
use psdde::eigen;
use psdde::model::catalog;
use psdde::{CharFn0, CharFnN, DdeModel, Jet3, LinearPart, Mesh, PsSystem};

pub type Check = Result<(), String>;

pub fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Check {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn cvec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b)), len)
}

fn inf_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random expressions in `x0`, `x1` at lags 0 and 1 whose domain is all of R^4.
pub fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x0@0".to_string()),
        Just("x0@1".to_string()),
        Just("x1@0".to_string()),
        Just("x1@1".to_string()),
        (-2.0..2.0f64).prop_map(|v| format!("{v:.3}")),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("log(2 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("({a})/(1 + ({b})^2)")),
        ]
    })
}

fn expression_model(e0: &str, e1: &str) -> DdeModel {
    DdeModel::new(2, vec![0.0, 1.0], &[e0, e1], &[], None).expect("generated expressions parse")
}

// ---------------------------------------------------------------- mesh

pub fn partition_of_unity() -> Check {
    run(40, 1usize..=40, |n| {
        let mesh = Mesh::chebyshev(n).unwrap();
        for i in 0..=1000 {
            let theta = -(i as f64) / 1000.0;
            let s: f64 = mesh.basis(theta).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-13, "n = {n}, theta = {theta}: sum {s}");
        }
        Ok(())
    })
}

pub fn cardinality() -> Check {
    run(40, 1usize..=40, |n| {
        let mesh = Mesh::chebyshev(n).unwrap();
        for (i, &t) in mesh.nodes().iter().enumerate() {
            let b = mesh.basis(t);
            for (j, &v) in b.iter().enumerate() {
                prop_assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
        Ok(())
    })
}

/// `T_k(x)` and `T_k'(x)`.
fn chebyshev_t(k: usize, x: f64) -> (f64, f64) {
    let (mut t0, mut t1) = (1.0, x);
    let (mut d0, mut d1) = (0.0, 1.0);
    if k == 0 {
        return (1.0, 0.0);
    }
    for _ in 1..k {
        let t2 = 2.0 * x * t1 - t0;
        let d2 = 2.0 * t1 + 2.0 * x * d1 - d0;
        t0 = t1;
        t1 = t2;
        d0 = d1;
        d1 = d2;
    }
    (t1, d1)
}

pub fn differentiation_exactness() -> Check {
    let strat = (1usize..=20).prop_flat_map(|n| (Just(n), prop::collection::vec(-1.0..1.0f64, n + 1)));
    run(60, strat, |(n, a)| {
        let mesh = Mesh::chebyshev(n).unwrap();
        let op = mesh.diff_op();
        // p(θ) = Σ a_k T_k(2θ + 1)
        let p = |t: f64| -> (f64, f64) {
            a.iter().enumerate().fold((0.0, 0.0), |(v, dv), (k, &ak)| {
                let (tk, dk) = chebyshev_t(k, 2.0 * t + 1.0);
                (v + ak * tk, dv + 2.0 * ak * dk)
            })
        };
        let nodes = mesh.nodes();
        let y: Vec<f64> = nodes.iter().map(|&t| p(t).0).collect();
        let tail = DVector::from_column_slice(&y[1..]);
        let got = &op.d * tail + &op.d0 * y[0];
        let exact: Vec<f64> = nodes[1..].iter().map(|&t| p(t).1).collect();
        let scale = exact.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for i in 0..n {
            prop_assert!(
                (got[i] - exact[i]).abs() < 1e-11 * scale,
                "n = {n}, node {i}: {} vs {}",
                got[i],
                exact[i]
            );
        }
        let ones = DVector::from_element(n, 1.0);
        let r = &op.d0 + &op.d * ones;
        prop_assert!(r.amax() < 1e-12 * op.d.amax().max(1.0));
        Ok(())
    })
}

// ---------------------------------------------------------------- model

pub fn jets_vs_finite_differences() -> Check {
    let strat = (
        expression(),
        expression(),
        prop::collection::vec(-1.0..1.0f64, 4),
        prop::collection::vec(-1.0..1.0f64, 4),
    );
    run(64, strat, |(e0, e1, base, dir)| {
        let m = expression_model(&e0, &e1);
        let h = 1e-4;
        let jets_at = |s: f64| -> Vec<Jet3> {
            let lags: Vec<Jet3> = base
                .iter()
                .zip(&dir)
                .map(|(&x, &u)| Jet3::variable(c(x + s * u, 0.0), c(u, 0.0)))
                .collect();
            m.eval(&lags).unwrap()
        };
        let center = jets_at(0.0);
        let (plus, minus) = (jets_at(h), jets_at(-h));
        for comp in 0..2 {
            for k in 1..=3 {
                let exact = center[comp].derivative(k).re;
                let fd = (plus[comp].derivative(k - 1).re - minus[comp].derivative(k - 1).re) / (2.0 * h);
                prop_assert!(
                    (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                    "order {k} of `{}`: jet {exact} vs fd {fd}",
                    if comp == 0 { &e0 } else { &e1 }
                );
            }
        }
        Ok(())
    })
}

pub fn multilinear_symmetry() -> Check {
    let strat = (expression(), expression(), prop::collection::vec(-1.0..1.0f64, 2), cvec(4), cvec(4), cvec(4));
    run(48, strat, |(e0, e1, xbar, u, v, w)| {
        let m = expression_model(&e0, &e1);
        let uv = m.d2(&xbar, &u, &v).unwrap();
        let vu = m.d2(&xbar, &v, &u).unwrap();
        let scale = 1.0 + inf_norm(&uv);
        for i in 0..2 {
            prop_assert!((uv[i] - vu[i]).norm() < 1e-12 * scale);
        }
        let base = m.d3(&xbar, &u, &v, &w).unwrap();
        let scale = 1.0 + inf_norm(&base);
        let perms: [[&Vec<Complex64>; 3]; 5] = [[&u, &w, &v], [&v, &u, &w], [&v, &w, &u], [&w, &u, &v], [&w, &v, &u]];
        for p in perms {
            let other = m.d3(&xbar, p[0], p[1], p[2]).unwrap();
            for i in 0..2 {
                prop_assert!((base[i] - other[i]).norm() < 1e-12 * scale);
            }
        }
        Ok(())
    })
}

pub fn linear_model_linearization() -> Check {
    let strat = (1usize..=2).prop_flat_map(|d| (Just(d), prop::collection::vec(-3.0..3.0f64, 2 * d * d)));
    run(40, strat, |(d, coef)| {
        let rhs: Vec<String> = (0..d)
            .map(|i| {
                let mut terms = Vec::new();
                for k in 0..2 {
                    for j in 0..d {
                        terms.push(format!("{:?}*x{j}@{k}", coef[k * d * d + i * d + j]));
                    }
                }
                terms.join(" + ")
            })
            .collect();
        let refs: Vec<&str> = rhs.iter().map(String::as_str).collect();
        let m = DdeModel::new(d, vec![0.0, 0.7], &refs, &[], None).unwrap();
        let lin = m.linearize(&vec![0.3; d]).unwrap();
        for k in 0..2 {
            for i in 0..d {
                for j in 0..d {
                    prop_assert_eq!(lin.coeffs[k][(i, j)], coef[k * d * d + i * d + j]);
                }
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- discretize

fn random_linear() -> impl Strategy<Value = (LinearPart, usize)> {
    (1usize..=2, 0.3..1.0f64, 2usize..=12).prop_flat_map(|(d, tau, n)| {
        prop::collection::vec(-2.0..2.0f64, 2 * d * d).prop_map(move |v| {
            let c0 = DMatrix::from_row_slice(d, d, &v[..d * d]);
            let c1 = DMatrix::from_row_slice(d, d, &v[d * d..]);
            (LinearPart::new(vec![0.0, tau], vec![c0, c1]).unwrap(), n)
        })
    })
}

fn det_scale(cf: &dyn CharFn, lambda: Complex64) -> f64 {
    let s = cf.lag_values(lambda).unwrap();
    let t = 1.0
        + lambda.norm()
        + cf.linear().coeffs.iter().zip(&s).map(|(m, sk)| m.amax() * sk.norm()).sum::<f64>();
    t.powi(cf.dim() as i32)
}

pub fn eigenvalue_root_equivalence() -> Check {
    run(40, random_linear(), |(lin, n)| {
        let cf = CharFnN::new(lin, n).unwrap();
        let ev = eigen::eigenvalues(&cf.matrix()).unwrap();
        prop_assert_eq!(ev.len(), (n + 1) * cf.dim());
        for &lam in &ev {
            let det = cf.det(lam).unwrap();
            prop_assert!(
                det.norm() < 1e-8 * det_scale(&cf, lam),
                "n = {n}: |det Δ({lam})| = {}",
                det.norm()
            );
            // Newton on det Δ_n from the eigenvalue stays there.
            let mut z = lam;
            for _ in 0..3 {
                let d = cf.det_dlambda(z).unwrap();
                if d.norm() == 0.0 {
                    break;
                }
                z -= cf.det(z).unwrap() / d;
            }
            let nearest = ev.iter().map(|e| (e - z).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!((z - lam).norm() < 1e-6 * (1.0 + lam.norm()) || nearest < 1e-6 * (1.0 + lam.norm()));
        }
        Ok(())
    })
}

pub fn steady_state_correspondence() -> Check {
    let strat = (1.0..10.0f64, 1.5..20.0f64, 2usize..=15, prop::collection::vec(-1.0..1.0f64, 32));
    run(40, strat, |(mu, ratio, n, noise)| {
        for model in [
            catalog::blowflies().with_param("mu", mu).unwrap().with_param("beta", mu * ratio).unwrap(),
            catalog::fluidflow().with_param("k", 0.5 + mu / 5.0).unwrap().with_param("c", ratio / 4.0).unwrap(),
        ] {
            let d = model.dim();
            let xbar = model.default_equilibrium().unwrap();
            let ps = PsSystem::new(model.clone(), n, xbar.clone()).unwrap();
            // equilibrium of the DDE -> equilibrium of the ODE
            let r = ps.rhs(&ps.equilibrium_state()).unwrap();
            prop_assert!(r.iter().all(|v| v.abs() < 1e-11 * (1.0 + xbar.iter().map(|x| x.abs()).sum::<f64>())));
            // replicated non-equilibrium: top block is the collapsed rhs, the rest vanishes
            let x: Vec<f64> = xbar.iter().zip(&noise).map(|(a, e)| a + 0.5 * e + 0.05).collect();
            let state: Vec<f64> = (0..=n).flat_map(|_| x.iter().copied()).collect();
            let r = ps.rhs(&state).unwrap();
            let col = model.collapsed(&x).unwrap();
            for i in 0..d {
                prop_assert!((r[i] - col[i]).abs() < 1e-12 * (1.0 + col[i].abs()));
            }
            prop_assert!(r[d..].iter().all(|v| v.abs() < 1e-10));
            // non-replicated states are not equilibria of the ODE
            let state: Vec<f64> = (0..(n + 1) * d).map(|j| xbar[j % d] + noise[j % 32] * 0.1 * (j as f64)).collect();
            let r = ps.rhs(&state).unwrap();
            prop_assert!(r[d..].iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-6);
        }
        Ok(())
    })
}

pub fn resolvent_identity() -> Check {
    let strat = random_linear().prop_flat_map(|(lin, n)| {
        let len = (n + 1) * lin.dim();
        (Just(lin), Just(n), (-3.0..3.0f64, -3.0..3.0f64), cvec(len))
    });
    run(100, strat, |(lin, n, (re, im), zeta)| {
        let cf = CharFnN::new(lin, n).unwrap();
        let a = cf.matrix().map(|v| c(v, 0.0));
        let ev = eigen::eigenvalues(&cf.matrix()).unwrap();
        let lam = c(re, im);
        prop_assume!(ev.iter().all(|e| (e - lam).norm() > 0.1));
        let r = cf.resolvent_apply(lam, &zeta).unwrap();
        let rv = DVector::from_column_slice(&r);
        let back = DMatrix::<Complex64>::identity(a.nrows(), a.nrows()) * lam * &rv - &a * &rv;
        let scale = (1.0 + lam.norm() + a.iter().map(|v| v.norm()).fold(0.0, f64::max)) * inf_norm(&r) + inf_norm(&zeta);
        for i in 0..zeta.len() {
            prop_assert!((back[i] - zeta[i]).norm() < 1e-10 * scale, "entry {i}: {} vs {}", back[i], zeta[i]);
        }
        Ok(())
    })
}

pub fn eigenvector_pairing() -> Check {
    let strat = (-5.0..5.0f64, -5.0..5.0f64, 3usize..=12, cvec(64));
    run(60, strat, |(b1, b2, n, zeta)| {
        let cf = CharFnN::new(LinearPart::scalar(b1, b2), n).unwrap();
        let ev = eigen::eigenvalues(&cf.matrix()).unwrap();
        let lam = ev[0];
        let one = [c(1.0, 0.0)];
        let p = cf.eigvec_right(lam, &one).unwrap();
        let q = cf.eigvec_left(lam, &one, &one).unwrap();
        let qp: Complex64 = q.iter().zip(&p).map(|(a, b)| a * b).sum();
        prop_assert!((qp - 1.0).norm() < 1e-10);
        let zeta = &zeta[..p.len()];
        let project = |z: &[Complex64]| -> Vec<Complex64> {
            let qz: Complex64 = q.iter().zip(z).map(|(a, b)| a * b).sum();
            z.iter().zip(&p).map(|(zi, pi)| zi - pi * qz).collect()
        };
        let once = project(zeta);
        let twice = project(&once);
        let scale = 1.0 + inf_norm(&p) * inf_norm(&q) * inf_norm(zeta) * p.len() as f64;
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).norm() < 1e-10 * scale);
        }
        Ok(())
    })
}

pub fn characteristic_convergence() -> Check {
    run(12, (-5.0..0.0f64, -5.0..5.0f64), |(b1, b2)| {
        let lin = LinearPart::scalar(b1, b2);
        let exact = CharFn0::new(lin.clone());
        let grid: Vec<Complex64> = (-4..=12)
            .flat_map(|i| (-12..=12).map(move |j| c(i as f64 * 0.25, j as f64 * 0.25)))
            .filter(|z| z.norm() <= 3.0 && z.re >= -1.0)
            .collect();
        let gap = |n: usize| -> f64 {
            let cf = CharFnN::new(lin.clone(), n).unwrap();
            grid.iter()
                .map(|&z| (cf.eval(z).unwrap()[(0, 0)] - exact.eval(z).unwrap()[(0, 0)]).norm())
                .fold(0.0, f64::max)
        };
        let mut prev = gap(6);
        for n in [8, 10, 12, 14] {
            let g = gap(n);
            if prev > 1e-13 {
                prop_assert!(g < prev, "gap at n = {n} is {g}, previous {prev}");
            }
            prev = g;
        }
        Ok(())
    })
}

/// All criterion-8 suites with their names.
pub type Property = (&'static str, fn() -> Check);

pub fn all() -> Vec<Property> {
    vec![
        ("partition_of_unity", partition_of_unity as fn() -> Check),
        ("cardinality", cardinality),
        ("differentiation_exactness", differentiation_exactness),
        ("jets_vs_finite_differences", jets_vs_finite_differences),
        ("multilinear_symmetry", multilinear_symmetry),
        ("linear_model_linearization", linear_model_linearization),
        ("eigenvalue_root_equivalence", eigenvalue_root_equivalence),
        ("steady_state_correspondence", steady_state_correspondence),
        ("resolvent_identity", resolvent_identity),
        ("eigenvector_pairing", eigenvector_pairing),
        ("characteristic_convergence", characteristic_convergence),
    ]
}
