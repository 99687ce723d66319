//! `psdde` command-line front end.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use output::{emit, json_bytes, num, opt, Format, Table};
use psdde::analytic::{self, CharFn0};
use psdde::hopf::{self, convergence_study, trace_hopf_curve, CurveOptions, StabilityCurve};
use psdde::serde_cx::Cx;
use psdde::simulate::{self, History};
use psdde::{eigen, find_hopf, CharFn, CharFnN, Complex64, DdeModel, Discretization, HopfPoint, Mesh, PsSystem};

#[derive(Parser)]
#[command(name = "psdde", version, about = "Pseudospectral discretization and Hopf analysis of delay differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in model name (blowflies, fluidflow) or path to a JSON model file
    #[arg(long)]
    model: String,
    /// Parameter override, repeatable
    #[arg(long = "set", value_name = "NAME=VALUE", value_parser = parse_assignment)]
    set: Vec<(String, f64)>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (written atomically); stdout when absent
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl OutputArgs {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct DiscArgs {
    /// Polynomial degree of the pseudospectral discretization
    #[arg(long, value_parser = parse_degree)]
    n: Option<usize>,
    /// Use the characteristic function of the DDE itself
    #[arg(long)]
    analytic: bool,
}

impl DiscArgs {
    fn discretization(&self) -> Discretization {
        match self.n {
            Some(n) => Discretization::Pseudospectral(n),
            None => Discretization::Analytic,
        }
    }
}

#[derive(Args)]
struct HopfArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Bifurcation parameter
    #[arg(long)]
    param: String,
    /// Initial frequency guess
    #[arg(long, value_parser = parse_positive)]
    omega: f64,
    /// Initial parameter guess
    #[arg(long, value_parser = parse_finite)]
    alpha: f64,
    #[command(flatten)]
    disc: DiscArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Direction {
    Forward,
    Backward,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Chebyshev nodes, barycentric weights and differentiation matrix
    Mesh {
        #[arg(long, value_parser = parse_degree)]
        n: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Eigenvalues of the discretized linearization at the equilibrium
    Eig {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_degree)]
        n: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Characteristic matrices of the discretization and of the DDE at one λ
    Charfn {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_degree)]
        n: usize,
        /// Complex argument, e.g. `0.5+2i`
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Locate a Hopf point and its diagnostics
    Hopf {
        #[command(flatten)]
        hopf: HopfArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Continue a Hopf point in two parameters
    Curve {
        #[command(flatten)]
        hopf: HopfArgs,
        /// The two continuation parameters, `P1,P2`; one of them must be `--param`
        #[arg(long, value_delimiter = ',', num_args = 1)]
        params: Vec<String>,
        /// Initial arclength step
        #[arg(long, default_value_t = 0.05, value_parser = parse_step)]
        step: f64,
        #[arg(long, default_value_t = 1000, value_parser = parse_max_points)]
        max_points: usize,
        /// Admissible range of the first parameter, `LO:HI`
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        p1_range: Option<(f64, f64)>,
        /// Admissible range of the second parameter, `LO:HI`
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        p2_range: Option<(f64, f64)>,
        /// Tracing stops below this frequency
        #[arg(long, default_value_t = 1e-3, value_parser = parse_positive)]
        omega_min: f64,
        #[arg(long, value_enum, default_value_t = Direction::Both)]
        direction: Direction,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// First Lyapunov coefficient and direction coefficient at a Hopf point
    Lyap {
        #[command(flatten)]
        hopf: HopfArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Convergence of discretized Hopf points as the degree grows
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        param: String,
        #[arg(long, value_parser = parse_positive)]
        omega: f64,
        #[arg(long, value_parser = parse_finite)]
        alpha: f64,
        /// Degrees to compare, e.g. `4,6,8`
        #[arg(long, value_delimiter = ',', num_args = 1, required = true, value_parser = parse_degree)]
        n_list: Vec<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Integrate the discretized system and optionally measure the period
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_degree)]
        n: usize,
        #[arg(long, value_parser = parse_positive)]
        t_end: f64,
        /// Initial history, `const:VAL[;VAL...]` or `expr:STRING` in `theta`
        #[arg(long, allow_hyphen_values = true)]
        history: String,
        /// Estimate the attractor period
        #[arg(long)]
        period: bool,
        /// JSON file for the period report (implies --period)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Transient length excluded from the period estimate (default 0.6·t_end)
        #[arg(long, value_parser = parse_nonnegative)]
        skip: Option<f64>,
        /// Component used for the period estimate
        #[arg(long, default_value_t = 0)]
        component: usize,
        #[arg(long, default_value_t = 1e-8, value_parser = parse_tolerance)]
        rel_tol: f64,
        #[arg(long, default_value_t = 1e-10, value_parser = parse_tolerance)]
        abs_tol: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact and discretized Hopf boundaries of the blowflies model
    ChartBlowfly {
        #[arg(long, value_parser = parse_degree)]
        n: usize,
        #[arg(long, default_value_t = 0.05, value_parser = parse_positive)]
        omega_min: f64,
        #[arg(long, default_value_t = 3.0, value_parser = parse_positive)]
        omega_max: f64,
        #[arg(long, default_value_t = 200, value_parser = parse_max_points)]
        steps: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
}

// Argument parsers; every numeric option is range-checked here.

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must be positive"))
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("`{s}` must not be negative"))
    }
}

fn parse_step(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v.abs() >= hopf::MIN_STEP {
        Ok(v)
    } else {
        Err(format!("`{s}` is below the minimal step {}", hopf::MIN_STEP))
    }
}

fn parse_tolerance(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if (1e-12..=1e-2).contains(&v) {
        Ok(v)
    } else {
        Err(format!("`{s}` is outside [1e-12, 1e-2]"))
    }
}

fn parse_degree(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if (1..=1000).contains(&n) {
        Ok(n)
    } else {
        Err(format!("degree {n} is outside 1..=1000"))
    }
}

fn parse_max_points(s: &str) -> Result<usize, String> {
    let n: usize = s.trim().parse().map_err(|e| format!("`{s}`: {e}"))?;
    if n >= 2 {
        Ok(n)
    } else {
        Err("at least 2 is required".into())
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("`{s}` is not of the form LO:HI"))?;
    let (lo, hi) = (parse_f64(a)?, parse_f64(b)?);
    if lo < hi && !lo.is_nan() {
        Ok((lo, hi))
    } else {
        Err(format!("empty range `{s}`"))
    }
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not of the form NAME=VALUE"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("missing name in `{s}`"));
    }
    Ok((k.to_string(), parse_finite(v)?))
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let z: Complex64 = s.trim().replace(' ', "").parse().map_err(|e| format!("`{s}`: {e}"))?;
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Invalid input detected after argument parsing (exit status 2).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl fmt::Display) -> anyhow::Error {
    anyhow::Error::new(Usage(e.to_string()))
}

fn load_model(args: &ModelArgs) -> Result<DdeModel> {
    let mut m = DdeModel::load(&args.model).map_err(usage)?;
    for (k, v) in &args.set {
        m.set_param(k, *v).map_err(usage)?;
    }
    Ok(m)
}

fn check_param(m: &DdeModel, name: &str) -> Result<()> {
    m.param(name).map(|_| ()).map_err(usage)
}

fn equilibrium_or_origin(m: &DdeModel) -> Vec<f64> {
    m.default_equilibrium().unwrap_or_else(|_| vec![0.0; m.dim()])
}

fn cx_cells(z: Complex64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

fn run_mesh(n: usize, out: &OutputArgs) -> Result<()> {
    let mesh = Mesh::chebyshev(n)?;
    let op = mesh.diff_op();
    let bytes = match out.format_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec!["j".to_string(), "theta".into(), "weight".into(), "d0".into()];
            header.extend((1..=n).map(|k| format!("d{k}")));
            let mut t = Table::new(header);
            for j in 0..=n {
                let mut row = vec![j.to_string(), num(mesh.nodes()[j]), num(mesh.weights()[j])];
                if j == 0 {
                    row.extend(std::iter::repeat_n(String::new(), n + 1));
                } else {
                    row.push(num(op.d0[j - 1]));
                    row.extend((0..n).map(|k| num(op.d[(j - 1, k)])));
                }
                t.push(row);
            }
            t.to_bytes()?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct MeshOut<'a> {
                n: usize,
                nodes: &'a [f64],
                weights: &'a [f64],
                d: Vec<Vec<f64>>,
                d0: Vec<f64>,
            }
            json_bytes(&MeshOut {
                n,
                nodes: mesh.nodes(),
                weights: mesh.weights(),
                d: op.d.row_iter().map(|r| r.iter().copied().collect()).collect(),
                d0: op.d0.iter().copied().collect(),
            })?
        }
    };
    emit(out.output.as_deref(), &bytes)
}

fn run_eig(model: &ModelArgs, n: usize, out: &OutputArgs) -> Result<()> {
    let m = load_model(model)?;
    let ps = PsSystem::at_default_equilibrium(m, n)?;
    let ev = eigen::eigenvalues(&ps.matrix())?;
    let bytes = match out.format_or(Format::Csv) {
        Format::Csv => {
            let mut t = Table::new(["re", "im"]);
            for z in &ev {
                t.push(cx_cells(*z).to_vec());
            }
            t.to_bytes()?
        }
        Format::Json => json_bytes(&ev.iter().map(|z| Cx(*z)).collect::<Vec<_>>())?,
    };
    emit(out.output.as_deref(), &bytes)
}

fn run_charfn(model: &ModelArgs, n: usize, lambda: Complex64, out: &OutputArgs) -> Result<()> {
    let m = load_model(model)?;
    let xbar = m.default_equilibrium()?;
    let lin = m.linearize(&xbar)?;
    let cn = CharFnN::new(lin.clone(), n)?;
    let c0 = CharFn0::new(lin);
    let (dn, d0) = (cn.eval(lambda)?, c0.eval(lambda)?);
    let (det_n, det_0) = (cn.det(lambda)?, c0.det(lambda)?);
    let bytes = match out.format_or(Format::Csv) {
        Format::Csv => {
            let mut t = Table::new(["entry", "delta_n_re", "delta_n_im", "delta_0_re", "delta_0_im"]);
            for i in 0..dn.nrows() {
                for j in 0..dn.ncols() {
                    let mut row = vec![format!("{i}:{j}")];
                    row.extend(cx_cells(dn[(i, j)]));
                    row.extend(cx_cells(d0[(i, j)]));
                    t.push(row);
                }
            }
            let mut row = vec!["det".to_string()];
            row.extend(cx_cells(det_n));
            row.extend(cx_cells(det_0));
            t.push(row);
            t.to_bytes()?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct CharfnOut {
                lambda: Cx,
                n: usize,
                delta_n: Vec<Vec<Cx>>,
                delta_0: Vec<Vec<Cx>>,
                det_n: Cx,
                det_0: Cx,
            }
            let rows = |a: &nalgebra::DMatrix<Complex64>| -> Vec<Vec<Cx>> {
                a.row_iter().map(|r| r.iter().map(|z| Cx(*z)).collect()).collect()
            };
            json_bytes(&CharfnOut {
                lambda: Cx(lambda),
                n,
                delta_n: rows(&dn),
                delta_0: rows(&d0),
                det_n: Cx(det_n),
                det_0: Cx(det_0),
            })?
        }
    };
    emit(out.output.as_deref(), &bytes)
}

fn locate(args: &HopfArgs) -> Result<(DdeModel, HopfPoint)> {
    let m = load_model(&args.model)?;
    check_param(&m, &args.param)?;
    let h = find_hopf(&m, args.disc.discretization(), &args.param, args.omega, args.alpha)?;
    Ok((m, h))
}

const HOPF_COLUMNS: [&str; 15] = [
    "param",
    "alpha",
    "omega",
    "n",
    "c_re",
    "c_im",
    "sigma",
    "a2",
    "simplicity_margin",
    "min_resonance_margin",
    "nonresonance_passed",
    "residual",
    "iterations",
    "criticality",
    "flags",
];

fn criticality(h: &HopfPoint) -> &'static str {
    match h.c.map(|c| c.re) {
        Some(r) if r < 0.0 => "supercritical",
        Some(r) if r > 0.0 => "subcritical",
        Some(_) => "degenerate",
        None => "",
    }
}

fn hopf_row(h: &HopfPoint) -> Vec<String> {
    vec![
        h.param.clone(),
        num(h.alpha),
        num(h.omega),
        h.n.map(|n| n.to_string()).unwrap_or_default(),
        opt(h.c.map(|c| c.re)),
        opt(h.c.map(|c| c.im)),
        num(h.sigma),
        opt(h.a2),
        num(h.simplicity_margin),
        opt(h.nonresonance.min_margin()),
        h.nonresonance.passed.to_string(),
        num(h.residual),
        h.iterations.to_string(),
        criticality(h).to_string(),
        h.flags.join(";"),
    ]
}

fn run_hopf(args: &HopfArgs, out: &OutputArgs) -> Result<()> {
    let (_, h) = locate(args)?;
    let bytes = match out.format_or(Format::Json) {
        Format::Json => json_bytes(&h)?,
        Format::Csv => {
            let mut t = Table::new(HOPF_COLUMNS);
            t.push(hopf_row(&h));
            t.to_bytes()?
        }
    };
    emit(out.output.as_deref(), &bytes)
}

fn run_lyap(args: &HopfArgs, out: &OutputArgs) -> Result<()> {
    let (_, h) = locate(args)?;
    let bytes = match out.format_or(Format::Json) {
        Format::Json => {
            #[derive(Serialize)]
            struct LyapOut<'a> {
                param: &'a str,
                alpha: f64,
                omega: f64,
                n: Option<usize>,
                #[serde(with = "psdde::serde_cx::option")]
                c: Option<Complex64>,
                sigma: f64,
                a2: Option<f64>,
                criticality: &'static str,
                flags: &'a [String],
            }
            json_bytes(&LyapOut {
                param: &h.param,
                alpha: h.alpha,
                omega: h.omega,
                n: h.n,
                c: h.c,
                sigma: h.sigma,
                a2: h.a2,
                criticality: criticality(&h),
                flags: &h.flags,
            })?
        }
        Format::Csv => {
            let mut t = Table::new(["param", "alpha", "omega", "n", "c_re", "c_im", "sigma", "a2", "criticality"]);
            let mut row = hopf_row(&h);
            row.truncate(8);
            row.push(criticality(&h).to_string());
            t.push(row);
            t.to_bytes()?
        }
    };
    emit(out.output.as_deref(), &bytes)
}

#[allow(clippy::too_many_arguments)]
fn run_curve(
    args: &HopfArgs,
    params: &[String],
    step: f64,
    max_points: usize,
    ranges: [Option<(f64, f64)>; 2],
    omega_min: f64,
    direction: Direction,
    out: &OutputArgs,
) -> Result<()> {
    let [p1, p2] = params else {
        return Err(usage(format!("--params needs exactly two names, got {}", params.len())));
    };
    if p1 == p2 {
        return Err(usage("--params names must differ"));
    }
    if &args.param != p1 && &args.param != p2 {
        return Err(usage(format!("--param {} must be one of {p1}, {p2}", args.param)));
    }
    let m = load_model(&args.model)?;
    check_param(&m, p1)?;
    check_param(&m, p2)?;
    let disc = args.disc.discretization();
    let start = find_hopf(&m, disc, &args.param, args.omega, args.alpha)?;
    let unbounded = (f64::NEG_INFINITY, f64::INFINITY);
    let dirs: &[(&str, f64)] = match direction {
        Direction::Forward => &[("forward", 1.0)],
        Direction::Backward => &[("backward", -1.0)],
        Direction::Both => &[("forward", 1.0), ("backward", -1.0)],
    };
    let mut segments = Vec::new();
    for &(name, sign) in dirs {
        let opts = CurveOptions {
            discretization: disc,
            step: sign * step,
            max_points,
            bounds: [ranges[0].unwrap_or(unbounded), ranges[1].unwrap_or(unbounded)],
            omega_min,
        };
        segments.push((name, trace_hopf_curve(&m, (p1, p2), &start, &opts)?));
    }
    let bytes = match out.format_or(Format::Csv) {
        Format::Csv => {
            let mut t = Table::new([
                "segment",
                p1.as_str(),
                p2.as_str(),
                "omega",
                "residual",
                "corrector_iterations",
                "step",
            ]);
            for (name, curve) in &segments {
                for p in &curve.points {
                    t.push(vec![
                        name.to_string(),
                        num(p.p1),
                        num(p.p2),
                        num(p.omega),
                        num(p.residual),
                        p.corrector_iterations.to_string(),
                        num(p.step),
                    ]);
                }
            }
            t.to_bytes()?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Segment<'a> {
                direction: &'a str,
                #[serde(flatten)]
                curve: &'a StabilityCurve,
            }
            let segs: Vec<Segment> = segments
                .iter()
                .map(|(d, c)| Segment { direction: d, curve: c })
                .collect();
            json_bytes(&segs)?
        }
    };
    emit(out.output.as_deref(), &bytes)
}

fn run_converge(
    model: &ModelArgs,
    param: &str,
    omega: f64,
    alpha: f64,
    n_list: &[usize],
    out: &OutputArgs,
) -> Result<()> {
    let m = load_model(model)?;
    check_param(&m, param)?;
    let study = convergence_study(&m, param, &[], omega, alpha, n_list)?;
    let bytes = match out.format_or(Format::Csv) {
        Format::Csv => {
            let mut t = Table::new([
                "n",
                "alpha",
                "omega",
                "err_alpha",
                "err_omega",
                "err_a2",
                "sigma",
                "simplicity",
                "min_margin",
                "error",
            ]);
            for r in &study.rows {
                t.push(vec![
                    r.n.to_string(),
                    opt(r.alpha),
                    opt(r.omega),
                    opt(r.err_alpha),
                    opt(r.err_omega),
                    opt(r.err_a2),
                    opt(r.sigma),
                    opt(r.simplicity),
                    opt(r.min_margin),
                    r.error.clone().unwrap_or_default(),
                ]);
            }
            t.to_bytes()?
        }
        Format::Json => json_bytes(&study)?,
    };
    emit(out.output.as_deref(), &bytes)
}

#[allow(clippy::too_many_arguments)]
fn run_simulate(
    model: &ModelArgs,
    n: usize,
    t_end: f64,
    history: &str,
    period: bool,
    report: Option<&Path>,
    skip: Option<f64>,
    component: usize,
    tols: (f64, f64),
    out: &OutputArgs,
) -> Result<()> {
    let m = load_model(model)?;
    let d = m.dim();
    let history = History::parse(history, d).map_err(usage)?;
    if component >= d {
        return Err(usage(format!("component {component} out of range for a {d}-dimensional model")));
    }
    let ps = PsSystem::new(m.clone(), n, equilibrium_or_origin(&m))?;
    let y0 = simulate::sample_history(&ps, |th| history.eval(th, d))?;
    let traj = simulate::integrate(&ps, &y0, t_end, tols.0, tols.1)?;

    let estimate = if period || report.is_some() {
        Some(simulate::estimate_period(&traj, component, skip.unwrap_or(0.6 * t_end))?)
    } else {
        None
    };
    let trajectory_bytes = || -> Result<Vec<u8>> {
        match out.format_or(Format::Csv) {
            Format::Csv => {
                let mut header = vec!["t".to_string()];
                header.extend((0..d).map(|c| format!("x{c}")));
                let mut t = Table::new(header);
                for (time, s) in traj.times.iter().zip(&traj.states) {
                    let mut row = vec![num(*time)];
                    row.extend(s[..d].iter().map(|v| num(*v)));
                    t.push(row);
                }
                t.to_bytes()
            }
            Format::Json => {
                #[derive(Serialize)]
                struct TrajOut<'a> {
                    t: &'a [f64],
                    x: Vec<&'a [f64]>,
                }
                json_bytes(&TrajOut {
                    t: &traj.times,
                    x: traj.states.iter().map(|s| &s[..d]).collect(),
                })
            }
        }
    };
    match (&estimate, report) {
        (Some(est), None) => {
            // The report takes stdout; the trajectory is written only to a file.
            if let Some(path) = out.output.as_deref() {
                emit(Some(path), &trajectory_bytes()?)?;
            }
            emit(None, &json_bytes(est)?)
        }
        (Some(est), Some(path)) => {
            emit(Some(path), &json_bytes(est)?)?;
            emit(out.output.as_deref(), &trajectory_bytes()?)
        }
        (None, _) => emit(out.output.as_deref(), &trajectory_bytes()?),
    }
}

fn run_chart(n: usize, omega_min: f64, omega_max: f64, steps: usize, out: &OutputArgs) -> Result<()> {
    if omega_min >= omega_max {
        return Err(usage("--omega-min must be below --omega-max"));
    }
    let rows = analytic::chart_blowfly(n, omega_min, omega_max, steps)?;
    let bytes = match out.format_or(Format::Csv) {
        Format::Csv => {
            let mut t = Table::new(["curve", "branch", "omega", "b1", "b2", "mu", "beta_over_mu", "re_c"]);
            for r in &rows {
                t.push(vec![
                    r.curve.clone(),
                    r.branch.to_string(),
                    num(r.omega),
                    num(r.b1),
                    num(r.b2),
                    opt(r.mu),
                    opt(r.beta_over_mu),
                    opt(r.re_c),
                ]);
            }
            t.to_bytes()?
        }
        Format::Json => json_bytes(&rows)?,
    };
    emit(out.output.as_deref(), &bytes)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Mesh { n, out } => run_mesh(*n, out),
        Command::Eig { model, n, out } => run_eig(model, *n, out),
        Command::Charfn { model, n, lambda, out } => run_charfn(model, *n, *lambda, out),
        Command::Hopf { hopf, out } => run_hopf(hopf, out),
        Command::Lyap { hopf, out } => run_lyap(hopf, out),
        Command::Curve {
            hopf,
            params,
            step,
            max_points,
            p1_range,
            p2_range,
            omega_min,
            direction,
            out,
        } => run_curve(hopf, params, *step, *max_points, [*p1_range, *p2_range], *omega_min, *direction, out),
        Command::Converge {
            model,
            param,
            omega,
            alpha,
            n_list,
            out,
        } => run_converge(model, param, *omega, *alpha, n_list, out),
        Command::Simulate {
            model,
            n,
            t_end,
            history,
            period,
            report,
            skip,
            component,
            rel_tol,
            abs_tol,
            out,
        } => run_simulate(
            model,
            *n,
            *t_end,
            history,
            *period,
            report.as_deref(),
            *skip,
            *component,
            (*rel_tol, *abs_tol),
            out,
        ),
        Command::ChartBlowfly {
            n,
            omega_min,
            omega_max,
            steps,
            out,
        } => run_chart(*n, *omega_min, *omega_max, *steps, out),
    }
}

fn report_error(kind: &str, message: &str) {
    let obj = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{obj}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            report_error("usage", &e.kind().to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                report_error("usage", &message);
                ExitCode::from(2)
            } else if let Some(err) = e.downcast_ref::<psdde::Error>() {
                report_error(err.kind(), &message);
                ExitCode::from(1)
            } else {
                report_error("io", &message);
                ExitCode::from(1)
            }
        }
    }
}
