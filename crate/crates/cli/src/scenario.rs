//! Config specs to solver inputs, and problem dispatch.

use apseq::discretization::{heat_problem, laplacian_1d, laplacian_2d, wave_problem, GridLaplacian};
use apseq::first_order::{solve_series, SolveOptions, SolveReport};
use apseq::higher_order::{solve_second_order, solve_system_bm};
use apseq::linalg::{identity, inverse_checked, scalar_identity, solve_checked};
use apseq::operator::OperatorSequence;
use apseq::resolvent::{
    forward_probe, solve_degenerate_vb, solve_degenerate_vb1, solve_inclusion, DegenerateVb, DegenerateVb1,
    ResolventSelection,
};
use apseq::seq::{BiSequence, Seminorm, SeminormFamily, TrigPoly};
use apseq::{Operator, Value, Window};
use num_complex::Complex64;

use crate::config::{ForcingSpec, Matrix, OperatorSpec, ProblemKind, Row, ScenarioConfig, SeminormSpec};
use crate::CliError;

fn contract(msg: impl Into<String>) -> CliError {
    CliError::Core(apseq::Error::InputContract(msg.into()))
}

fn row_value(row: &Row, dim: usize, what: &str) -> Result<Value, CliError> {
    if row.len() != dim {
        return Err(contract(format!("{what}: expected {dim} entries, got {}", row.len())));
    }
    Ok(Value::from_iterator(dim, row.iter().map(|z| z.value())))
}

fn matrix_value(m: &Matrix, dim: usize, what: &str) -> Result<Operator, CliError> {
    if m.len() != dim || m.iter().any(|r| r.len() != dim) {
        return Err(contract(format!("{what}: expected a {dim}×{dim} matrix")));
    }
    Ok(Operator::from_fn(dim, dim, |i, j| m[i][j].value()))
}

pub fn build_operator(spec: &OperatorSpec, dim: usize, name: &str) -> Result<OperatorSequence, CliError> {
    let op = match spec {
        OperatorSpec::Constant { matrix } => OperatorSequence::constant(matrix_value(matrix, dim, name)?)?,
        OperatorSpec::Periodic { matrices } => OperatorSequence::periodic(
            matrices.iter().map(|m| matrix_value(m, dim, name)).collect::<Result<Vec<_>, _>>()?,
        )?,
        OperatorSpec::Scalar { value } => OperatorSequence::constant(scalar_identity(dim, value.value()))?,
        OperatorSpec::Diagonal { values } => {
            let v = row_value(values, dim, name)?;
            OperatorSequence::constant(Operator::from_diagonal(&v))?
        }
        OperatorSpec::PeriodicScalar { values } => {
            OperatorSequence::periodic(values.iter().map(|z| scalar_identity(dim, z.value())).collect())?
        }
        OperatorSpec::Trig { terms } => {
            if terms.is_empty() {
                return Err(contract(format!("{name}: trig generator needs at least one term")));
            }
            let mats: Vec<(f64, Operator)> = terms
                .iter()
                .map(|t| Ok((t.freq, matrix_value(&t.matrix, dim, name)?)))
                .collect::<Result<_, CliError>>()?;
            if mats.iter().all(|(l, _)| *l == 0.0) {
                OperatorSequence::constant(mats.iter().fold(Operator::zeros(dim, dim), |acc, (_, m)| acc + m))?
            } else {
                OperatorSequence::generator(dim, move |k| {
                    mats.iter().fold(Operator::zeros(dim, dim), |acc, (l, m)| {
                        acc + m * Complex64::from_polar(1.0, l * k as f64)
                    })
                })
            }
        }
    };
    Ok(op)
}

pub fn build_forcing(spec: &ForcingSpec, dim: usize, name: &str) -> Result<BiSequence, CliError> {
    let seq = match spec {
        ForcingSpec::Constant { value } => BiSequence::constant(row_value(value, dim, name)?),
        ForcingSpec::Table { start, values } => BiSequence::table(
            *start,
            values.iter().map(|r| row_value(r, dim, name)).collect::<Result<_, _>>()?,
        )?
        .with_zero_extension(),
        ForcingSpec::TrigPoly { terms } => BiSequence::trig_poly(TrigPoly::new(
            dim,
            terms
                .iter()
                .map(|t| Ok((t.freq, row_value(&t.coeffs, dim, name)?)))
                .collect::<Result<_, CliError>>()?,
        )?),
        ForcingSpec::OmegaC { start, c, base } => BiSequence::omega_c(
            *start,
            base.iter().map(|r| row_value(r, dim, name)).collect::<Result<_, _>>()?,
            c.value(),
        )?,
    };
    Ok(seq)
}

pub fn build_family(specs: &[SeminormSpec], dim: usize) -> Result<SeminormFamily, CliError> {
    if specs.is_empty() {
        return Ok(SeminormFamily::sup(dim));
    }
    let seminorms = specs
        .iter()
        .map(|s| {
            Ok(match s {
                SeminormSpec::Sup => Seminorm::sup(),
                SeminormSpec::PNorm { p } => Seminorm::p_norm(*p)?,
                SeminormSpec::FirstDifference => Seminorm::first_difference(),
                SeminormSpec::SecondDifference => Seminorm::second_difference(),
                SeminormSpec::Stencil { label, taps } => {
                    Seminorm::stencil(label.clone(), taps.iter().map(|(o, w)| (*o, w.value())).collect())?
                }
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SeminormFamily::new(seminorms, dim)?)
}

pub fn build_grid(cfg: &ScenarioConfig) -> Result<GridLaplacian, CliError> {
    let g = cfg.grid.ok_or_else(|| contract(format!("{} needs a [grid] section", cfg.problem.name())))?;
    Ok(match g.dims {
        1 => laplacian_1d(g.n, g.h)?,
        2 => laplacian_2d(g.n, g.h)?,
        d => return Err(contract(format!("grid dims must be 1 or 2, got {d}"))),
    })
}

/// State dimension of the scenario.
pub fn state_dim(cfg: &ScenarioConfig) -> Result<usize, CliError> {
    match cfg.problem {
        ProblemKind::Heat | ProblemKind::Wave => Ok(build_grid(cfg)?.size()),
        _ => cfg
            .dim
            .filter(|&d| d > 0)
            .ok_or_else(|| contract("a positive `dim` is required")),
    }
}

pub fn solve_options(cfg: &ScenarioConfig) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions {
        tol: cfg.solver.tol.unwrap_or(d.tol),
        v_max: cfg.solver.v_max.unwrap_or(d.v_max),
        probe: cfg.solver.probe.unwrap_or(d.probe),
    }
}

struct Inputs<'a> {
    cfg: &'a ScenarioConfig,
    dim: usize,
}

impl Inputs<'_> {
    fn op(&self, name: &str) -> Result<OperatorSequence, CliError> {
        self.op_opt(name)?
            .ok_or_else(|| contract(format!("{} needs operator `{name}`", self.cfg.problem.name())))
    }

    fn op_opt(&self, name: &str) -> Result<Option<OperatorSequence>, CliError> {
        self.cfg.operators.get(name).map(|s| build_operator(s, self.dim, name)).transpose()
    }

    fn c(&self) -> Result<Operator, CliError> {
        match self.op_opt("C")? {
            None => Ok(identity(self.dim)),
            Some(c) if c.period() == Some(1) => Ok(c.at(0)?),
            Some(_) => Err(contract("`C` must be a constant operator")),
        }
    }

    fn forcing(&self, name: &str, dim: usize) -> Result<BiSequence, CliError> {
        let spec = self
            .cfg
            .forcing
            .get(name)
            .ok_or_else(|| contract(format!("{} needs forcing `{name}`", self.cfg.problem.name())))?;
        build_forcing(spec, dim, name)
    }
}

/// Solver output: the solution `u`, an optional auxiliary sequence (`v = Bu`
/// for degenerate problems) and the report.
pub struct Outcome {
    pub solution: BiSequence,
    pub auxiliary: Option<(&'static str, BiSequence)>,
    pub report: SolveReport,
    pub family: SeminormFamily,
    pub grid: Option<GridLaplacian>,
}

/// Dispatches the scenario to its solver.
pub fn solve(cfg: &ScenarioConfig) -> Result<Outcome, CliError> {
    let window: Window = cfg.window.window()?;
    let opts = solve_options(cfg);
    let dim = state_dim(cfg)?;
    let family = build_family(&cfg.seminorms, dim)?;
    let inp = Inputs { cfg, dim };
    let mut grid = None;

    let (solution, auxiliary, report) = match cfg.problem {
        ProblemKind::FirstOrder => {
            let probe = Window::new(window.start - opts.probe as i64 - 1, window.end)?;
            let a = inp.op("A")?.certify(&family, probe)?;
            let (x, rep) = solve_series(&a, &inp.forcing("f", dim)?, &family, window, &opts)?;
            (x, None, rep)
        }
        ProblemKind::Inclusion => {
            let sel = ResolventSelection::new(inp.op("D")?, inp.c()?)?.certify(&family, forward_probe(window, &opts))?;
            let (x, rep) = solve_inclusion(&sel, &inp.forcing("f", dim)?, &family, window, &opts)?;
            (x, None, rep)
        }
        ProblemKind::DegenerateVb => {
            let c = inp.c()?;
            let a = inp.op_opt("A")?;
            let ainv_c = match (inp.op_opt("Ainv_C")?, &a) {
                (Some(r), _) => r,
                (None, Some(a)) => {
                    let cc = c.clone();
                    a.map(dim, move |m| solve_checked(m, &cc, "A(k)"))?
                }
                (None, None) => return Err(contract("degenerate_vb needs `A` or `Ainv_C`")),
            };
            let problem = DegenerateVb { a, b: inp.op("B")?, ainv_c, c };
            let (v, u, rep) = solve_degenerate_vb(&problem, &inp.forcing("f", dim)?, &family, window, &opts)?;
            (u, Some(("v", v)), rep)
        }
        ProblemKind::DegenerateVb1 => {
            let c = inp.c()?;
            let a = inp.op_opt("A")?;
            let b = inp.op("B")?;
            let ainv_bc = match (inp.op_opt("Ainv_BC")?, &a) {
                (Some(r), _) => r,
                (None, Some(a)) => {
                    let ainv = a.map(dim, |m| inverse_checked(m, "A(k)"))?;
                    ainv.compose(&b.shift(1).compose(&OperatorSequence::constant(c.clone())?)?)?
                }
                (None, None) => return Err(contract("degenerate_vb1 needs `A` or `Ainv_BC`")),
            };
            let problem = DegenerateVb1 { a, b, ainv_bc, c };
            let (u, rep) =
                solve_degenerate_vb1(&problem, &inp.forcing("g", dim)?, &inp.forcing("f", dim)?, &family, window, &opts)?;
            (u, None, rep)
        }
        ProblemKind::SecondOrder => {
            let (u, rep) = solve_second_order(
                &inp.op("A0")?,
                &inp.op("A1")?,
                &inp.op("A2")?,
                &inp.c()?,
                &inp.forcing("f", dim)?,
                &family,
                window,
                &opts,
            )?;
            (u, None, rep)
        }
        ProblemKind::SystemBm => {
            let p = cfg.p.ok_or_else(|| contract("system_bm needs `p`"))?;
            let (u, rep) =
                solve_system_bm(&inp.op("A")?, &inp.op("D")?, p, &inp.forcing("f", dim)?, &family, window, &opts)?;
            (u, None, rep)
        }
        ProblemKind::Heat => {
            let g = build_grid(cfg)?;
            let inst = heat_problem(
                &g,
                &inp.forcing("m", dim)?,
                &inp.forcing("b", 1)?,
                &inp.forcing("f", dim)?,
                &family,
                window,
                &opts,
            )?;
            let (v, u, rep) = inst.solve(window, &opts)?;
            grid = Some(g);
            (u, Some(("v", v)), rep)
        }
        ProblemKind::Wave => {
            let g = build_grid(cfg)?;
            let inst = wave_problem(
                &g,
                &inp.forcing("m1", dim)?,
                &inp.forcing("m2", dim)?,
                &inp.forcing("b", 1)?,
                &inp.forcing("f", dim)?,
                &family,
                window,
                &opts,
            )?;
            let (u, rep) = inst.solve(window, &opts)?;
            grid = Some(g);
            (u, None, rep)
        }
    };
    Ok(Outcome { solution, auxiliary, report, family, grid })
}

/// The second-order coefficients `(A0, A1, A2, C)` of a `second_order` or
/// `wave` scenario.
pub fn second_order_coefficients(
    cfg: &ScenarioConfig,
) -> Result<(OperatorSequence, OperatorSequence, OperatorSequence, Operator), CliError> {
    let dim = state_dim(cfg)?;
    let inp = Inputs { cfg, dim };
    match cfg.problem {
        ProblemKind::SecondOrder => Ok((inp.op("A0")?, inp.op("A1")?, inp.op("A2")?, inp.c()?)),
        ProblemKind::Wave => {
            let g = build_grid(cfg)?;
            let b = inp.forcing("b", 1)?;
            let lap = g.matrix.clone();
            let n = g.size();
            let a0 = OperatorSequence::from_rule(n, b.period(), move |k| Ok(scalar_identity(n, b.eval(k)?[0]) - &lap))?;
            let diag = |name: &str| -> Result<OperatorSequence, CliError> {
                let m = inp.forcing(name, n)?;
                Ok(OperatorSequence::from_rule(n, m.period(), move |k| Ok(Operator::from_diagonal(&m.eval(k)?)))?)
            };
            Ok((a0, diag("m1")?, diag("m2")?, identity(n)))
        }
        other => Err(contract(format!("reduce-order needs a second-order problem, got {}", other.name()))),
    }
}
