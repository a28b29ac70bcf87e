//! Command dispatch and artifact emission.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use apseq::analysis::{
    besicovitch_distance, bohr_check, fit_trig_poly, omega_c_check, weyl_distance, APReport, BesicovitchReport,
    DEFAULT_L_GRID,
};
use apseq::first_order::SolveReport;
use apseq::higher_order::{build_companion, companion_d_block};
use apseq::linalg::solve_checked;
use apseq::seq::{fmt_f64, BiSequence, Seminorm, SeminormFamily, TrigPoly};
use apseq::Window;
use serde::Serialize;

use crate::config::{
    AnalysisSpec, BohrSpec, Cx, ForcingSpec, GridSpec, ProblemKind, ScenarioConfig, SolverSpec, TrigTerm, WindowSpec,
    SCHEMA_VERSION,
};
use crate::scenario::{build_family, build_forcing, second_order_coefficients, solve, state_dim};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SolveInclusion,
    SolveDegenerate,
    SolveP2,
    ReduceOrder,
    Analyze,
    Example,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SolveInclusion => "solve-inclusion",
            Command::SolveDegenerate => "solve-degenerate",
            Command::SolveP2 => "solve-p2",
            Command::ReduceOrder => "reduce-order",
            Command::Analyze => "analyze",
            Command::Example => "example",
        }
    }

    fn accepts(self, kind: ProblemKind) -> bool {
        use ProblemKind::*;
        match self {
            Command::Solve | Command::Analyze | Command::Example => true,
            Command::SolveInclusion => kind == Inclusion,
            Command::SolveDegenerate => matches!(kind, DegenerateVb | DegenerateVb1 | SystemBm | Heat),
            Command::SolveP2 | Command::ReduceOrder => matches!(kind, SecondOrder | Wave),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleKind {
    Heat,
    Wave,
}

/// The built-in grid scenarios: `n` interior points, spacing `h`, window
/// `[-20, 20]`, multipliers `0.1` (heat) or `0.05` (wave), shift
/// `b(k) = 3 + sin k` (heat) or `3` (wave), and an almost periodic forcing
/// with frequencies `1` and `√2`.
pub fn example_config(kind: ExampleKind, n: usize, h: f64) -> ScenarioConfig {
    let grid = GridSpec { n, h, dims: 1 };
    let grid_const = |x: f64| ForcingSpec::Constant { value: vec![Cx::Real(x); n] };
    let profile = |scale: f64| (0..n).map(|i| Cx::Real(scale * (1.0 + i as f64) / n as f64)).collect::<Vec<_>>();
    let f = ForcingSpec::TrigPoly {
        terms: vec![
            TrigTerm { freq: 1.0, coeffs: profile(1.0) },
            TrigTerm { freq: 2f64.sqrt(), coeffs: profile(0.5).into_iter().rev().collect() },
        ],
    };
    let mut forcing = std::collections::BTreeMap::new();
    forcing.insert("f".to_string(), f);
    let problem = match kind {
        ExampleKind::Heat => {
            forcing.insert("m".to_string(), grid_const(0.1));
            forcing.insert(
                "b".to_string(),
                ForcingSpec::TrigPoly {
                    terms: vec![
                        TrigTerm { freq: 0.0, coeffs: vec![Cx::Real(3.0)] },
                        TrigTerm { freq: 1.0, coeffs: vec![Cx::Pair([0.0, -0.5])] },
                        TrigTerm { freq: -1.0, coeffs: vec![Cx::Pair([0.0, 0.5])] },
                    ],
                },
            );
            ProblemKind::Heat
        }
        ExampleKind::Wave => {
            forcing.insert("m1".to_string(), grid_const(0.05));
            forcing.insert("m2".to_string(), grid_const(0.05));
            forcing.insert("b".to_string(), ForcingSpec::Constant { value: vec![Cx::Real(3.0)] });
            ProblemKind::Wave
        }
    };
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        problem,
        dim: None,
        p: None,
        window: WindowSpec { start: -20, end: 20 },
        solver: SolverSpec::default(),
        grid: Some(grid),
        seminorms: vec![],
        operators: Default::default(),
        forcing,
        analysis: AnalysisSpec {
            // the translation defect of the heat data propagated through the
            // resolvent bound; the wave data are no rougher
            bohr: Some(BohrSpec {
                epsilon: 0.3,
                l: 200,
                k_window: WindowSpec { start: -20, end: 20 },
                tau_range: WindowSpec { start: -200, end: 200 },
                seminorm: None,
            }),
            ..Default::default()
        },
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalysisOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bohr: Option<APReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub besicovitch: Option<BesicovitchReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weyl_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c_defect: Option<f64>,
}

fn pick_seminorm<'a>(family: &'a SeminormFamily, label: &Option<String>) -> Result<&'a Seminorm, CliError> {
    match label {
        None => Ok(family.iter().next().expect("families are nonempty")),
        Some(l) => family
            .get(l)
            .ok_or_else(|| CliError::Core(apseq::Error::InputContract(format!("unknown seminorm label '{l}'")))),
    }
}

fn approximant(f: &BiSequence, freqs: &[f64], n: i64) -> Result<BiSequence, CliError> {
    if freqs.is_empty() {
        return Ok(BiSequence::zero(f.dim()));
    }
    let p: TrigPoly = fit_trig_poly(f, freqs, n)?;
    Ok(BiSequence::trig_poly(p))
}

/// Runs every requested analysis on `f`.
pub fn run_analyses(
    f: &BiSequence,
    family: &SeminormFamily,
    spec: &AnalysisSpec,
    window: Window,
) -> Result<AnalysisOutput, CliError> {
    let mut out = AnalysisOutput::default();
    if let Some(b) = &spec.bohr {
        let kappa = pick_seminorm(family, &b.seminorm)?;
        out.bohr = Some(bohr_check(f, kappa, b.epsilon, b.k_window.window()?, b.tau_range.window()?, b.l)?);
    }
    if let Some(b) = &spec.besicovitch {
        let kappa = pick_seminorm(family, &b.seminorm)?;
        let grid = b.l_grid.clone().unwrap_or_else(|| DEFAULT_L_GRID.to_vec());
        let n = grid.iter().copied().max().unwrap_or(1);
        let p = approximant(f, &b.frequencies, n)?;
        out.besicovitch = Some(besicovitch_distance(f, &p, kappa, b.p, &grid)?);
    }
    if let Some(w) = &spec.weyl {
        let kappa = pick_seminorm(family, &w.seminorm)?;
        let s = w.s_range.window()?;
        let n = s.start.abs().max(s.end.abs()) + w.l;
        let p = approximant(f, &w.frequencies, n)?;
        out.weyl_distance = Some(weyl_distance(f, &p, kappa, w.p, w.l, s)?);
    }
    if let Some(o) = &spec.omega_c {
        let kw = match o.k_window {
            Some(k) => k.window()?,
            None => window,
        };
        out.omega_c_defect = Some(omega_c_check(f, o.omega, o.c.value(), family, kw)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompanionDoc {
    pub p: usize,
    pub block_dim: usize,
    pub csv: String,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    generated_at: u64,
    schema_version: u32,
    command: &'static str,
    problem: &'static str,
    dim: usize,
    window: Window,
    #[serde(skip_serializing_if = "Option::is_none")]
    solve: Option<&'a SolveReport>,
    analysis: &'a AnalysisOutput,
    #[serde(skip_serializing_if = "Option::is_none")]
    companion: Option<&'a CompanionDoc>,
}

/// Everything one invocation produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Option<SolveReport>,
    pub analysis: AnalysisOutput,
    pub files: Vec<PathBuf>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    body(&mut w)?;
    w.flush().map_err(io_err(path))
}

/// One row per `(k, grid index)`.
pub fn write_grid_csv<W: Write>(u: &BiSequence, window: Window, out: &mut W) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(out, "k,i,re,im").map_err(io)?;
    for k in window.iter() {
        for (i, z) in u.eval(k)?.iter().enumerate() {
            writeln!(out, "{k},{i},{},{}", fmt_f64(z.re), fmt_f64(z.im)).map_err(io)?;
        }
    }
    Ok(())
}

fn summary_text(cfg: &ScenarioConfig, command: Command, rep: Option<&SolveReport>, an: &AnalysisOutput) -> String {
    let mut s = format!(
        "apseq {} ({}) on [{}, {}]\n",
        command.name(),
        cfg.problem.name(),
        cfg.window.start,
        cfg.window.end
    );
    if let Some(r) = rep {
        let v_max = r.truncation_v.iter().max().copied().unwrap_or(0);
        s += &format!("truncation depth: {v_max}\n");
        s += &format!("uniqueness: {}\n", serde_json::to_value(r.uniqueness).unwrap_or_default().as_str().unwrap_or(""));
        for (label, c) in &r.sup_certificate {
            s += &format!("sup certificate [{label}]: {}\n", fmt_f64(*c));
        }
        for (label, res) in &r.max_residual {
            s += &format!("max residual [{label}]: {}\n", fmt_f64(*res));
        }
        if let Some(d) = r.periodicity_defect {
            s += &format!("periodicity defect: {}\n", fmt_f64(d));
        }
        for (k, v) in &r.diagnostics {
            s += &format!("{k}: {}\n", fmt_f64(*v));
        }
        for w in &r.warnings {
            s += &format!("warning: {w}\n");
        }
    }
    if let Some(b) = &an.bohr {
        s += &format!(
            "bohr [{}] eps {}: verdict {}, max defect {}, witness L {}\n",
            b.seminorm_label,
            fmt_f64(b.epsilon),
            b.verdict,
            fmt_f64(b.max_defect),
            b.witness_l.map_or("none".to_string(), |l| l.to_string())
        );
    }
    if let Some(b) = &an.besicovitch {
        s += &format!("besicovitch p={}: limsup estimate {}\n", b.p, fmt_f64(b.limsup_estimate));
    }
    if let Some(w) = an.weyl_distance {
        s += &format!("weyl distance: {}\n", fmt_f64(w));
    }
    if let Some(d) = an.omega_c_defect {
        s += &format!("omega_c defect: {}\n", fmt_f64(d));
    }
    s
}

/// Writes the companion selection blocks `D(k)` for `k` in the window as
/// `k,i,j,re,im` rows.
fn reduce_order(cfg: &ScenarioConfig, out: &Path) -> Result<CompanionDoc, CliError> {
    let (a0, a1, a2, c) = second_order_coefficients(cfg)?;
    let d = a0.dim();
    let cc = c.clone();
    let a0inv_c = a0.map(d, move |m| solve_checked(m, &cc, "A0(k)"))?;
    let sys = build_companion(2, &[a0, a1, a2], &c)?;
    let path = out.join("companion.csv");
    write_file(&path, |w| {
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        writeln!(w, "k,i,j,re,im").map_err(io)?;
        for k in cfg.window.window()?.iter() {
            let m = companion_d_block(&sys, &a0inv_c, k)?;
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let z = m[(i, j)];
                    writeln!(w, "{k},{i},{j},{},{}", fmt_f64(z.re), fmt_f64(z.im)).map_err(io)?;
                }
            }
        }
        Ok(())
    })?;
    Ok(CompanionDoc { p: 2, block_dim: d, csv: "companion.csv".into() })
}

/// Runs `command` on `cfg`, writing artifacts into `out`.
///
/// `input` replaces the analyzed sequence of `analyze` (default: forcing `f`).
pub fn run(command: Command, cfg: &ScenarioConfig, out: &Path, input: Option<&Path>) -> Result<RunOutput, CliError> {
    if !command.accepts(cfg.problem) {
        return Err(CliError::Config(format!(
            "`{}` does not handle {} problems",
            command.name(),
            cfg.problem.name()
        )));
    }
    let window = cfg.window.window()?;
    let dim = state_dim(cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut files = Vec::new();

    let scenario_path = out.join("scenario.toml");
    let text = cfg.to_toml()?;
    fs::write(&scenario_path, text).map_err(io_err(&scenario_path))?;
    files.push(scenario_path);

    let mut report = None;
    let mut companion = None;
    let analysis;
    match command {
        Command::Analyze => {
            let family = build_family(&cfg.seminorms, dim)?;
            let f = match input {
                Some(p) => {
                    let file = File::open(p).map_err(io_err(p))?;
                    BiSequence::read_csv(std::io::BufReader::new(file))?
                }
                None => {
                    let spec = cfg
                        .forcing
                        .get("f")
                        .ok_or_else(|| CliError::Config("analyze needs forcing `f` or --input".into()))?;
                    build_forcing(spec, dim, "f")?
                }
            };
            analysis = run_analyses(&f, &family, &cfg.analysis, window)?;
        }
        Command::ReduceOrder => {
            let doc = reduce_order(cfg, out)?;
            files.push(out.join(&doc.csv));
            companion = Some(doc);
            analysis = AnalysisOutput::default();
        }
        _ => {
            let outcome = solve(cfg)?;
            let mut rep = outcome.report;
            analysis = run_analyses(&outcome.solution, &outcome.family, &cfg.analysis, window)?;
            if rep.ap_report.is_none() {
                rep.ap_report = analysis.bohr.clone();
            }
            if rep.periodicity_defect.is_none() {
                rep.periodicity_defect = analysis.omega_c_defect;
            }

            let csv = out.join("solution.csv");
            write_file(&csv, |w| match outcome.grid {
                Some(_) => write_grid_csv(&outcome.solution, window, w),
                None => Ok(outcome.solution.write_csv(window.start, window.end, w)?),
            })?;
            files.push(csv);
            if let Some((name, aux)) = &outcome.auxiliary {
                let p = out.join(format!("{name}.csv"));
                write_file(&p, |w| Ok(aux.write_csv(window.start, window.end, w)?))?;
                files.push(p);
            }
            report = Some(rep);
        }
    }

    let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let doc = ReportDoc {
        generated_at,
        schema_version: SCHEMA_VERSION,
        command: command.name(),
        problem: cfg.problem.name(),
        dim,
        window,
        solve: report.as_ref(),
        analysis: &analysis,
        companion: companion.as_ref(),
    };
    let json_path = out.join("report.json");
    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(&json_path, json + "\n").map_err(io_err(&json_path))?;
    files.push(json_path);

    let summary_path = out.join("summary.txt");
    fs::write(&summary_path, summary_text(cfg, command, report.as_ref(), &analysis)).map_err(io_err(&summary_path))?;
    files.push(summary_path);

    Ok(RunOutput { report, analysis, files })
}
