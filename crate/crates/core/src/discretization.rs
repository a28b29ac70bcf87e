//! Dirichlet finite-difference Laplacians, their resolvents, and the
//! semi-discrete heat and wave problems built on them.
//!
//! Heat: `m(k+1,·)u(k+1) = Δ_h u(k) − b(k)u(k) + f(k)`, a degenerate equation
//! with `B(k) = diag m(k,·)`, `A(k) = Δ_h − b(k)`, `C = I`.
//!
//! Wave: `m₂(k+2,·)u(k+2) + m₁(k+1,·)u(k+1) = Δ_h u(k) − b(k)u(k) + f(k)`, a
//! second-order equation with `A₀(k) = b(k) − Δ_h`, `A₁ = diag m₁`,
//! `A₂ = diag m₂`, `C = I`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::first_order::{SolveOptions, SolveReport};
use crate::higher_order::solve_second_order;
use crate::linalg::{diagonal, identity, inverse_checked, scalar_identity};
use crate::operator::OperatorSequence;
use crate::resolvent::{forward_probe, solve_vb_with_selection, DegenerateVb, ResolventSelection};
use crate::seq::{BiSequence, SeminormFamily};
use crate::{Operator, Value, Window};

pub const MAX_2D_N: usize = 32;
/// Largest admissible sup of the composite certificate.
pub const SMALLNESS_LIMIT: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct GridLaplacian {
    pub n: usize,
    pub dims: usize,
    pub h: f64,
    pub matrix: Operator,
}

fn tridiagonal(n: usize, h: f64) -> Operator {
    let s = 1.0 / (h * h);
    Operator::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(-2.0 * s, 0.0)
        } else if i.abs_diff(j) == 1 {
            Complex64::new(s, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn check_grid(n: usize, h: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InputContract("grid needs at least one interior point".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InputContract(format!("grid spacing must be positive, got {h}")));
    }
    Ok(())
}

/// `(1, −2, 1)/h²` on `n` interior points.
pub fn laplacian_1d(n: usize, h: f64) -> Result<GridLaplacian> {
    check_grid(n, h)?;
    Ok(GridLaplacian {
        n,
        dims: 1,
        h,
        matrix: tridiagonal(n, h),
    })
}

/// Five-point Laplacian on an `n × n` interior grid, row-major.
pub fn laplacian_2d(n: usize, h: f64) -> Result<GridLaplacian> {
    check_grid(n, h)?;
    if n > MAX_2D_N {
        return Err(Error::InputContract(format!("2D grids are limited to n ≤ {MAX_2D_N}, got {n}")));
    }
    let t = tridiagonal(n, h);
    let id = identity(n);
    let matrix = t.kronecker(&id) + id.kronecker(&t);
    Ok(GridLaplacian { n, dims: 2, h, matrix })
}

impl GridLaplacian {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Closed-form spectrum of `Δ_h`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let one: Vec<f64> = (1..=self.n)
            .map(|j| -(2.0 - 2.0 * (j as f64 * PI / (self.n + 1) as f64).cos()) / (self.h * self.h))
            .collect();
        let mut all = if self.dims == 1 {
            one
        } else {
            one.iter().flat_map(|a| one.iter().map(move |b| a + b)).collect()
        };
        all.sort_by(|a, b| a.total_cmp(b));
        all
    }

    /// Smallest eigenvalue of `−Δ_h`.
    pub fn mu_min(&self) -> f64 {
        self.dims as f64 * (2.0 - 2.0 * (PI / (self.n + 1) as f64).cos()) / (self.h * self.h)
    }

    fn check_shift(b: Complex64) -> Result<()> {
        if !(b.re > 0.0) {
            return Err(Error::Domain(format!("resolvent needs Re b > 0, got {b}")));
        }
        Ok(())
    }

    /// `(b − Δ_h)⁻¹`.
    pub fn resolvent(&self, b: Complex64) -> Result<Operator> {
        Self::check_shift(b)?;
        inverse_checked(&(scalar_identity(self.size(), b) - &self.matrix), "b - Δ_h")
    }

    /// Solves `(b − Δ_h)x = y`.
    pub fn resolvent_apply(&self, b: Complex64, y: &Value) -> Result<Value> {
        if y.len() != self.size() {
            return Err(Error::shape(self.size(), y.len()));
        }
        Ok(self.resolvent(b)? * y)
    }

    /// `‖(b − Δ_h)⁻¹‖₂ ≤ 1/(Re b + μ_min)`, with equality for real `b`.
    pub fn resolvent_bound(&self, b: Complex64) -> Result<f64> {
        Self::check_shift(b)?;
        Ok(1.0 / (b.re + self.mu_min()))
    }

    /// Grid coordinates of a flat index.
    pub fn grid_index(&self, i: usize) -> (usize, usize) {
        if self.dims == 1 {
            (i, 0)
        } else {
            (i / self.n, i % self.n)
        }
    }
}

fn combined_period(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    Some(a? / gcd(a?, b?) * b?)
}

fn scalar_of(b: &BiSequence, k: i64) -> Result<Complex64> {
    Ok(b.eval(k)?[0])
}

fn check_dims(grid: &GridLaplacian, b: &BiSequence, grid_seqs: &[&BiSequence]) -> Result<()> {
    if b.dim() != 1 {
        return Err(Error::shape("scalar shift sequence b", b.dim()));
    }
    for s in grid_seqs {
        if s.dim() != grid.size() {
            return Err(Error::shape(grid.size(), s.dim()));
        }
    }
    Ok(())
}

fn list_indices(ks: &[i64]) -> String {
    const SHOWN: usize = 12;
    let head: Vec<String> = ks.iter().take(SHOWN).map(|k| k.to_string()).collect();
    if ks.len() > SHOWN {
        format!("{} … ({} indices)", head.join(", "), ks.len())
    } else {
        head.join(", ")
    }
}

fn check_positive_shift(b: &BiSequence, probe: Window) -> Result<f64> {
    let mut failing = Vec::new();
    let mut min_re = f64::INFINITY;
    for k in probe.iter() {
        let re = scalar_of(b, k)?.re;
        if !(re > 0.0) {
            failing.push(k);
        }
        min_re = min_re.min(re);
    }
    if !failing.is_empty() {
        return Err(Error::InputContract(format!("Re b(k) ≤ 0 at k = {}", list_indices(&failing))));
    }
    Ok(min_re)
}

fn check_smallness<F>(family: &SeminormFamily, probe: Window, cert: F) -> Result<()>
where
    F: Fn(&str, i64) -> Result<f64>,
{
    for kappa in family.iter() {
        let failing: Vec<i64> = probe
            .iter()
            .map(|k| cert(&kappa.label, k).map(|c| (k, c)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|(_, c)| !(*c <= SMALLNESS_LIMIT))
            .map(|(k, _)| k)
            .collect();
        if !failing.is_empty() {
            return Err(Error::InputContract(format!(
                "composite certificate for '{}' exceeds {SMALLNESS_LIMIT} at k = {}",
                kappa.label,
                list_indices(&failing)
            )));
        }
    }
    Ok(())
}

fn multiplier(grid: &GridLaplacian, m: &BiSequence) -> Result<OperatorSequence> {
    let mm = m.clone();
    OperatorSequence::from_rule(grid.size(), m.period(), move |k| Ok(diagonal(mm.eval(k)?.as_slice())))
}

/// Heat problem ready to solve: the degenerate form and its certified
/// selection `D(k) = diag m(k,·) (Δ_h − b(k))⁻¹`.
#[derive(Debug, Clone)]
pub struct HeatInstance {
    pub grid: GridLaplacian,
    pub problem: DegenerateVb,
    pub selection: ResolventSelection,
    pub f: BiSequence,
    pub family: SeminormFamily,
    /// `min Re b(k)` on the probe window.
    pub min_re_b: f64,
}

/// Builds and checks the heat problem for solving on `window`.
///
/// `Re b(k) > 0` and the composite certificate `≤ 0.9` are checked on the
/// probe window the solver will consume.
pub fn heat_problem(
    grid: &GridLaplacian,
    m: &BiSequence,
    b: &BiSequence,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<HeatInstance> {
    check_dims(grid, b, &[m, f])?;
    if family.dim() != grid.size() {
        return Err(Error::shape(grid.size(), family.dim()));
    }
    let probe = forward_probe(window, opts);
    let min_re_b = check_positive_shift(b, probe)?;

    let (lap, bb) = (grid.matrix.clone(), b.clone());
    let n = grid.size();
    let a = OperatorSequence::from_rule(n, b.period(), move |k| {
        Ok(&lap - scalar_identity(n, scalar_of(&bb, k)?))
    })?;
    let ainv_c = a.map(n, |m| inverse_checked(m, "Δ_h - b(k)"))?;
    let problem = DegenerateVb {
        a: Some(a),
        b: multiplier(grid, m)?,
        ainv_c,
        c: identity(n),
    };
    let selection = problem.selection(family, probe)?;
    check_smallness(family, probe, |l, k| selection.d.certificate(l, k))?;
    Ok(HeatInstance {
        grid: grid.clone(),
        problem,
        selection,
        f: f.clone(),
        family: family.clone(),
        min_re_b,
    })
}

impl HeatInstance {
    /// Returns `(v, u, report)` with `v(k) = m(k,·)u(k)`.
    pub fn solve(&self, window: Window, opts: &SolveOptions) -> Result<(BiSequence, BiSequence, SolveReport)> {
        let (v, u, mut rep) = solve_vb_with_selection(&self.problem, &self.selection, &self.f, &self.family, window, opts)?;
        rep.diagnostics.insert("min_re_b".into(), self.min_re_b);
        Ok((v, u, rep))
    }
}

/// Wave problem as a second-order equation.
#[derive(Debug, Clone)]
pub struct WaveInstance {
    pub grid: GridLaplacian,
    pub a0: OperatorSequence,
    pub a1: OperatorSequence,
    pub a2: OperatorSequence,
    pub f: BiSequence,
    pub family: SeminormFamily,
    pub min_re_b: f64,
}

/// Builds and checks the wave problem for solving on `window`: `Re b(k) > 0`
/// and `c(k,1) + c(k,2) + c(k+1,3) ≤ 0.9` on the probe window.
#[allow(clippy::too_many_arguments)]
pub fn wave_problem(
    grid: &GridLaplacian,
    m1: &BiSequence,
    m2: &BiSequence,
    b: &BiSequence,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<WaveInstance> {
    check_dims(grid, b, &[m1, m2, f])?;
    if family.dim() != grid.size() {
        return Err(Error::shape(grid.size(), family.dim()));
    }
    let probe = forward_probe(window, opts);
    let min_re_b = check_positive_shift(b, probe)?;

    let (lap, bb) = (grid.matrix.clone(), b.clone());
    let n = grid.size();
    let a0 = OperatorSequence::from_rule(n, b.period(), move |k| {
        Ok(scalar_identity(n, scalar_of(&bb, k)?) - &lap)
    })?;
    let a1 = multiplier(grid, m1)?;
    let a2 = multiplier(grid, m2)?;

    let r = a0.map(n, |m| inverse_checked(m, "b(k) - Δ_h"))?;
    let c1 = r.clone().certify(family, probe)?;
    let c2 = a1.compose(&r)?.certify(family, probe)?;
    let c3 = a2.shift(1).certify(family, probe)?;
    check_smallness(family, probe, |l, k| {
        Ok(c1.certificate(l, k)? + c2.certificate(l, k)? + c3.certificate(l, k)?)
    })?;
    Ok(WaveInstance {
        grid: grid.clone(),
        a0,
        a1,
        a2,
        f: f.clone(),
        family: family.clone(),
        min_re_b,
    })
}

impl WaveInstance {
    pub fn solve(&self, window: Window, opts: &SolveOptions) -> Result<(BiSequence, SolveReport)> {
        let n = self.grid.size();
        let (u, mut rep) =
            solve_second_order(&self.a0, &self.a1, &self.a2, &identity(n), &self.f, &self.family, window, opts)?;
        rep.diagnostics.insert("min_re_b".into(), self.min_re_b);
        Ok((u, rep))
    }
}

/// Block operators for the system with `D_ij(k) = (b_ij(k) − Δ_h)⁻¹` and
/// `A_ij = Σ_q a_ij[q] Δ_h^q`. Returns `(A, D)` on `Y^p`.
pub fn laplacian_block_system(
    grid: &GridLaplacian,
    shifts: &[Vec<BiSequence>],
    polys: &[Vec<Vec<Complex64>>],
) -> Result<(OperatorSequence, OperatorSequence)> {
    let p = shifts.len();
    if p == 0 || shifts.iter().any(|r| r.len() != p) || polys.len() != p || polys.iter().any(|r| r.len() != p) {
        return Err(Error::shape("p × p blocks of shifts and polynomials", p));
    }
    let n = grid.size();
    let mut a = Operator::zeros(n * p, n * p);
    for (i, row) in polys.iter().enumerate() {
        for (j, coeffs) in row.iter().enumerate() {
            let mut acc = Operator::zeros(n, n);
            let mut power = identity(n);
            for &q in coeffs {
                acc += &power * q;
                power = &power * &grid.matrix;
            }
            crate::linalg::set_block(&mut a, i, j, &acc);
        }
    }
    let period = shifts
        .iter()
        .flatten()
        .map(|s| s.period())
        .try_fold(1usize, |acc, q| combined_period(Some(acc), q));
    let (g, s) = (grid.clone(), shifts.to_vec());
    let d = OperatorSequence::from_rule(n * p, period, move |k| {
        let mut m = Operator::zeros(n * p, n * p);
        for (i, row) in s.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                crate::linalg::set_block(&mut m, i, j, &g.resolvent(scalar_of(b, k)?)?);
            }
        }
        Ok(m)
    })?;
    Ok((OperatorSequence::constant(a)?, d))
}
