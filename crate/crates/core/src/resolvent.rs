//! Inclusions `Cx(k+1) ∈ 𝒜(k)x(k) + Cf(k)` and degenerate equations, solved
//! through a single-valued selection `D(k) ⊆ [𝒜(k)]⁻¹C`.
//!
//! The inclusion is rewritten as `x(k) = D(k)x(k+1) − D(k)f(k)`; substituting
//! `k ↦ −k` gives the first-order problem `v(k+1) = Ã(k)v(k) + f̃(k)` with
//! `Ã(k) = D(−k−1)` and `f̃(k) = −D(−k−1)f(−k−1)`, and `x(k) = v(−k)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::first_order::{solve_series, SolveOptions, SolveReport};
use crate::linalg::{inverse_checked, norm_inf, solve_checked, MAX_CONDITION};
use crate::operator::OperatorSequence;
use crate::seq::{BiSequence, SeminormFamily};
use crate::{Operator, Value, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SelectionOrigin {
    #[serde(rename = "analytic inverse")]
    Analytic,
    #[serde(rename = "numeric linear solve")]
    NumericSolve,
}

/// `D(k) ⊆ [𝒜(k)]⁻¹C` as concrete matrices, with the regularizer `C`.
#[derive(Debug, Clone)]
pub struct ResolventSelection {
    pub d: OperatorSequence,
    pub c: Operator,
    pub origin: SelectionOrigin,
}

/// Probe window for certificates of operators consumed to the right of
/// `window` (inclusion series run forward in `k`).
pub fn forward_probe(window: Window, opts: &SolveOptions) -> Window {
    Window {
        start: window.start - 1,
        end: window.end + opts.probe as i64 + 1,
    }
}

impl ResolventSelection {
    /// Selection supplied directly (analytic inverse or caller-built).
    pub fn new(d: OperatorSequence, c: Operator) -> Result<Self> {
        if c.nrows() != d.dim() || c.ncols() != d.dim() {
            return Err(Error::shape(format!("{0}x{0} regularizer", d.dim()), format!("{}x{}", c.nrows(), c.ncols())));
        }
        Ok(ResolventSelection {
            d,
            c,
            origin: SelectionOrigin::Analytic,
        })
    }

    /// `D(k) = A(k)⁻¹C` for single-valued `A(k)`, by LU with a conditioning
    /// gate.
    pub fn from_matrices(a_mat: &OperatorSequence, c: Operator) -> Result<Self> {
        let cc = c.clone();
        let d = a_mat.map(a_mat.dim(), move |a| solve_checked(a, &cc, "A(k)"))?;
        Ok(ResolventSelection {
            origin: SelectionOrigin::NumericSolve,
            ..Self::new(d, c)?
        })
    }

    /// Attaches numeric certificates for every seminorm of `family`.
    pub fn certify(mut self, family: &SeminormFamily, probe: Window) -> Result<Self> {
        self.d = self.d.certify(family, probe)?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    /// `max_k ‖A(k)D(k) − C‖_∞ / max(‖C‖_∞, 1)` on the window.
    pub fn consistency(&self, a_mat: &OperatorSequence, window: Window) -> Result<f64> {
        let scale = norm_inf(&self.c).max(1.0);
        let mut worst: f64 = 0.0;
        for k in window.iter() {
            worst = worst.max(norm_inf(&(a_mat.at(k)? * self.d.at(k)? - &self.c)) / scale);
        }
        Ok(worst)
    }
}

/// `f̃(k) = −D(−k−1) f(−k−1)`, kept `(ω, 1/c)`-periodic when `f` is
/// `(ω,c)`-periodic and `D` is periodic with a period dividing `ω`.
fn reflect_forcing(d: &OperatorSequence, f: &BiSequence) -> Result<BiSequence> {
    let dd = d.clone();
    let ff = f.clone();
    let rule = move |k: i64| -> Result<Value> { Ok(-dd.apply(-k - 1, &ff.eval(-k - 1)?)?) };
    if let (Some((omega, c)), Some(p)) = (f.omega_c_params(), d.period()) {
        if omega % p == 0 {
            let base = (0..omega as i64).map(&rule).collect::<Result<Vec<_>>>()?;
            return BiSequence::omega_c(0, base, c.inv());
        }
    }
    Ok(BiSequence::from_fallible_fn(f.dim(), rule))
}

fn reverse_report(mut rep: SolveReport, window: Window) -> SolveReport {
    rep.window = window;
    rep.truncation_v.reverse();
    rep.tail_bound.reverse();
    if let Some(p) = rep.forcing_probe {
        rep.forcing_probe = Some(p.reflected());
    }
    rep
}

/// Solves the inclusion on `window`. The report's residual is the inclusion
/// residual of the returned sequence.
pub fn solve_inclusion(
    sel: &ResolventSelection,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, SolveReport)> {
    if f.dim() != sel.dim() {
        return Err(Error::shape(sel.dim(), f.dim()));
    }
    let a_t = sel.d.reflect();
    let f_t = reflect_forcing(&sel.d, f)?;
    let (v, rep) = solve_series(&a_t, &f_t, family, window.reflected(), opts)?;
    let x = v.reflect();
    let mut rep = reverse_report(rep, window);
    rep.max_residual = inclusion_residual(sel, f, &x, window, family)?;
    Ok((x, rep))
}

fn max_by_family(defects: &[Value], family: &SeminormFamily) -> BTreeMap<String, f64> {
    family
        .iter()
        .map(|kappa| {
            let worst = defects.iter().map(|d| kappa.eval(d)).fold(0.0, f64::max);
            (kappa.label.clone(), worst)
        })
        .collect()
}

fn pointwise<F>(window: Window, g: F) -> Result<Vec<Value>>
where
    F: Fn(i64) -> Result<Value> + Sync,
{
    window.iter().collect::<Vec<_>>().par_iter().map(|&k| g(k)).collect()
}

/// `max_k κ(x(k) − D(k)x(k+1) + D(k)f(k))`.
pub fn inclusion_residual(
    sel: &ResolventSelection,
    f: &BiSequence,
    x: &BiSequence,
    window: Window,
    family: &SeminormFamily,
) -> Result<BTreeMap<String, f64>> {
    let defects = pointwise(window, |k| Ok(x.eval(k)? - sel.d.apply(k, &(x.eval(k + 1)? - f.eval(k)?))?))?;
    Ok(max_by_family(&defects, family))
}

/// `C B(k+1)u(k+1) = A(k)u(k) + C f(k)`, given through `B` and the
/// resolvent `A(k)⁻¹C`. `A` itself is optional and only used to evaluate the
/// residual in its original form.
#[derive(Debug, Clone)]
pub struct DegenerateVb {
    pub a: Option<OperatorSequence>,
    pub b: OperatorSequence,
    pub ainv_c: OperatorSequence,
    pub c: Operator,
}

impl DegenerateVb {
    /// `D(k) = B(k) A(k)⁻¹C`, certified on `probe`.
    pub fn selection(&self, family: &SeminormFamily, probe: Window) -> Result<ResolventSelection> {
        let d = self.b.compose(&self.ainv_c)?.certify(family, probe)?;
        ResolventSelection::new(d, self.c.clone())
    }

    /// `max_k κ(C B(k+1)u(k+1) − A(k)u(k) − C f(k))`, or the resolvent form
    /// `κ(u(k) − A(k)⁻¹C(B(k+1)u(k+1) − f(k)))` when `A` is absent.
    pub fn residual(
        &self,
        f: &BiSequence,
        u: &BiSequence,
        window: Window,
        family: &SeminormFamily,
    ) -> Result<BTreeMap<String, f64>> {
        let defects = pointwise(window, |k| {
            let bu = self.b.apply(k + 1, &u.eval(k + 1)?)?;
            match &self.a {
                Some(a) => Ok(&self.c * (bu - f.eval(k)?) - a.apply(k, &u.eval(k)?)?),
                None => Ok(u.eval(k)? - self.ainv_c.apply(k, &(bu - f.eval(k)?))?),
            }
        })?;
        Ok(max_by_family(&defects, family))
    }
}

/// Solves the degenerate equation through `v = Bu`. Returns `(v, u, report)`.
///
/// `u(k) = A(k)⁻¹C(v(k+1) − f(k))` is always available. When every `B(k)`
/// on the window is invertible the report also records
/// `max ‖B(k)u(k) − v(k)‖` under `b_consistency`.
pub fn solve_degenerate_vb(
    problem: &DegenerateVb,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, BiSequence, SolveReport)> {
    let sel = problem.selection(family, forward_probe(window, opts))?;
    solve_vb_with_selection(problem, &sel, f, family, window, opts)
}

/// As [`solve_degenerate_vb`], with a caller-built selection
/// `D(k) = B(k)A(k)⁻¹C` (for instance one carrying analytic certificates).
pub fn solve_vb_with_selection(
    problem: &DegenerateVb,
    sel: &ResolventSelection,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, BiSequence, SolveReport)> {
    let (v, mut rep) = solve_inclusion(sel, f, family, window, opts)?;

    let (ainv_c, vv, ff) = (problem.ainv_c.clone(), v.clone(), f.clone());
    let u = BiSequence::from_fallible_fn(f.dim(), move |k| ainv_c.apply(k, &(vv.eval(k + 1)? - ff.eval(k)?)));

    for (label, r) in &rep.max_residual {
        rep.diagnostics.insert(format!("inclusion_residual[{label}]"), *r);
    }
    rep.max_residual = problem.residual(f, &u, window, family)?;

    let invertible = window
        .iter()
        .map(|k| problem.b.at(k).map(|b| inverse_checked(&b, "B(k)").is_ok()))
        .collect::<Result<Vec<_>>>()?;
    if invertible.iter().all(|&ok| ok) {
        let gap = pointwise(window, |k| Ok(problem.b.apply(k, &u.eval(k)?)? - v.eval(k)?))?
            .iter()
            .map(|d| d.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        rep.diagnostics.insert("b_consistency".into(), gap);
    } else {
        rep.warnings.push(format!(
            "B(k) is not invertible (cond_1 > {MAX_CONDITION:e}) somewhere on the window; u recovered through A(k)^-1 C only"
        ));
    }
    Ok((v, u, rep))
}

/// `B(k+1)C u(k+1) = A(k)u(k) + C g(k)`, given through `B` and
/// `A(k)⁻¹B(k+1)C`.
#[derive(Debug, Clone)]
pub struct DegenerateVb1 {
    pub a: Option<OperatorSequence>,
    pub b: OperatorSequence,
    pub ainv_bc: OperatorSequence,
    pub c: Operator,
}

pub const VB1_CONSISTENCY_TOL: f64 = 1e-10;

impl DegenerateVb1 {
    /// `max_k ‖B(k+1)C f(k) − C g(k)‖_∞ / max(1, ‖C g(k)‖_∞)`.
    pub fn consistency(&self, g: &BiSequence, f: &BiSequence, window: Window) -> Result<(f64, Vec<i64>)> {
        let mut worst: f64 = 0.0;
        let mut failing = Vec::new();
        for k in window.iter() {
            let cg = &self.c * g.eval(k)?;
            let lhs = self.b.apply(k + 1, &(&self.c * f.eval(k)?))?;
            let scale = cg.iter().map(|z| z.norm()).fold(1.0, f64::max);
            let gap = (lhs - cg).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale;
            if gap > VB1_CONSISTENCY_TOL {
                failing.push(k);
            }
            worst = worst.max(gap);
        }
        Ok((worst, failing))
    }

    pub fn residual(
        &self,
        g: &BiSequence,
        f: &BiSequence,
        u: &BiSequence,
        window: Window,
        family: &SeminormFamily,
    ) -> Result<BTreeMap<String, f64>> {
        let defects = pointwise(window, |k| match &self.a {
            Some(a) => Ok(self.b.apply(k + 1, &(&self.c * u.eval(k + 1)?))?
                - a.apply(k, &u.eval(k)?)?
                - &self.c * g.eval(k)?),
            None => Ok(u.eval(k)? - self.ainv_bc.apply(k, &(u.eval(k + 1)? - f.eval(k)?))?),
        })?;
        Ok(max_by_family(&defects, family))
    }
}

/// Solves the degenerate equation with forcing `g`, given the companion
/// forcing `f` with `B(k+1)C f(k) = C g(k)`.
pub fn solve_degenerate_vb1(
    problem: &DegenerateVb1,
    g: &BiSequence,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, SolveReport)> {
    let (gap, failing) = problem.consistency(g, f, window)?;
    if !failing.is_empty() {
        return Err(Error::InputContract(format!(
            "B(k+1) C f(k) differs from C g(k) by {gap:.3e} (relative) at k = {failing:?}"
        )));
    }
    let d = problem.ainv_bc.clone().certify(family, forward_probe(window, opts))?;
    let sel = ResolventSelection::new(d, problem.c.clone())?;
    let (u, mut rep) = solve_inclusion(&sel, f, family, window, opts)?;
    for (label, r) in &rep.max_residual {
        rep.diagnostics.insert(format!("inclusion_residual[{label}]"), *r);
    }
    rep.diagnostics.insert("forcing_consistency".into(), gap);
    rep.max_residual = problem.residual(g, f, &u, window, family)?;
    Ok((u, rep))
}
