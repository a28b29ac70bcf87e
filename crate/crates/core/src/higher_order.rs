//! Block companion reduction of
//! `C A_p(k+p)u(k+p) + ⋯ + C A_1(k+1)u(k+1) + A_0(k)u(k) = C f(k)`
//! and the block systems `B(k+1)u⃗(k+1) = A(k)u⃗(k) + g⃗(k)` with
//! `B(k+1) = A(k)D(k)`.
//!
//! With `u⃗(k) = [u(k), …, u(k+p−1)]` the equation becomes
//! `𝐂𝐁(k+1)u⃗(k+1) = 𝐀(k)u⃗(k) + 𝐂f⃗(k)` where `𝐀(k) = diag(−A_0(k), C, …, C)`,
//! `𝐁(k)` has first row `[A_1(k), A_2(k+1), …, A_p(k+p−1)]` and identities on
//! the subdiagonal, and `𝐂 = C·I`. The degenerate substitution `v⃗ = 𝐁u⃗` uses
//! the selection `D(k) = 𝐁(k)[𝐀(k)]⁻¹𝐂`, whose first row is
//! `[−A_1(k)A_0(k)⁻¹C, A_2(k+1), …, A_p(k+p−1)]`, whose `(2,1)` block is
//! `−A_0(k)⁻¹C`, and which carries identities below that.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::first_order::{SolveOptions, SolveReport};
use crate::linalg::{block, identity, norm_inf, set_block, solve_checked};
use crate::operator::{CertRule, OperatorSequence};
use crate::resolvent::{
    forward_probe, solve_degenerate_vb1, solve_vb_with_selection, DegenerateVb, DegenerateVb1, ResolventSelection,
};
use crate::seq::{BiSequence, SeminormFamily};
use crate::{Operator, Value, Window};

#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub p: usize,
    /// Dimension of `Y`.
    pub d: usize,
    /// `A_0, …, A_p`.
    pub coefficients: Vec<OperatorSequence>,
    pub bold_a: OperatorSequence,
    pub bold_b: OperatorSequence,
    pub bold_c: Operator,
}

fn common_period(seqs: &[&OperatorSequence]) -> Option<usize> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    seqs.iter()
        .map(|s| s.period())
        .try_fold(1usize, |acc, p| p.map(|p| acc / gcd(acc, p) * p))
}

/// Assembles `𝐀`, `𝐁`, `𝐂` for order `p ≥ 2` from `A_0, …, A_p` and `C`.
pub fn build_companion(p: usize, coefficients: &[OperatorSequence], c: &Operator) -> Result<CompanionSystem> {
    if p < 2 {
        return Err(Error::InputContract(format!("companion order must be at least 2, got {p}")));
    }
    if coefficients.len() != p + 1 {
        return Err(Error::shape(format!("{} coefficient sequences", p + 1), coefficients.len()));
    }
    let d = coefficients[0].dim();
    if let Some(bad) = coefficients.iter().find(|a| a.dim() != d) {
        return Err(Error::shape(d, bad.dim()));
    }
    if c.nrows() != d || c.ncols() != d {
        return Err(Error::shape(format!("{d}x{d} regularizer"), format!("{}x{}", c.nrows(), c.ncols())));
    }
    let refs: Vec<&OperatorSequence> = coefficients.iter().collect();
    let period = common_period(&refs);

    let (a0, cc) = (coefficients[0].clone(), c.clone());
    let bold_a = OperatorSequence::from_rule(d * p, period, move |k| {
        let mut m = Operator::zeros(d * p, d * p);
        set_block(&mut m, 0, 0, &(-a0.at(k)?));
        for i in 1..p {
            set_block(&mut m, i, i, &cc);
        }
        Ok(m)
    })?;

    let coeffs = coefficients.to_vec();
    let bold_b = OperatorSequence::from_rule(d * p, period, move |k| {
        let mut m = Operator::zeros(d * p, d * p);
        for j in 0..p {
            set_block(&mut m, 0, j, &coeffs[j + 1].at(k + j as i64)?);
        }
        for i in 1..p {
            set_block(&mut m, i, i - 1, &identity(d));
        }
        Ok(m)
    })?;

    let mut bold_c = Operator::zeros(d * p, d * p);
    for i in 0..p {
        set_block(&mut bold_c, i, i, c);
    }
    Ok(CompanionSystem {
        p,
        d,
        coefficients: coefficients.to_vec(),
        bold_a,
        bold_b,
        bold_c,
    })
}

impl CompanionSystem {
    /// `f ↦ [f, 0, …, 0]`.
    pub fn lift(&self, f: &BiSequence) -> Result<BiSequence> {
        if f.dim() != self.d {
            return Err(Error::shape(self.d, f.dim()));
        }
        Ok(f.lift(self.p))
    }

    /// `[𝐀(k)]⁻¹𝐂 = diag(−A_0(k)⁻¹C, I, …, I)` from `A_0(k)⁻¹C`.
    pub fn bold_ainv_c(&self, a0inv_c: &OperatorSequence) -> Result<OperatorSequence> {
        let (d, p) = (self.d, self.p);
        a0inv_c.map(d * p, move |r| {
            let mut m = Operator::zeros(d * p, d * p);
            set_block(&mut m, 0, 0, &(-r));
            for i in 1..p {
                set_block(&mut m, i, i, &identity(d));
            }
            Ok(m)
        })
    }

    /// `D(k) = 𝐁(k)[𝐀(k)]⁻¹𝐂` as a sequence.
    pub fn d_sequence(&self, a0inv_c: &OperatorSequence) -> Result<OperatorSequence> {
        let sys = self.clone();
        let r = a0inv_c.clone();
        let period = common_period(&self.coefficients.iter().chain(std::iter::once(a0inv_c)).collect::<Vec<_>>());
        OperatorSequence::from_rule(self.d * self.p, period, move |k| companion_d_block(&sys, &r, k))
    }
}

/// `D(k) = 𝐁(k)[𝐀(k)]⁻¹𝐂`, assembled block by block from `A_0(k)⁻¹C`.
pub fn companion_d_block(sys: &CompanionSystem, a0inv_c: &OperatorSequence, k: i64) -> Result<Operator> {
    let (d, p) = (sys.d, sys.p);
    if a0inv_c.dim() != d {
        return Err(Error::shape(d, a0inv_c.dim()));
    }
    let r = a0inv_c.at(k)?;
    let mut m = Operator::zeros(d * p, d * p);
    set_block(&mut m, 0, 0, &(-(sys.coefficients[1].at(k)? * &r)));
    for j in 1..p {
        set_block(&mut m, 0, j, &sys.coefficients[j + 1].at(k + j as i64)?);
    }
    set_block(&mut m, 1, 0, &(-r));
    for i in 2..p {
        set_block(&mut m, i, i - 1, &identity(d));
    }
    Ok(m)
}

fn first_block(d: usize) -> impl Fn(i64, Value) -> Result<Value> + Send + Sync + 'static {
    move |_, v: Value| Ok(v.rows(0, d).into_owned())
}

/// Solves `C A_2(k+2)u(k+2) + C A_1(k+1)u(k+1) + A_0(k)u(k) = C f(k)`.
///
/// The selection certificate is `c^κ(k) = c^κ(k,1) + c^κ(k,2) + c^κ(k,3)`,
/// the bounds of `A_0(k)⁻¹C`, `A_1(k)A_0(k)⁻¹C` and `A_2(k+1)` (the block
/// actually occupying the first row of `D(k)`). The report's residual is the
/// second-order equation's; block-level residuals go to the diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn solve_second_order(
    a0: &OperatorSequence,
    a1: &OperatorSequence,
    a2: &OperatorSequence,
    c: &Operator,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, SolveReport)> {
    let d = a0.dim();
    if f.dim() != d {
        return Err(Error::shape(d, f.dim()));
    }
    if family.dim() != d {
        return Err(Error::shape(d, family.dim()));
    }
    let cc = c.clone();
    let a0inv_c = a0.map(d, move |m| solve_checked(m, &cc, "A0(k)"))?;
    let sys = build_companion(2, &[a0.clone(), a1.clone(), a2.clone()], c)?;

    let probe = forward_probe(window, opts);
    let probe = Window::new(probe.start, probe.end + 1)?;
    let c1 = a0inv_c.clone().certify(family, probe)?;
    let c2 = a1.compose(&a0inv_c)?.certify(family, probe)?;
    let c3 = a2.shift(1).certify(family, probe)?;

    let pfam = family.product(2);
    let mut d_seq = sys.d_sequence(&a0inv_c)?;
    for kappa in family.iter() {
        let l = &kappa.label;
        let rules = [c1.certificate_rule(l), c2.certificate_rule(l), c3.certificate_rule(l)];
        let [r1, r2, r3] = rules.map(|r| r.expect("certified above"));
        let sup = c1.sup_bound(l)? + c2.sup_bound(l)? + c3.sup_bound(l)?;
        let rule = match d_seq.period() {
            Some(w) => CertRule::Periodic((0..w as i64).map(|k| r1.at(k) + r2.at(k) + r3.at(k)).collect()),
            None => CertRule::from_fn(move |k| r1.at(k) + r2.at(k) + r3.at(k)),
        };
        d_seq = d_seq.with_certificate(l.clone(), rule, sup);
    }

    let problem = DegenerateVb {
        a: Some(sys.bold_a.clone()),
        b: sys.bold_b.clone(),
        ainv_c: sys.bold_ainv_c(&a0inv_c)?,
        c: sys.bold_c.clone(),
    };
    let sel = ResolventSelection::new(d_seq, sys.bold_c.clone())?;
    let (_, u_vec, mut rep) = solve_vb_with_selection(&problem, &sel, &sys.lift(f)?, &pfam, window, opts)?;
    let u = u_vec.map(d, first_block(d));

    let mut shift_gap: f64 = 0.0;
    for k in window.iter() {
        let here = u_vec.eval(k)?;
        let next = u_vec.eval(k + 1)?;
        shift_gap = shift_gap.max((here.rows(d, d) - next.rows(0, d)).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    rep.diagnostics.insert("shift_consistency".into(), shift_gap);
    rep.diagnostics.remove("b_consistency");
    for (label, r) in std::mem::take(&mut rep.max_residual) {
        rep.diagnostics.insert(format!("block_residual[{label}]"), r);
    }
    rep.max_residual = second_order_residual(a0, a1, a2, c, f, &u, window, family)?;
    Ok((u, rep))
}

/// `max_k κ(C A_2(k+2)u(k+2) + C A_1(k+1)u(k+1) + A_0(k)u(k) − C f(k))`.
#[allow(clippy::too_many_arguments)]
pub fn second_order_residual(
    a0: &OperatorSequence,
    a1: &OperatorSequence,
    a2: &OperatorSequence,
    c: &Operator,
    f: &BiSequence,
    u: &BiSequence,
    window: Window,
    family: &SeminormFamily,
) -> Result<BTreeMap<String, f64>> {
    let mut worst: BTreeMap<String, f64> = family.labels().into_iter().map(|l| (l, 0.0)).collect();
    for k in window.iter() {
        let r = c * (a2.apply(k + 2, &u.eval(k + 2)?)? + a1.apply(k + 1, &u.eval(k + 1)?)?)
            + a0.apply(k, &u.eval(k)?)?
            - c * f.eval(k)?;
        for kappa in family.iter() {
            let e = worst.get_mut(&kappa.label).expect("label from family");
            *e = e.max(kappa.eval(&r));
        }
    }
    Ok(worst)
}

/// `Σ_{i,j} ‖D_ij(k)‖ ≤ 1/(2p²)` checked on a window (induced sup norms).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    pub limit: f64,
    pub max_sum: f64,
    pub violations: Vec<i64>,
}

/// `B(k+1) = A(k)D(k)` as a lazy product sequence, with the smallness budget
/// of `D` evaluated on `window`.
pub fn build_b_from_d(
    a_mat: &OperatorSequence,
    d_mat: &OperatorSequence,
    p: usize,
    window: Window,
) -> Result<(OperatorSequence, BudgetReport)> {
    if p == 0 || !a_mat.dim().is_multiple_of(p) {
        return Err(Error::shape(format!("dimension divisible by p = {p}"), a_mat.dim()));
    }
    let b = a_mat.compose(d_mat)?.shift(-1);
    let d = a_mat.dim() / p;
    let limit = 1.0 / (2.0 * (p * p) as f64);
    let mut max_sum: f64 = 0.0;
    let mut violations = Vec::new();
    for k in window.iter() {
        let m = d_mat.at(k)?;
        let sum: f64 = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| norm_inf(&block(&m, i, j, d))).sum();
        if sum > limit {
            violations.push(k);
        }
        max_sum = max_sum.max(sum);
    }
    Ok((b, BudgetReport { limit, max_sum, violations }))
}

/// Solves `B(k+1)u⃗(k+1) = A(k)u⃗(k) + g⃗(k)` with `B(k+1) = A(k)D(k)` and
/// `g⃗(k) = B(k+1)f⃗(k)`, through the selection `D`.
pub fn solve_system_bm(
    a_mat: &OperatorSequence,
    d_mat: &OperatorSequence,
    p: usize,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, SolveReport)> {
    let (b, budget) = build_b_from_d(a_mat, d_mat, p, window)?;
    let bb = b.clone();
    let g = f.map(f.dim(), move |k, v| bb.apply(k + 1, &v));
    let problem = DegenerateVb1 {
        a: Some(a_mat.clone()),
        b,
        ainv_bc: d_mat.clone(),
        c: identity(a_mat.dim()),
    };
    let (u, mut rep) = solve_degenerate_vb1(&problem, &g, f, family, window, opts)?;
    rep.diagnostics.insert("budget_max_sum".into(), budget.max_sum);
    rep.diagnostics.insert("budget_limit".into(), budget.limit);
    if !budget.violations.is_empty() {
        rep.warnings.push(format!(
            "smallness budget {:.4e} exceeded at {} indices (max sum {:.4e}); convergence rests on the certificates",
            budget.limit,
            budget.violations.len(),
            budget.max_sum
        ));
    }
    Ok((u, rep))
}
