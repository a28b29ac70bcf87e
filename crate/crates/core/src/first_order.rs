//! Backward series solution of `x(k+1) = A(k)x(k) + f(k)`.
//!
//! For each `k` the series is truncated after `V` terms, where `V` is the
//! smallest depth whose certified tail is below `tol` for every seminorm. One
//! depth (the largest over the window) is then used for every `k`, so that
//! shifting the window permutes identical computations. Sums are evaluated in
//! nested form, `s ← f(k−v) + A(k−v)s`, which costs `V` matrix–vector products
//! per point.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::APReport;
use crate::error::{Error, Result};
use crate::operator::{OperatorSequence, DEFAULT_V_MAX};
use crate::seq::{BiSequence, GeometricEnvelope, SeminormFamily};
use crate::{Value, Window};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target tail bound per seminorm.
    pub tol: f64,
    /// Largest admissible truncation depth.
    pub v_max: usize,
    /// Points left of the window used to bound `sup κ(f)`.
    pub probe: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            v_max: DEFAULT_V_MAX,
            probe: DEFAULT_V_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Uniqueness {
    #[serde(rename = "certified")]
    Certified,
    #[serde(rename = "not certified")]
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub window: Window,
    #[serde(rename = "truncation_V")]
    pub truncation_v: Vec<usize>,
    /// Per k (in window order), per seminorm. `None` when convergence was
    /// established empirically.
    pub tail_bound: Vec<BTreeMap<String, Option<f64>>>,
    /// `sup κ(f)` on the probe window, or the envelope constant for
    /// `(ω,c)`-periodic forcing.
    pub forcing_bound: BTreeMap<String, f64>,
    pub forcing_probe: Option<Window>,
    pub sup_certificate: BTreeMap<String, f64>,
    pub max_residual: BTreeMap<String, f64>,
    pub uniqueness: Uniqueness,
    pub periodicity_defect: Option<f64>,
    pub ap_report: Option<APReport>,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn worst_residual(&self) -> f64 {
        self.max_residual.values().cloned().fold(0.0, f64::max)
    }

    pub fn worst_sup_certificate(&self) -> f64 {
        self.sup_certificate.values().cloned().fold(0.0, f64::max)
    }
}

/// Bound on `κ(f(j))` for every `j` the series may touch.
#[derive(Debug, Clone, Copy)]
enum ForcingBound {
    Uniform(f64),
    Geometric(GeometricEnvelope),
}

impl ForcingBound {
    fn at(&self, j: i64) -> f64 {
        match self {
            ForcingBound::Uniform(m) => *m,
            ForcingBound::Geometric(e) => e.at(j),
        }
    }

    /// `(ρ, g)` with `bound(j − i) ≤ bound(j) · g · ρ^{−i}`.
    fn left_growth(&self) -> (f64, f64) {
        match self {
            ForcingBound::Uniform(_) => (1.0, 1.0),
            ForcingBound::Geometric(e) => e.left_growth(),
        }
    }

    fn headline(&self) -> f64 {
        match self {
            ForcingBound::Uniform(m) => *m,
            ForcingBound::Geometric(e) => e.m,
        }
    }
}

/// Per-seminorm truncation rule.
struct Truncation<'a> {
    a: &'a OperatorSequence,
    label: String,
    bound: ForcingBound,
    /// `Some(g r/(1−r))` when the certified geometric tail applies.
    tail_factor: Option<f64>,
}

impl Truncation<'_> {
    fn cert(&self, k: i64) -> f64 {
        self.a.certificate(&self.label, k).unwrap_or(f64::INFINITY)
    }

    /// Smallest depth whose tail is below `tol` at `k`.
    fn depth(&self, k: i64, tol: f64, v_max: usize) -> Option<usize> {
        match self.tail_factor {
            Some(factor) => {
                let mut p = 1.0;
                for v in 0..=v_max {
                    if p * self.bound.at(k - 1 - v as i64) * factor <= tol {
                        return Some(v);
                    }
                    p *= self.cert(k - 1 - v as i64);
                }
                None
            }
            None => {
                let mut p = 1.0;
                let mut run = 0;
                for v in 1..=v_max {
                    p *= self.cert(k - v as i64);
                    if p * self.bound.at(k - 1 - v as i64) < tol {
                        run += 1;
                        if run >= 10 {
                            return Some(v);
                        }
                    } else {
                        run = 0;
                    }
                }
                None
            }
        }
    }

    fn tail(&self, k: i64, v: usize) -> Option<f64> {
        let factor = self.tail_factor?;
        let p: f64 = (1..=v as i64).map(|i| self.cert(k - i)).product();
        Some(p * self.bound.at(k - 1 - v as i64) * factor)
    }
}

/// `f(k−1) + Σ_{v=1}^{V} A(k−1)⋯A(k−v) f(k−1−v)` in nested form.
pub fn series_at(a: &OperatorSequence, f: &BiSequence, k: i64, depth: usize) -> Result<Value> {
    let mut s = f.eval(k - 1 - depth as i64)?;
    for v in (1..=depth as i64).rev() {
        s = f.eval(k - v)? + a.apply(k - v, &s)?;
    }
    Ok(s)
}

fn check_dims(a: &OperatorSequence, f: &BiSequence, family: &SeminormFamily) -> Result<()> {
    if a.dim() != f.dim() {
        return Err(Error::shape(format!("forcing of dimension {}", a.dim()), f.dim()));
    }
    if family.dim() != a.dim() {
        return Err(Error::shape(format!("seminorm family on dimension {}", a.dim()), family.dim()));
    }
    Ok(())
}

fn forcing_bounds(
    f: &BiSequence,
    family: &SeminormFamily,
    probe: Window,
) -> Result<(BTreeMap<String, ForcingBound>, Option<Window>)> {
    if f.omega_c_params().is_some() {
        let bounds = family
            .iter()
            .map(|kappa| (kappa.label.clone(), ForcingBound::Geometric(f.envelope(kappa).expect("omega_c backend"))))
            .collect();
        return Ok((bounds, None));
    }
    let values = probe
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&j| f.eval(j))
        .collect::<Result<Vec<_>>>()?;
    let mut bounds = BTreeMap::new();
    for kappa in family.iter() {
        let m = values.iter().map(|v| kappa.eval(v)).fold(0.0, f64::max);
        if !m.is_finite() || values.iter().any(|v| !kappa.eval(v).is_finite()) {
            return Err(Error::Boundedness(format!(
                "sup of {}(f) over [{}, {}] is not finite",
                kappa.label, probe.start, probe.end
            )));
        }
        bounds.insert(kappa.label.clone(), ForcingBound::Uniform(m));
    }
    Ok((bounds, Some(probe)))
}

/// Solves `x(k+1) = A(k)x(k) + f(k)` on `window` through the backward series.
///
/// The returned sequence holds the window as a table and evaluates the same
/// truncated series (same depth) anywhere else.
pub fn solve_series(
    a: &OperatorSequence,
    f: &BiSequence,
    family: &SeminormFamily,
    window: Window,
    opts: &SolveOptions,
) -> Result<(BiSequence, SolveReport)> {
    check_dims(a, f, family)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InputContract(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let probe = Window::new(window.start - opts.probe as i64 - 1, window.end)?;
    let (bounds, forcing_probe) = forcing_bounds(f, family, probe)?;

    let mut rules = Vec::new();
    let mut sup_certificate = BTreeMap::new();
    for kappa in family.iter() {
        let label = kappa.label.clone();
        let sup = a.sup_bound(&label)?;
        sup_certificate.insert(label.clone(), sup);
        let bound = bounds[&label];
        let (rho, g) = bound.left_growth();
        let r = sup / rho;
        let tail_factor = (r < 1.0).then(|| g * r / (1.0 - r));
        rules.push(Truncation { a, label, bound, tail_factor });
    }

    let ks: Vec<i64> = window.iter().collect();
    let depths = ks
        .par_iter()
        .map(|&k| {
            rules
                .iter()
                .map(|rule| {
                    rule.depth(k, opts.tol, opts.v_max).ok_or_else(|| {
                        Error::Convergence(format!(
                            "series for seminorm '{}' at k = {k} not within tolerance {:e} after {} terms",
                            rule.label, opts.tol, opts.v_max
                        ))
                    })
                })
                .try_fold(0usize, |acc, d| d.map(|d| acc.max(d)))
        })
        .collect::<Result<Vec<_>>>()?;
    let depth = depths.iter().cloned().max().unwrap_or(0);

    let values = ks
        .par_iter()
        .map(|&k| series_at(a, f, k, depth))
        .collect::<Result<Vec<_>>>()?;
    let tail_bound = ks
        .iter()
        .map(|&k| rules.iter().map(|r| (r.label.clone(), r.tail(k, depth))).collect())
        .collect();

    let (a_lazy, f_lazy) = (a.clone(), f.clone());
    let lazy = BiSequence::from_fallible_fn(f.dim(), move |k| series_at(&a_lazy, &f_lazy, k, depth));
    let x = BiSequence::table(window.start, values)?.with_fallback(lazy)?;

    let max_residual = residual(a, f, &x, window, family)?;
    let uniqueness = uniqueness(a, family)?;

    let mut warnings = Vec::new();
    if rules.iter().any(|r| r.tail_factor.is_none()) {
        warnings.push("truncation depth chosen empirically; no certified tail bound".to_string());
    }
    let report = SolveReport {
        window,
        truncation_v: vec![depth; window.len()],
        tail_bound,
        forcing_bound: rules.iter().map(|r| (r.label.clone(), r.bound.headline())).collect(),
        forcing_probe,
        sup_certificate,
        max_residual,
        uniqueness,
        periodicity_defect: None,
        ap_report: None,
        diagnostics: BTreeMap::new(),
        warnings,
    };
    Ok((x, report))
}

/// `max_{k ∈ window} κ(x(k+1) − A(k)x(k) − f(k))` for every `κ`.
pub fn residual(
    a: &OperatorSequence,
    f: &BiSequence,
    x: &BiSequence,
    window: Window,
    family: &SeminormFamily,
) -> Result<BTreeMap<String, f64>> {
    let defects = window
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| Ok(x.eval(k + 1)? - a.apply(k, &x.eval(k)?)? - f.eval(k)?))
        .collect::<Result<Vec<Value>>>()?;
    Ok(family
        .iter()
        .map(|kappa| {
            let worst = defects.iter().map(|d| kappa.eval(d)).fold(0.0, f64::max);
            (kappa.label.clone(), worst)
        })
        .collect())
}

/// Forward recursion from `x(k0) = x0`, tabulated on `[k0, window.end + 1]`.
pub fn forward_oracle(
    a: &OperatorSequence,
    f: &BiSequence,
    k0: i64,
    x0: &Value,
    window: Window,
) -> Result<BiSequence> {
    if k0 > window.start {
        return Err(Error::InputContract(format!("k0 = {k0} lies right of the window start {}", window.start)));
    }
    let mut values = Vec::with_capacity((window.end + 2 - k0) as usize);
    let mut x = x0.clone();
    for k in k0..=window.end {
        let next = a.apply(k, &x)? + f.eval(k)?;
        values.push(std::mem::replace(&mut x, next));
    }
    values.push(x);
    BiSequence::table(k0, values)
}

/// `[Π_{i=1}^{k} c^κ(−i)]` for `k = 1..K`.
pub fn homogeneous_decay(a: &OperatorSequence, label: &str, k_max: usize) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::InputContract("K must be at least 1".into()));
    }
    let mut p = 1.0;
    (1..=k_max as i64)
        .map(|i| {
            p *= a.certificate(label, -i)?;
            Ok(p)
        })
        .collect()
}

pub const UNIQUENESS_THRESHOLD: f64 = 1e-12;
pub const UNIQUENESS_HORIZON: usize = 10_000;

/// Certified when, for every seminorm, the homogeneous products fall below
/// [`UNIQUENESS_THRESHOLD`] within [`UNIQUENESS_HORIZON`] steps.
pub fn uniqueness(a: &OperatorSequence, family: &SeminormFamily) -> Result<Uniqueness> {
    for kappa in family.iter() {
        let mut p = 1.0;
        let mut hit = false;
        for i in 1..=UNIQUENESS_HORIZON as i64 {
            p *= a.certificate(&kappa.label, -i)?;
            if p < UNIQUENESS_THRESHOLD {
                hit = true;
                break;
            }
        }
        if !hit {
            return Ok(Uniqueness::NotCertified);
        }
    }
    Ok(Uniqueness::Certified)
}

/// `max (1+|k|)^{−α} κ(x(k))` over the window and the family.
pub fn weighted_growth_check(x: &BiSequence, alpha: f64, family: &SeminormFamily, window: Window) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("α must be nonnegative, got {alpha}")));
    }
    let mut worst: f64 = 0.0;
    for k in window.iter() {
        let v = x.eval(k)?;
        let w = (1.0 + k.unsigned_abs() as f64).powf(-alpha);
        for kappa in family.iter() {
            worst = worst.max(w * kappa.eval(&v));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::scalar_identity;
    use crate::operator::CertRule;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn half(d: usize) -> OperatorSequence {
        OperatorSequence::constant(scalar_identity(d, c(0.5)))
            .unwrap()
            .certify(&SeminormFamily::sup(d), Window::new(0, 0).unwrap())
            .unwrap()
    }

    fn ones(d: usize) -> BiSequence {
        BiSequence::constant(DVector::from_element(d, c(1.0)))
    }

    fn w(a: i64, b: i64) -> Window {
        Window::new(a, b).unwrap()
    }

    #[test]
    fn geometric_closed_form() {
        let fam = SeminormFamily::sup(1);
        let (x, rep) = solve_series(&half(1), &ones(1), &fam, w(-5, 5), &SolveOptions::default()).unwrap();
        let oracle = forward_oracle(&half(1), &ones(1), -60, &DVector::zeros(1), w(-5, 5)).unwrap();
        for k in -5..=5 {
            assert!((x.eval(k).unwrap()[0] - c(2.0)).norm() < 1e-10);
            assert!((x.eval(k).unwrap() - oracle.eval(k).unwrap()).norm() < 1e-10);
        }
        assert!(rep.worst_residual() <= 3.0 * 1e-10 * 1.5);
        assert_eq!(rep.uniqueness, Uniqueness::Certified);
    }

    #[test]
    fn zero_forcing_and_zero_operator() {
        let fam = SeminormFamily::sup(2);
        let (x, _) = solve_series(&half(2), &BiSequence::zero(2), &fam, w(-3, 3), &SolveOptions::default()).unwrap();
        for k in -3..=3 {
            assert_eq!(x.eval(k).unwrap(), DVector::zeros(2));
        }
        let zero = OperatorSequence::constant(DMatrix::zeros(2, 2)).unwrap().certify(&fam, w(0, 0)).unwrap();
        let f = BiSequence::from_fn(2, |k| DVector::from_vec(vec![c(k as f64), c((k * k) as f64 % 7.0)]));
        let (x, rep) = solve_series(&zero, &f, &fam, w(-3, 3), &SolveOptions { probe: 50, ..Default::default() }).unwrap();
        for k in -3..=3 {
            assert_eq!(x.eval(k).unwrap(), f.eval(k - 1).unwrap());
        }
        assert_eq!(rep.truncation_v, vec![0; 7]);
    }

    #[test]
    fn forward_oracle_examples() {
        let x = forward_oracle(&half(1), &ones(1), -60, &DVector::zeros(1), w(-1, 0)).unwrap();
        assert!((x.eval(0).unwrap()[0].re - 2.0 * (1.0 - 2f64.powi(-60))).abs() < 1e-15);
        let z = forward_oracle(&half(1), &BiSequence::zero(1), -10, &DVector::zeros(1), w(-3, 3)).unwrap();
        assert!((-10..=4).all(|k| z.eval(k).unwrap()[0] == c(0.0)));
        let x0 = DVector::from_element(1, c(3.0));
        let one = forward_oracle(&half(1), &ones(1), 0, &x0, w(0, 0)).unwrap();
        assert_eq!(one.eval(1).unwrap()[0], c(2.5));
    }

    #[test]
    fn homogeneous_solutions_have_zero_residual() {
        let fam = SeminormFamily::sup(1);
        let x = BiSequence::from_fn(1, |k| DVector::from_element(1, c(0.5f64.powi(k as i32))));
        let r = residual(&half(1), &BiSequence::zero(1), &x, w(-10, 10), &fam).unwrap();
        assert_eq!(r["sup"], 0.0);
        let r = residual(&half(1), &BiSequence::zero(1), &BiSequence::zero(1), w(-10, 10), &fam).unwrap();
        assert_eq!(r["sup"], 0.0);
    }

    #[test]
    fn homogeneous_decay_examples() {
        let d = homogeneous_decay(&half(1), "sup", 10).unwrap();
        assert_eq!(d, (1..=10).map(|i| 0.5f64.powi(i)).collect::<Vec<_>>());

        let id = OperatorSequence::constant(scalar_identity(1, c(1.0)))
            .unwrap()
            .certify(&SeminormFamily::sup(1), w(0, 0))
            .unwrap();
        assert!(homogeneous_decay(&id, "sup", 10).unwrap().iter().all(|&p| p == 1.0));
        assert_eq!(uniqueness(&id, &SeminormFamily::sup(1)).unwrap(), Uniqueness::NotCertified);

        let alt = OperatorSequence::constant(scalar_identity(1, c(1.0))).unwrap().with_certificate(
            "sup",
            CertRule::from_fn(|k| if k.rem_euclid(2) == 1 { 0.5 } else { 2.0 }),
            2.0,
        );
        let d = homogeneous_decay(&alt, "sup", 6).unwrap();
        assert_eq!(d, vec![0.5, 1.0, 0.5, 1.0, 0.5, 1.0]);
        assert_eq!(uniqueness(&alt, &SeminormFamily::sup(1)).unwrap(), Uniqueness::NotCertified);
    }

    #[test]
    fn weighted_growth_examples() {
        let fam = SeminormFamily::sup(1);
        let cst = BiSequence::constant(DVector::from_element(1, c(-4.0)));
        assert_eq!(weighted_growth_check(&cst, 0.0, &fam, w(-5, 5)).unwrap(), 4.0);
        let lin = BiSequence::from_fn(1, |k| DVector::from_element(1, c(k as f64)));
        assert!((weighted_growth_check(&lin, 1.0, &fam, w(-10, 10)).unwrap() - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(weighted_growth_check(&BiSequence::zero(1), 2.0, &fam, w(-5, 5)).unwrap(), 0.0);
    }

    #[test]
    fn divergent_problem_is_rejected() {
        let fam = SeminormFamily::sup(1);
        let id = OperatorSequence::constant(scalar_identity(1, c(1.0))).unwrap().certify(&fam, w(0, 0)).unwrap();
        let opts = SolveOptions { v_max: 200, probe: 200, ..Default::default() };
        assert!(matches!(solve_series(&id, &ones(1), &fam, w(0, 2), &opts), Err(Error::Convergence(_))));
    }

    #[test]
    fn unbounded_forcing_is_rejected() {
        let fam = SeminormFamily::sup(1);
        let f = BiSequence::from_fn(1, |k| DVector::from_element(1, c(if k == -7 { f64::INFINITY } else { 0.0 })));
        let opts = SolveOptions { probe: 20, ..Default::default() };
        assert!(matches!(solve_series(&half(1), &f, &fam, w(0, 2), &opts), Err(Error::Boundedness(_))));
    }

    #[test]
    fn left_growing_omega_c_forcing() {
        let fam = SeminormFamily::sup(1);
        let quarter = OperatorSequence::constant(scalar_identity(1, c(0.25)))
            .unwrap()
            .certify(&fam, w(0, 0))
            .unwrap();
        // f(k) = 2^{-k}; exact bounded-ratio solution x(k) = 2^{2-k}
        let f = BiSequence::omega_c(0, vec![DVector::from_element(1, c(1.0))], c(0.5)).unwrap();
        let (x, rep) = solve_series(&quarter, &f, &fam, w(-10, 10), &SolveOptions::default()).unwrap();
        for k in -10..=10 {
            let exact = 2f64.powi(2 - k as i32);
            assert!((x.eval(k).unwrap()[0].re - exact).abs() <= 1e-10);
        }
        assert!(rep.tail_bound.iter().all(|t| t["sup"].unwrap() <= 1e-10));

        // f(k) = 8^{-k} grows faster to the left than 1/2 contracts
        let g = BiSequence::omega_c(0, vec![DVector::from_element(1, c(1.0))], c(0.125)).unwrap();
        let opts = SolveOptions { v_max: 300, ..Default::default() };
        assert!(matches!(solve_series(&half(1), &g, &fam, w(0, 2), &opts), Err(Error::Convergence(_))));
    }
}
