//! Finite-window checkers for Bohr, Weyl and Besicovitch almost periodicity
//! and for `(ω,c)`-periodicity.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::{BiSequence, Seminorm, SeminormFamily, TrigPoly};
use crate::{Value, Window};

/// Outcome of a Bohr translation-number scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APReport {
    pub epsilon: f64,
    pub seminorm_label: String,
    pub verdict: bool,
    /// Smallest `L' ≤ L` such that every `[t, t+L']`, `t` in the scanned range,
    /// holds a translation number.
    #[serde(rename = "witness_L")]
    pub witness_l: Option<i64>,
    pub translation_numbers: Vec<i64>,
    /// `max_t min_{τ ∈ [t, t+L]} sup_k κ(F(k+τ) − F(k))`
    pub max_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesicovitchReport {
    pub p: f64,
    pub values_by_l: Vec<(i64, f64)>,
    pub limsup_estimate: f64,
}

pub const DEFAULT_L_GRID: [i64; 4] = [64, 128, 256, 512];

/// Translation defects `sup_{k ∈ k_window} κ(F(k+τ) − F(k))` for `τ ∈ taus`.
pub fn translation_defects(f: &BiSequence, kappa: &Seminorm, k_window: Window, taus: Window) -> Result<Vec<f64>> {
    let lo = k_window.start.min(k_window.start + taus.start);
    let hi = k_window.end.max(k_window.end + taus.end);
    let values = f.eval_window(lo, hi)?;
    let at = |k: i64| &values[(k - lo) as usize];
    Ok(taus
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&tau| {
            k_window
                .iter()
                .map(|k| kappa.eval(&(at(k + tau) - at(k))))
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Exhaustive scan for ε-translation numbers in every `[t, t+L]`,
/// `t ∈ τ_range`.
pub fn bohr_check(
    f: &BiSequence,
    kappa: &Seminorm,
    epsilon: f64,
    k_window: Window,
    tau_range: Window,
    l: i64,
) -> Result<APReport> {
    if l < 1 {
        return Err(Error::InputContract(format!("L must be at least 1, got {l}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::InputContract(format!("ε must be nonnegative, got {epsilon}")));
    }
    let taus = Window::new(tau_range.start, tau_range.end + l)?;
    let defects = translation_defects(f, kappa, k_window, taus)?;
    let defect = |tau: i64| defects[(tau - taus.start) as usize];

    let translation_numbers: Vec<i64> = taus.iter().filter(|&t| defect(t) <= epsilon).collect();

    let max_defect = tau_range
        .iter()
        .map(|t| (t..=t + l).map(defect).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);

    // gap from each t to the next translation number at or after it
    let mut next = None;
    let mut gaps = vec![None; taus.len()];
    for tau in taus.iter().rev() {
        if defect(tau) <= epsilon {
            next = Some(tau);
        }
        gaps[(tau - taus.start) as usize] = next.map(|n| n - tau);
    }
    let worst_gap = tau_range
        .iter()
        .map(|t| gaps[(t - taus.start) as usize])
        .try_fold(0i64, |acc, g| g.map(|g| acc.max(g)));
    let witness_l = worst_gap.filter(|&g| g <= l);

    Ok(APReport {
        epsilon,
        seminorm_label: kappa.label.clone(),
        verdict: witness_l.is_some(),
        witness_l,
        translation_numbers,
        max_defect,
    })
}

fn powered_defects(f: &BiSequence, p_seq: &BiSequence, kappa: &Seminorm, p: f64, a: i64, b: i64) -> Result<Vec<f64>> {
    if p_seq.dim() != f.dim() {
        return Err(Error::shape(f.dim(), p_seq.dim()));
    }
    (a..=b)
        .map(|j| Ok(kappa.eval(&(f.eval(j)? - p_seq.eval(j)?)).powf(p)))
        .collect()
}

/// `max_{s ∈ s_range} l^{-1} Σ_{j=s}^{s+l} κ(F(j) − P(j))^p`.
pub fn weyl_distance(
    f: &BiSequence,
    p_seq: &BiSequence,
    kappa: &Seminorm,
    p: f64,
    l: i64,
    s_range: Window,
) -> Result<f64> {
    if l < 1 {
        return Err(Error::InputContract(format!("l must be at least 1, got {l}")));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("exponent must be ≥ 1, got {p}")));
    }
    let d = powered_defects(f, p_seq, kappa, p, s_range.start, s_range.end + l)?;
    Ok(s_range
        .iter()
        .map(|s| {
            let off = (s - s_range.start) as usize;
            d[off..=off + l as usize].iter().sum::<f64>() / l as f64
        })
        .fold(0.0, f64::max))
}

/// `l^{-1} Σ_{j=−l}^{l} κ(F(j) − P(j))^p` on each `l` of the grid; the
/// limsup is estimated as the max over the top quartile of the grid.
pub fn besicovitch_distance(
    f: &BiSequence,
    p_seq: &BiSequence,
    kappa: &Seminorm,
    p: f64,
    l_grid: &[i64],
) -> Result<BesicovitchReport> {
    if l_grid.is_empty() || l_grid[0] < 1 || l_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InputContract("l_grid must be nonempty, positive and increasing".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("exponent must be ≥ 1, got {p}")));
    }
    let lmax = *l_grid.last().unwrap();
    let d = powered_defects(f, p_seq, kappa, p, -lmax, lmax)?;
    let values_by_l: Vec<(i64, f64)> = l_grid
        .iter()
        .map(|&l| {
            let lo = (lmax - l) as usize;
            let hi = (lmax + l) as usize;
            (l, d[lo..=hi].iter().sum::<f64>() / l as f64)
        })
        .collect();
    let top = values_by_l.len().div_ceil(4);
    let limsup_estimate = values_by_l[values_by_l.len() - top..]
        .iter()
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);
    Ok(BesicovitchReport {
        p,
        values_by_l,
        limsup_estimate,
    })
}

/// `max_{k, κ} κ(F(k+ω) − c F(k))`.
pub fn omega_c_check(
    f: &BiSequence,
    omega: usize,
    c: Complex64,
    family: &SeminormFamily,
    k_window: Window,
) -> Result<f64> {
    if omega == 0 {
        return Err(Error::InputContract("ω must be positive".into()));
    }
    if c == Complex64::new(0.0, 0.0) {
        return Err(Error::InputContract("c must be nonzero".into()));
    }
    let w = omega as i64;
    let mut worst: f64 = 0.0;
    for k in k_window.iter() {
        let diff = f.eval(k + w)? - f.eval(k)? * c;
        for kappa in family.iter() {
            worst = worst.max(kappa.eval(&diff));
        }
    }
    Ok(worst)
}

/// Empirical mean `(2N+1)^{-1} Σ_{k=−N}^{N} F(k) e^{−iλk}`.
pub fn bohr_fourier_coefficient(f: &BiSequence, lambda: f64, n: i64) -> Result<Value> {
    if n < 1 {
        return Err(Error::InputContract(format!("N must be at least 1, got {n}")));
    }
    let mut acc = Value::zeros(f.dim());
    for k in -n..=n {
        acc += f.eval(k)? * Complex64::from_polar(1.0, -lambda * k as f64);
    }
    Ok(acc / Complex64::new((2 * n + 1) as f64, 0.0))
}

/// Trigonometric polynomial on the given frequencies with empirical Bohr
/// coefficients.
pub fn fit_trig_poly(f: &BiSequence, frequencies: &[f64], n: i64) -> Result<TrigPoly> {
    let terms = frequencies
        .iter()
        .map(|&l| Ok((l, bohr_fourier_coefficient(f, l, n)?)))
        .collect::<Result<Vec<_>>>()?;
    TrigPoly::new(f.dim(), terms)
}
