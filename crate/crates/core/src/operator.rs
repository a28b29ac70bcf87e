//! Operator sequences `k ↦ A(k)` with per-seminorm bound certificates.
//!
//! A certificate `c^κ(k)` promises `κ(A(k)x) ≤ c^κ(k) κ(x)`. Certificates for
//! constant and periodic sequences are exact induced bounds; generator
//! sequences get lazily computed per-k bounds, with their supremum estimated
//! on a declared probe window.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seq::SeminormFamily;
use crate::{Operator, Value, Window};

type RuleFn = dyn Fn(i64) -> Result<Operator> + Send + Sync;
type CertFn = dyn Fn(i64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Backend {
    Constant(Operator),
    /// `A(k) = mats[k mod ω]`
    Periodic(Vec<Operator>),
    Generator {
        rule: Arc<RuleFn>,
        cache: Option<Arc<(i64, Vec<Operator>)>>,
    },
}

/// Rule `k ↦ c^κ(k)`.
#[derive(Clone)]
pub enum CertRule {
    Constant(f64),
    Periodic(Vec<f64>),
    Generator(Arc<CertFn>),
}

impl CertRule {
    pub fn at(&self, k: i64) -> f64 {
        match self {
            CertRule::Constant(c) => *c,
            CertRule::Periodic(cs) => cs[k.rem_euclid(cs.len() as i64) as usize],
            CertRule::Generator(f) => f(k),
        }
    }

    pub fn from_fn<F: Fn(i64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        CertRule::Generator(Arc::new(f))
    }

    fn reflect(&self) -> Self {
        match self {
            CertRule::Constant(c) => CertRule::Constant(*c),
            CertRule::Periodic(cs) => {
                let w = cs.len() as i64;
                CertRule::Periodic((0..w).map(|j| cs[(-j - 1).rem_euclid(w) as usize]).collect())
            }
            CertRule::Generator(f) => {
                let f = f.clone();
                CertRule::Generator(Arc::new(move |k| f(-k - 1)))
            }
        }
    }

    fn shift(&self, s: i64) -> Self {
        match self {
            CertRule::Constant(c) => CertRule::Constant(*c),
            CertRule::Periodic(cs) => {
                let w = cs.len() as i64;
                CertRule::Periodic((0..w).map(|j| cs[(j + s).rem_euclid(w) as usize]).collect())
            }
            CertRule::Generator(f) => {
                let f = f.clone();
                CertRule::Generator(Arc::new(move |k| f(k + s)))
            }
        }
    }
}

#[derive(Clone)]
struct Certificate {
    rule: CertRule,
    sup: f64,
}

/// `k ↦ A(k)` on `ℂ^d`, optionally carrying bound certificates.
#[derive(Clone)]
pub struct OperatorSequence {
    dim: usize,
    backend: Backend,
    certificates: BTreeMap<String, Certificate>,
}

impl fmt::Debug for OperatorSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.backend {
            Backend::Constant(_) => "constant".to_string(),
            Backend::Periodic(ms) => format!("periodic(ω={})", ms.len()),
            Backend::Generator { .. } => "generator".to_string(),
        };
        f.debug_struct("OperatorSequence")
            .field("dim", &self.dim)
            .field("backend", &kind)
            .field("certified", &self.certificates.keys().collect::<Vec<_>>())
            .finish()
    }
}

fn check_square(m: &Operator) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::shape("nonempty square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(m.nrows())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

impl OperatorSequence {
    pub fn constant(m: Operator) -> Result<Self> {
        let dim = check_square(&m)?;
        Ok(OperatorSequence {
            dim,
            backend: Backend::Constant(m),
            certificates: BTreeMap::new(),
        })
    }

    pub fn periodic(mats: Vec<Operator>) -> Result<Self> {
        let dim = check_square(
            mats.first()
                .ok_or_else(|| Error::InputContract("periodic operator needs at least one matrix".into()))?,
        )?;
        for m in &mats {
            if check_square(m)? != dim {
                return Err(Error::shape(dim, m.nrows()));
            }
        }
        Ok(OperatorSequence {
            dim,
            backend: Backend::Periodic(mats),
            certificates: BTreeMap::new(),
        })
    }

    pub fn generator<F>(dim: usize, rule: F) -> Self
    where
        F: Fn(i64) -> Operator + Send + Sync + 'static,
    {
        Self::fallible_generator(dim, move |k| Ok(rule(k)))
    }

    pub fn fallible_generator<F>(dim: usize, rule: F) -> Self
    where
        F: Fn(i64) -> Result<Operator> + Send + Sync + 'static,
    {
        OperatorSequence {
            dim,
            backend: Backend::Generator {
                rule: Arc::new(rule),
                cache: None,
            },
            certificates: BTreeMap::new(),
        }
    }

    /// Builds from a rule. With a known period the matrices are materialized
    /// (and rule failures surface here); otherwise the rule stays lazy.
    pub fn from_rule<F>(dim: usize, period: Option<usize>, rule: F) -> Result<Self>
    where
        F: Fn(i64) -> Result<Operator> + Send + Sync + 'static,
    {
        match period {
            Some(1) => Self::constant(rule(0)?),
            Some(w) if w > 1 => Self::periodic((0..w as i64).map(&rule).collect::<Result<Vec<_>>>()?),
            _ => Ok(Self::fallible_generator(dim, rule)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Some(1)` for constants, `Some(ω)` for periodic backends.
    pub fn period(&self) -> Option<usize> {
        match &self.backend {
            Backend::Constant(_) => Some(1),
            Backend::Periodic(ms) => Some(ms.len()),
            Backend::Generator { .. } => None,
        }
    }

    pub fn at(&self, k: i64) -> Result<Operator> {
        match &self.backend {
            Backend::Constant(m) => Ok(m.clone()),
            Backend::Periodic(ms) => Ok(ms[k.rem_euclid(ms.len() as i64) as usize].clone()),
            Backend::Generator { rule, cache } => {
                if let Some(cache) = cache {
                    let (start, mats) = &**cache;
                    if k >= *start && k < start + mats.len() as i64 {
                        return Ok(mats[(k - start) as usize].clone());
                    }
                }
                let m = rule(k)?;
                if m.nrows() != self.dim || m.ncols() != self.dim {
                    return Err(Error::shape(
                        format!("{0}x{0}", self.dim),
                        format!("{}x{}", m.nrows(), m.ncols()),
                    ));
                }
                Ok(m)
            }
        }
    }

    /// `A(k) x`.
    pub fn apply(&self, k: i64, x: &Value) -> Result<Value> {
        if x.len() != self.dim {
            return Err(Error::shape(self.dim, x.len()));
        }
        match &self.backend {
            Backend::Constant(m) => Ok(m * x),
            Backend::Periodic(ms) => Ok(&ms[k.rem_euclid(ms.len() as i64) as usize] * x),
            Backend::Generator { .. } => Ok(self.at(k)? * x),
        }
    }

    /// `A(k−1) A(k−2) ⋯ A(k−v) x`, applied right to left as matrix–vector
    /// products.
    pub fn product_apply(&self, k: i64, v: usize, x: &Value) -> Result<Value> {
        if v == 0 {
            return Err(Error::InputContract("product length must be at least 1".into()));
        }
        let mut y = x.clone();
        for i in (1..=v as i64).rev() {
            y = self.apply(k - i, &y)?;
        }
        Ok(y)
    }

    /// Materializes generator values on `window` so later (possibly
    /// parallel) lookups are plain reads.
    pub fn warm_cache(mut self, window: Window) -> Result<Self> {
        if let Backend::Generator { rule, cache } = &mut self.backend {
            let mats = (window.start..=window.end).map(|k| rule(k)).collect::<Result<Vec<_>>>()?;
            *cache = Some(Arc::new((window.start, mats)));
        }
        Ok(self)
    }

    /// `k ↦ A(−k−1)`; certificates follow.
    pub fn reflect(&self) -> Self {
        let backend = match &self.backend {
            Backend::Constant(m) => Backend::Constant(m.clone()),
            Backend::Periodic(ms) => {
                let w = ms.len() as i64;
                Backend::Periodic((0..w).map(|j| ms[(-j - 1).rem_euclid(w) as usize].clone()).collect())
            }
            Backend::Generator { .. } => {
                let inner = self.clone();
                Backend::Generator {
                    rule: Arc::new(move |k| inner.at(-k - 1)),
                    cache: None,
                }
            }
        };
        OperatorSequence {
            dim: self.dim,
            backend,
            certificates: self
                .certificates
                .iter()
                .map(|(l, c)| (l.clone(), Certificate { rule: c.rule.reflect(), sup: c.sup }))
                .collect(),
        }
    }

    /// `k ↦ A(k + s)`; certificates follow.
    pub fn shift(&self, s: i64) -> Self {
        let backend = match &self.backend {
            Backend::Constant(m) => Backend::Constant(m.clone()),
            Backend::Periodic(ms) => {
                let w = ms.len() as i64;
                Backend::Periodic((0..w).map(|j| ms[(j + s).rem_euclid(w) as usize].clone()).collect())
            }
            Backend::Generator { .. } => {
                let inner = self.clone();
                Backend::Generator {
                    rule: Arc::new(move |k| inner.at(k + s)),
                    cache: None,
                }
            }
        };
        OperatorSequence {
            dim: self.dim,
            backend,
            certificates: self
                .certificates
                .iter()
                .map(|(l, c)| (l.clone(), Certificate { rule: c.rule.shift(s), sup: c.sup }))
                .collect(),
        }
    }

    /// Pointwise `k ↦ g(A(k))`, keeping periodicity. Uncertified.
    pub fn map<G>(&self, dim: usize, g: G) -> Result<Self>
    where
        G: Fn(&Operator) -> Result<Operator> + Send + Sync + 'static,
    {
        let inner = self.clone();
        Self::from_rule(dim, self.period(), move |k| g(&inner.at(k)?))
    }

    /// Pointwise product `k ↦ A(k) B(k)`. Uncertified.
    pub fn compose(&self, other: &OperatorSequence) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::shape(self.dim, other.dim));
        }
        let period = match (self.period(), other.period()) {
            (Some(a), Some(b)) => Some(lcm(a, b)),
            _ => None,
        };
        let (a, b) = (self.clone(), other.clone());
        Self::from_rule(self.dim, period, move |k| Ok(a.at(k)? * b.at(k)?))
    }

    /// Attaches numeric certificates for every seminorm of `family`.
    ///
    /// Constant and periodic sequences get exact per-k bounds. Generators get
    /// a per-k bound (tabulated on `probe`, computed on demand elsewhere) and a
    /// supremum estimated on `probe`. Generator values on `probe` are cached
    /// when that fits in [`CACHE_ENTRY_LIMIT`] matrix entries.
    pub fn certify(self, family: &SeminormFamily, probe: Window) -> Result<Self> {
        if family.dim() != self.dim {
            return Err(Error::shape(self.dim, family.dim()));
        }
        let mut out = match &self.backend {
            Backend::Generator { cache: None, .. } if probe.len() * self.dim * self.dim <= CACHE_ENTRY_LIMIT => {
                self.warm_cache(probe)?
            }
            _ => self,
        };
        let probe_bounds = match &out.backend {
            Backend::Generator { .. } => {
                let ks: Vec<i64> = probe.iter().collect();
                let per_k = ks
                    .par_iter()
                    .map(|&k| {
                        let m = out.at(k)?;
                        family.iter().map(|kappa| kappa.operator_bound(&m)).collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(per_k)
            }
            _ => None,
        };
        for (idx, kappa) in family.iter().enumerate() {
            let cert = match &out.backend {
                Backend::Constant(m) => {
                    let c = kappa.operator_bound(m)?;
                    Certificate { rule: CertRule::Constant(c), sup: c }
                }
                Backend::Periodic(ms) => {
                    let cs = ms.iter().map(|m| kappa.operator_bound(m)).collect::<Result<Vec<_>>>()?;
                    let sup = cs.iter().cloned().fold(0.0, f64::max);
                    Certificate { rule: CertRule::Periodic(cs), sup }
                }
                Backend::Generator { .. } => {
                    let cached: Vec<f64> = probe_bounds.as_ref().expect("generator bounds").iter().map(|b| b[idx]).collect();
                    let sup = cached.iter().cloned().fold(0.0, f64::max);
                    let start = probe.start;
                    let cached = Arc::new(cached);
                    let seq = OperatorSequence {
                        certificates: BTreeMap::new(),
                        ..out.clone()
                    };
                    let kappa = kappa.clone();
                    let rule = CertRule::from_fn(move |k| {
                        if k >= start && k < start + cached.len() as i64 {
                            return cached[(k - start) as usize];
                        }
                        seq.at(k)
                            .and_then(|m| kappa.operator_bound(&m))
                            .unwrap_or(f64::INFINITY)
                    });
                    Certificate { rule, sup }
                }
            };
            out.certificates.insert(kappa.label.clone(), cert);
        }
        Ok(out)
    }

    /// Installs a caller-supplied certificate (analytic bounds). Soundness
    /// is the caller's responsibility.
    pub fn with_certificate(mut self, label: impl Into<String>, rule: CertRule, sup: f64) -> Self {
        self.certificates.insert(label.into(), Certificate { rule, sup });
        self
    }

    pub fn is_certified(&self, label: &str) -> bool {
        self.certificates.contains_key(label)
    }

    pub fn certified_labels(&self) -> Vec<String> {
        self.certificates.keys().cloned().collect()
    }

    pub fn certificate(&self, label: &str, k: i64) -> Result<f64> {
        self.certificates
            .get(label)
            .map(|c| c.rule.at(k))
            .ok_or_else(|| Error::InputContract(format!("no bound certificate for seminorm '{label}'")))
    }

    pub fn certificate_rule(&self, label: &str) -> Option<CertRule> {
        self.certificates.get(label).map(|c| c.rule.clone())
    }

    pub fn sup_bound(&self, label: &str) -> Result<f64> {
        self.certificates
            .get(label)
            .map(|c| c.sup)
            .ok_or_else(|| Error::InputContract(format!("no bound certificate for seminorm '{label}'")))
    }
}

/// Convergence certificate for the backward product sums at a fixed `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RacCertificate {
    pub seminorm_label: String,
    pub k: i64,
    /// `(V, Σ_{v=1}^{V} Π_{i=1}^{v} c^κ(k−i))`
    pub partial_sums: Vec<(usize, f64)>,
    pub tail_bound: Option<f64>,
    pub converged: bool,
}

/// Largest number of matrix entries a generator cache may hold.
pub const CACHE_ENTRY_LIMIT: usize = 1 << 22;

pub const DEFAULT_V_MAX: usize = 10_000;
pub const DEFAULT_RAC_TOL: f64 = 1e-12;

/// Sums the backward certificate products at `k` until the series is
/// certified or `v_max` terms are exhausted.
///
/// With `sup_k c^κ(k) = c̄ < 1` the tail after `V` terms is bounded by
/// `c̄^{V+1}/(1 − c̄)`. Otherwise convergence is declared empirically once ten
/// consecutive terms fall below `tol`; no tail bound is attached then.
pub fn rac_certify(a: &OperatorSequence, label: &str, k: i64, v_max: usize, tol: f64) -> Result<RacCertificate> {
    if v_max == 0 {
        return Err(Error::InputContract("V_max must be at least 1".into()));
    }
    let sup = a.sup_bound(label)?;
    let mut partial_sums = Vec::new();
    let mut product = 1.0;
    let mut sum = 0.0;
    let mut small_run = 0;
    for v in 1..=v_max {
        product *= a.certificate(label, k - v as i64)?;
        sum += product;
        partial_sums.push((v, sum));
        if !sum.is_finite() {
            break;
        }
        if sup < 1.0 {
            let tail = sup.powi(v as i32 + 1) / (1.0 - sup);
            if tail < tol {
                return Ok(RacCertificate {
                    seminorm_label: label.to_string(),
                    k,
                    partial_sums,
                    tail_bound: Some(tail),
                    converged: true,
                });
            }
        } else {
            small_run = if product < tol { small_run + 1 } else { 0 };
            if small_run >= 10 {
                return Ok(RacCertificate {
                    seminorm_label: label.to_string(),
                    k,
                    partial_sums,
                    tail_bound: None,
                    converged: true,
                });
            }
        }
    }
    Ok(RacCertificate {
        seminorm_label: label.to_string(),
        k,
        partial_sums,
        tail_bound: None,
        converged: false,
    })
}
