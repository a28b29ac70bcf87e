//! Value spaces, seminorm families and ℤ-indexed sequences.
//!
//! The state space is `ℂ^d` carrying a finite family of seminorms. Several
//! inequivalent seminorms (sup, p-norms, difference stencils) can be active
//! at once, so every bound downstream is quantified per seminorm label.
//!
//! Sequences are immutable. Derived sequences (linear combinations, shifts,
//! reflections) are lazy views over `Arc`-shared operands, which keeps them
//! cheap to clone and safe to evaluate from several threads.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::{Operator, Value};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub enum SeminormKind {
    /// max_i |x_i|
    Sup,
    /// (Σ |x_i|^p)^{1/p}, p ≥ 1
    PNorm(f64),
    /// sup-norm of the difference stencil `y_i = Σ w · x_{i+offset}`,
    /// with zero values outside the grid (Dirichlet truncation).
    Stencil(Vec<(i64, Complex64)>),
    /// Σ_j κ(y_j) over `blocks` consecutive blocks; the seminorm of a
    /// product space `Y^p`.
    Product { inner: Box<Seminorm>, blocks: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seminorm {
    pub kind: SeminormKind,
    pub label: String,
}

impl Seminorm {
    pub fn sup() -> Self {
        Seminorm {
            kind: SeminormKind::Sup,
            label: "sup".into(),
        }
    }

    pub fn p_norm(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::InputContract(format!("p-norm needs finite p >= 1, got {p}")));
        }
        Ok(Seminorm {
            kind: SeminormKind::PNorm(p),
            label: format!("l{p}"),
        })
    }

    pub fn stencil(label: impl Into<String>, taps: Vec<(i64, Complex64)>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InputContract("stencil needs at least one tap".into()));
        }
        Ok(Seminorm {
            kind: SeminormKind::Stencil(taps),
            label: label.into(),
        })
    }

    /// Forward difference `x_{i+1} - x_i`.
    pub fn first_difference() -> Self {
        Seminorm {
            kind: SeminormKind::Stencil(vec![(0, Complex64::new(-1.0, 0.0)), (1, Complex64::new(1.0, 0.0))]),
            label: "d1".into(),
        }
    }

    /// Centered second difference `x_{i-1} - 2 x_i + x_{i+1}`.
    pub fn second_difference() -> Self {
        Seminorm {
            kind: SeminormKind::Stencil(vec![
                (-1, Complex64::new(1.0, 0.0)),
                (0, Complex64::new(-2.0, 0.0)),
                (1, Complex64::new(1.0, 0.0)),
            ]),
            label: "d2".into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Product seminorm on `Y^blocks`; keeps the inner label.
    pub fn product(&self, blocks: usize) -> Self {
        Seminorm {
            label: self.label.clone(),
            kind: SeminormKind::Product {
                inner: Box::new(self.clone()),
                blocks,
            },
        }
    }

    pub fn eval(&self, x: &Value) -> f64 {
        match &self.kind {
            SeminormKind::Sup => x.iter().map(|z| z.norm()).fold(0.0, f64::max),
            SeminormKind::PNorm(p) => {
                if *p == 1.0 {
                    x.iter().map(|z| z.norm()).sum()
                } else if *p == 2.0 {
                    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                } else {
                    x.iter().map(|z| z.norm().powf(*p)).sum::<f64>().powf(1.0 / p)
                }
            }
            SeminormKind::Stencil(taps) => {
                let d = x.len() as i64;
                (0..d)
                    .map(|i| {
                        taps.iter()
                            .filter_map(|(off, w)| {
                                let j = i + off;
                                (0..d).contains(&j).then(|| w * x[j as usize])
                            })
                            .sum::<Complex64>()
                            .norm()
                    })
                    .fold(0.0, f64::max)
            }
            SeminormKind::Product { inner, blocks } => {
                let d = x.len() / blocks;
                (0..*blocks)
                    .map(|b| inner.eval(&x.rows(b * d, d).into_owned()))
                    .sum()
            }
        }
    }

    /// Matrix of the stencil map on `ℂ^d`.
    fn stencil_matrix(taps: &[(i64, Complex64)], d: usize) -> Operator {
        let mut s = DMatrix::zeros(d, d);
        for i in 0..d as i64 {
            for (off, w) in taps {
                let j = i + off;
                if (0..d as i64).contains(&j) {
                    s[(i as usize, j as usize)] += w;
                }
            }
        }
        s
    }

    /// A sound upper bound `c` with `κ(M x) ≤ c · κ(x)` for every `x`.
    ///
    /// Sup and 1-norms use exact row/column sums, the 2-norm the largest
    /// singular value, other p-norms the Riesz–Thorin interpolation bound.
    /// Stencil seminorms are handled by similarity with the stencil matrix,
    /// which must be invertible on the grid.
    pub fn operator_bound(&self, m: &Operator) -> Result<f64> {
        if m.nrows() != m.ncols() {
            return Err(Error::shape("square operator", format!("{}x{}", m.nrows(), m.ncols())));
        }
        const SLACK: f64 = 1.0 + 1e-10;
        let bound = match &self.kind {
            SeminormKind::Sup => linalg::norm_inf(m),
            SeminormKind::PNorm(p) => {
                if *p == 1.0 {
                    linalg::norm_one(m)
                } else if *p == 2.0 {
                    linalg::norm_two(m) * SLACK
                } else {
                    linalg::norm_one(m).powf(1.0 / p) * linalg::norm_inf(m).powf(1.0 - 1.0 / p) * SLACK
                }
            }
            SeminormKind::Stencil(taps) => {
                let s = Self::stencil_matrix(taps, m.nrows());
                let s_inv = linalg::inverse_checked(&s, &format!("stencil matrix of '{}'", self.label))
                    .map_err(|_| {
                        Error::Numeric(format!(
                            "stencil seminorm '{}' is degenerate on dimension {}; no operator bound available",
                            self.label,
                            m.nrows()
                        ))
                    })?;
                linalg::norm_inf(&(&s * m * s_inv)) * SLACK
            }
            SeminormKind::Product { inner, blocks } => {
                if !m.nrows().is_multiple_of(*blocks) {
                    return Err(Error::shape(
                        format!("dimension divisible by {blocks}"),
                        m.nrows(),
                    ));
                }
                let d = m.nrows() / blocks;
                let mut worst: f64 = 0.0;
                for bj in 0..*blocks {
                    let mut col = 0.0;
                    for bi in 0..*blocks {
                        let b = linalg::block(m, bi, bj, d);
                        if b.iter().any(|z| *z != ZERO) {
                            col += inner.operator_bound(&b)?;
                        }
                    }
                    worst = worst.max(col);
                }
                worst
            }
        };
        if !bound.is_finite() {
            return Err(Error::Numeric(format!("non-finite operator bound under '{}'", self.label)));
        }
        Ok(bound)
    }
}

impl fmt::Display for Seminorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Sum of component seminorms, the seminorm of a product space.
pub fn product_seminorm(parts: &[(&Seminorm, &Value)]) -> f64 {
    parts.iter().map(|(k, v)| k.eval(v)).sum()
}

/// Finite family of seminorms standing in for a locally convex topology.
#[derive(Debug, Clone, PartialEq)]
pub struct SeminormFamily {
    seminorms: Vec<Seminorm>,
    dim: usize,
}

impl SeminormFamily {
    /// Builds the family and checks, on the basis vectors of `ℂ^dim`, that
    /// every test vector is seen by at least one seminorm.
    pub fn new(seminorms: Vec<Seminorm>, dim: usize) -> Result<Self> {
        if seminorms.is_empty() {
            return Err(Error::InputContract("seminorm family must be nonempty".into()));
        }
        if dim == 0 {
            return Err(Error::InputContract("dimension must be at least 1".into()));
        }
        for (i, s) in seminorms.iter().enumerate() {
            if seminorms[..i].iter().any(|t| t.label == s.label) {
                return Err(Error::InputContract(format!("duplicate seminorm label '{}'", s.label)));
            }
        }
        for i in 0..dim {
            let e = DVector::from_fn(dim, |j, _| if i == j { Complex64::new(1.0, 0.0) } else { ZERO });
            if seminorms.iter().all(|s| s.eval(&e) == 0.0) {
                return Err(Error::InputContract(format!(
                    "seminorm family does not separate basis vector e_{i}"
                )));
            }
        }
        Ok(SeminormFamily { seminorms, dim })
    }

    pub fn sup(dim: usize) -> Self {
        SeminormFamily {
            seminorms: vec![Seminorm::sup()],
            dim,
        }
    }

    /// The family `{sup, first difference, second difference}` modelling
    /// derivative seminorms on a grid.
    pub fn difference_family(dim: usize) -> Result<Self> {
        Self::new(
            vec![Seminorm::sup(), Seminorm::first_difference(), Seminorm::second_difference()],
            dim,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = &Seminorm> {
        self.seminorms.iter()
    }

    pub fn len(&self) -> usize {
        self.seminorms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seminorms.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&Seminorm> {
        self.seminorms.iter().find(|s| s.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.seminorms.iter().map(|s| s.label.clone()).collect()
    }

    /// Product family on `Y^blocks`, one member per inner seminorm.
    pub fn product(&self, blocks: usize) -> Self {
        SeminormFamily {
            seminorms: self.seminorms.iter().map(|s| s.product(blocks)).collect(),
            dim: self.dim * blocks,
        }
    }
}

/// Trigonometric polynomial `P(k) = Σ_j y_j e^{iλ_j k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    terms: Vec<(f64, Value)>,
}

impl TrigPoly {
    pub fn new(dim: usize, terms: Vec<(f64, Value)>) -> Result<Self> {
        for (lambda, y) in &terms {
            if y.len() != dim {
                return Err(Error::shape(dim, y.len()));
            }
            if !lambda.is_finite() {
                return Err(Error::InputContract(format!("non-finite frequency {lambda}")));
            }
        }
        Ok(TrigPoly { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(f64, Value)] {
        &self.terms
    }

    pub fn eval(&self, k: i64) -> Value {
        let mut out = DVector::zeros(self.dim);
        for (lambda, y) in &self.terms {
            let phase = Complex64::from_polar(1.0, lambda * k as f64);
            out += y * phase;
        }
        out
    }

    /// `k ↦ P(k + τ)`, again a trigonometric polynomial.
    pub fn shifted(&self, tau: i64) -> Self {
        TrigPoly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(lambda, y)| (*lambda, y * Complex64::from_polar(1.0, lambda * tau as f64)))
                .collect(),
        }
    }
}

/// `F(k) = c^q · base[r]` for `k = start + q·ω + r`, `0 ≤ r < ω`.
#[derive(Debug, Clone)]
struct OmegaC {
    start: i64,
    base: Vec<Value>,
    c: Complex64,
}

impl OmegaC {
    fn omega(&self) -> i64 {
        self.base.len() as i64
    }

    fn eval(&self, k: i64) -> Value {
        let q = (k - self.start).div_euclid(self.omega());
        let r = (k - self.start).rem_euclid(self.omega()) as usize;
        &self.base[r] * self.c.powi(q as i32)
    }
}

/// Per-seminorm envelope `κ(F(j)) ≤ m · |c|^{⌊(j − start)/ω⌋}` of an
/// `(ω,c)`-periodic sequence. Exact on the base window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricEnvelope {
    pub m: f64,
    pub start: i64,
    pub omega: i64,
    pub modulus: f64,
}

impl GeometricEnvelope {
    pub fn at(&self, j: i64) -> f64 {
        let q = (j - self.start).div_euclid(self.omega);
        self.m * self.modulus.powi(q as i32)
    }

    /// Growth rate per step towards −∞: `κ(F(j − i)) ≤ κ-envelope(j) · g · ρ^{-i}`
    /// with `ρ = min(1, |c|^{1/ω})` and `g = max(1, 1/|c|)`.
    pub fn left_growth(&self) -> (f64, f64) {
        if self.modulus < 1.0 {
            (self.modulus.powf(1.0 / self.omega as f64), 1.0 / self.modulus)
        } else {
            (1.0, 1.0)
        }
    }
}

type EvalFn = dyn Fn(i64) -> Result<Value> + Send + Sync;

#[derive(Clone)]
enum Fallback {
    None,
    Zero,
    Sequence(Box<BiSequence>),
}

#[derive(Clone)]
enum Backend {
    Table {
        start: i64,
        values: Arc<Vec<Value>>,
        fallback: Fallback,
    },
    Generator(Arc<EvalFn>),
    Trig(Arc<TrigPoly>),
    OmegaC(Arc<OmegaC>),
}

/// A ℤ-indexed `ℂ^d`-valued sequence, evaluable at any integer its backend
/// represents.
#[derive(Clone)]
pub struct BiSequence {
    dim: usize,
    backend: Backend,
}

impl fmt::Debug for BiSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.backend {
            Backend::Table { start, values, .. } => format!("table[{start}, {}]", *start + values.len() as i64 - 1),
            Backend::Generator(_) => "generator".into(),
            Backend::Trig(p) => format!("trig_poly({} terms)", p.terms.len()),
            Backend::OmegaC(o) => format!("omega_c(ω={}, c={})", o.omega(), o.c),
        };
        write!(f, "BiSequence {{ dim: {}, backend: {kind} }}", self.dim)
    }
}

impl BiSequence {
    /// Table on `[start, start + values.len() − 1]`; evaluation outside is a
    /// range error unless an extension is attached.
    pub fn table(start: i64, values: Vec<Value>) -> Result<Self> {
        let dim = values
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InputContract("table must hold at least one value".into()))?;
        if let Some(bad) = values.iter().find(|v| v.len() != dim) {
            return Err(Error::shape(dim, bad.len()));
        }
        Ok(BiSequence {
            dim,
            backend: Backend::Table {
                start,
                values: Arc::new(values),
                fallback: Fallback::None,
            },
        })
    }

    /// Tables only: evaluate to zero outside the window.
    pub fn with_zero_extension(mut self) -> Self {
        if let Backend::Table { fallback, .. } = &mut self.backend {
            *fallback = Fallback::Zero;
        }
        self
    }

    /// Tables only: delegate to `other` outside the window.
    pub fn with_fallback(mut self, other: BiSequence) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::shape(self.dim, other.dim));
        }
        if let Backend::Table { fallback, .. } = &mut self.backend {
            *fallback = Fallback::Sequence(Box::new(other));
        }
        Ok(self)
    }

    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(i64) -> Value + Send + Sync + 'static,
    {
        BiSequence {
            dim,
            backend: Backend::Generator(Arc::new(move |k| Ok(f(k)))),
        }
    }

    pub(crate) fn from_fallible_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(i64) -> Result<Value> + Send + Sync + 'static,
    {
        BiSequence {
            dim,
            backend: Backend::Generator(Arc::new(f)),
        }
    }

    pub fn constant(value: Value) -> Self {
        // A zero-frequency trigonometric polynomial keeps shifts structural.
        let dim = value.len();
        BiSequence {
            dim,
            backend: Backend::Trig(Arc::new(TrigPoly {
                dim,
                terms: vec![(0.0, value)],
            })),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(DVector::zeros(dim))
    }

    pub fn trig_poly(p: TrigPoly) -> Self {
        BiSequence {
            dim: p.dim,
            backend: Backend::Trig(Arc::new(p)),
        }
    }

    /// `(ω, c)`-periodic extension of the base window `base` placed at
    /// `start`; `ω = base.len()`.
    pub fn omega_c(start: i64, base: Vec<Value>, c: Complex64) -> Result<Self> {
        let dim = base
            .first()
            .map(|v| v.len())
            .ok_or_else(|| Error::InputContract("omega_c base window must be nonempty".into()))?;
        if let Some(bad) = base.iter().find(|v| v.len() != dim) {
            return Err(Error::shape(dim, bad.len()));
        }
        if c == ZERO || !c.is_finite() {
            return Err(Error::InputContract(format!("omega_c multiplier must be finite and nonzero, got {c}")));
        }
        Ok(BiSequence {
            dim,
            backend: Backend::OmegaC(Arc::new(OmegaC { start, base, c })),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, k: i64) -> Result<Value> {
        match &self.backend {
            Backend::Table { start, values, fallback } => {
                let end = start + values.len() as i64 - 1;
                if (*start..=end).contains(&k) {
                    Ok(values[(k - start) as usize].clone())
                } else {
                    match fallback {
                        Fallback::None => Err(Error::Range { k, start: *start, end }),
                        Fallback::Zero => Ok(DVector::zeros(self.dim)),
                        Fallback::Sequence(s) => s.eval(k),
                    }
                }
            }
            Backend::Generator(f) => {
                let v = f(k)?;
                if v.len() != self.dim {
                    return Err(Error::shape(self.dim, v.len()));
                }
                Ok(v)
            }
            Backend::Trig(p) => Ok(p.eval(k)),
            Backend::OmegaC(o) => Ok(o.eval(k)),
        }
    }

    /// Values on `[a, b]`.
    pub fn eval_window(&self, a: i64, b: i64) -> Result<Vec<Value>> {
        (a..=b).map(|k| self.eval(k)).collect()
    }

    /// `(ω, c)` when the backend is an `(ω,c)`-periodic extension.
    pub fn omega_c_params(&self) -> Option<(usize, Complex64)> {
        match &self.backend {
            Backend::OmegaC(o) => Some((o.base.len(), o.c)),
            _ => None,
        }
    }

    /// Period of the sequence when the backend makes it evident:
    /// `(ω,1)`-periodic extensions and constant trigonometric polynomials.
    pub fn period(&self) -> Option<usize> {
        match &self.backend {
            Backend::OmegaC(o) if o.c == Complex64::new(1.0, 0.0) => Some(o.base.len()),
            Backend::Trig(p) if p.terms.iter().all(|(l, _)| *l == 0.0) => Some(1),
            _ => None,
        }
    }

    /// Geometric envelope under `κ`, available for `(ω,c)` backends.
    pub fn envelope(&self, kappa: &Seminorm) -> Option<GeometricEnvelope> {
        match &self.backend {
            Backend::OmegaC(o) => Some(GeometricEnvelope {
                m: o.base.iter().map(|v| kappa.eval(v)).fold(0.0, f64::max),
                start: o.start,
                omega: o.omega(),
                modulus: o.c.norm(),
            }),
            _ => None,
        }
    }

    /// `G(k) = F(k + τ)`.
    pub fn shift(&self, tau: i64) -> Self {
        let backend = match &self.backend {
            Backend::Trig(p) => Backend::Trig(Arc::new(p.shifted(tau))),
            Backend::OmegaC(o) => Backend::OmegaC(Arc::new(OmegaC {
                start: o.start - tau,
                base: o.base.clone(),
                c: o.c,
            })),
            Backend::Table { start, values, fallback } => Backend::Table {
                start: start - tau,
                values: values.clone(),
                fallback: match fallback {
                    Fallback::Sequence(s) => Fallback::Sequence(Box::new(s.shift(tau))),
                    other => other.clone(),
                },
            },
            Backend::Generator(_) => {
                let inner = self.clone();
                return Self::from_fallible_fn(self.dim, move |k| inner.eval(k + tau));
            }
        };
        BiSequence { dim: self.dim, backend }
    }

    /// `G(k) = F(−k)`.
    pub fn reflect(&self) -> Self {
        let inner = self.clone();
        Self::from_fallible_fn(self.dim, move |k| inner.eval(-k))
    }

    /// Pointwise map `k ↦ g(k, F(k))` producing a sequence of dimension `dim`.
    pub fn map<G>(&self, dim: usize, g: G) -> Self
    where
        G: Fn(i64, Value) -> Result<Value> + Send + Sync + 'static,
    {
        let inner = self.clone();
        Self::from_fallible_fn(dim, move |k| g(k, inner.eval(k)?))
    }

    /// Embeds into `Y^p` as `[F(k), 0, …, 0]`. `(ω,c)` structure is kept.
    pub fn lift(&self, p: usize) -> Self {
        let d = self.dim;
        let embed = move |v: &Value| {
            let mut out = DVector::zeros(d * p);
            out.rows_mut(0, d).copy_from(v);
            out
        };
        if let Backend::OmegaC(o) = &self.backend {
            return BiSequence {
                dim: d * p,
                backend: Backend::OmegaC(Arc::new(OmegaC {
                    start: o.start,
                    base: o.base.iter().map(embed).collect(),
                    c: o.c,
                })),
            };
        }
        self.map(d * p, move |_, v| Ok(embed(&v)))
    }

    /// Writes `k, re_0, im_0, …` rows for `k ∈ [a, b]`.
    pub fn write_csv<W: Write>(&self, a: i64, b: i64, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Numeric(format!("csv write failed: {e}"));
        let mut header = String::from("k");
        for i in 0..self.dim {
            header.push_str(&format!(",re_{i},im_{i}"));
        }
        writeln!(out, "{header}").map_err(io)?;
        for k in a..=b {
            let v = self.eval(k)?;
            let mut line = k.to_string();
            for z in v.iter() {
                line.push_str(&format!(",{},{}", fmt_f64(z.re), fmt_f64(z.im)));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        Ok(())
    }

    /// Reads the format written by [`BiSequence::write_csv`] into a table.
    /// Rows must be consecutive in `k`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let bad = |msg: String| Error::InputContract(format!("csv: {msg}"));
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"k") || cols.len() < 3 || cols.len().is_multiple_of(2) {
            return Err(bad(format!("unexpected header '{header}'")));
        }
        let dim = (cols.len() - 1) / 2;
        let mut start = None;
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(bad(format!("row {row}: expected {} fields", cols.len())));
            }
            let k: i64 = fields[0].parse().map_err(|_| bad(format!("row {row}: bad index")))?;
            let expected = start.map(|s: i64| s + values.len() as i64).unwrap_or(k);
            if k != expected {
                return Err(bad(format!("row {row}: index {k} is not consecutive")));
            }
            start.get_or_insert(k);
            let mut v = DVector::zeros(dim);
            for i in 0..dim {
                let re: f64 = fields[1 + 2 * i].parse().map_err(|_| bad(format!("row {row}: bad number")))?;
                let im: f64 = fields[2 + 2 * i].parse().map_err(|_| bad(format!("row {row}: bad number")))?;
                v[i] = Complex64::new(re, im);
            }
            values.push(v);
        }
        Self::table(start.ok_or_else(|| bad("no data rows".into()))?, values)
    }
}

/// 17 significant digits, lowercase scientific.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `αF + βG`, evaluated lazily.
pub fn seq_axpy(alpha: Complex64, f: &BiSequence, beta: Complex64, g: &BiSequence) -> Result<BiSequence> {
    if f.dim != g.dim {
        return Err(Error::shape(f.dim, g.dim));
    }
    let (f, g) = (f.clone(), g.clone());
    Ok(BiSequence::from_fallible_fn(f.dim, move |k| {
        Ok(f.eval(k)? * alpha + g.eval(k)? * beta)
    }))
}

/// Applies a fixed operator pointwise.
pub fn seq_apply(m: &Operator, f: &BiSequence) -> Result<BiSequence> {
    if m.ncols() != f.dim {
        return Err(Error::shape(m.ncols(), f.dim));
    }
    let m = m.clone();
    Ok(f.map(m.nrows(), move |_, v| Ok(&m * v)))
}
