//! Scenario files: TOML with an explicit `schema_version`.

use std::collections::BTreeMap;
use std::path::Path;

use apseq::Window;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    FirstOrder,
    Inclusion,
    DegenerateVb,
    DegenerateVb1,
    SecondOrder,
    SystemBm,
    Heat,
    Wave,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::FirstOrder => "first_order",
            ProblemKind::Inclusion => "inclusion",
            ProblemKind::DegenerateVb => "degenerate_vb",
            ProblemKind::DegenerateVb1 => "degenerate_vb1",
            ProblemKind::SecondOrder => "second_order",
            ProblemKind::SystemBm => "system_bm",
            ProblemKind::Heat => "heat",
            ProblemKind::Wave => "wave",
        }
    }
}

/// A complex number written as `x` or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cx {
    Real(f64),
    Pair([f64; 2]),
}

impl Cx {
    pub fn value(self) -> Complex64 {
        match self {
            Cx::Real(x) => Complex64::new(x, 0.0),
            Cx::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        if z.im == 0.0 {
            Cx::Real(z.re)
        } else {
            Cx::Pair([z.re, z.im])
        }
    }
}

impl From<f64> for Cx {
    fn from(x: f64) -> Self {
        Cx::Real(x)
    }
}

pub type Row = Vec<Cx>;
pub type Matrix = Vec<Row>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub freq: f64,
    pub coeffs: Row,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTerm {
    pub freq: f64,
    pub matrix: Matrix,
}

/// Operator sequences. Scalar and diagonal forms take the dimension from the
/// scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Constant { matrix: Matrix },
    Periodic { matrices: Vec<Matrix> },
    Scalar { value: Cx },
    Diagonal { values: Row },
    PeriodicScalar { values: Row },
    /// Generator `A(k) = Σ_j M_j e^{i λ_j k}`.
    Trig { terms: Vec<MatrixTerm> },
}

/// Vector sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    Constant { value: Row },
    /// Values on `[start, start + len)`, zero elsewhere.
    Table { start: i64, values: Vec<Row> },
    TrigPoly { terms: Vec<TrigTerm> },
    /// `f(k + ω) = c f(k)` from the base values on `[start, start + ω)`.
    OmegaC { start: i64, c: Cx, base: Vec<Row> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeminormSpec {
    Sup,
    PNorm { p: f64 },
    FirstDifference,
    SecondDifference,
    Stencil { label: String, taps: Vec<(i64, Cx)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub start: i64,
    pub end: i64,
}

impl WindowSpec {
    pub fn window(self) -> Result<Window, CliError> {
        Ok(Window::new(self.start, self.end)?)
    }
}

impl From<Window> for WindowSpec {
    fn from(w: Window) -> Self {
        WindowSpec { start: w.start, end: w.end }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub h: f64,
    #[serde(default = "one")]
    pub dims: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BohrSpec {
    pub epsilon: f64,
    pub l: i64,
    pub k_window: WindowSpec,
    pub tau_range: WindowSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seminorm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesicovitchSpec {
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_grid: Option<Vec<i64>>,
    /// Frequencies of the approximating polynomial, fitted by Bohr-Fourier
    /// coefficients; empty means `P = 0`.
    #[serde(default)]
    pub frequencies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seminorm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeylSpec {
    pub p: f64,
    pub l: i64,
    pub s_range: WindowSpec,
    #[serde(default)]
    pub frequencies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seminorm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaCSpec {
    pub omega: usize,
    pub c: Cx,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_window: Option<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bohr: Option<BohrSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub besicovitch: Option<BesicovitchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl: Option<WeylSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<OmegaCSpec>,
}

impl AnalysisSpec {
    pub fn is_empty(&self) -> bool {
        self.bohr.is_none() && self.besicovitch.is_none() && self.weyl.is_none() && self.omega_c.is_none()
    }
}

/// One reproducible scenario.
///
/// Operator and forcing names depend on the problem:
///
/// | problem          | operators                       | forcings        |
/// |------------------|---------------------------------|-----------------|
/// | `first_order`    | `A`                             | `f`             |
/// | `inclusion`      | `D`, optional `C`               | `f`             |
/// | `degenerate_vb`  | `B`, `A` or `Ainv_C`, opt. `C`  | `f`             |
/// | `degenerate_vb1` | `B`, `A` or `Ainv_BC`, opt. `C` | `f`, `g`        |
/// | `second_order`   | `A0`, `A1`, `A2`, optional `C`  | `f`             |
/// | `system_bm`      | `A`, `D` (with `p`)             | `f`             |
/// | `heat`           | none (uses `grid`)              | `m`, `b`, `f`   |
/// | `wave`           | none (uses `grid`)              | `m1`, `m2`, `b`, `f` |
///
/// `b` is a scalar sequence (dimension 1); other grid sequences have one
/// entry per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub problem: ProblemKind,
    /// State dimension; derived from `grid` for heat and wave.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Block count for `system_bm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    pub window: WindowSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seminorms: Vec<SeminormSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub operators: BTreeMap<String, OperatorSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forcing: BTreeMap<String, ForcingSpec>,
    #[serde(default, skip_serializing_if = "AnalysisSpec::is_empty")]
    pub analysis: AnalysisSpec,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }
}
