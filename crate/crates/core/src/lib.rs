//! Almost periodic solutions of linear difference equations and inclusions
//! in finite-dimensional complex spaces.
//!
//! The central object is the backward series solution
//! `x(k) = f(k−1) + Σ_{v≥1} A(k−1)⋯A(k−v) f(k−1−v)` of `x(k+1) = A(k)x(k) + f(k)`,
//! certified through per-seminorm operator bounds. Degenerate, inclusion and
//! higher-order problems reduce to it.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub mod analysis;
pub mod discretization;
pub mod error;
pub mod first_order;
pub mod higher_order;
pub mod linalg;
pub mod operator;
pub mod resolvent;
pub mod seq;

pub use error::{Error, Result};

/// An element of `Y = ℂ^d`.
pub type Value = DVector<Complex64>;
/// A linear operator on `Y`.
pub type Operator = DMatrix<Complex64>;

/// Closed integer interval `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::InputContract(format!("empty window [{start}, {end}]")));
        }
        Ok(Window { start, end })
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: i64) -> bool {
        (self.start..=self.end).contains(&k)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<i64> {
        self.start..=self.end
    }

    /// `[−end, −start]`.
    pub fn reflected(&self) -> Self {
        Window { start: -self.end, end: -self.start }
    }
}
