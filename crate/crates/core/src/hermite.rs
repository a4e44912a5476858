//! Orthonormal Hermite functions.
//!
//! `f_n(x) = (2^n sqrt(pi) n!)^(-1/2) H_n(x) exp(-x^2/2)` is evaluated with the
//! normalised three-term recurrence, seeded by `f_0 = pi^(-1/4) exp(-x^2/2)`.
//! Neither `H_n` nor `n!` is ever formed, so nothing overflows.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Order of a Hermite function, capped at [`HermiteOrder::MAX`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct HermiteOrder(u32);

impl HermiteOrder {
    pub const MAX: u32 = 60;

    pub fn new(n: u32) -> Result<Self> {
        if n > Self::MAX {
            return domain(format!(
                "Hermite order {n} exceeds the cap of {}",
                Self::MAX
            ));
        }
        Ok(Self(n))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// `+1` for even orders, `-1` for odd.
    #[inline]
    #[allow(clippy::manual_is_multiple_of)]
    pub fn parity(self) -> f64 {
        if self.0 % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl TryFrom<u32> for HermiteOrder {
    type Error = crate::Error;

    fn try_from(n: u32) -> Result<Self> {
        Self::new(n)
    }
}

impl From<HermiteOrder> for u32 {
    fn from(n: HermiteOrder) -> u32 {
        n.0
    }
}

impl std::fmt::Display for HermiteOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// pi^(-1/4)
const PI_M_QUARTER: f64 = 0.751_125_544_464_942_5;

/// Evaluates `f_n(x)`.
pub fn hermite_function(n: HermiteOrder, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("Hermite function argument must be finite, got {x}"));
    }
    Ok(eval(n.0, x))
}

/// Unchecked core of [`hermite_function`]; `x` must be finite.
#[inline]
pub(crate) fn eval(n: u32, x: f64) -> f64 {
    let f0 = PI_M_QUARTER * (-0.5 * x * x).exp();
    if n == 0 {
        return f0;
    }
    let mut prev = f0;
    let mut cur = std::f64::consts::SQRT_2 * x * f0;
    for j in 1..n {
        let j = j as f64;
        let next = x * (2.0 / (j + 1.0)).sqrt() * cur - (j / (j + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}
