//! Tight bounds: exact LP optima, transcribed closed forms, and symbolic
//! term sets obtained from the vertices of the dual polyhedron.

mod closed_form;
mod numeric;
mod symbolic;

pub use closed_form::{
    classic_terms, closed_form_classic, closed_form_single_level, closed_form_ternary, single_level_terms,
    ternary_terms, tight_closed_form,
};
pub use numeric::{
    certificate_verifies, numeric_bounds, numeric_bounds_with, FarkasCertificate, NumericOptions, Projection,
};
pub use symbolic::{
    derive_symbolic, symbol_names, render_term, restrict, term_sets_equal, AffineTerm, DeriveCaps, Direction,
    ObservableBasis, Provenance, SymbolicBoundSet, SymbolicBounds,
};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Estimand};
use crate::response::ResponseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Lp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub lower: BigRational,
    pub upper: BigRational,
    /// Response-type distributions attaining each endpoint (LP only).
    pub lower_certificate: Option<Vec<BigRational>>,
    pub upper_certificate: Option<Vec<BigRational>>,
    pub method: Method,
    pub levels: Vec<String>,
    pub estimand: Estimand,
    /// Set when the data were projected onto the model before bounding.
    pub projection: Option<Projection>,
}

impl BoundResult {
    pub fn lower_f64(&self) -> f64 {
        self.lower.to_f64().unwrap_or(f64::NAN)
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper.to_f64().unwrap_or(f64::NAN)
    }

    /// Both endpoints equal exactly.
    pub fn same_interval(&self, other: &BoundResult) -> bool {
        self.lower == other.lower && self.upper == other.upper
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &BoundResult) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Response(#[from] ResponseError),
    #[error("observed distribution is incompatible with the model: {}", .0.describe())]
    Infeasible(Box<FarkasCertificate>),
    #[error("expected a {expected}-level instrument, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("unknown exposure level `{0}`")]
    UnknownLevel(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("term is not expressible without level `{0}`")]
    NotRestrictable(String),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Rounds half-up (towards +∞ on ties) to `decimals` places.
pub fn round_half_up(r: &BigRational, decimals: u32) -> BigRational {
    let scale = num_traits::pow(BigInt::from(10), decimals as usize);
    let shifted = r * BigRational::from_integer(scale.clone()) + BigRational::new(1.into(), 2.into());
    BigRational::new(shifted.floor().to_integer(), scale)
}

/// Fixed-point text with half-up rounding.
pub fn format_fixed(r: &BigRational, decimals: u32) -> String {
    let rounded = round_half_up(r, decimals);
    let scale = num_traits::pow(BigInt::from(10), decimals as usize);
    let units = (rounded * BigRational::from_integer(scale.clone())).to_integer();
    let (int, frac) = units.abs().div_rem(&scale);
    let sign = if units.is_negative() { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = decimals as usize)
    }
}

/// `n/d` text for exact output.
pub fn rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(format_fixed(&q(-16, 100), 2), "-0.16");
        assert_eq!(format_fixed(&q(1, 8), 2), "0.13");
        assert_eq!(format_fixed(&q(-1, 8), 2), "-0.12");
        assert_eq!(format_fixed(&q(-1, 200), 2), "0.00");
        assert_eq!(format_fixed(&q(5, 1), 2), "5.00");
        assert_eq!(format_fixed(&q(-601, 1000), 2), "-0.60");
        assert_eq!(format_fixed(&q(7, 3), 0), "2");
    }

    #[test]
    fn rational_text() {
        assert_eq!(rational_string(&q(6, 4)), "3/2");
        assert_eq!(rational_string(&q(-4, 2)), "-2");
    }
}
