//! Lift from the raw wire state to the fixed polynomial observable space.
//!
//! The lifted vector stacks the five generating coordinates (x, y, θ, f, φ)
//! followed by all fifteen degree-2 monomials over them, enumerated row-major
//! over the upper triangle:
//!
//! ```text
//! index  0..4   x, y, θ, f, φ
//! index  5..9   x², xy, xθ, xf, xφ
//! index 10..13  y², yθ, yf, yφ
//! index 14..16  θ², θf, θφ
//! index 17..18  f², fφ
//! index 19      φ²
//! ```
//!
//! This ordering is identified by [`LIFT_SPEC`] and embedded in every model
//! file so serialized matrices stay unambiguous.

use crate::types::{TwistAngle, WireState};
use nalgebra::SVector;

/// Number of generating coordinates (x, y, θ, f, φ).
pub const BASE_DIM: usize = 5;

/// Dimension of the lifted observable vector.
pub const LIFT_DIM: usize = 20;

/// Dimension of the control vector (Δx, Δy, Δθ).
pub const CONTROL_DIM: usize = 3;

/// Identifier of the monomial ordering above.
pub const LIFT_SPEC: &str = "xytf-phi-poly2-v1";

/// Generating index pairs (i, j), i ≤ j, for the monomial entries:
/// `g[BASE_DIM + k] = g[i] * g[j]` for `MONOMIAL_PAIRS[k] = (i, j)`.
pub const MONOMIAL_PAIRS: [(usize, usize); LIFT_DIM - BASE_DIM] = [
    (0, 0),
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
    (1, 1),
    (1, 2),
    (1, 3),
    (1, 4),
    (2, 2),
    (2, 3),
    (2, 4),
    (3, 3),
    (3, 4),
    (4, 4),
];

/// Lifted index of the monomial over base coordinates `i` and `j`.
pub fn monomial_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    assert!(hi < BASE_DIM, "base coordinate out of range");
    // rows 0..lo of the upper triangle hold (BASE_DIM − r) entries each
    let row_offset = lo * (2 * BASE_DIM - lo + 1) / 2;
    BASE_DIM + row_offset + (hi - lo)
}

/// The 20-dimensional observable vector g(s, φ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedState(pub SVector<f64, LIFT_DIM>);

impl LiftedState {
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn theta(&self) -> f64 {
        self.0[2]
    }

    pub fn force(&self) -> f64 {
        self.0[3]
    }

    pub fn phi(&self) -> f64 {
        self.0[4]
    }

    pub fn as_vector(&self) -> &SVector<f64, LIFT_DIM> {
        &self.0
    }
}

/// Lift a wire state and twist angle into the observable space.
///
/// Deterministic and total: the first five entries copy (s, φ) verbatim and
/// each monomial entry is the product of its two declared source entries.
pub fn lift(state: &WireState, twist: TwistAngle) -> LiftedState {
    let base = [state.x, state.y, state.theta, state.f, twist.0];
    let mut g = SVector::<f64, LIFT_DIM>::zeros();
    for (i, b) in base.iter().enumerate() {
        g[i] = *b;
    }
    for (k, (i, j)) in MONOMIAL_PAIRS.iter().enumerate() {
        g[BASE_DIM + k] = base[*i] * base[*j];
    }
    LiftedState(g)
}
