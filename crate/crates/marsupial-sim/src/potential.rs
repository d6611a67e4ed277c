//! The cubic potential gradient driving the passenger controller, its
//! root/equilibrium structure, and grid sweeps for plotting.
//!
//! As a polynomial in the passenger-carrier distance `r` the gradient is
//! evaluated in factored form
//!
//! ```text
//! P(r, s) = k_p * (r - s) * (r + d) * (r - s/b + c)
//! ```
//!
//! with `s` the carrier-target distance, so its three roots
//! `{-d, s/b - c, s}` are exact by construction and the sign structure
//! cannot drift from rounding. The middle root `s/b - c` sinks to zero as
//! the carrier closes to distance `b*c` from the target; that bifurcation
//! is what releases the passenger.

use crate::core::Params;
use serde::Serialize;

/// Tolerance on the middle root below which the regime counts as the
/// bifurcation point; far below physical relevance.
pub const REGIME_TOL: f64 = 1e-12;

/// Position of the middle root relative to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Middle root strictly positive: resting on the carrier is attracting.
    ThreeDistinct,
    /// Middle root at zero: the bifurcation point, separation imminent.
    MidAtZero,
    /// Middle root negative: only the outer equilibrium attracts.
    MidNegative,
}

/// The three roots of the potential gradient in the passenger-carrier
/// distance, for a fixed carrier-target distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumSet {
    /// Always `-d`: negative, outside the physical domain.
    pub root_neg: f64,
    /// `s/b - c`: the boundary of the on-carrier attraction region.
    pub root_mid: f64,
    /// `s` itself: the passenger-at-target equilibrium.
    pub root_outer: f64,
    pub regime: Regime,
}

/// Evaluate the potential gradient at the given distances.
///
/// Total on all finite inputs; callers pass norms (nonnegative), but the
/// polynomial extends to the whole real line and tests exercise the
/// negative root directly.
pub fn eval_p(e_pc_norm: f64, e_tc_norm: f64, params: &Params) -> f64 {
    params.k_p
        * (e_pc_norm - e_tc_norm)
        * (e_pc_norm + params.d)
        * (e_pc_norm - e_tc_norm / params.b + params.c)
}

/// Read the three roots off the factored form and classify the regime.
pub fn equilibria(e_tc_norm: f64, params: &Params) -> EquilibriumSet {
    let root_mid = e_tc_norm / params.b - params.c;
    let regime = if root_mid.abs() <= REGIME_TOL {
        Regime::MidAtZero
    } else if root_mid < 0.0 {
        Regime::MidNegative
    } else {
        Regime::ThreeDistinct
    };
    EquilibriumSet {
        root_neg: -params.d,
        root_mid,
        root_outer: e_tc_norm,
        regime,
    }
}

/// Pointwise evaluation of the gradient over a grid of passenger-carrier
/// distances, for plot emission and sign-structure checks.
pub fn sweep_p(e_tc_norm: f64, grid: &[f64], params: &Params) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&r| (r, eval_p(r, e_tc_norm, params)))
        .collect()
}

/// Uniform grid of `n` samples on `[lo, hi]` (inclusive), the default
/// sweep domain.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two samples");
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + h * i as f64).collect()
}
