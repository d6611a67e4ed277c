//! Domain types shared by every other module: n-dimensional vectors,
//! control/shape parameters with their validity gate, position-error
//! triples, and the latched world state of one carrier-passenger pair.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Default tolerance for treating a passenger-carrier distance as zero.
///
/// The control law branches on exact zero distance, which floating point
/// cannot provide once states are integrated; 1e-9 m is far below any
/// physical scale in the scenarios yet well above accumulated round-off.
pub const DEFAULT_EPS_SEP: f64 = 1e-9;

/// An n-dimensional real coordinate vector (n >= 2).
///
/// Positions are meters, inputs meters/second. Dimension is scenario data,
/// fixed for the lifetime of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, k: f64) -> Vector {
        Vector(self.0.iter().map(|x| k * x).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Componentwise a + k*b, the single fused form used by the integrators.
    pub fn add_scaled(&self, k: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + k * b)
                .collect(),
        )
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.add_scaled(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.add_scaled(-1.0, rhs)
    }
}

impl Mul<f64> for &Vector {
    type Output = Vector;
    fn mul(self, k: f64) -> Vector {
        self.scale(k)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "]")
    }
}

/// Control gains and potential-shape parameters.
///
/// Validity requires `b > 1` and `b*c < eta` on top of strict positivity;
/// see [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Carrier approach gain, 1/s.
    pub k_c: f64,
    /// Potential gradient gain.
    pub k_p: f64,
    /// Root-separation ratio (dimensionless, > 1).
    pub b: f64,
    /// Inner-root offset, meters.
    pub c: f64,
    /// Shape parameter of the always-negative root, meters.
    pub d: f64,
    /// Lower bound on the initial carrier-target distance, meters.
    pub eta: f64,
    /// Tolerance for "passenger-carrier distance is zero" tests, meters.
    pub eps_sep: f64,
}

impl Params {
    pub fn new(k_c: f64, k_p: f64, b: f64, c: f64, d: f64, eta: f64) -> Self {
        Params {
            k_c,
            k_p,
            b,
            c,
            d,
            eta,
            eps_sep: DEFAULT_EPS_SEP,
        }
    }

    /// The product b*c: the carrier-target distance at which the middle
    /// root of the potential gradient reaches zero and separation begins.
    pub fn bc(&self) -> f64 {
        self.b * self.c
    }
}

/// The three pairwise position errors of one carrier/passenger/target triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTriple {
    /// Passenger minus carrier.
    pub e_pc: Vector,
    /// Passenger minus target.
    pub e_pt: Vector,
    /// Target minus carrier.
    pub e_tc: Vector,
}

/// Whether the passenger is still riding the carrier.
///
/// The mode latches: it transitions `Attached -> Separated` once and never
/// back, mirroring the fact that separation is permanent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttachmentMode {
    Attached,
    Separated,
}

impl fmt::Display for AttachmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttachmentMode::Attached => write!(f, "attached"),
            AttachmentMode::Separated => write!(f, "separated"),
        }
    }
}

/// Full instantaneous state of one simulated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub x_c: Vector,
    pub x_p: Vector,
    pub x_t: Vector,
    pub mode: AttachmentMode,
    /// Carrier-target distance recorded at the separation instant; present
    /// only when the carrier-continue policy is active after separation.
    pub frozen_etc_norm: Option<f64>,
    /// Simulation time, seconds.
    pub t: f64,
}

impl WorldState {
    /// Initial state: both robots at `x_c`, attached, t = 0.
    pub fn initial(x_c: Vector, x_p: Vector, x_t: Vector) -> Self {
        WorldState {
            x_c,
            x_p,
            x_t,
            mode: AttachmentMode::Attached,
            frozen_etc_norm: None,
            t: 0.0,
        }
    }
}

/// Configuration error raised when vectors of mixed dimension meet.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("dimension mismatch: x_c has {x_c}, x_p has {x_p}, x_t has {x_t} components")]
pub struct DimensionMismatch {
    pub x_c: usize,
    pub x_p: usize,
    pub x_t: usize,
}

/// Compute the pairwise position errors of a state.
///
/// The identity `e_pt = e_pc - e_tc` holds by construction up to one
/// rounding per component.
pub fn compute_errors(state: &WorldState) -> Result<ErrorTriple, DimensionMismatch> {
    let (nc, np, nt) = (state.x_c.dim(), state.x_p.dim(), state.x_t.dim());
    if nc != np || nc != nt {
        return Err(DimensionMismatch {
            x_c: nc,
            x_p: np,
            x_t: nt,
        });
    }
    Ok(ErrorTriple {
        e_pc: &state.x_p - &state.x_c,
        e_pt: &state.x_p - &state.x_t,
        e_tc: &state.x_t - &state.x_c,
    })
}

/// A named condition violated by a parameter set or initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// b must exceed 1 so the middle root stays below the outer root.
    BGreaterThanOne { b: f64 },
    /// b*c must stay below eta so the middle root starts positive.
    BcLessThanEta { bc: f64, eta: f64 },
    /// A gain or shape parameter must be strictly positive.
    NonPositiveParam { name: &'static str, value: f64 },
    /// A parameter must be finite.
    NonFiniteParam { name: &'static str, value: f64 },
    /// The carrier must start at least eta away from the target.
    InitialDistanceBelowEta { distance: f64, eta: f64 },
    /// Carrier and passenger must start at the same position.
    CoincidentStart { distance: f64 },
    /// State vectors must share one dimension.
    DimensionMismatch { x_c: usize, x_p: usize, x_t: usize },
    /// State vectors must be finite.
    NonFiniteState,
}

impl Violation {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::BGreaterThanOne { .. } => "params.b_gt_1",
            Violation::BcLessThanEta { .. } => "params.bc_lt_eta",
            Violation::NonPositiveParam { .. } => "params.positive",
            Violation::NonFiniteParam { .. } => "params.finite",
            Violation::InitialDistanceBelowEta { .. } => "initial.carrier_target_distance_ge_eta",
            Violation::CoincidentStart { .. } => "initial.coincident_start",
            Violation::DimensionMismatch { .. } => "initial.dimension_mismatch",
            Violation::NonFiniteState => "initial.finite",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BGreaterThanOne { b } => {
                write!(f, "{}: require b > 1, got b = {b}", self.code())
            }
            Violation::BcLessThanEta { bc, eta } => {
                write!(f, "{}: require b*c < eta, got b*c = {bc}, eta = {eta}", self.code())
            }
            Violation::NonPositiveParam { name, value } => {
                write!(f, "{}: require {name} > 0, got {value}", self.code())
            }
            Violation::NonFiniteParam { name, value } => {
                write!(f, "{}: require finite {name}, got {value}", self.code())
            }
            Violation::InitialDistanceBelowEta { distance, eta } => write!(
                f,
                "{}: require initial carrier-target distance >= eta, got {distance} < {eta}",
                self.code()
            ),
            Violation::CoincidentStart { distance } => write!(
                f,
                "{}: carrier and passenger must start together, got distance {distance}",
                self.code()
            ),
            Violation::DimensionMismatch { x_c, x_p, x_t } => write!(
                f,
                "{}: x_c has {x_c}, x_p has {x_p}, x_t has {x_t} components",
                self.code()
            ),
            Violation::NonFiniteState => write!(f, "{}: state contains non-finite values", self.code()),
        }
    }
}

/// Outcome of [`validate`]: either ok or every violated condition by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Validity {
    Ok,
    Violations(Vec<Violation>),
}

impl Validity {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validity::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Validity::Ok => &[],
            Validity::Violations(v) => v,
        }
    }
}

/// Check a parameter set and initial state against every admissibility
/// condition. Pure: never panics, reports all violations at once.
pub fn validate(params: &Params, initial: &WorldState) -> Validity {
    let mut v = Vec::new();

    for (name, value) in [
        ("k_c", params.k_c),
        ("k_p", params.k_p),
        ("b", params.b),
        ("c", params.c),
        ("d", params.d),
        ("eta", params.eta),
        ("eps_sep", params.eps_sep),
    ] {
        if !value.is_finite() {
            v.push(Violation::NonFiniteParam { name, value });
        } else if value <= 0.0 {
            v.push(Violation::NonPositiveParam { name, value });
        }
    }
    if !(params.b > 1.0) {
        v.push(Violation::BGreaterThanOne { b: params.b });
    }
    if !(params.bc() < params.eta) {
        v.push(Violation::BcLessThanEta {
            bc: params.bc(),
            eta: params.eta,
        });
    }

    match compute_errors(initial) {
        Err(e) => v.push(Violation::DimensionMismatch {
            x_c: e.x_c,
            x_p: e.x_p,
            x_t: e.x_t,
        }),
        Ok(errors) => {
            if !(initial.x_c.is_finite() && initial.x_p.is_finite() && initial.x_t.is_finite()) {
                v.push(Violation::NonFiniteState);
            } else {
                let etc0 = errors.e_tc.norm();
                if !(etc0 >= params.eta) {
                    v.push(Violation::InitialDistanceBelowEta {
                        distance: etc0,
                        eta: params.eta,
                    });
                }
                let epc0 = errors.e_pc.norm();
                if !(epc0 <= params.eps_sep) {
                    v.push(Violation::CoincidentStart { distance: epc0 });
                }
            }
        }
    }

    if v.is_empty() {
        Validity::Ok
    } else {
        Validity::Violations(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_ref(eta: f64) -> Params {
        Params::new(0.5, 1.0, 8.0, 1.0, 1.0, eta)
    }

    fn state(x_c: Vec<f64>, x_p: Vec<f64>, x_t: Vec<f64>) -> WorldState {
        WorldState::initial(x_c.into(), x_p.into(), x_t.into())
    }

    #[test]
    fn errors_coincident_start() {
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![5.0, 0.0]);
        let e = compute_errors(&s).unwrap();
        assert_eq!(e.e_pc, Vector(vec![0.0, 0.0]));
        assert_eq!(e.e_pt, Vector(vec![-5.0, 0.0]));
        assert_eq!(e.e_tc, Vector(vec![5.0, 0.0]));
    }

    #[test]
    fn errors_passenger_at_target() {
        let s = state(vec![1.0, 2.0], vec![3.0, -4.0], vec![3.0, -4.0]);
        let e = compute_errors(&s).unwrap();
        assert_eq!(e.e_pt, Vector(vec![0.0, 0.0]));
    }

    #[test]
    fn errors_dimension_mismatch() {
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0, 0.0], vec![5.0, 0.0]);
        let err = compute_errors(&s).unwrap_err();
        assert_eq!(err, DimensionMismatch { x_c: 2, x_p: 3, x_t: 2 });
    }

    #[test]
    fn validate_reference_setup() {
        // b*c = 8 < eta = 9 and the initial distance 26.56 >= eta.
        let p = params_ref(9.0);
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![26.560935381892378, 0.0]);
        assert!(validate(&p, &s).is_ok());
    }

    #[test]
    fn validate_rejects_b_at_one() {
        let mut p = params_ref(9.0);
        p.b = 1.0;
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![26.0, 0.0]);
        let v = validate(&p, &s);
        assert!(v
            .violations()
            .iter()
            .any(|x| x.code() == "params.b_gt_1"));
    }

    #[test]
    fn validate_rejects_bc_not_below_eta() {
        // b = 3, c = 2 gives b*c = 6 >= eta = 5.
        let mut p = Params::new(0.5, 1.0, 3.0, 2.0, 1.0, 5.0);
        p.eps_sep = DEFAULT_EPS_SEP;
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![26.0, 0.0]);
        let v = validate(&p, &s);
        assert!(v
            .violations()
            .iter()
            .any(|x| x.code() == "params.bc_lt_eta"));
    }

    #[test]
    fn validate_rejects_separated_start() {
        let p = params_ref(9.0);
        let s = state(vec![0.0, 0.0], vec![0.1, 0.0], vec![26.0, 0.0]);
        let v = validate(&p, &s);
        assert!(v
            .violations()
            .iter()
            .any(|x| x.code() == "initial.coincident_start"));
    }

    #[test]
    fn validate_rejects_close_start() {
        let p = params_ref(9.0);
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![8.5, 0.0]);
        let v = validate(&p, &s);
        assert!(v
            .violations()
            .iter()
            .any(|x| x.code() == "initial.carrier_target_distance_ge_eta"));
    }

    #[test]
    fn validate_is_pure() {
        let p = params_ref(9.0);
        let s = state(vec![0.0, 0.0], vec![0.0, 0.0], vec![26.0, 0.0]);
        assert_eq!(validate(&p, &s), validate(&p, &s));
    }

    #[test]
    fn validate_collects_all_violations() {
        let mut p = Params::new(-0.5, 1.0, 0.5, 2.0, 1.0, 0.5);
        p.eps_sep = DEFAULT_EPS_SEP;
        let s = state(vec![0.0, 0.0], vec![1.0, 0.0], vec![0.2, 0.0]);
        let v = validate(&p, &s);
        let codes: Vec<_> = v.violations().iter().map(|x| x.code()).collect();
        assert!(codes.contains(&"params.positive"));
        assert!(codes.contains(&"params.b_gt_1"));
        assert!(codes.contains(&"params.bc_lt_eta"));
        assert!(codes.contains(&"initial.coincident_start"));
    }
}
