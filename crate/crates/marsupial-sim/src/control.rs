//! Carrier and passenger control laws.
//!
//! The carrier homes in on the target while the passenger rides it, and
//! holds position once the passenger has left (or hands control to a
//! pluggable planner). The passenger's input is scaled by the potential
//! gradient on both sides of its sign change, so the relative input
//! vanishes at the switching surface: separation happens with no input
//! discontinuity. An event-triggered baseline with exactly that
//! discontinuity is provided for contrast.

use crate::core::{AttachmentMode, ErrorTriple, Params, Vector, WorldState};
use crate::potential::eval_p;

/// Which side of the potential gradient's sign the passenger law is on.
/// `Attached` iff the gradient is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    AttachedBranch,
    SeparatedBranch,
}

/// One evaluation of the control laws at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub u_c: Vector,
    pub u_p: Vector,
    /// Potential gradient value that selected the branch.
    pub p_value: f64,
    pub branch: Branch,
}

/// What the carrier does after separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CarrierPolicy {
    /// Hold position; the carrier-target distance stays constant on its own.
    StopOnSeparation,
    /// Keep maneuvering under a plugged planner while the potential
    /// gradient keeps using the carrier-target distance recorded at the
    /// separation instant, preserving its shape.
    ContinueWithFrozenEtc,
}

/// Post-separation carrier motion under [`CarrierPolicy::ContinueWithFrozenEtc`].
///
/// The navigation guarantees of the overall scheme then rest on the
/// plugged planner; the default holds still.
pub trait CarrierPlanner {
    fn plan(&self, state: &WorldState, params: &Params) -> Vector;
}

/// Default planner: the carrier stays where separation left it.
#[derive(Debug, Clone, Copy, Default)]
pub struct StationaryPlanner;

impl CarrierPlanner for StationaryPlanner {
    fn plan(&self, state: &WorldState, _params: &Params) -> Vector {
        Vector::zeros(state.x_c.dim())
    }
}

/// Carrier input: approach the target while attached, hold afterwards.
///
/// The attachment decision is the latched mode, not a live distance test,
/// so one integration step cannot flip it back and forth.
pub fn carrier_input(errors: &ErrorTriple, mode: AttachmentMode, params: &Params) -> Vector {
    match mode {
        AttachmentMode::Attached => errors.e_tc.scale(params.k_c),
        AttachmentMode::Separated => Vector::zeros(errors.e_tc.dim()),
    }
}

/// Passenger input, branch-selected by the sign of the potential gradient.
///
/// `frozen_etc_norm`, when present, substitutes for the live carrier-target
/// distance inside the gradient (the carrier-continue option).
pub fn passenger_input(
    errors: &ErrorTriple,
    u_c: &Vector,
    params: &Params,
    frozen_etc_norm: Option<f64>,
) -> ControlOutput {
    let etc_norm = frozen_etc_norm.unwrap_or_else(|| errors.e_tc.norm());
    let p = eval_p(errors.e_pc.norm(), etc_norm, params);
    let (branch, u_p) = if p >= 0.0 {
        (Branch::AttachedBranch, errors.e_pc.scale(-p).add_scaled(1.0, u_c))
    } else {
        (Branch::SeparatedBranch, errors.e_pt.scale(p).add_scaled(1.0, u_c))
    };
    ControlOutput {
        u_c: u_c.clone(),
        u_p,
        p_value: p,
        branch,
    }
}

/// The carrier-passenger relative input `u_p - u_c`. Both branches scale
/// it by the potential gradient, so it is continuous across the switching
/// surface.
pub fn relative_input(out: &ControlOutput) -> Vector {
    &out.u_p - &out.u_c
}

/// Event-triggered baseline: ride until the carrier-target distance falls
/// to `b*c`, then release with an instant proportional go-to-target input.
///
/// At the trigger the relative input jumps from zero to
/// `k_nav * |e_pt| ~ k_nav * b*c`; the equilibrium-driven law exists to
/// avoid exactly this jump.
pub fn baseline_event_controller(
    errors: &ErrorTriple,
    mode: AttachmentMode,
    params: &Params,
    k_nav: f64,
) -> ControlOutput {
    let p = eval_p(errors.e_pc.norm(), errors.e_tc.norm(), params);
    match mode {
        AttachmentMode::Attached => {
            let u_c = errors.e_tc.scale(params.k_c);
            ControlOutput {
                u_p: u_c.clone(),
                u_c,
                p_value: p,
                branch: Branch::AttachedBranch,
            }
        }
        AttachmentMode::Separated => ControlOutput {
            u_c: Vector::zeros(errors.e_tc.dim()),
            u_p: errors.e_pt.scale(-k_nav),
            p_value: p,
            branch: Branch::SeparatedBranch,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::compute_errors;
    use crate::core::WorldState;

    fn params_ref() -> Params {
        Params::new(0.5, 1.0, 8.0, 1.0, 1.0, 9.0)
    }

    fn triple(e_pc: Vec<f64>, e_tc: Vec<f64>) -> ErrorTriple {
        let e_pc: Vector = e_pc.into();
        let e_tc: Vector = e_tc.into();
        let e_pt = &e_pc - &e_tc;
        ErrorTriple { e_pc, e_pt, e_tc }
    }

    #[test]
    fn carrier_pulls_toward_target_while_attached() {
        let e = triple(vec![0.0, 0.0], vec![16.0, 0.0]);
        let u = carrier_input(&e, AttachmentMode::Attached, &params_ref());
        assert_eq!(u, Vector(vec![8.0, 0.0]));
    }

    #[test]
    fn carrier_stops_when_separated() {
        let e = triple(vec![0.5, 0.0], vec![7.0, 0.0]);
        let u = carrier_input(&e, AttachmentMode::Separated, &params_ref());
        assert_eq!(u, Vector(vec![0.0, 0.0]));
    }

    #[test]
    fn carrier_idle_at_target() {
        let e = triple(vec![0.0, 0.0], vec![0.0, 0.0]);
        let u = carrier_input(&e, AttachmentMode::Attached, &params_ref());
        assert_eq!(u, Vector(vec![0.0, 0.0]));
    }

    #[test]
    fn passenger_rides_exactly_while_gradient_nonnegative() {
        // r = 0, s = 16: P = 16 >= 0, so u_p = u_c bit for bit.
        let e = triple(vec![0.0, 0.0], vec![16.0, 0.0]);
        let u_c = Vector(vec![8.0, 0.0]);
        let out = passenger_input(&e, &u_c, &params_ref(), None);
        assert_eq!(out.branch, Branch::AttachedBranch);
        assert!((out.p_value - 16.0).abs() < 1e-12);
        assert_eq!(out.u_p, u_c);
    }

    #[test]
    fn branches_agree_at_switching_surface() {
        // r = 0, s = b*c: P = 0 makes both branches return u_c exactly.
        let e = triple(vec![0.0, 0.0], vec![8.0, 0.0]);
        let u_c = Vector(vec![4.0, 0.0]);
        let out = passenger_input(&e, &u_c, &params_ref(), None);
        assert_eq!(out.p_value, 0.0);
        assert_eq!(out.u_p, u_c);
    }

    #[test]
    fn separated_branch_hand_value() {
        // r = 0.1, s = 7.9: P = (0.1-7.9)(1.1)(0.1 - 7.9/8 + 1) = -0.96525,
        // and u_p - u_c = P * e_pt = (7.52895, 0).
        let e = ErrorTriple {
            e_pc: Vector(vec![0.1, 0.0]),
            e_pt: Vector(vec![-7.8, 0.0]),
            e_tc: Vector(vec![7.9, 0.0]),
        };
        let u_c = Vector(vec![0.0, 0.0]);
        let out = passenger_input(&e, &u_c, &params_ref(), None);
        assert_eq!(out.branch, Branch::SeparatedBranch);
        assert!((out.p_value - (-0.96525)).abs() < 1e-12, "P = {}", out.p_value);
        let rel = relative_input(&out);
        assert!((rel.0[0] - 7.52895).abs() < 1e-9, "rel = {rel}");
        assert_eq!(rel.0[1], 0.0);
    }

    #[test]
    fn frozen_norm_replaces_live_distance() {
        let e = triple(vec![0.5, 0.0], vec![2.0, 0.0]);
        let live = passenger_input(&e, &Vector::zeros(2), &params_ref(), None);
        let frozen = passenger_input(&e, &Vector::zeros(2), &params_ref(), Some(7.996));
        assert_ne!(live.p_value, frozen.p_value);
        let expected = crate::potential::eval_p(0.5, 7.996, &params_ref());
        assert_eq!(frozen.p_value, expected);
    }

    #[test]
    fn relative_input_zero_when_attached_at_rest() {
        let e = triple(vec![0.0, 0.0], vec![16.0, 0.0]);
        let u_c = Vector(vec![8.0, 0.0]);
        let out = passenger_input(&e, &u_c, &params_ref(), None);
        assert_eq!(relative_input(&out), Vector(vec![0.0, 0.0]));
    }

    #[test]
    fn baseline_rides_before_trigger() {
        let e = triple(vec![0.0, 0.0], vec![16.0, 0.0]);
        let out = baseline_event_controller(&e, AttachmentMode::Attached, &params_ref(), 1.0);
        assert_eq!(relative_input(&out), Vector(vec![0.0, 0.0]));
        assert_eq!(out.u_c, Vector(vec![8.0, 0.0]));
    }

    #[test]
    fn baseline_jumps_at_trigger() {
        // At the trigger the passenger still sits on the carrier b*c = 8
        // away from the target, so the relative input jumps to ~8 m/s.
        let e = triple(vec![0.0, 0.0], vec![8.0, 0.0]);
        let out = baseline_event_controller(&e, AttachmentMode::Separated, &params_ref(), 1.0);
        let rel = relative_input(&out);
        assert!((rel.norm() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_idle_at_target() {
        let e = ErrorTriple {
            e_pc: Vector(vec![8.0, 0.0]),
            e_pt: Vector(vec![0.0, 0.0]),
            e_tc: Vector(vec![8.0, 0.0]),
        };
        let out = baseline_event_controller(&e, AttachmentMode::Separated, &params_ref(), 1.0);
        assert_eq!(out.u_p, Vector(vec![0.0, 0.0]));
    }

    #[test]
    fn stationary_planner_returns_zero() {
        let s = WorldState::initial(
            Vector(vec![1.0, 2.0]),
            Vector(vec![1.0, 2.0]),
            Vector(vec![9.0, 2.0]),
        );
        assert_eq!(
            StationaryPlanner.plan(&s, &params_ref()),
            Vector(vec![0.0, 0.0])
        );
        let _ = compute_errors(&s).unwrap();
    }
}
