//! Quantitative pass/fail verification of the separation, navigation,
//! avoidance, Lyapunov-monotonicity, and input-smoothness properties of a
//! recorded trajectory.
//!
//! The checks operationalize asymptotic statements as thresholds, all
//! collected in [`Thresholds`] so nothing is scattered:
//!
//! - separation: the passenger-carrier distance is zero (bit for bit in
//!   this implementation) up to the separation instant and demonstrably
//!   nonzero afterwards;
//! - navigation: the passenger-target distance is nonincreasing after
//!   separation and ends below [`Thresholds::p2_final_dist`];
//! - avoidance: the carrier-target distance never reaches zero;
//! - Lyapunov: the squared error norms decrease per step within slack;
//! - smoothness: the relative input changes by at most
//!   [`Thresholds::smooth_jump`] across the separation event, versus the
//!   order-one jump of the event-triggered baseline.

use crate::core::{AttachmentMode, Params, Vector};
use crate::sim::{Trajectory, TrajectoryRow};
use serde::Serialize;

/// Every tolerance used by the property checks, in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Distance below which the passenger counts as riding, meters.
    pub eps_sep: f64,
    /// Final passenger-target distance demanded of a run, meters.
    pub p2_final_dist: f64,
    /// Slack allowed on per-step monotone decrease, meters.
    pub monotone_slack: f64,
    /// Slack allowed on per-step Lyapunov decrease.
    pub lyapunov_slack: f64,
    /// Largest admissible relative-input jump across separation, m/s.
    pub smooth_jump: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            eps_sep: crate::core::DEFAULT_EPS_SEP,
            p2_final_dist: 0.05,
            monotone_slack: 1e-9,
            lyapunov_slack: 1e-9,
            smooth_jump: 0.01,
        }
    }
}

/// Separation evidence: riding exactly until `t_sep`, demonstrably gone
/// afterwards.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1Report {
    pub t_sep: Option<f64>,
    pub pre_t_max_epc: f64,
    pub post_t_max_epc: f64,
    pub pass: bool,
}

/// Navigation evidence: monotone approach and final closeness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P2Report {
    pub final_ept: f64,
    pub monotone_after_t: bool,
    pub pass: bool,
}

/// Avoidance evidence: the carrier keeps its distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P3Report {
    pub min_etc: f64,
    pub pass: bool,
}

/// Largest single-step increases of the three squared-error-norm series,
/// each over the window where the theory predicts decrease.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub v1_max_increase: f64,
    pub v2_max_increase_pre_t: f64,
    pub v3_max_increase_post_t: f64,
}

/// Relative-input jump metrics of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessReport {
    /// Largest per-step change of `u_p - u_c` anywhere in the run.
    pub max_rel_input_jump: f64,
    /// Per-step change of `u_p - u_c` across the separation event.
    pub jump_at_separation: Option<f64>,
    /// Filled by [`smoothness_report`] when comparing against a baseline.
    pub baseline_jump: Option<f64>,
}

/// Full verification report of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub p1: P1Report,
    pub p2: P2Report,
    pub p3: P3Report,
    pub lyapunov: LyapunovReport,
    pub smoothness: SmoothnessReport,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.p1.pass && self.p2.pass && self.p3.pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Side-by-side smoothness comparison of two runs of the same scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessComparison {
    pub equilibrium_jump_at_separation: Option<f64>,
    pub baseline_jump_at_separation: Option<f64>,
    pub equilibrium_max_jump: f64,
    pub baseline_max_jump: f64,
    /// baseline jump / equilibrium jump at the separation events.
    pub jump_ratio: Option<f64>,
}

/// Best estimate of the separation instant: the localized event when the
/// run recorded one, otherwise interpolated from the carrier-target
/// distance crossing the threshold between the last attached and first
/// separated rows.
pub fn separation_time(traj: &Trajectory, params: &Params) -> Option<f64> {
    if traj.separation_time.is_some() {
        return traj.separation_time;
    }
    let i = traj
        .rows
        .iter()
        .position(|r| r.mode == AttachmentMode::Separated)?;
    if i == 0 {
        return Some(traj.rows[0].t);
    }
    let (prev, cur) = (&traj.rows[i - 1], &traj.rows[i]);
    let bc = params.bc();
    let (g0, g1) = (prev.e_tc - bc, cur.e_tc - bc);
    let frac = if g0 - g1 > 0.0 {
        (g0 / (g0 - g1)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some(prev.t + frac * (cur.t - prev.t))
}

fn rel_input(row: &TrajectoryRow) -> Vector {
    &row.u_p - &row.u_c
}

fn per_step_jumps(rows: &[TrajectoryRow]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| (&rel_input(&w[1]) - &rel_input(&w[0])).norm())
        .collect()
}

fn max_increase<I: Iterator<Item = f64>>(series: I) -> f64 {
    let vals: Vec<f64> = series.collect();
    vals.windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
        .max(0.0)
}

/// The three squared-error-norm series, one value per row.
pub struct LyapunovSeries {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v3: Vec<f64>,
}

pub fn lyapunov_series(traj: &Trajectory) -> LyapunovSeries {
    LyapunovSeries {
        v1: traj.rows.iter().map(|r| 0.5 * r.e_tc * r.e_tc).collect(),
        v2: traj.rows.iter().map(|r| 0.5 * r.e_pc * r.e_pc).collect(),
        v3: traj.rows.iter().map(|r| 0.5 * r.e_pt * r.e_pt).collect(),
    }
}

/// Run every property check on a trajectory.
pub fn check_properties(
    traj: &Trajectory,
    params: &Params,
    thresholds: &Thresholds,
) -> PropertyReport {
    let t_sep = separation_time(traj, params);
    let rows = &traj.rows;

    let (pre, post): (Vec<&TrajectoryRow>, Vec<&TrajectoryRow>) = match t_sep {
        Some(t) => rows.iter().partition(|r| r.t <= t),
        None => (rows.iter().collect(), Vec::new()),
    };

    let pre_t_max_epc = pre.iter().map(|r| r.e_pc).fold(0.0, f64::max);
    let post_t_max_epc = post.iter().map(|r| r.e_pc).fold(0.0, f64::max);
    let p1 = P1Report {
        t_sep,
        pre_t_max_epc,
        post_t_max_epc,
        pass: t_sep.is_some()
            && pre_t_max_epc <= thresholds.eps_sep
            && post_t_max_epc > thresholds.eps_sep,
    };

    let final_ept = rows.last().map(|r| r.e_pt).unwrap_or(f64::INFINITY);
    let monotone_after_t = post
        .windows(2)
        .all(|w| w[1].e_pt <= w[0].e_pt + thresholds.monotone_slack);
    let p2 = P2Report {
        final_ept,
        monotone_after_t,
        pass: t_sep.is_some() && final_ept <= thresholds.p2_final_dist && monotone_after_t,
    };

    let min_etc = rows.iter().map(|r| r.e_tc).fold(f64::INFINITY, f64::min);
    let p3 = P3Report {
        min_etc,
        pass: min_etc > 0.0,
    };

    let series = lyapunov_series(traj);
    let in_pre = |i: &usize| t_sep.map_or(true, |t| rows[*i].t <= t);
    let in_post = |i: &usize| t_sep.map_or(false, |t| rows[*i].t > t);
    let idx = 0..rows.len();
    let lyapunov = LyapunovReport {
        v1_max_increase: max_increase(idx.clone().filter(in_pre).map(|i| series.v1[i])),
        v2_max_increase_pre_t: max_increase(idx.clone().filter(in_pre).map(|i| series.v2[i])),
        v3_max_increase_post_t: max_increase(idx.clone().filter(in_post).map(|i| series.v3[i])),
    };

    let jumps = per_step_jumps(rows);
    let max_rel_input_jump = jumps.iter().copied().fold(0.0, f64::max);
    let sep_idx = rows.iter().position(|r| r.mode == AttachmentMode::Separated);
    let jump_at_separation = sep_idx.and_then(|i| {
        if i == 0 {
            None
        } else {
            Some(jumps[i - 1])
        }
    });
    let smoothness = SmoothnessReport {
        max_rel_input_jump,
        jump_at_separation,
        baseline_jump: None,
    };

    PropertyReport {
        p1,
        p2,
        p3,
        lyapunov,
        smoothness,
    }
}

/// Compare the relative-input jumps of an equilibrium-driven run against
/// an event-triggered baseline run of the same scenario.
pub fn smoothness_report(
    traj_equilibrium: &Trajectory,
    traj_baseline: &Trajectory,
) -> SmoothnessComparison {
    let jump_at = |traj: &Trajectory| -> Option<f64> {
        let i = traj
            .rows
            .iter()
            .position(|r| r.mode == AttachmentMode::Separated)?;
        (i > 0).then(|| {
            (&rel_input(&traj.rows[i]) - &rel_input(&traj.rows[i - 1])).norm()
        })
    };
    let max_jump = |traj: &Trajectory| {
        per_step_jumps(&traj.rows)
            .into_iter()
            .fold(0.0, f64::max)
    };
    let eq = jump_at(traj_equilibrium);
    let base = jump_at(traj_baseline);
    let jump_ratio = match (eq, base) {
        (Some(e), Some(b)) if e > 0.0 => Some(b / e),
        _ => None,
    };
    SmoothnessComparison {
        equilibrium_jump_at_separation: eq,
        baseline_jump_at_separation: base,
        equilibrium_max_jump: max_jump(traj_equilibrium),
        baseline_max_jump: max_jump(traj_baseline),
        jump_ratio,
    }
}

/// Compare the central finite difference of the passenger-carrier error
/// against the branch-selected analytic error dynamics, skipping rows
/// whose neighbors straddle the separation event. Returns the largest
/// residual norm; meaningful for unfiltered (no obstacle) runs.
pub fn dynamics_residual(traj: &Trajectory, x_t: &Vector) -> f64 {
    let rows = &traj.rows;
    let dt = traj.dt;
    let mut max_res: f64 = 0.0;
    for k in 1..rows.len().saturating_sub(1) {
        let (prev, cur, next) = (&rows[k - 1], &rows[k], &rows[k + 1]);
        if prev.mode != next.mode {
            continue; // straddles the switching step
        }
        let e_prev = &prev.x_p - &prev.x_c;
        let e_next = &next.x_p - &next.x_c;
        let fd = (&e_next - &e_prev).scale(1.0 / (2.0 * dt));
        let e_pc = &cur.x_p - &cur.x_c;
        let rhs = if cur.p_value >= 0.0 {
            e_pc.scale(-cur.p_value)
        } else {
            let e_pt = &cur.x_p - x_t;
            e_pt.scale(cur.p_value)
        };
        max_res = max_res.max((&fd - &rhs).norm());
    }
    max_res
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::WorldState;
    use crate::sim::{run, ControllerKind, SimConfig};

    fn params_ref() -> Params {
        Params::new(0.5, 1.0, 8.0, 1.0, 1.0, 9.0)
    }

    const ETC0_REF: f64 = 26.560935381892378;

    fn initial_2d() -> WorldState {
        WorldState::initial(
            Vector(vec![0.0, 0.0]),
            Vector(vec![0.0, 0.0]),
            Vector(vec![ETC0_REF, 0.0]),
        )
    }

    fn reference_run(t_end: f64) -> Trajectory {
        run(&initial_2d(), &params_ref(), &SimConfig::new(1e-3, t_end)).unwrap()
    }

    #[test]
    fn reference_run_passes_all_properties() {
        let traj = reference_run(30.0);
        let report = check_properties(&traj, &params_ref(), &Thresholds::default());
        assert!(report.p1.pass, "{report:?}");
        assert!(report.p2.pass, "p2: {:?}", report.p2);
        assert!(report.p3.pass);
        let t = report.p1.t_sep.unwrap();
        assert!((t - 2.4).abs() <= 0.01, "t_sep = {t}");
        assert_eq!(report.p1.pre_t_max_epc, 0.0);
    }

    #[test]
    fn truncated_run_fails_p1_without_separation() {
        let traj = reference_run(1.0);
        let report = check_properties(&traj, &params_ref(), &Thresholds::default());
        assert!(report.p1.t_sep.is_none());
        assert!(!report.p1.pass);
    }

    #[test]
    fn lyapunov_series_shapes() {
        let traj = reference_run(6.0);
        let series = lyapunov_series(&traj);
        let t_sep = separation_time(&traj, &params_ref()).unwrap();
        // Riding: the passenger-carrier energy is identically zero.
        for (i, row) in traj.rows.iter().enumerate() {
            if row.t <= t_sep {
                assert_eq!(series.v2[i], 0.0);
            }
        }
        // Approach: strictly decreasing carrier-target energy, constant after.
        let report = check_properties(&traj, &params_ref(), &Thresholds::default());
        assert!(report.lyapunov.v1_max_increase <= 1e-9);
        assert!(report.lyapunov.v3_max_increase_post_t <= 1e-9);
    }

    #[test]
    fn smoothness_against_baseline() {
        let params = params_ref();
        let cfg = SimConfig::new(1e-3, 30.0);
        let eq = run(&initial_2d(), &params, &cfg).unwrap();
        let mut cfg_b = cfg.clone();
        cfg_b.controller = ControllerKind::EventBaseline { k_nav: 1.0 };
        let base = run(&initial_2d(), &params, &cfg_b).unwrap();

        let cmp = smoothness_report(&eq, &base);
        let eq_jump = cmp.equilibrium_jump_at_separation.unwrap();
        let base_jump = cmp.baseline_jump_at_separation.unwrap();
        assert!(eq_jump <= 0.01, "equilibrium jump {eq_jump}");
        assert!(base_jump >= 1.0, "baseline jump {base_jump}");
        assert!((base_jump - 8.0).abs() < 0.5, "baseline jump {base_jump}");
        assert!(cmp.jump_ratio.unwrap() >= 100.0);
    }

    #[test]
    fn identical_trajectories_have_zero_differences() {
        let traj = reference_run(3.0);
        let cmp = smoothness_report(&traj, &traj);
        assert_eq!(
            cmp.equilibrium_jump_at_separation,
            cmp.baseline_jump_at_separation
        );
        assert_eq!(cmp.equilibrium_max_jump, cmp.baseline_max_jump);
    }

    #[test]
    fn report_is_deterministic() {
        let traj = reference_run(4.0);
        let a = check_properties(&traj, &params_ref(), &Thresholds::default());
        let b = check_properties(&traj, &params_ref(), &Thresholds::default());
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn residual_zero_on_stationary_segment() {
        // An attached-only run has the passenger-carrier error pinned at
        // zero: both the finite difference and the analytic dynamics vanish.
        let traj = reference_run(1.0);
        let res = dynamics_residual(&traj, &Vector(vec![ETC0_REF, 0.0]));
        assert_eq!(res, 0.0);
    }

    #[test]
    fn residual_shrinks_fourfold_with_half_step() {
        let params = params_ref();
        let x_t = Vector(vec![ETC0_REF, 0.0]);
        let coarse = run(&initial_2d(), &params, &SimConfig::new(1e-3, 5.0)).unwrap();
        let fine = run(&initial_2d(), &params, &SimConfig::new(5e-4, 5.0)).unwrap();
        let r_coarse = dynamics_residual(&coarse, &x_t);
        let r_fine = dynamics_residual(&fine, &x_t);
        let ratio = r_coarse / r_fine;
        assert!(
            (2.5..6.0).contains(&ratio),
            "expected ~4x shrink, got {ratio} ({r_coarse} -> {r_fine})"
        );
    }

    #[test]
    fn separation_time_recoverable_from_rows_alone() {
        let mut traj = reference_run(4.0);
        let precise = traj.separation_time.take().unwrap();
        let derived = separation_time(&traj, &params_ref()).unwrap();
        assert!(
            (derived - precise).abs() <= traj.dt,
            "derived {derived} vs precise {precise}"
        );
    }
}
