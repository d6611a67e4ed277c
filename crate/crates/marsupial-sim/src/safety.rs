//! Quadratic-program control-barrier-function filter for obstacle
//! scenarios.
//!
//! Each circular obstacle contributes a barrier `h = |x - center|^2 -
//! (radius + margin)^2` and a half-space constraint `grad_h . u >= -alpha*h`
//! on the input. The filter returns the input closest to the nominal one
//! satisfying every constraint, solved exactly by enumerating active sets
//! of size <= 2; scenarios are limited to a handful of obstacles of which
//! at most two are simultaneously active.

use crate::core::Vector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A static circular (spherical) obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vector,
    /// Radius in meters, > 0.
    pub radius: f64,
}

/// Filter parameters: linear class-K slope and an inflation margin added
/// to every radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbfConfig {
    /// Class-K slope, 1/s; larger admits faster boundary approach.
    pub alpha: f64,
    /// Extra clearance added to each obstacle radius, meters.
    pub margin: f64,
}

impl Default for CbfConfig {
    fn default() -> Self {
        CbfConfig {
            alpha: 1.0,
            margin: 0.0,
        }
    }
}

/// Errors from the safety filter.
#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("CBF quadratic program infeasible: {detail}")]
    Infeasible { detail: String },
}

/// Barrier value and gradient of one obstacle at position `x`.
///
/// `h > 0` outside the inflated circle, `h = 0` on it.
pub fn barrier(x: &Vector, obs: &Obstacle, margin: f64) -> (f64, Vector) {
    let diff = x - &obs.center;
    let rr = obs.radius + margin;
    let h = diff.dot(&diff) - rr * rr;
    (h, diff.scale(2.0))
}

/// Slack of constraint `g . u >= b` at input `u`; nonnegative = satisfied.
fn slack(g: &Vector, b: f64, u: &Vector) -> f64 {
    g.dot(u) - b
}

const FEAS_TOL: f64 = 1e-9;

/// Minimally modify `u_nom` so that every barrier constraint
/// `grad_h_i . u >= -alpha * h_i` holds.
///
/// Returns `u_nom` itself when all constraints are already satisfied.
/// Fails when no active set of size <= 2 yields a feasible point
/// (e.g. antipodal constraints from overlapping obstacles).
pub fn filter(
    u_nom: &Vector,
    x: &Vector,
    obstacles: &[Obstacle],
    cfg: &CbfConfig,
) -> Result<Vector, SafetyError> {
    if obstacles.is_empty() {
        return Ok(u_nom.clone());
    }

    let constraints: Vec<(Vector, f64)> = obstacles
        .iter()
        .map(|obs| {
            let (h, grad) = barrier(x, obs, cfg.margin);
            (grad, -cfg.alpha * h)
        })
        .collect();

    let feasible = |u: &Vector| {
        constraints
            .iter()
            .all(|(g, b)| slack(g, *b, u) >= -FEAS_TOL * (1.0 + b.abs()))
    };

    if feasible(u_nom) {
        return Ok(u_nom.clone());
    }

    let mut best: Option<(f64, Vector)> = None;
    let mut consider = |u: Vector| {
        let diff = &u - u_nom;
        let cost = diff.dot(&diff);
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, u));
        }
    };

    // Single active constraint: u = u_nom + lambda * g with lambda >= 0.
    for (g, b) in &constraints {
        let gg = g.dot(g);
        if gg <= f64::EPSILON {
            continue;
        }
        let lambda = (b - g.dot(u_nom)) / gg;
        if lambda >= 0.0 {
            let u = u_nom.add_scaled(lambda, g);
            if feasible(&u) {
                consider(u);
            }
        }
    }

    // Two active constraints: solve the 2x2 Gram system for the multipliers.
    for i in 0..constraints.len() {
        for j in (i + 1)..constraints.len() {
            let (gi, bi) = &constraints[i];
            let (gj, bj) = &constraints[j];
            let (a11, a12, a22) = (gi.dot(gi), gi.dot(gj), gj.dot(gj));
            let det = a11 * a22 - a12 * a12;
            if det.abs() <= 1e-12 * a11.max(a22).max(1.0).powi(2) {
                continue; // parallel gradients, no two-constraint vertex
            }
            let r1 = bi - gi.dot(u_nom);
            let r2 = bj - gj.dot(u_nom);
            let li = (a22 * r1 - a12 * r2) / det;
            let lj = (a11 * r2 - a12 * r1) / det;
            if li >= 0.0 && lj >= 0.0 {
                let u = u_nom.add_scaled(li, gi).add_scaled(lj, gj);
                if feasible(&u) {
                    consider(u);
                }
            }
        }
    }

    match best {
        Some((_, u)) => Ok(u),
        None => {
            let detail = constraints
                .iter()
                .enumerate()
                .filter(|(_, (g, b))| slack(g, *b, u_nom) < 0.0)
                .map(|(i, (g, b))| {
                    format!(
                        "obstacle {i}: required grad.u >= {b:.6e}, gradient norm {:.6e}",
                        g.norm()
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            Err(SafetyError::Infeasible { detail })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obs(cx: f64, cy: f64, r: f64) -> Obstacle {
        Obstacle {
            center: Vector(vec![cx, cy]),
            radius: r,
        }
    }

    #[test]
    fn barrier_zero_on_inflated_circle() {
        let o = obs(1.0, 2.0, 1.5);
        let x = Vector(vec![1.0 + 1.7, 2.0]);
        let (h, _) = barrier(&x, &o, 0.2);
        assert!(h.abs() < 1e-12, "h = {h}");
    }

    #[test]
    fn barrier_value_two_radii_out() {
        let r = 1.5;
        let o = obs(0.0, 0.0, r);
        let x = Vector(vec![2.0 * r, 0.0]);
        let (h, _) = barrier(&x, &o, 0.0);
        assert!((h - 3.0 * r * r).abs() < 1e-12);
    }

    #[test]
    fn barrier_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let o = obs(0.3, -1.2, 2.0);
        for _ in 0..50 {
            let x = Vector(vec![rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]);
            let (_, grad) = barrier(&x, &o, 0.1);
            let eps = 1e-5;
            for k in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp.0[k] += eps;
                xm.0[k] -= eps;
                let (hp, _) = barrier(&xp, &o, 0.1);
                let (hm, _) = barrier(&xm, &o, 0.1);
                let fd = (hp - hm) / (2.0 * eps);
                assert!((fd - grad.0[k]).abs() < 1e-6, "component {k}: {fd} vs {}", grad.0[k]);
            }
        }
    }

    #[test]
    fn inactive_constraint_passes_nominal_through() {
        let o = obs(0.0, 0.0, 1.0);
        let x = Vector(vec![10.0, 0.0]);
        let u_nom = Vector(vec![1.0, 0.5]); // pointing away anyway
        let u = filter(&u_nom, &x, &[o], &CbfConfig::default()).unwrap();
        assert_eq!(u, u_nom);
    }

    #[test]
    fn no_obstacles_is_identity() {
        let u_nom = Vector(vec![-3.0, 2.0]);
        let u = filter(&u_nom, &Vector(vec![0.0, 0.0]), &[], &CbfConfig::default()).unwrap();
        assert_eq!(u, u_nom);
    }

    #[test]
    fn single_constraint_closed_form() {
        // Head straight at a near obstacle; the filter must project onto
        // the constraint boundary: u = u_nom + lambda * g.
        let o = obs(2.0, 0.0, 1.0);
        let x = Vector(vec![0.5, 0.0]);
        let cfg = CbfConfig { alpha: 1.0, margin: 0.0 };
        let u_nom = Vector(vec![5.0, 1.0]);
        let (h, g) = barrier(&x, &o, 0.0);
        let lambda = ((-cfg.alpha * h) - g.dot(&u_nom)) / g.dot(&g);
        assert!(lambda > 0.0, "constraint should be active");
        let expected = u_nom.add_scaled(lambda, &g);
        let u = filter(&u_nom, &x, &[o], &cfg).unwrap();
        assert!((&u - &expected).norm() < 1e-12, "{u} vs {expected}");
    }

    #[test]
    fn single_obstacle_grid_oracle() {
        // Randomized single-obstacle cases: no feasible input on a dense
        // grid may beat the closed form.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cfg = CbfConfig { alpha: 1.0, margin: 0.0 };
        for case in 0..20 {
            let o = obs(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0));
            // position outside the obstacle
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let dist = o.radius + rng.gen_range(0.05..1.5);
            let x = Vector(vec![
                o.center.0[0] + dist * ang.cos(),
                o.center.0[1] + dist * ang.sin(),
            ]);
            let u_nom = Vector(vec![rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]);
            let u = filter(&u_nom, &x, &[o.clone()], &cfg).unwrap();
            let (h, g) = barrier(&x, &o, 0.0);
            let b = -cfg.alpha * h;
            assert!(slack(&g, b, &u) >= -1e-7, "case {case}: filtered input infeasible");

            let span = (&u - &u_nom).norm().max(1.0) * 2.0;
            let best_feasible = (0..200)
                .flat_map(|i| (0..200).map(move |j| (i, j)))
                .filter_map(|(i, j)| {
                    let cand = Vector(vec![
                        u_nom.0[0] - span + 2.0 * span * i as f64 / 199.0,
                        u_nom.0[1] - span + 2.0 * span * j as f64 / 199.0,
                    ]);
                    (slack(&g, b, &cand) >= 0.0).then(|| (&cand - &u_nom).norm())
                })
                .fold(f64::INFINITY, f64::min);
            let achieved = (&u - &u_nom).norm();
            assert!(
                achieved <= best_feasible + 1e-6,
                "case {case}: grid found {best_feasible}, filter gave {achieved}"
            );
        }
    }

    #[test]
    fn two_active_constraints_vertex() {
        // Squeezed between two obstacles; both constraints active, the
        // result must satisfy both and beat a dense grid.
        let o1 = obs(1.5, 1.2, 1.0);
        let o2 = obs(1.5, -1.2, 1.0);
        let x = Vector(vec![0.0, 0.0]);
        let cfg = CbfConfig { alpha: 0.5, margin: 0.0 };
        let u_nom = Vector(vec![8.0, 0.0]);
        let u = filter(&u_nom, &x, &[o1.clone(), o2.clone()], &cfg).unwrap();
        for o in [&o1, &o2] {
            let (h, g) = barrier(&x, o, 0.0);
            assert!(slack(&g, -cfg.alpha * h, &u) >= -1e-7);
        }
        let span = (&u - &u_nom).norm().max(1.0) * 2.0;
        let mut best = f64::INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let cand = Vector(vec![
                    u_nom.0[0] - span + 2.0 * span * i as f64 / 199.0,
                    u_nom.0[1] - span + 2.0 * span * j as f64 / 199.0,
                ]);
                let ok = [&o1, &o2].iter().all(|o| {
                    let (h, g) = barrier(&x, o, 0.0);
                    slack(&g, -cfg.alpha * h, &cand) >= 0.0
                });
                if ok {
                    best = best.min((&cand - &u_nom).norm());
                }
            }
        }
        assert!((&u - &u_nom).norm() <= best + 1e-6);
    }

    #[test]
    fn idempotent_on_filtered_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = CbfConfig { alpha: 1.0, margin: 0.1 };
        let obstacles = vec![obs(1.0, 0.5, 0.8), obs(-1.5, 1.0, 1.2)];
        for _ in 0..50 {
            let x = Vector(vec![rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]);
            if obstacles.iter().any(|o| barrier(&x, o, cfg.margin).0 <= 0.0) {
                continue;
            }
            let u_nom = Vector(vec![rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0)]);
            let once = filter(&u_nom, &x, &obstacles, &cfg).unwrap();
            let twice = filter(&once, &x, &obstacles, &cfg).unwrap();
            assert!((&once - &twice).norm() <= 1e-10);
        }
    }

    #[test]
    fn antipodal_constraints_are_infeasible() {
        // Deep inside one obstacle with a second one opposing it: the two
        // half-spaces face away from each other with a gap, no input works.
        let o1 = obs(1.0, 0.0, 2.0);
        let o2 = obs(-1.0, 0.0, 2.0);
        let x = Vector(vec![0.0, 0.0]);
        let cfg = CbfConfig { alpha: 1.0, margin: 0.0 };
        let err = filter(&Vector(vec![0.0, 0.0]), &x, &[o1, o2], &cfg).unwrap_err();
        assert!(matches!(err, SafetyError::Infeasible { .. }));
    }

    #[test]
    fn forward_invariance_under_euler_closed_loop() {
        // Drive a point through an obstacle field with the filter in the
        // loop; the barrier never dips below the discretization slack.
        let cfg = CbfConfig { alpha: 1.0, margin: 0.0 };
        let obstacles = vec![obs(2.5, 0.25, 1.0)];
        let goal = Vector(vec![6.0, 0.0]);
        let mut x = Vector(vec![0.0, 0.0]);
        let dt = 1e-3;
        let mut min_h = f64::INFINITY;
        for _ in 0..8000 {
            let u_nom = (&goal - &x).scale(1.5);
            let u = filter(&u_nom, &x, &obstacles, &cfg).unwrap();
            x = x.add_scaled(dt, &u);
            for o in &obstacles {
                min_h = min_h.min(barrier(&x, o, cfg.margin).0);
            }
        }
        assert!(min_h >= -1e-3, "min h = {min_h}");
        assert!((&goal - &x).norm() < 0.05, "did not reach goal: {x}");
    }
}
