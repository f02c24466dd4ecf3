//! Unconstrained time/energy-optimal reference for a CAV entering the control zone.
//!
//! With no constraint active, the optimal control is affine in time, so speed
//! and position are quadratic and cubic. The five unknowns (four polynomial
//! coefficients and the merge time) satisfy
//!
//! ```text
//!   a t0^2 / 2 + b t0 + c                 = v0
//!   a t0^3 / 6 + b t0^2 / 2 + c t0 + d    = 0
//!   a tm^3 / 6 + b tm^2 / 2 + c tm + d    = L
//!   a tm + b                              = 0
//!   beta + a^2 tm^2 / 2 + a b tm + a c    = 0
//! ```
//!
//! The system is solved by damped Newton in time shifted to the entry
//! instant (an affine change of variables, so the Newton iterates are the
//! same but the Jacobian is far better conditioned for large `t0`).

use nalgebra::{SMatrix, SVector};

use crate::error::ReferenceError;

type Vec5 = SVector<f64, 5>;
type Mat5 = SMatrix<f64, 5, 5>;

/// Below this actual position the feedback ratio `x*/x` is taken to be one.
pub const RATIO_FLOOR_X: f64 = 0.1;
pub const RATIO_MIN: f64 = 0.5;
pub const RATIO_MAX: f64 = 2.0;

/// Cubic reference `x*(t) = a t^3/6 + b t^2/2 + c t + d` on `[t0, tm]`,
/// in absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t0: f64,
    pub tm: f64,
    // same polynomial in tau = t - t0
    local: [f64; 4],
}

/// Reference value at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub u: f64,
    pub v: f64,
    pub x: f64,
}

impl ReferenceTrajectory {
    /// Builds a trajectory from coefficients expressed in `tau = t - t0`.
    fn from_local(local: [f64; 4], t0: f64, duration: f64) -> Self {
        let [la, lb, lc, ld] = local;
        let a = la;
        let b = lb - la * t0;
        let c = 0.5 * la * t0 * t0 - lb * t0 + lc;
        let d = -la * t0.powi(3) / 6.0 + 0.5 * lb * t0 * t0 - lc * t0 + ld;
        Self {
            a,
            b,
            c,
            d,
            t0,
            tm: t0 + duration,
            local,
        }
    }

    /// Constant-speed reference, the exact optimum when `beta = 0`.
    pub fn cruise(v0: f64, t0: f64, zone_length: f64) -> Self {
        Self::from_local([0.0, 0.0, v0, 0.0], t0, zone_length / v0)
    }

    pub fn duration(&self) -> f64 {
        self.tm - self.t0
    }

    /// Evaluates `(u*, v*, x*)` at `t`, holding the merge-time values after `tm`.
    pub fn eval(&self, t: f64) -> ReferencePoint {
        let tau = (t - self.t0).clamp(0.0, self.duration());
        let [a, b, c, d] = self.local;
        ReferencePoint {
            u: a * tau + b,
            v: 0.5 * a * tau * tau + b * tau + c,
            x: a * tau.powi(3) / 6.0 + 0.5 * b * tau * tau + c * tau + d,
        }
    }
}

/// Convenience free function over [`ReferenceTrajectory::eval`].
pub fn eval_reference(traj: &ReferenceTrajectory, t: f64) -> ReferencePoint {
    traj.eval(t)
}

/// Feedback-corrected reference `(u_ref, v_ref)`, both scaled by the position
/// ratio `x*(t) / x`.
pub fn reference_control(traj: &ReferenceTrajectory, x_actual: f64, t: f64) -> (f64, f64) {
    let p = traj.eval(t);
    let ratio = feedback_ratio(p.x, x_actual);
    (ratio * p.u, ratio * p.v)
}

/// Like [`reference_control`], but with the acceleration replaced by its
/// average over `[t, t + dt]`, the constant control that reproduces the
/// reference speed change across one step.
pub fn reference_control_step(
    traj: &ReferenceTrajectory,
    x_actual: f64,
    t: f64,
    dt: f64,
) -> (f64, f64) {
    let now = traj.eval(t);
    let next = traj.eval(t + dt);
    let ratio = feedback_ratio(now.x, x_actual);
    (ratio * (next.v - now.v) / dt, ratio * now.v)
}

/// `x*/x`, defined as one near the origin (where both vanish) and clamped.
pub fn feedback_ratio(x_ref: f64, x_actual: f64) -> f64 {
    if x_actual < RATIO_FLOOR_X {
        1.0
    } else {
        (x_ref / x_actual).clamp(RATIO_MIN, RATIO_MAX)
    }
}

/// Entry conditions of one reference problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceProblem {
    pub v0: f64,
    pub t0: f64,
    pub zone_length: f64,
    pub beta: f64,
}

impl ReferenceProblem {
    /// Raw residuals of the five optimality equations, in absolute time.
    pub fn residuals(&self, r: &ReferenceTrajectory) -> [f64; 5] {
        self.terms(r).map(|t| t.iter().sum())
    }

    /// Residuals divided by the magnitude of the terms that make them up, so
    /// cancellation at large `t0` is measured relative to the values involved.
    pub fn scaled_residuals(&self, r: &ReferenceTrajectory) -> [f64; 5] {
        self.terms(r).map(|t| {
            let scale: f64 = t.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            t.iter().sum::<f64>() / scale
        })
    }

    pub fn max_scaled_residual(&self, r: &ReferenceTrajectory) -> f64 {
        self.scaled_residuals(r)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    fn terms(&self, r: &ReferenceTrajectory) -> [[f64; 5]; 5] {
        let (a, b, c, d) = (r.a, r.b, r.c, r.d);
        let (t0, tm) = (r.t0, r.tm);
        [
            [0.5 * a * t0 * t0, b * t0, c, -self.v0, 0.0],
            [a * t0.powi(3) / 6.0, 0.5 * b * t0 * t0, c * t0, d, 0.0],
            [a * tm.powi(3) / 6.0, 0.5 * b * tm * tm, c * tm, d, -self.zone_length],
            [a * tm, b, 0.0, 0.0, 0.0],
            [self.beta, 0.5 * a * a * tm * tm, a * b * tm, a * c, 0.0],
        ]
    }
}

/// Newton settings and the speed range used to seed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSolver {
    pub v_min: f64,
    pub v_max: f64,
    pub max_iter: usize,
    /// Convergence threshold on the scaled residual.
    pub tol: f64,
}

impl Default for ReferenceSolver {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 30.0,
            max_iter: 50,
            tol: 1e-13,
        }
    }
}

/// Accept a solve when its scaled residual is at most this.
pub const ACCEPT_RESIDUAL: f64 = 1e-8;

/// Solves the reference problem with default solver settings.
pub fn solve_reference(
    v0: f64,
    t0: f64,
    zone_length: f64,
    beta: f64,
) -> Result<ReferenceTrajectory, ReferenceError> {
    ReferenceSolver::default().solve(&ReferenceProblem {
        v0,
        t0,
        zone_length,
        beta,
    })
}

impl ReferenceSolver {
    pub fn solve(&self, p: &ReferenceProblem) -> Result<ReferenceTrajectory, ReferenceError> {
        if !(p.v0 > 0.0 && p.v0.is_finite()) {
            return Err(ReferenceError::InvalidInput(format!("v0 = {} must be > 0", p.v0)));
        }
        if !(p.zone_length > 0.0) {
            return Err(ReferenceError::InvalidInput("zone length must be > 0".into()));
        }
        if !(p.beta >= 0.0) || !p.t0.is_finite() {
            return Err(ReferenceError::InvalidInput("beta must be >= 0, t0 finite".into()));
        }

        let mut best = f64::INFINITY;
        for duration in self.initial_durations(p) {
            match self.newton(p, duration) {
                Ok(traj) => return Ok(traj),
                Err(r) => best = best.min(r),
            }
        }
        Err(ReferenceError::NoConvergence { residual: best })
    }

    /// Warm start first, then a spread of durations between the fastest and
    /// slowest plausible crossings.
    fn initial_durations(&self, p: &ReferenceProblem) -> Vec<f64> {
        let l = p.zone_length;
        let mut out = vec![2.0 * l / (p.v0 + self.v_max.max(p.v0))];
        let fast = l / self.v_max.max(p.v0);
        let slow = l / self.v_min.max(1.0);
        let n = 12;
        for k in 0..n {
            let s = k as f64 / (n - 1) as f64;
            out.push(fast * (slow / fast).powf(s));
        }
        out.push(0.5 * l / p.v0);
        out.push(0.9 * l / p.v0);
        out
    }

    /// Damped Newton in entry-relative time, started from the cubic that meets
    /// all four boundary conditions for the guessed duration.
    /// Returns the best scaled residual on failure.
    fn newton(&self, p: &ReferenceProblem, duration: f64) -> Result<ReferenceTrajectory, f64> {
        let a0 = 3.0 * (p.v0 * duration - p.zone_length) / duration.powi(3);
        let mut y = Vec5::new(a0, -a0 * duration, p.v0, 0.0, duration);
        let mut fy = local_residuals(p, &y);
        let mut best = merit(p, &y, &fy);

        for _ in 0..self.max_iter {
            if best.sqrt() <= self.tol {
                break;
            }
            let jac = local_jacobian(&y);
            let Some(step) = jac.lu().solve(&(-fy)) else {
                return Err(best.sqrt());
            };

            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial = y + step * lambda;
                if trial[4] > 0.0 {
                    let ft = local_residuals(p, &trial);
                    let m = merit(p, &trial, &ft);
                    if m.is_finite() && m < best {
                        y = trial;
                        fy = ft;
                        best = m;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        let [a, b, c, d, duration] = [y[0], y[1], y[2], y[3], y[4]];
        // reject the spurious root that ends at standstill or runs backwards
        let v_end = 0.5 * a * duration * duration + b * duration + c;
        if !(duration > 0.0) || !(v_end > 0.0) {
            return Err(best.sqrt());
        }
        let traj = ReferenceTrajectory::from_local([a, b, c, d], p.t0, duration);
        let r = p.max_scaled_residual(&traj);
        if r <= ACCEPT_RESIDUAL {
            Ok(traj)
        } else {
            Err(r)
        }
    }
}

/// Residuals in entry-relative time, unknowns `(a, b, c, d, T)`.
fn local_residuals(p: &ReferenceProblem, y: &Vec5) -> Vec5 {
    let [a, b, c, d, t] = [y[0], y[1], y[2], y[3], y[4]];
    Vec5::new(
        c - p.v0,
        d,
        a * t.powi(3) / 6.0 + 0.5 * b * t * t + c * t + d - p.zone_length,
        a * t + b,
        p.beta + 0.5 * a * a * t * t + a * b * t + a * c,
    )
}

/// Line-search merit: residuals weighted to a common dimensionless scale.
fn merit(p: &ReferenceProblem, y: &Vec5, f: &Vec5) -> f64 {
    let vs = p.v0.max(1.0);
    let t = y[4];
    let w = [1.0 / vs, 1.0 / p.zone_length, 1.0 / p.zone_length, t / vs, t / (vs * vs)];
    f.iter().zip(w).map(|(r, w)| (r * w).powi(2)).sum()
}

fn local_jacobian(y: &Vec5) -> Mat5 {
    let [a, b, c, _d, t] = [y[0], y[1], y[2], y[3], y[4]];
    let mut j = Mat5::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = t.powi(3) / 6.0;
    j[(2, 1)] = 0.5 * t * t;
    j[(2, 2)] = t;
    j[(2, 3)] = 1.0;
    j[(2, 4)] = 0.5 * a * t * t + b * t + c;
    j[(3, 0)] = t;
    j[(3, 1)] = 1.0;
    j[(3, 4)] = a;
    j[(4, 0)] = a * t * t + b * t + c;
    j[(4, 1)] = a * t;
    j[(4, 2)] = a;
    j[(4, 4)] = a * a * t + a * b;
    j
}
