//! The per-step quadratic program in `(u, e)`.
//!
//! ```text
//!   minimize    lambda_e * e^2 + (u - u_ref)^2 / 2
//!   subject to  hard rows in u, at most one soft row involving e
//! ```
//!
//! The relaxation `e` is free, so for a fixed `u` its optimal value is the
//! projection of zero onto the half-line the soft row allows. Eliminating it
//! leaves a convex piecewise-quadratic function of `u` with one breakpoint,
//! minimized exactly over the interval cut out by the hard rows.

use serde::{Deserialize, Serialize};

use crate::constraints::{LinearRow, RowTag};
use crate::error::QpError;

/// Rows are accepted when violated by at most this much (row units) and the
/// feasible interval may be inverted by at most this much before it counts
/// as empty.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u_ref: f64,
    pub lambda_e: f64,
    pub rows: Vec<LinearRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "optimal" => Some(QpStatus::Optimal),
            "infeasible" => Some(QpStatus::Infeasible),
            _ => None,
        }
    }
}

/// Optimizer of a [`QpProblem`]. `u` and `e` are NaN when infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub u: f64,
    pub e: f64,
    pub active_set: Vec<RowTag>,
}

impl QpSolution {
    fn infeasible() -> Self {
        Self {
            status: QpStatus::Infeasible,
            u: f64::NAN,
            e: f64::NAN,
            active_set: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Closed interval of admissible accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, u: f64) -> bool {
        self.lo <= u && u <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Intersection of the half-lines in `u` cut out by the hard rows; rows that
/// involve `e` never restrict `u` and are skipped. `None` when the rows conflict.
pub fn feasible_interval_u(rows: &[LinearRow]) -> Option<Interval> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for row in rows.iter().filter(|r| r.coef_e == 0.0) {
        let (a, _, r) = row.as_ge();
        if a > 0.0 {
            lo = lo.max(r / a);
        } else if a < 0.0 {
            hi = hi.min(r / a);
        } else if r > FEAS_TOL {
            return None;
        }
    }
    if lo <= hi {
        Some(Interval { lo, hi })
    } else if lo <= hi + FEAS_TOL {
        // rounding-level conflict between rows meant to touch
        let mid = 0.5 * (lo + hi);
        Some(Interval { lo: mid, hi: mid })
    } else {
        None
    }
}

/// `e* = sign * max(0, p u + q)` for the single soft row.
#[derive(Debug, Clone, Copy)]
struct SoftPart {
    p: f64,
    q: f64,
    sign: f64,
}

impl SoftPart {
    fn from_row(row: &LinearRow) -> Self {
        let (a, c, r) = row.as_ge();
        if c > 0.0 {
            // e >= (r - a u) / c
            Self {
                p: -a / c,
                q: r / c,
                sign: 1.0,
            }
        } else {
            // e <= (r - a u) / c, optimal e is min(0, .)
            Self {
                p: a / c,
                q: -r / c,
                sign: -1.0,
            }
        }
    }

    fn excess(&self, u: f64) -> f64 {
        (self.p * u + self.q).max(0.0)
    }
}

fn validate(p: &QpProblem) -> Result<Option<SoftPart>, QpError> {
    if !(p.lambda_e > 0.0 && p.lambda_e.is_finite()) {
        return Err(QpError::Malformed(format!(
            "lambda_e = {} must be positive",
            p.lambda_e
        )));
    }
    if !p.u_ref.is_finite() {
        return Err(QpError::Malformed("u_ref must be finite".into()));
    }
    let mut soft = None;
    for row in &p.rows {
        if !(row.coef_u.is_finite() && row.coef_e.is_finite() && row.rhs.is_finite()) {
            return Err(QpError::Malformed(format!("non-finite row {:?}", row.tag)));
        }
        if row.coef_e != 0.0 {
            if soft.is_some() {
                return Err(QpError::Malformed(
                    "at most one row may involve the relaxation".into(),
                ));
            }
            soft = Some(SoftPart::from_row(row));
        }
    }
    Ok(soft)
}

/// Solves the QP exactly. Infeasibility is a normal outcome.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution, QpError> {
    let soft = validate(p)?;
    let Some(iv) = feasible_interval_u(&p.rows) else {
        return Ok(QpSolution::infeasible());
    };

    let lam = p.lambda_e;
    let cost = |u: f64| {
        let s = soft.map_or(0.0, |s| s.excess(u));
        0.5 * (u - p.u_ref).powi(2) + lam * s * s
    };
    let clamp = |u: f64| u.clamp(iv.lo, iv.hi);

    let mut candidates = vec![clamp(p.u_ref)];
    if iv.lo.is_finite() {
        candidates.push(iv.lo);
    }
    if iv.hi.is_finite() {
        candidates.push(iv.hi);
    }
    if let Some(s) = soft {
        // stationary point of the branch where the soft row is active
        let denom = 1.0 + 2.0 * lam * s.p * s.p;
        candidates.push(clamp((p.u_ref - 2.0 * lam * s.p * s.q) / denom));
        if s.p != 0.0 {
            candidates.push(clamp(-s.q / s.p));
        }
    }

    let mut u = candidates[0];
    let mut best = cost(u);
    for &c in &candidates[1..] {
        let f = cost(c);
        if f < best {
            best = f;
            u = c;
        }
    }
    if !best.is_finite() {
        return Err(QpError::Internal(format!("objective not finite at u = {u}")));
    }
    let e = soft.map_or(0.0, |s| s.sign * s.excess(u));

    let active_set = p
        .rows
        .iter()
        .filter(|r| r.slack(u, e).abs() <= FEAS_TOL * (1.0 + r.rhs.abs()))
        .map(|r| r.tag)
        .collect();
    Ok(QpSolution {
        status: QpStatus::Optimal,
        u,
        e,
        active_set,
    })
}
