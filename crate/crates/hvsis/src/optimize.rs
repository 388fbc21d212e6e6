//! Cheapest intervention that stops the contagion.
//!
//! The planner picks a vector-control effort `u1 >= 0` (raising the vector
//! turnover `mu`) and a protection effort `u2 in [0, beta_h]` (lowering the
//! human contagion rate) so that the controlled threshold drops to one:
//!
//! ```text
//! minimize  C(u1, u2)
//! subject to  g(u1, u2) = (beta_h - u2) beta_v omega - gamma (mu + u1)^2 <= 0
//! ```
//!
//! `g <= 0` is exactly `sigma_c <= 1`. Admissible costs vanish nowhere on
//! the feasible box, increase in each effort, and make the constraint
//! active at any optimum when the uncontrolled system is supercritical.
//!
//! Three solvers cross-check each other:
//!
//! * [`solve_linear`] evaluates the closed form for `C = c1 u1 + c2 u2`:
//!   the optimum is always one-sided, and the cost region [`RegionC`]
//!   decides which side.
//! * [`solve_kkt`] handles general smooth costs by solving the first-order
//!   conditions along the active constraint, comparing every interior
//!   stationary point against both one-sided candidates.
//! * [`grid_oracle`] brute-forces the feasible box on an `n x n` lattice;
//!   it assumes nothing about the cost shape and bounds how far the other
//!   two can be from the truth.

use crate::analyze::threshold;
use crate::model::{ControlInputs, ModelParams};
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("cost coefficient {name} must be finite and positive, got {value}")]
    InvalidCoefficient { name: &'static str, value: f64 },
    #[error("cost function violates the admissibility assumptions: {0}")]
    InadmissibleCost(String),
    #[error(
        "root search on the optimality system stalled after {iterations} iterations \
         (best residual {residual:.3e})"
    )]
    NoConvergence { residual: f64, iterations: usize },
    #[error("grid search needs at least 2 points per axis, got {0}")]
    DegenerateGrid(usize),
}

type CostFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// Intervention cost `C(u1, u2)`.
#[derive(Clone)]
pub enum CostModel {
    /// `C = c1 u1 + c2 u2` with positive marginal costs.
    Linear { c1: f64, c2: f64 },
    /// Arbitrary smooth cost with its exact gradient.
    General { cost: CostFn, grad: GradFn },
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Linear { c1, c2 } => {
                f.debug_struct("Linear").field("c1", c1).field("c2", c2).finish()
            }
            CostModel::General { .. } => f.debug_struct("General").finish_non_exhaustive(),
        }
    }
}

impl CostModel {
    pub fn linear(c1: f64, c2: f64) -> Result<Self, OptimizeError> {
        for (name, value) in [("c1", c1), ("c2", c2)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(OptimizeError::InvalidCoefficient { name, value });
            }
        }
        Ok(CostModel::Linear { c1, c2 })
    }

    pub fn general(
        cost: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        grad: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        CostModel::General {
            cost: Arc::new(cost),
            grad: Arc::new(grad),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, CostModel::Linear { .. })
    }

    pub fn evaluate(&self, u1: f64, u2: f64) -> f64 {
        match self {
            CostModel::Linear { c1, c2 } => c1 * u1 + c2 * u2,
            CostModel::General { cost, .. } => cost(u1, u2),
        }
    }

    pub fn gradient(&self, u1: f64, u2: f64) -> (f64, f64) {
        match self {
            CostModel::Linear { c1, c2 } => (*c1, *c2),
            CostModel::General { grad, .. } => grad(u1, u2),
        }
    }

    /// Spot-checks the admissibility assumptions on the interior of the
    /// feasible box: finite nonnegative values and strictly positive
    /// marginal costs in both efforts. Linear costs are admissible by
    /// construction.
    fn validate_admissible(&self, p: &ModelParams) -> Result<(), OptimizeError> {
        if self.is_linear() {
            return Ok(());
        }
        let u1_hi = u1_search_bound(p).max(1e-3);
        let u2_hi = p.beta_h().max(1e-3);
        for i in [0.25, 0.5, 0.75] {
            for j in [0.25, 0.5, 0.75] {
                let (u1, u2) = (i * u1_hi, j * u2_hi);
                let value = self.evaluate(u1, u2);
                if !value.is_finite() || value < 0.0 {
                    return Err(OptimizeError::InadmissibleCost(format!(
                        "cost at ({u1:.6}, {u2:.6}) is {value}"
                    )));
                }
                let (g1, g2) = self.gradient(u1, u2);
                if !(g1 > 0.0) || !(g2 > 0.0) {
                    return Err(OptimizeError::InadmissibleCost(format!(
                        "marginal costs at ({u1:.6}, {u2:.6}) are ({g1}, {g2}); \
                         both must be positive"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How the reported optimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Analytic one-sided formula.
    ClosedForm,
    /// Analytic formula on the exact cost tie between the two one-sided
    /// policies; vector control is reported.
    ClosedFormBoundaryTie,
    /// Numerical solution of the first-order optimality system on the
    /// active constraint.
    KktSolve,
    /// Exhaustive lattice search.
    Grid,
}

/// Which efforts the optimal policy actually uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivePolicy {
    /// Already subcritical; no intervention needed.
    NoneNeeded,
    /// Only `u1 > 0`.
    VectorControl,
    /// Only `u2 > 0`.
    Protection,
    /// Both efforts positive.
    Mixed,
}

/// An optimal intervention with its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPolicy {
    pub u1_star: f64,
    pub u2_star: f64,
    /// Shadow price of the threshold constraint; absent when the
    /// constraint is inactive or the solver does not produce one.
    pub multiplier: Option<f64>,
    pub achieved_sigma_c: f64,
    pub cost_value: f64,
    pub provenance: Provenance,
    pub active_policy: ActivePolicy,
}

/// Threshold constraint `g = (beta_h - u2) beta_v omega - gamma (mu + u1)^2`;
/// nonpositive exactly when the controlled threshold is at most one.
pub fn constraint_g(p: &ModelParams, u: &ControlInputs) -> f64 {
    constraint_g_raw(p, u.u1(), u.u2())
}

fn constraint_g_raw(p: &ModelParams, u1: f64, u2: f64) -> f64 {
    let m = p.mu() + u1;
    (p.beta_h() - u2) * p.beta_v() * p.omega() - p.gamma() * m * m
}

/// Vector-control effort that lands exactly on `sigma_c = 1` with `u2 = 0`:
/// `sqrt(beta_h beta_v omega / gamma) - mu`.
fn vector_control_level(p: &ModelParams) -> f64 {
    (p.beta_h() * p.beta_v() * p.omega() / p.gamma()).sqrt() - p.mu()
}

/// Protection effort that lands exactly on `sigma_c = 1` with `u1 = 0`:
/// `(beta_h beta_v omega - gamma mu^2) / (beta_v omega)`.
fn protection_level(p: &ModelParams) -> f64 {
    (p.beta_h() * p.beta_v() * p.omega() - p.gamma() * p.mu() * p.mu())
        / (p.beta_v() * p.omega())
}

/// Upper edge of the search box for `u1`: ten percent beyond the pure
/// vector-control effort, which no admissible optimum exceeds.
pub fn u1_search_bound(p: &ModelParams) -> f64 {
    1.1 * vector_control_level(p).max(0.0)
}

/// Membership report for the cost region that favors protection.
///
/// With cost ratio `r = c1 / c2`, the region is
///
/// ```text
/// C = { r > 2 gamma mu / (beta_v omega)
///       and (r beta_v omega - gamma mu)^2 >= beta_h beta_v gamma omega }
/// ```
///
/// For a supercritical system the second inequality at equality is exactly
/// the cost tie between the two one-sided policies, so membership means
/// protection is at least as cheap as vector control.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionC {
    pub ratio_inequality: bool,
    pub margin_inequality: bool,
}

impl RegionC {
    pub fn contains(&self) -> bool {
        self.ratio_inequality && self.margin_inequality
    }
}

/// Evaluates both region inequalities for the cost ratio `c1 / c2`.
pub fn region_c(p: &ModelParams, c1: f64, c2: f64) -> Result<RegionC, OptimizeError> {
    for (name, value) in [("c1", c1), ("c2", c2)] {
        if !value.is_finite() || value <= 0.0 {
            return Err(OptimizeError::InvalidCoefficient { name, value });
        }
    }
    let r = c1 / c2;
    let bvo = p.beta_v() * p.omega();
    let gm = p.gamma() * p.mu();
    let margin = r * bvo - gm;
    Ok(RegionC {
        ratio_inequality: r > 2.0 * gm / bvo,
        margin_inequality: margin * margin >= p.beta_h() * p.beta_v() * p.gamma() * p.omega(),
    })
}

/// Whether the cost ratio favors pure protection.
pub fn in_region_c(p: &ModelParams, c1: f64, c2: f64) -> Result<bool, OptimizeError> {
    region_c(p, c1, c2).map(|r| r.contains())
}

fn trivial_policy(p: &ModelParams, cost: &CostModel, provenance: Provenance) -> OptimalPolicy {
    OptimalPolicy {
        u1_star: 0.0,
        u2_star: 0.0,
        multiplier: None,
        achieved_sigma_c: threshold(p, &ControlInputs::NONE),
        cost_value: cost.evaluate(0.0, 0.0),
        provenance,
        active_policy: ActivePolicy::NoneNeeded,
    }
}

fn sigma_at(p: &ModelParams, u1: f64, u2: f64) -> f64 {
    let u = ControlInputs::new(p, u1, u2).expect("solver keeps efforts inside the admissible box");
    threshold(p, &u)
}

/// Closed-form optimum for the linear cost `c1 u1 + c2 u2`.
///
/// Subcritical systems need nothing. Otherwise the optimum is one-sided:
/// pure protection inside [`RegionC`], pure vector control outside. An
/// exact cost tie (the region boundary) reports vector control with
/// [`Provenance::ClosedFormBoundaryTie`].
pub fn solve_linear(p: &ModelParams, c1: f64, c2: f64) -> Result<OptimalPolicy, OptimizeError> {
    let cost = CostModel::linear(c1, c2)?;
    if threshold(p, &ControlInputs::NONE) <= 1.0 {
        return Ok(trivial_policy(p, &cost, Provenance::ClosedForm));
    }
    let u1_vc = vector_control_level(p);
    let u2_pp = protection_level(p);
    let cost_vc = c1 * u1_vc;
    let cost_pp = c2 * u2_pp;
    if cost_pp < cost_vc {
        Ok(OptimalPolicy {
            u1_star: 0.0,
            u2_star: u2_pp,
            multiplier: Some(c2 / (p.beta_v() * p.omega())),
            achieved_sigma_c: sigma_at(p, 0.0, u2_pp),
            cost_value: cost_pp,
            provenance: Provenance::ClosedForm,
            active_policy: ActivePolicy::Protection,
        })
    } else {
        let provenance = if cost_pp == cost_vc {
            Provenance::ClosedFormBoundaryTie
        } else {
            Provenance::ClosedForm
        };
        Ok(OptimalPolicy {
            u1_star: u1_vc,
            u2_star: 0.0,
            multiplier: Some(c1 / (2.0 * p.gamma() * (p.mu() + u1_vc))),
            achieved_sigma_c: sigma_at(p, u1_vc, 0.0),
            cost_value: cost_vc,
            provenance,
            active_policy: ActivePolicy::VectorControl,
        })
    }
}

/// One candidate optimum on the active constraint.
struct Candidate {
    u1: f64,
    u2: f64,
    multiplier: f64,
    cost: f64,
    provenance: Provenance,
}

/// Effort `u2` that keeps the constraint active at the given `u1`.
fn u2_on_constraint(p: &ModelParams, u1: f64) -> f64 {
    let m = p.mu() + u1;
    (p.beta_h() - p.gamma() * m * m / (p.beta_v() * p.omega())).clamp(0.0, p.beta_h())
}

/// Stationarity of the cost along the active constraint with the
/// multiplier eliminated from the first-order system:
///
/// ```text
/// psi(u1) = dC/du1 - dC/du2 * 2 gamma (mu + u1) / (beta_v omega)
/// ```
///
/// A zero of `psi` in the interior of `[0, u1_vc]`, together with
/// `lambda = (dC/du2) / (beta_v omega)`, solves the full system.
fn reduced_stationarity(p: &ModelParams, cost: &CostModel, u1: f64) -> f64 {
    let (g1, g2) = cost.gradient(u1, u2_on_constraint(p, u1));
    g1 - g2 * 2.0 * p.gamma() * (p.mu() + u1) / (p.beta_v() * p.omega())
}

const INTERIOR_SCAN_INTERVALS: usize = 64;
const ROOT_MAX_ITERS: usize = 200;
const STATIONARITY_TOL: f64 = 1e-10;

/// Bisects `psi` to floating-point exhaustion inside a sign-change bracket.
fn bisect_stationarity(
    p: &ModelParams,
    cost: &CostModel,
    mut lo: f64,
    mut f_lo: f64,
    mut hi: f64,
) -> Result<f64, OptimizeError> {
    for iter in 0..ROOT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = reduced_stationarity(p, cost, mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.abs() <= STATIONARITY_TOL * 1e-4 && iter > 40 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(OptimizeError::NoConvergence {
        residual: reduced_stationarity(p, cost, 0.5 * (lo + hi)).abs(),
        iterations: ROOT_MAX_ITERS,
    })
}

/// Interior stationary points of the cost on the active constraint, found
/// by scanning the reduced stationarity function for sign changes and
/// bisecting each bracket. Points with a negative multiplier are dropped.
fn interior_stationary_points(
    p: &ModelParams,
    cost: &CostModel,
) -> Result<Vec<Candidate>, OptimizeError> {
    let u1_vc = vector_control_level(p);
    let psi = |u1: f64| reduced_stationarity(p, cost, u1);
    let mut candidates = Vec::new();
    let mut push_root = |u1: f64| {
        if u1 <= 0.0 || u1 >= u1_vc {
            return;
        }
        let u2 = u2_on_constraint(p, u1);
        let (_, g2) = cost.gradient(u1, u2);
        let lambda = g2 / (p.beta_v() * p.omega());
        if lambda < -1e-12 {
            return;
        }
        candidates.push(Candidate {
            u1,
            u2,
            multiplier: lambda,
            cost: cost.evaluate(u1, u2),
            provenance: Provenance::KktSolve,
        });
    };
    let grid: Vec<f64> = (0..=INTERIOR_SCAN_INTERVALS)
        .map(|k| u1_vc * k as f64 / INTERIOR_SCAN_INTERVALS as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&u1| psi(u1)).collect();
    for k in 0..INTERIOR_SCAN_INTERVALS {
        let (f_lo, f_hi) = (values[k], values[k + 1]);
        if f_lo == 0.0 {
            push_root(grid[k]);
            continue;
        }
        if (f_lo > 0.0) != (f_hi > 0.0) && f_hi != 0.0 {
            let root = bisect_stationarity(p, cost, grid[k], f_lo, grid[k + 1])?;
            push_root(root);
        }
    }
    if values[INTERIOR_SCAN_INTERVALS] == 0.0 {
        push_root(grid[INTERIOR_SCAN_INTERVALS]);
    }
    Ok(candidates)
}

/// Optimum for a general smooth admissible cost via the first-order
/// optimality system.
///
/// Enumerates every interior stationary point on the active constraint
/// (by a bracketed root search on the reduced stationarity equation)
/// together with both one-sided closed forms, and keeps the cheapest.
/// Subcritical systems short-circuit to zero effort.
pub fn solve_kkt(p: &ModelParams, cost: &CostModel) -> Result<OptimalPolicy, OptimizeError> {
    if threshold(p, &ControlInputs::NONE) <= 1.0 {
        return Ok(trivial_policy(p, cost, Provenance::ClosedForm));
    }
    cost.validate_admissible(p)?;

    let mut candidates: Vec<Candidate> = Vec::with_capacity(4);
    let u1_vc = vector_control_level(p);
    let (g1, _) = cost.gradient(u1_vc, 0.0);
    candidates.push(Candidate {
        u1: u1_vc,
        u2: 0.0,
        multiplier: g1 / (2.0 * p.gamma() * (p.mu() + u1_vc)),
        cost: cost.evaluate(u1_vc, 0.0),
        provenance: Provenance::ClosedForm,
    });
    let u2_pp = protection_level(p);
    let (_, g2) = cost.gradient(0.0, u2_pp);
    candidates.push(Candidate {
        u1: 0.0,
        u2: u2_pp,
        multiplier: g2 / (p.beta_v() * p.omega()),
        cost: cost.evaluate(0.0, u2_pp),
        provenance: Provenance::ClosedForm,
    });
    candidates.extend(interior_stationary_points(p, cost)?);

    let winner = candidates
        .into_iter()
        .min_by(|a, b| {
            a.cost
                .total_cmp(&b.cost)
                .then(a.u1.total_cmp(&b.u1))
                .then(a.u2.total_cmp(&b.u2))
        })
        .expect("both one-sided candidates always exist");
    Ok(policy_from(p, winner))
}

fn policy_from(p: &ModelParams, c: Candidate) -> OptimalPolicy {
    let active_policy = match (c.u1 > 0.0, c.u2 > 0.0) {
        (false, false) => ActivePolicy::NoneNeeded,
        (true, false) => ActivePolicy::VectorControl,
        (false, true) => ActivePolicy::Protection,
        (true, true) => ActivePolicy::Mixed,
    };
    OptimalPolicy {
        u1_star: c.u1,
        u2_star: c.u2,
        multiplier: Some(c.multiplier),
        achieved_sigma_c: sigma_at(p, c.u1, c.u2),
        cost_value: c.cost,
        provenance: c.provenance,
        active_policy,
    }
}

/// Exhaustive lattice search over the feasible box
/// `[0, u1_search_bound] x [0, beta_h]` with `n` inclusive points per axis.
///
/// Keeps the cheapest feasible lattice point, breaking ties toward smaller
/// `u1`, then smaller `u2`, so the result does not depend on thread
/// scheduling. The protection edge `u2 = beta_h` is always feasible, so a
/// winner always exists.
pub fn grid_oracle(
    p: &ModelParams,
    cost: &CostModel,
    n: usize,
) -> Result<OptimalPolicy, OptimizeError> {
    if n < 2 {
        return Err(OptimizeError::DegenerateGrid(n));
    }
    if threshold(p, &ControlInputs::NONE) <= 1.0 {
        return Ok(trivial_policy(p, cost, Provenance::Grid));
    }
    cost.validate_admissible(p)?;

    let u1_hi = u1_search_bound(p);
    let u2_hi = p.beta_h();
    let last = n - 1;
    let coord = |k: usize, hi: f64| if k == last { hi } else { k as f64 * hi / last as f64 };

    let best = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let u1 = coord(i, u1_hi);
            let mut row_best: Option<(f64, f64)> = None;
            for j in 0..n {
                let u2 = coord(j, u2_hi);
                if constraint_g_raw(p, u1, u2) > 0.0 {
                    continue;
                }
                let c = cost.evaluate(u1, u2);
                // Strict improvement keeps the smallest u2 of a tie.
                if row_best.is_none_or(|(bc, _)| c < bc) {
                    row_best = Some((c, u2));
                }
            }
            row_best.map(|(c, u2)| (c, u1, u2))
        })
        .min_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        })
        .expect("the full-protection column is feasible on every row");

    let (cost_value, u1, u2) = best;
    let active_policy = match (u1 > 0.0, u2 > 0.0) {
        (false, false) => ActivePolicy::NoneNeeded,
        (true, false) => ActivePolicy::VectorControl,
        (false, true) => ActivePolicy::Protection,
        (true, true) => ActivePolicy::Mixed,
    };
    Ok(OptimalPolicy {
        u1_star: u1,
        u2_star: u2,
        multiplier: None,
        achieved_sigma_c: sigma_at(p, u1, u2),
        cost_value,
        provenance: Provenance::Grid,
        active_policy,
    })
}
