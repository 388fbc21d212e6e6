//! Time integration of the model: a fixed-step fourth-order Runge-Kutta
//! scheme and an adaptive embedded 4(5) pair with step-size control.
//!
//! Both integrators clamp small numerical excursions (at most
//! [`PROJECTION_TOL`]) back into the domain after every accepted step;
//! anything larger terminates the run with a guard-violation diagnostic
//! rather than silently producing states outside the model's phase space.
//! An optional steady-state criterion stops a run early once the field norm
//! stays below a tolerance for a dwell window.

use crate::model::{
    aux_field_raw, hv_field_raw, AuxState, ControlInputs, HvState, ModelParams,
};
use thiserror::Error;

/// Largest domain violation that is silently clamped after a step.
pub const PROJECTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
}

/// Stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge-Kutta with a fixed step.
    Rk4 { step: f64 },
    /// Embedded 4(5) pair with proportional step-size control.
    Rk45 {
        abs_tol: f64,
        rel_tol: f64,
        initial_step: f64,
        min_step: f64,
        max_step: f64,
    },
}

impl Method {
    /// Adaptive integration with the default tolerances (1e-9 absolute and
    /// relative, initial step 1e-2, steps capped at 1.0).
    pub fn adaptive() -> Self {
        Method::Rk45 {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            initial_step: 1e-2,
            min_step: 1e-12,
            max_step: 1.0,
        }
    }
}

/// Horizon, stepping scheme, and recording density of one integration run.
///
/// `record_stride` keeps every n-th accepted step; the initial and terminal
/// states are always recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_max: f64,
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn rk4(step: f64, t_max: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4 { step },
            t_max,
            record_stride: 1,
        }
    }

    pub fn adaptive(t_max: f64) -> Self {
        IntegratorConfig {
            method: Method::adaptive(),
            t_max,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        let bad = |msg: String| Err(IntegrateError::InvalidConfig(msg));
        if !self.t_max.is_finite() || self.t_max < 0.0 {
            return bad(format!("t_max must be finite and >= 0, got {}", self.t_max));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".to_string());
        }
        match self.method {
            Method::Rk4 { step } => {
                if !step.is_finite() || step <= 0.0 {
                    return bad(format!("step must be positive and finite, got {step}"));
                }
            }
            Method::Rk45 {
                abs_tol,
                rel_tol,
                initial_step,
                min_step,
                max_step,
            } => {
                for (name, v) in [
                    ("abs_tol", abs_tol),
                    ("rel_tol", rel_tol),
                    ("initial_step", initial_step),
                    ("min_step", min_step),
                    ("max_step", max_step),
                ] {
                    if !v.is_finite() || v <= 0.0 {
                        return bad(format!("{name} must be positive and finite, got {v}"));
                    }
                }
                if min_step > initial_step || initial_step > max_step {
                    return bad(format!(
                        "step bounds must satisfy min <= initial <= max, got {min_step}, {initial_step}, {max_step}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Early-stop rule: terminate once the field's infinity norm stays below
/// `field_norm_tol` for `window` time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateCriterion {
    pub field_norm_tol: f64,
    pub window: f64,
}

impl Default for SteadyStateCriterion {
    fn default() -> Self {
        SteadyStateCriterion {
            field_norm_tol: 1e-10,
            window: 1.0,
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum TerminalReason {
    HorizonReached,
    SteadyState,
    /// The trajectory left the domain by more than [`PROJECTION_TOL`], or
    /// adaptive step control underflowed. Carries a diagnostic; the states
    /// recorded up to that point are still valid.
    GuardViolation(String),
}

/// Recorded output of one integration run. Times are strictly increasing
/// and every state satisfies the domain constraints (violations were either
/// clamped below [`PROJECTION_TOL`] or aborted the run).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub terminal_reason: TerminalReason,
}

impl<S> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_time(&self) -> f64 {
        *self.times.last().expect("a trajectory is never empty")
    }

    pub fn terminal_state(&self) -> &S {
        self.states.last().expect("a trajectory is never empty")
    }
}

/// Integrates the controlled model in the native `(x, y, z)` coordinates.
pub fn integrate(
    p: &ModelParams,
    u: &ControlInputs,
    s0: &HvState,
    cfg: &IntegratorConfig,
    stop: Option<&SteadyStateCriterion>,
) -> Result<Trajectory<HvState>, IntegrateError> {
    u.validate_for(p)
        .map_err(|e| IntegrateError::InvalidConfig(e.to_string()))?;
    let (p, u) = (*p, *u);
    let raw = run(
        &|s| hv_field_raw(&p, &u, s),
        &project_hv,
        s0.as_array(),
        cfg,
        stop,
    )?;
    Ok(Trajectory {
        times: raw.times,
        states: raw
            .states
            .into_iter()
            .map(|s| HvState::new(s[0], s[1], s[2]).expect("projected into the domain"))
            .collect(),
        terminal_reason: raw.reason,
    })
}

/// Integrates in the auxiliary `(x, z, v)` coordinates, where the flow is
/// cooperative and therefore order-preserving.
pub fn integrate_aux(
    p: &ModelParams,
    u: &ControlInputs,
    s0: &AuxState,
    cfg: &IntegratorConfig,
    stop: Option<&SteadyStateCriterion>,
) -> Result<Trajectory<AuxState>, IntegrateError> {
    u.validate_for(p)
        .map_err(|e| IntegrateError::InvalidConfig(e.to_string()))?;
    let (p, u) = (*p, *u);
    let raw = run(
        &|s| aux_field_raw(&p, &u, s),
        &project_aux,
        s0.as_array(),
        cfg,
        stop,
    )?;
    Ok(Trajectory {
        times: raw.times,
        states: raw
            .states
            .into_iter()
            .map(|s| AuxState::new(s[0], s[1], s[2]).expect("projected into the domain"))
            .collect(),
        terminal_reason: raw.reason,
    })
}

fn clamp_component(name: &str, value: f64, lo: f64, hi: f64) -> Result<f64, String> {
    if value < lo {
        if lo - value <= PROJECTION_TOL {
            return Ok(lo);
        }
        return Err(format!(
            "{name} = {value} fell below {lo} by more than the projection tolerance"
        ));
    }
    if value > hi {
        if value - hi <= PROJECTION_TOL {
            return Ok(hi);
        }
        return Err(format!(
            "{name} = {value} rose above {hi} by more than the projection tolerance"
        ));
    }
    Ok(value)
}

fn project_hv(s: [f64; 3]) -> Result<[f64; 3], String> {
    Ok([
        clamp_component("x", s[0], 0.0, 1.0)?,
        clamp_component("y", s[1], 0.0, f64::INFINITY)?,
        clamp_component("z", s[2], 0.0, f64::INFINITY)?,
    ])
}

fn project_aux(s: [f64; 3]) -> Result<[f64; 3], String> {
    let x = clamp_component("x", s[0], 0.0, 1.0)?;
    let v = clamp_component("v", s[2], 0.0, f64::INFINITY)?;
    let z = clamp_component("z", s[1], 0.0, v)?;
    Ok([x, z, v])
}

struct RawTrajectory {
    times: Vec<f64>,
    states: Vec<[f64; 3]>,
    reason: TerminalReason,
}

type Field<'a> = &'a dyn Fn([f64; 3]) -> [f64; 3];
type Project<'a> = &'a dyn Fn([f64; 3]) -> Result<[f64; 3], String>;

fn add_scaled(s: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [s[0] + h * k[0], s[1] + h * k[1], s[2] + h * k[2]]
}

fn rk4_step(f: Field, s: [f64; 3], h: f64) -> [f64; 3] {
    let k1 = f(s);
    let k2 = f(add_scaled(s, k1, h / 2.0));
    let k3 = f(add_scaled(s, k2, h / 2.0));
    let k4 = f(add_scaled(s, k3, h));
    let mut out = s;
    for i in 0..3 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

// Dormand-Prince 5(4) tableau. The step advances with the fifth-order
// weights; the difference against the embedded fourth-order weights is the
// local error estimate.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri_step(f: Field, s: [f64; 3], h: f64) -> ([f64; 3], [f64; 3]) {
    let mut k = [[0.0; 3]; 7];
    k[0] = f(s);
    for stage in 1..7 {
        let mut arg = s;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = DP_A[stage - 1][j];
            if a != 0.0 {
                arg = add_scaled(arg, *kj, h * a);
            }
        }
        k[stage] = f(arg);
    }
    let mut out = s;
    let mut err = [0.0; 3];
    for i in 0..3 {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for stage in 0..7 {
            hi += DP_B5[stage] * k[stage][i];
            lo += DP_B4[stage] * k[stage][i];
        }
        out[i] += h * hi;
        err[i] = h * (hi - lo);
    }
    (out, err)
}

fn run(
    f: Field,
    project: Project,
    s0: [f64; 3],
    cfg: &IntegratorConfig,
    stop: Option<&SteadyStateCriterion>,
) -> Result<RawTrajectory, IntegrateError> {
    cfg.validate()?;
    let mut times = vec![0.0];
    let mut states = vec![s0];
    let mut t = 0.0;
    let mut s = s0;
    let mut accepted: usize = 0;
    let mut dwell_start: Option<f64> = None;
    if let Some(c) = stop {
        if norm_inf(f(s)) < c.field_norm_tol {
            dwell_start = Some(0.0);
        }
    }

    let mut h_next = match cfg.method {
        Method::Rk4 { step } => step,
        Method::Rk45 { initial_step, .. } => initial_step,
    };
    // Relative slack under which the remaining horizon counts as reached.
    let horizon_slack = 1e-14 * cfg.t_max.max(1.0);

    let reason = loop {
        let remaining = cfg.t_max - t;
        if remaining <= horizon_slack {
            break TerminalReason::HorizonReached;
        }
        let h = h_next.min(remaining);

        let candidate = match cfg.method {
            Method::Rk4 { .. } => rk4_step(f, s, h),
            Method::Rk45 {
                abs_tol,
                rel_tol,
                min_step,
                max_step,
                ..
            } => {
                let (out, err) = dopri_step(f, s, h);
                let mut err_ratio: f64 = 0.0;
                for i in 0..3 {
                    let scale = abs_tol + rel_tol * s[i].abs().max(out[i].abs());
                    err_ratio = err_ratio.max((err[i] / scale).abs());
                }
                let factor = if err_ratio == 0.0 {
                    5.0
                } else {
                    (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
                };
                if err_ratio > 1.0 {
                    let shrunk = h * factor;
                    if shrunk < min_step {
                        break TerminalReason::GuardViolation(format!(
                            "step size underflow at t = {t}: required step {shrunk:e} below the minimum {min_step:e}"
                        ));
                    }
                    h_next = shrunk;
                    continue;
                }
                h_next = (h * factor).min(max_step);
                out
            }
        };

        if !candidate.iter().all(|c| c.is_finite()) {
            return Err(IntegrateError::NonFiniteState { t });
        }
        let projected = match project(candidate) {
            Ok(p) => p,
            Err(msg) => break TerminalReason::GuardViolation(format!("at t = {}: {msg}", t + h)),
        };

        t += h;
        s = projected;
        accepted += 1;
        if accepted % cfg.record_stride == 0 {
            times.push(t);
            states.push(s);
        }

        if let Some(c) = stop {
            if norm_inf(f(s)) < c.field_norm_tol {
                let start = *dwell_start.get_or_insert(t);
                if t - start >= c.window {
                    break TerminalReason::SteadyState;
                }
            } else {
                dwell_start = None;
            }
        }
    };

    if *times.last().expect("seeded with the initial sample") < t {
        times.push(t);
        states.push(s);
    }
    Ok(RawTrajectory {
        times,
        states,
        reason,
    })
}

fn norm_inf(v: [f64; 3]) -> f64 {
    v.iter().fold(0.0, |m, c| m.max(c.abs()))
}
