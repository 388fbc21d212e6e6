//! Flat JSON run configuration shared by every subcommand.
//!
//! All keys live in one flat object; each subcommand reads the subset it
//! needs and ignores the rest. Unknown keys are rejected so typos fail
//! loudly instead of silently falling back to defaults.

use crate::CliError;
use hvsis::{
    ControlInputs, HvState, IntegratorConfig, Method, ModelParams, SteadyStateCriterion,
};
use serde::Deserialize;
use std::io::Read;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    // Model rates.
    pub gamma: Option<f64>,
    pub beta_h: Option<f64>,
    pub beta_v: Option<f64>,
    pub omega: Option<f64>,
    pub mu: Option<f64>,
    // Interventions (default: none).
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    // Initial state for simulate.
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub z0: Option<f64>,
    // Integration settings for simulate.
    pub t_max: Option<f64>,
    pub method: Option<String>,
    pub step: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub record_stride: Option<usize>,
    pub stop_at_steady_state: Option<bool>,
    pub steady_tol: Option<f64>,
    pub steady_window: Option<f64>,
    // Control grid for sweep.
    pub u1_min: Option<f64>,
    pub u1_max: Option<f64>,
    pub u1_count: Option<usize>,
    pub u2_min: Option<f64>,
    pub u2_max: Option<f64>,
    pub u2_count: Option<usize>,
    // Linear cost coefficients for optimize.
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    // Cost grid for region.
    pub c1_min: Option<f64>,
    pub c1_max: Option<f64>,
    pub c1_count: Option<usize>,
    pub c2_min: Option<f64>,
    pub c2_max: Option<f64>,
    pub c2_count: Option<usize>,
    // Draw seed for verify.
    pub seed: Option<u64>,
}

fn validation(msg: String) -> CliError {
    CliError::Validation(msg)
}

/// Reads the configuration from a file path or, for `-`, standard input.
pub fn load(source: &str) -> Result<RunConfig, CliError> {
    let text = if source == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| validation(format!("cannot read config from stdin: {e}")))?;
        buf
    } else {
        std::fs::read_to_string(source)
            .map_err(|e| validation(format!("cannot read config {source}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| validation(format!("invalid config: {e}")))
}

fn require(value: Option<f64>, key: &str, meaning: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| validation(format!("missing required key `{key}` ({meaning})")))
}

impl RunConfig {
    pub fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(
            require(self.gamma, "gamma", "human recovery rate")?,
            require(self.beta_h, "beta_h", "human contagion rate")?,
            require(self.beta_v, "beta_v", "vector contagion rate")?,
            require(self.omega, "omega", "vector recruitment rate")?,
            require(self.mu, "mu", "vector death rate")?,
        )
        .map_err(|e| validation(e.to_string()))
    }

    pub fn controls(&self, p: &ModelParams) -> Result<ControlInputs, CliError> {
        ControlInputs::new(p, self.u1.unwrap_or(0.0), self.u2.unwrap_or(0.0))
            .map_err(|e| validation(e.to_string()))
    }

    pub fn initial_state(&self) -> Result<HvState, CliError> {
        HvState::new(
            require(self.x0, "x0", "initial infected human fraction")?,
            require(self.y0, "y0", "initial susceptible vector quantity")?,
            require(self.z0, "z0", "initial carrier vector quantity")?,
        )
        .map_err(|e| validation(e.to_string()))
    }

    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let t_max = require(self.t_max, "t_max", "integration horizon")?;
        let method = match self.method.as_deref().unwrap_or("rk45") {
            "rk4" => Method::Rk4 {
                step: require(self.step, "step", "fixed step size for the rk4 method")?,
            },
            "rk45" => {
                let defaults = Method::adaptive();
                let Method::Rk45 {
                    abs_tol,
                    rel_tol,
                    initial_step,
                    min_step,
                    max_step,
                } = defaults
                else {
                    unreachable!("Method::adaptive is the embedded pair");
                };
                Method::Rk45 {
                    abs_tol: self.abs_tol.unwrap_or(abs_tol),
                    rel_tol: self.rel_tol.unwrap_or(rel_tol),
                    initial_step,
                    min_step,
                    max_step,
                }
            }
            other => {
                return Err(validation(format!(
                    "unknown integration method `{other}` (expected `rk4` or `rk45`)"
                )))
            }
        };
        Ok(IntegratorConfig {
            method,
            t_max,
            record_stride: self.record_stride.unwrap_or(1),
        })
    }

    pub fn steady_criterion(&self) -> Option<SteadyStateCriterion> {
        if !self.stop_at_steady_state.unwrap_or(false) {
            return None;
        }
        let defaults = SteadyStateCriterion::default();
        Some(SteadyStateCriterion {
            field_norm_tol: self.steady_tol.unwrap_or(defaults.field_norm_tol),
            window: self.steady_window.unwrap_or(defaults.window),
        })
    }

    pub fn cost_coefficients(&self) -> Result<(f64, f64), CliError> {
        Ok((
            require(self.c1, "c1", "marginal cost of vector control")?,
            require(self.c2, "c2", "marginal cost of protection")?,
        ))
    }

    /// Inclusive axis `prefix_min ..= prefix_max` with `prefix_count`
    /// points. A missing axis collapses to the single value `fallback`;
    /// a single-point axis needs only `prefix_min`.
    pub fn axis(&self, prefix: &str, fallback: f64) -> Result<Vec<f64>, CliError> {
        let (min, max, count) = match prefix {
            "u1" => (self.u1_min, self.u1_max, self.u1_count),
            "u2" => (self.u2_min, self.u2_max, self.u2_count),
            "c1" => (self.c1_min, self.c1_max, self.c1_count),
            "c2" => (self.c2_min, self.c2_max, self.c2_count),
            _ => unreachable!("axis prefixes are fixed"),
        };
        if min.is_none() && max.is_none() && count.is_none() {
            return Ok(vec![fallback]);
        }
        let count = count.ok_or_else(|| {
            validation(format!("missing required key `{prefix}_count` (grid axis size)"))
        })?;
        if count == 0 {
            return Err(validation(format!("`{prefix}_count` must be at least 1")));
        }
        let lo = require(min, &format!("{prefix}_min"), "grid axis lower bound")?;
        if count == 1 {
            return Ok(vec![lo]);
        }
        let hi = require(max, &format!("{prefix}_max"), "grid axis upper bound")?;
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(validation(format!(
                "`{prefix}` axis bounds must be finite with {prefix}_min <= {prefix}_max"
            )));
        }
        let last = count - 1;
        Ok((0..count)
            .map(|k| {
                if k == 0 {
                    lo
                } else if k == last {
                    hi
                } else {
                    (lo * (last - k) as f64 + hi * k as f64) / last as f64
                }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> RunConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn absent_axis_collapses_to_the_fallback() {
        let cfg = parse("{}");
        assert_eq!(cfg.axis("u1", 0.0).unwrap(), vec![0.0]);
        assert_eq!(cfg.axis("c2", 1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn single_point_axis_needs_only_the_lower_bound() {
        let cfg = parse(r#"{"u2_min": 0.25, "u2_count": 1}"#);
        assert_eq!(cfg.axis("u2", 0.0).unwrap(), vec![0.25]);
    }

    #[test]
    fn axis_hits_both_endpoints_exactly() {
        let cfg = parse(r#"{"c1_min": 0.1, "c1_max": 0.7, "c1_count": 4}"#);
        let axis = cfg.axis("c1", 1.0).unwrap();
        assert_eq!(axis.len(), 4);
        assert_eq!(axis[0], 0.1);
        assert_eq!(axis[3], 0.7);
        assert!(axis.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn partial_axis_is_rejected_with_the_missing_key_named() {
        let cfg = parse(r#"{"u1_min": 0.0, "u1_max": 1.0}"#);
        let err = cfg.axis("u1", 0.0).unwrap_err();
        assert!(err.message().contains("u1_count"), "{}", err.message());
    }

    #[test]
    fn descending_axis_bounds_are_rejected() {
        let cfg = parse(r#"{"c2_min": 2.0, "c2_max": 1.0, "c2_count": 3}"#);
        assert!(cfg.axis("c2", 1.0).is_err());
    }

    #[test]
    fn fixed_step_integration_requires_a_step() {
        let cfg = parse(r#"{"t_max": 1.0, "method": "rk4"}"#);
        let err = cfg.integrator().unwrap_err();
        assert!(err.message().contains("step"), "{}", err.message());
    }

    #[test]
    fn unknown_integration_methods_are_rejected() {
        let cfg = parse(r#"{"t_max": 1.0, "method": "euler"}"#);
        let err = cfg.integrator().unwrap_err();
        assert!(err.message().contains("euler"), "{}", err.message());
    }

    #[test]
    fn steady_state_criterion_appears_only_when_requested() {
        assert!(parse("{}").steady_criterion().is_none());
        let cfg = parse(r#"{"stop_at_steady_state": true, "steady_tol": 1e-8}"#);
        let stop = cfg.steady_criterion().unwrap();
        assert_eq!(stop.field_norm_tol, 1e-8);
    }
}
