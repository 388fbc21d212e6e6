//! Thresholds, equilibria, spectral stability, and threshold sensitivity.
//!
//! The controlled contagion threshold is
//!
//! ```text
//! sigma_c = (beta_h - u2) beta_v omega / (gamma (mu + u1)^2)
//! ```
//!
//! Below or at the threshold the only rest point in the domain is the
//! disease-free one and every trajectory converges to it; above it a unique
//! endemic rest point appears and attracts every trajectory that starts
//! with any infection present (`x > 0` or `z > 0`). [`predict_limit`] turns
//! that dichotomy into a forecast for a concrete initial state, and
//! [`local_stability`] certifies it spectrally at both rest points.
//!
//! Eigenvalues come from the characteristic cubic in closed form (a
//! trigonometric branch when all three roots are real, the Cardano branch
//! otherwise) with one Newton polish per root; no external linear-algebra
//! dependency is involved.

use crate::model::{jacobian, ControlInputs, HvState, Matrix3, ModelParams};
use num_complex::Complex64;
use thiserror::Error;

/// Half-width of the real-part band classified as marginal.
pub const MARGINAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyzeError {
    #[error("threshold elasticities are undefined when beta_v = 0 (the threshold vanishes identically)")]
    DegenerateThreshold,
}

/// Contagion threshold of the controlled system. The disease dies out when
/// this is at most one and persists when it exceeds one.
pub fn threshold(p: &ModelParams, u: &ControlInputs) -> f64 {
    let m = p.mu() + u.u1();
    (p.beta_h() - u.u2()) * p.beta_v() * p.omega() / (p.gamma() * m * m)
}

/// Disease-free rest point `(0, omega/(mu + u1), 0)`.
pub fn dfe(p: &ModelParams, u: &ControlInputs) -> HvState {
    HvState::new(0.0, u.vector_rest_level(p), 0.0).expect("rest level is positive and finite")
}

/// Endemic rest point, present exactly when the threshold exceeds one.
///
/// With `b = beta_h - u2` and `m = mu + u1`:
///
/// ```text
/// x = (omega beta_v b - m^2 gamma) / (omega beta_v b + m gamma beta_v)
/// y = (gamma m + b omega) / (b (beta_v + m))
/// z = (omega beta_v b - m^2 gamma) / (m b beta_v + m^2 b)
/// ```
pub fn endemic_equilibrium(p: &ModelParams, u: &ControlInputs) -> Option<HvState> {
    if threshold(p, u) <= 1.0 {
        return None;
    }
    let b = p.beta_h() - u.u2();
    let m = p.mu() + u.u1();
    let excess = p.omega() * p.beta_v() * b - m * m * p.gamma();
    // The threshold test guarantees a positive excess; the clamp only
    // absorbs rounding when the threshold is within an ulp of one.
    let x = (excess / (p.omega() * p.beta_v() * b + m * p.gamma() * p.beta_v())).max(0.0);
    let y = (p.gamma() * m + b * p.omega()) / (b * (p.beta_v() + m));
    let z = (excess / (m * b * p.beta_v() + m * m * b)).max(0.0);
    Some(HvState::new(x, y, z).expect("the endemic rest point lies inside the domain"))
}

/// Which rest point a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    DiseaseFree,
    Endemic,
}

/// Spectral verdict at a rest point, by the largest eigenvalue real part
/// with a [`MARGINAL_TOL`] band around zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    ExponentiallyStable,
    Unstable,
    Marginal,
}

/// One rest point with its spectrum and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub point: HvState,
    /// Sorted by real part descending, ties by imaginary part descending.
    pub eigenvalues: [Complex64; 3],
    pub stability: Stability,
    /// Threshold of the (controlled) system the report was computed for.
    pub threshold_value: f64,
}

/// Spectral reports for both rest points; the endemic entry is present
/// exactly when the threshold exceeds one.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityAnalysis {
    pub dfe: EquilibriumReport,
    pub ee: Option<EquilibriumReport>,
}

fn report(
    kind: EquilibriumKind,
    point: HvState,
    p: &ModelParams,
    u: &ControlInputs,
    sigma: f64,
) -> EquilibriumReport {
    let j = jacobian(p, u, &point).expect("controls validated by the caller");
    let eigenvalues = eigenvalues_3x3(&j);
    let max_re = eigenvalues.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
    let stability = if max_re > MARGINAL_TOL {
        Stability::Unstable
    } else if max_re < -MARGINAL_TOL {
        Stability::ExponentiallyStable
    } else {
        Stability::Marginal
    };
    EquilibriumReport {
        kind,
        point,
        eigenvalues,
        stability,
        threshold_value: sigma,
    }
}

/// Eigenvalues and verdicts at every rest point of the controlled system.
pub fn local_stability(p: &ModelParams, u: &ControlInputs) -> StabilityAnalysis {
    let sigma = threshold(p, u);
    let dfe_report = report(EquilibriumKind::DiseaseFree, dfe(p, u), p, u, sigma);
    let ee_report =
        endemic_equilibrium(p, u).map(|pt| report(EquilibriumKind::Endemic, pt, p, u, sigma));
    StabilityAnalysis {
        dfe: dfe_report,
        ee: ee_report,
    }
}

/// Forecast of where a trajectory from `s0` ends up.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeForecast {
    pub predicted_limit: HvState,
    /// Whether the convergence statement covers `s0` directly. The one
    /// uncovered case is a supercritical system started with no infection
    /// anywhere (`x = z = 0`); the disease-free subspace is invariant, so
    /// the forecast still points there.
    pub applicable: bool,
}

/// Predicts the limit of the trajectory from `s0`: the disease-free rest
/// point at or below the threshold, the endemic one above it whenever any
/// infection is present initially.
pub fn predict_limit(p: &ModelParams, u: &ControlInputs, s0: &HvState) -> RegimeForecast {
    let sigma = threshold(p, u);
    if sigma <= 1.0 {
        return RegimeForecast {
            predicted_limit: dfe(p, u),
            applicable: true,
        };
    }
    if s0.x() != 0.0 || s0.z() != 0.0 {
        RegimeForecast {
            predicted_limit: endemic_equilibrium(p, u)
                .expect("the rest point exists above the threshold"),
            applicable: true,
        }
    } else {
        RegimeForecast {
            predicted_limit: dfe(p, u),
            applicable: false,
        }
    }
}

/// Elasticities of the uncontrolled threshold with respect to each rate:
/// `(d sigma / d theta) (theta / sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityReport {
    pub gamma: f64,
    pub beta_h: f64,
    pub beta_v: f64,
    pub omega: f64,
    pub mu: f64,
}

/// Threshold elasticities. The threshold is a monomial in the rates, so
/// each elasticity is the rate's exponent: +1 for `beta_h`, `beta_v`, and
/// `omega`, -1 for `gamma`, -2 for `mu`. The vector death rate is the only
/// rate that acts quadratically, which is why raising it is disproportionately
/// effective. Undefined when `beta_v = 0`.
pub fn threshold_sensitivity(p: &ModelParams) -> Result<SensitivityReport, AnalyzeError> {
    if p.beta_v() == 0.0 {
        return Err(AnalyzeError::DegenerateThreshold);
    }
    Ok(SensitivityReport {
        gamma: -1.0,
        beta_h: 1.0,
        beta_v: 1.0,
        omega: 1.0,
        mu: -2.0,
    })
}

/// Eigenvalues of a real 3x3 matrix, sorted by real part descending (ties
/// by imaginary part descending, so a conjugate pair lists `+i` first).
///
/// The characteristic cubic is solved in closed form and each root gets a
/// few Newton corrections on the original polynomial; residuals stay within
/// `1e-10` times the cubed matrix magnitude.
pub fn eigenvalues_3x3(m: &Matrix3) -> [Complex64; 3] {
    debug_assert!(m.is_finite());
    let a = -m.trace();
    let b = m.principal_minor_sum();
    let c = -m.determinant();
    let mut roots = cubic_roots(a, b, c);
    for r in &mut roots {
        *r = polish_root(*r, a, b, c);
    }
    roots.sort_by(|l, r| r.re.total_cmp(&l.re).then(r.im.total_cmp(&l.im)));
    roots
}

/// Magnitude of the characteristic polynomial of `m` at `lambda`; the
/// residual that qualifies `lambda` as an eigenvalue.
pub fn characteristic_residual(m: &Matrix3, lambda: Complex64) -> f64 {
    let a = -m.trace();
    let b = m.principal_minor_sum();
    let c = -m.determinant();
    (((lambda + a) * lambda + b) * lambda + c).norm()
}

/// Roots of `t^3 + a t^2 + b t + c` with real coefficients.
fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let shift = -a / 3.0;
    // Depressed form t^3 + p t + q after t -> t + shift.
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    if p == 0.0 && q == 0.0 {
        return [Complex64::new(shift, 0.0); 3];
    }
    let half_q = q / 2.0;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if disc <= 0.0 {
        // Three real roots; p < 0 is forced here (p = 0 would need q = 0).
        let amp = 2.0 * (-third_p).sqrt();
        let cos3 = (3.0 * q / (p * amp)).clamp(-1.0, 1.0);
        let phi = cos3.acos() / 3.0;
        let third = 2.0 * std::f64::consts::PI / 3.0;
        [phi, phi - third, phi + third]
            .map(|ang| Complex64::new(amp * ang.cos() + shift, 0.0))
    } else {
        // One real root; pick the large cube to avoid cancellation.
        let sq = disc.sqrt();
        let big = if q >= 0.0 { -half_q - sq } else { -half_q + sq };
        let u = big.cbrt();
        let v = -third_p / u;
        let real = u + v;
        let im = 3f64.sqrt() / 2.0 * (u - v);
        [
            Complex64::new(real + shift, 0.0),
            Complex64::new(-real / 2.0 + shift, im),
            Complex64::new(-real / 2.0 + shift, -im),
        ]
    }
}

fn polish_root(root: Complex64, a: f64, b: f64, c: f64) -> Complex64 {
    let mut z = root;
    for _ in 0..3 {
        let f = ((z + a) * z + b) * z + c;
        let df = (z * 3.0 + 2.0 * a) * z + b;
        if df.norm() == 0.0 {
            break;
        }
        let step = f / df;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
    }
    z
}
