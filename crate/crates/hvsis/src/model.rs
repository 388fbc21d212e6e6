//! Core state spaces and vector fields of the human-vector contagion model.
//!
//! Humans follow susceptible-infected-susceptible dynamics: the infected
//! share `x` grows through contact with carrier vectors and clears infection
//! at rate `gamma`. Vectors enter the system at rate `omega`, die at rate
//! `mu`, and move from the non-carrier pool `y` into the carrier pool `z`
//! through contact with infected humans:
//!
//! ```text
//! x' = -gamma x + beta_h (1 - x) z
//! y' = omega - mu y - beta_v x y
//! z' = beta_v x y - mu z
//! ```
//!
//! Two interventions rescale the rates. Vector control `u1` raises the
//! vector death rate to `mu + u1`; personal protection `u2` lowers the
//! human-side contagion rate to `beta_h - u2`. The controlled field is the
//! uncontrolled one evaluated at those substituted rates, and this module
//! keeps that substitution exact (bit-for-bit, not just to rounding).
//!
//! The phase space is `D = {0 <= x <= 1, y >= 0, z >= 0}`. It splits along
//! the shell `y + z = omega/mu` (the rest level of the total vector
//! quantity) into a bounded lower part `D1` and an unbounded upper part
//! `D2`; the flow never crosses either region's boundary outward, which
//! [`boundary_flow_check`] makes observable face by face.
//!
//! The coordinate change `(x, y, z) -> (x, z, v)` with `v = y + z` makes the
//! flow cooperative: every off-diagonal entry of the Jacobian in the
//! auxiliary coordinates is non-negative on the domain. Order preservation
//! of the auxiliary flow is what drives the global convergence statements in
//! [`crate::analyze`].

use thiserror::Error;

/// Absolute tolerance for classifying a state as lying on a boundary face.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Errors raised by construction-time validation and by the field/Jacobian
/// evaluations of this module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("control `{name}` must be non-negative and finite, got {value}")]
    InvalidControl { name: &'static str, value: f64 },
    #[error("protection u2 = {u2} exceeds the contagion rate beta_h = {beta_h}")]
    ProtectionExceedsContagion { u2: f64, beta_h: f64 },
    #[error("state component `{name}` must be {requirement}, got {value}")]
    StateOutOfDomain {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("carrier quantity z = {z} exceeds the vector total v = {v}")]
    CarrierExceedsTotal { z: f64, v: f64 },
    #[error("state ({x}, {y}, {z}) lies on no boundary face of the domain")]
    NotOnBoundary { x: f64, y: f64, z: f64 },
}

fn require_finite_nonneg(name: &'static str, value: f64) -> Result<(), ModelError> {
    if !value.is_finite() || value < 0.0 {
        return Err(ModelError::InvalidParameter {
            name,
            requirement: "non-negative and finite",
            value,
        });
    }
    Ok(())
}

fn require_finite_pos(name: &'static str, value: f64) -> Result<(), ModelError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(ModelError::InvalidParameter {
            name,
            requirement: "positive and finite",
            value,
        });
    }
    Ok(())
}

/// Rate constants of the model, validated at construction.
///
/// `gamma`, `omega`, and `mu` must be strictly positive. The contagion rates
/// `beta_h` and `beta_v` may be zero: a zero `beta_v` decouples the vectors
/// from the humans (the threshold is then identically zero), and a zero
/// `beta_h` is what full protection `u2 = beta_h` substitutes to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    gamma: f64,
    beta_h: f64,
    beta_v: f64,
    omega: f64,
    mu: f64,
}

impl ModelParams {
    pub fn new(
        gamma: f64,
        beta_h: f64,
        beta_v: f64,
        omega: f64,
        mu: f64,
    ) -> Result<Self, ModelError> {
        require_finite_pos("gamma", gamma)?;
        require_finite_nonneg("beta_h", beta_h)?;
        require_finite_nonneg("beta_v", beta_v)?;
        require_finite_pos("omega", omega)?;
        require_finite_pos("mu", mu)?;
        Ok(Self {
            gamma,
            beta_h,
            beta_v,
            omega,
            mu,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta_h(&self) -> f64 {
        self.beta_h
    }

    pub fn beta_v(&self) -> f64 {
        self.beta_v
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Rest level `omega/mu` of the total vector quantity without controls.
    pub fn vector_rest_level(&self) -> f64 {
        self.omega / self.mu
    }

    /// Parameters of the uncontrolled system that the controls substitute
    /// to: `beta_h - u2` for the human contagion rate and `mu + u1` for the
    /// vector death rate.
    pub fn absorb_controls(&self, u: &ControlInputs) -> ModelParams {
        ModelParams {
            gamma: self.gamma,
            beta_h: self.beta_h - u.u2,
            beta_v: self.beta_v,
            omega: self.omega,
            mu: self.mu + u.u1,
        }
    }
}

/// Intervention intensities: `u1` is extra vector mortality, `u2` is the
/// reduction of the human contagion rate. Validation is joint with the
/// paired parameters because `u2` may not exceed `beta_h`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInputs {
    u1: f64,
    u2: f64,
}

impl ControlInputs {
    /// No intervention.
    pub const NONE: ControlInputs = ControlInputs { u1: 0.0, u2: 0.0 };

    pub fn new(p: &ModelParams, u1: f64, u2: f64) -> Result<Self, ModelError> {
        if !u1.is_finite() || u1 < 0.0 {
            return Err(ModelError::InvalidControl { name: "u1", value: u1 });
        }
        if !u2.is_finite() || u2 < 0.0 {
            return Err(ModelError::InvalidControl { name: "u2", value: u2 });
        }
        let u = ControlInputs { u1, u2 };
        u.validate_for(p)?;
        Ok(u)
    }

    pub fn u1(&self) -> f64 {
        self.u1
    }

    pub fn u2(&self) -> f64 {
        self.u2
    }

    /// Checks admissibility against a parameter set (`u2 <= beta_h`).
    pub fn validate_for(&self, p: &ModelParams) -> Result<(), ModelError> {
        if self.u2 > p.beta_h {
            return Err(ModelError::ProtectionExceedsContagion {
                u2: self.u2,
                beta_h: p.beta_h,
            });
        }
        Ok(())
    }

    /// Effective vector death rate `mu + u1`.
    pub fn death_rate(&self, p: &ModelParams) -> f64 {
        p.mu + self.u1
    }

    /// Effective human contagion rate `beta_h - u2`.
    pub fn contagion_rate(&self, p: &ModelParams) -> f64 {
        p.beta_h - self.u2
    }

    /// Rest level `omega/(mu + u1)` of the total vector quantity under
    /// vector control.
    pub fn vector_rest_level(&self, p: &ModelParams) -> f64 {
        p.omega / (p.mu + self.u1)
    }
}

/// A point of the phase space `D`: infected human share `x` in `[0, 1]`,
/// non-carrier vector quantity `y >= 0`, carrier vector quantity `z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvState {
    x: f64,
    y: f64,
    z: f64,
}

impl HvState {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(ModelError::StateOutOfDomain {
                name: "x",
                requirement: "within [0, 1]",
                value: x,
            });
        }
        if !y.is_finite() || y < 0.0 {
            return Err(ModelError::StateOutOfDomain {
                name: "y",
                requirement: "non-negative and finite",
                value: y,
            });
        }
        if !z.is_finite() || z < 0.0 {
            return Err(ModelError::StateOutOfDomain {
                name: "z",
                requirement: "non-negative and finite",
                value: z,
            });
        }
        Ok(Self { x, y, z })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Total vector quantity `v = y + z`.
    pub fn vector_total(&self) -> f64 {
        self.y + self.z
    }

    /// Auxiliary coordinates `(x, z, v)` with `v = y + z`.
    pub fn to_aux(&self) -> AuxState {
        AuxState {
            x: self.x,
            z: self.z,
            v: self.y + self.z,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// A point in the auxiliary coordinates `(x, z, v)`, `v` being the total
/// vector quantity. Validation enforces `0 <= z <= v`, so conversion back
/// to `(x, y, z)` never produces a negative `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxState {
    x: f64,
    z: f64,
    v: f64,
}

impl AuxState {
    pub fn new(x: f64, z: f64, v: f64) -> Result<Self, ModelError> {
        if !x.is_finite() || !(0.0..=1.0).contains(&x) {
            return Err(ModelError::StateOutOfDomain {
                name: "x",
                requirement: "within [0, 1]",
                value: x,
            });
        }
        if !z.is_finite() || z < 0.0 {
            return Err(ModelError::StateOutOfDomain {
                name: "z",
                requirement: "non-negative and finite",
                value: z,
            });
        }
        if !v.is_finite() || z > v {
            return Err(ModelError::CarrierExceedsTotal { z, v });
        }
        Ok(Self { x, z, v })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Back to the native coordinates, `y = v - z`.
    pub fn to_hv(&self) -> HvState {
        HvState {
            x: self.x,
            y: self.v - self.z,
            z: self.z,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.z, self.v]
    }
}

/// Time-derivative triple, ordered like the state it was computed from:
/// `(x', y', z')` for [`HvState`], `(x', z', v')` for [`AuxState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative3(pub [f64; 3]);

impl Derivative3 {
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl std::ops::Index<usize> for Derivative3 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-major 3x3 matrix, used for Jacobians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix3(pub [[f64; 3]; 3]);

impl Matrix3 {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Sum of the three principal 2x2 minors (the second coefficient of the
    /// characteristic polynomial).
    pub fn principal_minor_sum(&self) -> f64 {
        let m = &self.0;
        (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            + (m[0][0] * m[2][2] - m[0][2] * m[2][0])
            + (m[0][0] * m[1][1] - m[0][1] * m[1][0])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry magnitude; the scale used for residual tolerances.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |m, &e| m.max(e.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|e| e.is_finite())
    }
}

pub(crate) fn hv_field_raw(p: &ModelParams, u: &ControlInputs, s: [f64; 3]) -> [f64; 3] {
    let b = p.beta_h - u.u2;
    let m = p.mu + u.u1;
    let [x, y, z] = s;
    [
        -p.gamma * x + b * (1.0 - x) * z,
        p.omega - m * y - p.beta_v * x * y,
        p.beta_v * x * y - m * z,
    ]
}

pub(crate) fn aux_field_raw(p: &ModelParams, u: &ControlInputs, s: [f64; 3]) -> [f64; 3] {
    let b = p.beta_h - u.u2;
    let m = p.mu + u.u1;
    let [x, z, v] = s;
    [
        -p.gamma * x + b * (1.0 - x) * z,
        p.beta_v * x * (v - z) - m * z,
        p.omega - m * v,
    ]
}

/// Controlled vector field at a state in the native coordinates.
pub fn vector_field(
    p: &ModelParams,
    u: &ControlInputs,
    s: &HvState,
) -> Result<Derivative3, ModelError> {
    u.validate_for(p)?;
    let d = Derivative3(hv_field_raw(p, u, s.as_array()));
    debug_assert!(d.is_finite());
    Ok(d)
}

/// Controlled vector field in the auxiliary coordinates `(x, z, v)`:
///
/// ```text
/// x' = -gamma x + (beta_h - u2)(1 - x) z
/// z' = beta_v x (v - z) - (mu + u1) z
/// v' = omega - (mu + u1) v
/// ```
pub fn aux_vector_field(
    p: &ModelParams,
    u: &ControlInputs,
    s: &AuxState,
) -> Result<Derivative3, ModelError> {
    u.validate_for(p)?;
    let d = Derivative3(aux_field_raw(p, u, s.as_array()));
    debug_assert!(d.is_finite());
    Ok(d)
}

/// Jacobian of the controlled field at a state in the native coordinates.
///
/// With `b = beta_h - u2` and `m = mu + u1` the rows are
///
/// ```text
/// [ -gamma - b z,   0,          b (1 - x) ]
/// [ -beta_v y,     -m - beta_v x,   0     ]
/// [  beta_v y,      beta_v x,      -m     ]
/// ```
pub fn jacobian(p: &ModelParams, u: &ControlInputs, s: &HvState) -> Result<Matrix3, ModelError> {
    u.validate_for(p)?;
    let b = p.beta_h - u.u2;
    let m = p.mu + u.u1;
    let (x, y, z) = (s.x, s.y, s.z);
    Ok(Matrix3([
        [-p.gamma - b * z, 0.0, b * (1.0 - x)],
        [-p.beta_v * y, -m - p.beta_v * x, 0.0],
        [p.beta_v * y, p.beta_v * x, -m],
    ]))
}

/// Jacobian of the controlled field in the auxiliary coordinates. Its
/// off-diagonal entries are non-negative everywhere on the domain (the flow
/// is cooperative), which the rows make visible:
///
/// ```text
/// [ -gamma - b z,    b (1 - x),   0        ]
/// [  beta_v (v - z), -beta_v x - m, beta_v x ]
/// [  0,              0,           -m       ]
/// ```
pub fn aux_jacobian(
    p: &ModelParams,
    u: &ControlInputs,
    s: &AuxState,
) -> Result<Matrix3, ModelError> {
    u.validate_for(p)?;
    let b = p.beta_h - u.u2;
    let m = p.mu + u.u1;
    let (x, z, v) = (s.x, s.z, s.v);
    Ok(Matrix3([
        [-p.gamma - b * z, b * (1.0 - x), 0.0],
        [p.beta_v * (v - z), -p.beta_v * x - m, p.beta_v * x],
        [0.0, 0.0, -m],
    ]))
}

/// Location of a point relative to the split of the domain along the shell
/// `y + z = omega/mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionTag {
    /// Inside `D1`: total vector quantity below the rest level.
    D1,
    /// Inside `D2`: total vector quantity above the rest level.
    D2,
    /// On the shared shell `y + z = omega/mu` (within [`BOUNDARY_TOL`]).
    Shell,
    /// Not in the domain at all.
    Outside,
}

/// Classifies raw coordinates `(x, y, z)` against the domain split. Points
/// outside `D` (negative components or `x > 1`, beyond [`BOUNDARY_TOL`])
/// are tagged [`RegionTag::Outside`].
pub fn domain_membership(x: f64, y: f64, z: f64, p: &ModelParams) -> RegionTag {
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return RegionTag::Outside;
    }
    if x < -BOUNDARY_TOL || x > 1.0 + BOUNDARY_TOL || y < -BOUNDARY_TOL || z < -BOUNDARY_TOL {
        return RegionTag::Outside;
    }
    let total = y + z;
    let rest = p.vector_rest_level();
    if (total - rest).abs() <= BOUNDARY_TOL {
        RegionTag::Shell
    } else if total < rest {
        RegionTag::D1
    } else {
        RegionTag::D2
    }
}

/// [`domain_membership`] in the auxiliary coordinates `(x, z, v)`.
pub fn aux_domain_membership(x: f64, z: f64, v: f64, p: &ModelParams) -> RegionTag {
    if !(x.is_finite() && z.is_finite() && v.is_finite()) {
        return RegionTag::Outside;
    }
    if x < -BOUNDARY_TOL
        || x > 1.0 + BOUNDARY_TOL
        || z < -BOUNDARY_TOL
        || v < -BOUNDARY_TOL
        || z > v + BOUNDARY_TOL
    {
        return RegionTag::Outside;
    }
    let rest = p.vector_rest_level();
    if (v - rest).abs() <= BOUNDARY_TOL {
        RegionTag::Shell
    } else if v < rest {
        RegionTag::D1
    } else {
        RegionTag::D2
    }
}

/// Boundary faces of the split domain parts `D1` and `D2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    /// `x = 0`, no infected humans.
    NoInfection,
    /// `x = 1`, everyone infected.
    FullInfection,
    /// `y = 0`, no non-carrier vectors.
    NoSusceptibleVectors,
    /// `z = 0`, no carrier vectors.
    NoCarriers,
    /// `y + z = omega/(mu + u1)`, the shell shared by `D1` and `D2`.
    VectorShell,
}

/// Signed component of the field along a face's outward normal; a value
/// `<= 0` means the flow does not leave through that face. For
/// [`Face::VectorShell`] the reported direction is outward from `D1`
/// (increasing `y + z`); the flow is tangent there, so the component
/// vanishes up to rounding and the sign convention carries no content.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFlow {
    pub face: Face,
    pub outward_component: f64,
}

/// Evaluates the outward flow on every face the state lies on (within
/// [`BOUNDARY_TOL`]). Errors if the state is on no face: interior states
/// have nothing to check.
pub fn boundary_flow_check(
    p: &ModelParams,
    u: &ControlInputs,
    s: &HvState,
) -> Result<Vec<FaceFlow>, ModelError> {
    u.validate_for(p)?;
    let d = hv_field_raw(p, u, s.as_array());
    let mut flows = Vec::new();
    if s.x.abs() <= BOUNDARY_TOL {
        flows.push(FaceFlow {
            face: Face::NoInfection,
            outward_component: -d[0],
        });
    }
    if (s.x - 1.0).abs() <= BOUNDARY_TOL {
        flows.push(FaceFlow {
            face: Face::FullInfection,
            outward_component: d[0],
        });
    }
    if s.y.abs() <= BOUNDARY_TOL {
        flows.push(FaceFlow {
            face: Face::NoSusceptibleVectors,
            outward_component: -d[1],
        });
    }
    if s.z.abs() <= BOUNDARY_TOL {
        flows.push(FaceFlow {
            face: Face::NoCarriers,
            outward_component: -d[2],
        });
    }
    let rest = u.vector_rest_level(p);
    if (s.y + s.z - rest).abs() <= BOUNDARY_TOL {
        flows.push(FaceFlow {
            face: Face::VectorShell,
            outward_component: d[1] + d[2],
        });
    }
    if flows.is_empty() {
        return Err(ModelError::NotOnBoundary {
            x: s.x,
            y: s.y,
            z: s.z,
        });
    }
    Ok(flows)
}
