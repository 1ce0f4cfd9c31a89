//! Optimal-velocity car-following dynamics, equilibria and linearization.
//!
//! An HDV accelerates as `alpha * (V(s) - v) + beta * s_dot`, where the
//! desired velocity `V(s)` is a cosine ramp between the standstill spacing
//! `s_st` and the free-flow spacing `s_go`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LccError, Result};

/// OVM parameters of one human driver. Missing fields take the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverParams {
    /// Headway gain, 1/s.
    pub alpha: f64,
    /// Relative-velocity gain, 1/s.
    pub beta: f64,
    /// Maximum desired velocity, m/s.
    pub v_max: f64,
    /// Standstill spacing, m.
    pub s_st: f64,
    /// Free-flow spacing, m.
    pub s_go: f64,
    /// Reaction delay, s.
    pub delay: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta: 0.9,
            v_max: 30.0,
            s_st: 5.0,
            s_go: 35.0,
            delay: 0.0,
        }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.beta > 0.0
            && self.v_max > 0.0
            && self.s_st >= 0.0
            && self.s_st < self.s_go
            && self.delay >= 0.0
            && [self.alpha, self.beta, self.v_max, self.s_st, self.s_go, self.delay]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(LccError::InvalidParams(format!("{self:?}")))
        }
    }

    fn ramp_phase(&self, s: f64) -> f64 {
        PI * (s - self.s_st) / (self.s_go - self.s_st)
    }
}

/// Uniform-flow operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Equilibrium velocity, m/s.
    pub v_star: f64,
    /// Equilibrium spacing, m.
    pub s_star: f64,
}

/// Coefficients of the linearized car-following model
/// `s~' = v~_{i-1} - v~_i`, `v~' = a1 s~ - a2 v~ + a3 v~_{i-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCoeffs {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub equilibrium: Equilibrium,
}

impl LinearCoeffs {
    /// Builds coefficients directly, enforcing `alpha1 > 0` and `alpha2 > alpha3 > 0`.
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64, equilibrium: Equilibrium) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > alpha3 && alpha3 > 0.0) {
            return Err(LccError::InvalidParams(format!(
                "linear coefficients must satisfy a1 > 0, a2 > a3 > 0 (got {alpha1}, {alpha2}, {alpha3})"
            )));
        }
        Ok(Self {
            alpha1,
            alpha2,
            alpha3,
            equilibrium,
        })
    }

    /// Coefficients of the default driver at `v* = 15 m/s`.
    pub fn nominal() -> Self {
        let p = DriverParams::default();
        let eq = equilibrium_spacing(15.0, &p).expect("nominal equilibrium");
        linearize(&eq, &p).expect("nominal linearization")
    }
}

/// Spacing-dependent desired velocity `V(s)`.
pub fn desired_velocity(s: f64, p: &DriverParams) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(LccError::Domain(format!("spacing must be >= 0, got {s}")));
    }
    Ok(if s <= p.s_st {
        0.0
    } else if s >= p.s_go {
        p.v_max
    } else {
        0.5 * p.v_max * (1.0 - p.ramp_phase(s).cos())
    })
}

/// Derivative of `V(s)`; zero outside the open ramp.
pub fn desired_velocity_slope(s: f64, p: &DriverParams) -> f64 {
    if s <= p.s_st || s >= p.s_go {
        0.0
    } else {
        0.5 * p.v_max * PI / (p.s_go - p.s_st) * p.ramp_phase(s).sin()
    }
}

/// OVM acceleration `alpha (V(s) - v) + beta s_dot`.
pub fn ovm_acceleration(s: f64, s_dot: f64, v: f64, p: &DriverParams) -> Result<f64> {
    Ok(p.alpha * (desired_velocity(s, p)? - v) + p.beta * s_dot)
}

/// Equilibrium spacing for a given velocity via the closed-form inverse of
/// the cosine ramp. Saturated velocities map to `s_st` and `s_go`.
pub fn equilibrium_spacing(v_star: f64, p: &DriverParams) -> Result<Equilibrium> {
    check_velocity(v_star, p)?;
    let s_star = if v_star == 0.0 {
        p.s_st
    } else if v_star == p.v_max {
        p.s_go
    } else {
        let c = (1.0 - 2.0 * v_star / p.v_max).clamp(-1.0, 1.0);
        p.s_st + (p.s_go - p.s_st) * c.acos() / PI
    };
    Ok(Equilibrium { v_star, s_star })
}

/// Equilibrium spacing by bisection on `V(s) = v*`.
///
/// Works for any continuous nondecreasing desired-velocity profile; kept next
/// to the closed form so alternative ramps can reuse it.
pub fn equilibrium_spacing_bisect(v_star: f64, p: &DriverParams) -> Result<Equilibrium> {
    check_velocity(v_star, p)?;
    if v_star == 0.0 {
        return Ok(Equilibrium { v_star, s_star: p.s_st });
    }
    if v_star == p.v_max {
        return Ok(Equilibrium { v_star, s_star: p.s_go });
    }
    let s_star = invert_monotone(|s| desired_velocity(s, p).unwrap_or(0.0), v_star, p.s_st, p.s_go, 1e-13);
    Ok(Equilibrium { v_star, s_star })
}

/// Solves `f(x) = target` for nondecreasing `f` on `[lo, hi]` by bisection.
pub fn invert_monotone(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_velocity(v_star: f64, p: &DriverParams) -> Result<()> {
    p.validate()?;
    if !(0.0..=p.v_max).contains(&v_star) {
        return Err(LccError::Domain(format!(
            "equilibrium velocity {v_star} outside [0, {}]",
            p.v_max
        )));
    }
    Ok(())
}

/// Linearizes the OVM around an interior equilibrium.
pub fn linearize(eq: &Equilibrium, p: &DriverParams) -> Result<LinearCoeffs> {
    p.validate()?;
    if !(eq.s_star > p.s_st && eq.s_star < p.s_go) {
        return Err(LccError::Domain(format!(
            "equilibrium spacing {} is not inside the ramp ({}, {}); alpha1 would vanish",
            eq.s_star, p.s_st, p.s_go
        )));
    }
    let alpha1 = p.alpha * desired_velocity_slope(eq.s_star, p);
    LinearCoeffs::new(alpha1, p.alpha + p.beta, p.beta, *eq)
}

/// Shorthand for `linearize(equilibrium_spacing(v*))`.
pub fn coeffs_at(v_star: f64, p: &DriverParams) -> Result<LinearCoeffs> {
    linearize(&equilibrium_spacing(v_star, p)?, p)
}
