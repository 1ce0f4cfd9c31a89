//! Head-to-tail string stability of the CAV feedback law.
//!
//! The CAV follows its predecessor like an HDV and adds `mu_i s~_i + k_i v~_i`
//! for selected vehicles ahead (`i < 0`) and behind (`i > 0`). The transfer
//! function from head-vehicle velocity to tail velocity has a closed form
//! built from the HDV local transfer function `phi / gamma`; the state-space
//! route through the closed-loop model is kept as an independent check.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LccError, Result};
use crate::linalg::spectral_abscissa;
use crate::system::{build_system, closed_loop_matrix, FeedbackGains, StateSpaceModel, SystemVariant};
use crate::vehicle::LinearCoeffs;

/// `|Gamma|` must stay below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;
/// Closed-loop eigenvalues with real part above this are unstable.
pub const ASYMPTOTIC_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferSpec {
    pub m: usize,
    pub n: usize,
    pub coeffs: LinearCoeffs,
    pub gains: FeedbackGains,
}

impl TransferSpec {
    pub fn new(m: usize, n: usize, coeffs: LinearCoeffs, gains: FeedbackGains) -> Self {
        Self { m, n, coeffs, gains }
    }

    fn validate(&self) -> Result<()> {
        self.gains.check_range(self.m, self.n, false)
    }
}

/// Log-spaced frequency grid on `[omega_min, omega_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            omega_min: 1e-2,
            omega_max: 1e2,
            points: 1000,
        }
    }
}

impl FrequencyGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min && self.points >= 2) {
            return Err(LccError::Domain(format!("invalid frequency grid {self:?}")));
        }
        Ok(())
    }

    pub fn omegas(&self) -> Vec<f64> {
        let (lo, hi) = (self.omega_min.log10(), self.omega_max.log10());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / last))
            .collect()
    }
}

/// `phi(s) = a3 s + a1` and `gamma(s) = s² + a2 s + a1`.
pub fn phi_gamma(c: &LinearCoeffs, s: Complex64) -> (Complex64, Complex64) {
    let phi = s * c.alpha3 + c.alpha1;
    let gamma = s * s + s * c.alpha2 + c.alpha1;
    (phi, gamma)
}

/// Closed-form head-to-tail transfer function at an arbitrary complex `s`.
pub fn transfer_at(spec: &TransferSpec, s: Complex64) -> Result<Complex64> {
    spec.validate()?;
    let (phi, gamma) = phi_gamma(&spec.coeffs, s);
    let scale = 1.0 + s.norm_sqr();
    if gamma.norm() < 1e-12 * scale || phi.norm() < 1e-12 * scale {
        return Err(LccError::PoleOnAxis { omega: s.im });
    }
    let ratio = phi / gamma;
    let h = |i: i32| {
        let g = spec.gains.get(i);
        (gamma / phi - 1.0) * g.mu + s * g.k
    };
    let mut num = phi;
    for i in 1..=spec.m as i32 {
        num += h(-i) * ratio.powi(1 - i);
    }
    let mut den = gamma;
    for i in 1..=spec.n as i32 {
        den -= h(i) * ratio.powi(i);
    }
    if den.norm() < 1e-12 * scale {
        return Err(LccError::PoleOnAxis { omega: s.im });
    }
    Ok(num / den * ratio.powi((spec.n + spec.m) as i32))
}

/// `Gamma(j omega)` for `omega > 0`.
pub fn head_to_tail(spec: &TransferSpec, omega: f64) -> Result<Complex64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(LccError::Domain(format!("frequency must be positive, got {omega}")));
    }
    transfer_at(spec, Complex64::new(0.0, omega))
}

/// Closed-loop linear model carrying the head disturbance, chosen by topology:
/// general LCC when both sides are populated, CF-LCC with nobody ahead,
/// CCC with nobody behind.
pub fn closed_loop_model(spec: &TransferSpec) -> Result<(StateSpaceModel, DMatrix<f64>)> {
    spec.validate()?;
    let variant = match (spec.m, spec.n) {
        (0, 0) => {
            return Err(LccError::Topology("a platoon needs at least one HDV".into()));
        }
        (0, _) => SystemVariant::CfLcc,
        (_, 0) => SystemVariant::Ccc,
        _ => SystemVariant::GeneralLcc,
    };
    let model = build_system(variant, spec.m, spec.n, spec.coeffs)?;
    let acl = closed_loop_matrix(&model, &spec.gains)?;
    Ok((model, acl))
}

/// `Gamma(j omega)` through `e_tailᵀ (j omega I - A_cl)⁻¹ H`.
pub fn head_to_tail_state_space(spec: &TransferSpec, omega: f64) -> Result<Complex64> {
    let (model, acl) = closed_loop_model(spec)?;
    let h = model.h.as_ref().expect("model with head input");
    let dim = model.dim();
    let jw = Complex64::new(0.0, omega);
    let m = DMatrix::<Complex64>::from_fn(dim, dim, |i, j| {
        let d = if i == j { jw } else { Complex64::new(0.0, 0.0) };
        d - acl[(i, j)]
    });
    let rhs = DVector::<Complex64>::from_iterator(dim, h.iter().map(|&x| Complex64::new(x, 0.0)));
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or(LccError::PoleOnAxis { omega })?;
    Ok(x[dim - 1])
}

/// Whether every closed-loop eigenvalue has real part `<= ASYMPTOTIC_TOL`.
pub fn is_asymptotically_stable(spec: &TransferSpec) -> Result<bool> {
    let (_, acl) = closed_loop_model(spec)?;
    Ok(spectral_abscissa(&acl)? <= ASYMPTOTIC_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    /// `|Gamma| < 1` over the grid after peak refinement.
    pub stable: bool,
    pub peak_omega: f64,
    pub peak_mag: f64,
    pub asymptotically_stable: bool,
}

/// `|Gamma(j omega)|` over a set of frequencies.
pub fn magnitude_curve(spec: &TransferSpec, omegas: &[f64]) -> Result<Vec<(f64, f64)>> {
    omegas
        .iter()
        .map(|&w| head_to_tail(spec, w).map(|g| (w, g.norm())))
        .collect()
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..80 {
        if hi - lo < 1e-12 {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Head-to-tail string-stability verdict on a frequency grid.
pub fn is_string_stable(spec: &TransferSpec, grid: &FrequencyGrid) -> Result<StabilityVerdict> {
    grid.validate()?;
    let omegas = grid.omegas();
    let curve = magnitude_curve(spec, &omegas)?;
    let (imax, &(mut peak_omega, mut peak_mag)) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("grid has points");
    let lo = omegas[imax.saturating_sub(1)].log10();
    let hi = omegas[(imax + 1).min(omegas.len() - 1)].log10();
    let (x, mag) = golden_max(|x| Ok(head_to_tail(spec, 10f64.powf(x))?.norm()), lo, hi)?;
    if mag > peak_mag {
        peak_mag = mag;
        peak_omega = 10f64.powf(x);
    }
    Ok(StabilityVerdict {
        stable: peak_mag < 1.0 - STABILITY_MARGIN,
        peak_omega,
        peak_mag,
        asymptotically_stable: is_asymptotically_stable(spec)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainKind {
    Mu,
    K,
}

/// One scalar gain: the spacing (`mu`) or velocity (`k`) gain of a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainCoord {
    pub vehicle: i32,
    pub kind: GainKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainAxis {
    pub coord: GainCoord,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GainAxis {
    pub fn new(vehicle: i32, kind: GainKind, min: f64, max: f64, points: usize) -> Self {
        Self {
            coord: GainCoord { vehicle, kind },
            min,
            max,
            points,
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.points <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    StringStable,
    StringUnstable,
    AsympUnstable,
}

impl CellClass {
    pub fn code(self) -> &'static str {
        match self {
            CellClass::StringStable => "SS",
            CellClass::StringUnstable => "SU",
            CellClass::AsympUnstable => "AU",
        }
    }
}

/// Classification of a 2-D grid of gain values, row-major in `axis1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub axis1: GainAxis,
    pub axis2: GainAxis,
    pub cells: Vec<CellClass>,
}

impl RegionMap {
    pub fn get(&self, i: usize, j: usize) -> CellClass {
        self.cells[i * self.axis2.points + j]
    }

    pub fn count(&self, class: CellClass) -> usize {
        self.cells.iter().filter(|&&c| c == class).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, CellClass)> + '_ {
        self.cells.iter().enumerate().map(|(idx, &c)| {
            let (i, j) = (idx / self.axis2.points, idx % self.axis2.points);
            (self.axis1.value(i), self.axis2.value(j), c)
        })
    }
}

fn apply(gains: &mut FeedbackGains, coord: GainCoord, value: f64) {
    let g = gains.entry_mut(coord.vehicle);
    match coord.kind {
        GainKind::Mu => g.mu = value,
        GainKind::K => g.k = value,
    }
}

/// Classifies one gain set: asymptotically unstable, string stable or string unstable.
pub fn classify(spec: &TransferSpec, grid: &FrequencyGrid) -> Result<CellClass> {
    if !is_asymptotically_stable(spec)? {
        return Ok(CellClass::AsympUnstable);
    }
    let v = is_string_stable(spec, grid)?;
    Ok(if v.stable {
        CellClass::StringStable
    } else {
        CellClass::StringUnstable
    })
}

/// Scans two gain coordinates over a grid, holding the rest of `base` fixed.
pub fn scan_region(base: &TransferSpec, axis1: GainAxis, axis2: GainAxis, grid: &FrequencyGrid) -> Result<RegionMap> {
    if axis1.coord == axis2.coord {
        return Err(LccError::Domain("scan axes must be distinct gain coordinates".into()));
    }
    if axis1.points == 0 || axis2.points == 0 {
        return Err(LccError::Domain("scan axes need at least one point".into()));
    }
    grid.validate()?;
    base.validate()?;
    let mut probe = base.gains.clone();
    apply(&mut probe, axis1.coord, 0.0);
    apply(&mut probe, axis2.coord, 0.0);
    probe.check_range(base.m, base.n, false)?;

    let total = axis1.points * axis2.points;
    let cells = (0..total)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / axis2.points, idx % axis2.points);
            let mut spec = base.clone();
            apply(&mut spec.gains, axis1.coord, axis1.value(i));
            apply(&mut spec.gains, axis2.coord, axis2.value(j));
            classify(&spec, grid).unwrap_or_else(|e| {
                log::warn!("cell ({i}, {j}) classified unstable: {e}");
                CellClass::AsympUnstable
            })
        })
        .collect();
    Ok(RegionMap { axis1, axis2, cells })
}

/// Writes `axis1,axis2,class` with class in `SS`, `SU`, `AU`.
pub fn write_region_csv<W: Write>(map: &RegionMap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis1", "axis2", "class"])?;
    for (x, y, c) in map.iter() {
        w.write_record([x.to_string(), y.to_string(), c.code().to_string()])?;
    }
    w.flush().map_err(|e| LccError::Output(e.to_string()))?;
    Ok(())
}

/// Writes `omega,mag`.
pub fn write_magnitude_csv<W: Write>(curve: &[(f64, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["omega", "mag"])?;
    for (omega, mag) in curve {
        w.write_record([format!("{omega:e}"), format!("{mag:.12e}")])?;
    }
    w.flush().map_err(|e| LccError::Output(e.to_string()))?;
    Ok(())
}
