//! Controllability, observability and control-energy analysis.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LccError, Result};
use crate::linalg::{eigenvalues, expm, krylov_basis, orthonormal_complement, relative_sigma_min};
use crate::system::{build_system, IndexMap, StateSpaceModel, SystemVariant};
use crate::vehicle::LinearCoeffs;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Default Gramian integration step, s.
pub const DEFAULT_GRAMIAN_DT: f64 = 0.01;
/// `W` counts as singular once `lambda_min < SINGULAR_RATIO * lambda_max`.
pub const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    /// Verdict of the per-eigenvalue PBH test.
    pub controllable: bool,
    /// Dimension of the reachable subspace (rank of `[B, AB, ...]`).
    pub controllable_dim: usize,
    pub state_dim: usize,
    /// Spectrum of `A` restricted to the uncontrollable quotient.
    pub uncontrollable_mode_eigenvalues: Vec<Complex64>,
    /// `a1 - a2 a3 + a3²` when the coefficients are known.
    pub condition_value: Option<f64>,
}

impl ControllabilityReport {
    pub fn rank_verdict(&self) -> bool {
        self.controllable_dim == self.state_dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub observable: bool,
    pub observable_dim: usize,
    pub state_dim: usize,
    /// State rows whose unit vectors lie in the unobservable subspace.
    pub unobservable_states: Vec<usize>,
    /// Vehicles all of whose states are unobservable (filled by [`observability_of`]).
    pub unobservable_vehicle_ids: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianResult {
    pub w: DMatrix<f64>,
    pub t_horizon: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `trace(W^-1)`, or `None` when `W` is numerically singular.
    pub trace_inv: Option<f64>,
}

/// Controllability condition `a1 - a2 a3 + a3²`; nonzero means controllable.
pub fn condition_check(c: &LinearCoeffs) -> f64 {
    c.alpha1 - c.alpha2 * c.alpha3 + c.alpha3 * c.alpha3
}

fn as_columns(b: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(b.len(), 1, b.as_slice())
}

/// PBH test plus reachable-subspace dimension for `(A, B)`.
///
/// `B` may have several columns. Fails if the two verdicts disagree.
pub fn pbh_controllability(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<ControllabilityReport> {
    let dim = a.nrows();
    if a.ncols() != dim || b.nrows() != dim {
        return Err(LccError::Numerical(format!(
            "non-conforming pair: A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let eig = eigenvalues(a)?;
    let p = b.ncols();
    let mut pbh_ok = true;
    for lam in &eig {
        let mut m = DMatrix::<Complex64>::zeros(dim, dim + p);
        for i in 0..dim {
            for j in 0..dim {
                let diag = if i == j { *lam } else { Complex64::new(0.0, 0.0) };
                m[(i, j)] = diag - a[(i, j)];
            }
            for j in 0..p {
                m[(i, dim + j)] = Complex64::new(b[(i, j)], 0.0);
            }
        }
        if relative_sigma_min(&m) <= tol.max(dim as f64 * f64::EPSILON) {
            pbh_ok = false;
            break;
        }
    }

    let qc = krylov_basis(a, b, tol);
    let controllable_dim = qc.ncols();
    let uncontrollable_mode_eigenvalues = if controllable_dim < dim {
        let qu = orthonormal_complement(&qc);
        eigenvalues(&(qu.transpose() * a * &qu))?
    } else {
        Vec::new()
    };

    if pbh_ok != (controllable_dim == dim) {
        return Err(LccError::Numerical(format!(
            "PBH verdict ({pbh_ok}) disagrees with rank test (dim {controllable_dim} of {dim})"
        )));
    }
    Ok(ControllabilityReport {
        controllable: pbh_ok,
        controllable_dim,
        state_dim: dim,
        uncontrollable_mode_eigenvalues,
        condition_value: None,
    })
}

/// Controllability of a model's `(A, B)` with the coefficient condition attached.
pub fn controllability_of(model: &StateSpaceModel, tol: f64) -> Result<ControllabilityReport> {
    let mut r = pbh_controllability(&model.a, &as_columns(&model.b), tol)?;
    r.condition_value = Some(condition_check(&model.coeffs));
    Ok(r)
}

/// Observability of `(A, C)` through the dual pair `(Aᵀ, Cᵀ)`.
pub fn pbh_observability(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64) -> Result<ObservabilityReport> {
    let dual = pbh_controllability(&a.transpose(), &c.transpose(), tol)?;
    let qo = krylov_basis(&a.transpose(), &c.transpose(), tol);
    let dim = a.nrows();
    let unobservable_states = (0..dim)
        .filter(|&i| qo.row(i).norm() < 1e-6)
        .collect();
    Ok(ObservabilityReport {
        observable: dual.controllable,
        observable_dim: dual.controllable_dim,
        state_dim: dim,
        unobservable_states,
        unobservable_vehicle_ids: Vec::new(),
    })
}

/// Observability of a model under output matrix `c`, with vehicle ids resolved.
pub fn observability_of(model: &StateSpaceModel, c: &DMatrix<f64>, tol: f64) -> Result<ObservabilityReport> {
    let mut r = pbh_observability(&model.a, c, tol)?;
    r.unobservable_vehicle_ids = unobservable_vehicles(&model.index, &r.unobservable_states);
    Ok(r)
}

fn unobservable_vehicles(index: &IndexMap, states: &[usize]) -> Vec<i32> {
    index
        .vehicles()
        .filter(|&v| {
            let (s, vel) = index.vehicle_rows(v).expect("listed vehicle");
            states.contains(&s) && states.contains(&vel)
        })
        .collect()
}

/// Output matrix for a CAV that measures the velocity error of vehicle `k`.
///
/// FD/CF-LCC: one row selecting `v~_k`. General LCC: three rows selecting
/// `s~_0`, `v~_0` and `v~_k`.
pub fn build_output_matrix(model: &StateSpaceModel, k: i32) -> Result<DMatrix<f64>> {
    if k < 1 || k > model.n as i32 {
        return Err(LccError::Domain(format!(
            "measured vehicle {k} outside 1..={}",
            model.n
        )));
    }
    let (_, vk) = model.index.vehicle_rows(k).expect("follower in model");
    let dim = model.dim();
    let rows: Vec<usize> = match model.variant {
        SystemVariant::FdLcc | SystemVariant::CfLcc => vec![vk],
        SystemVariant::GeneralLcc => {
            let (s0, v0) = model.index.vehicle_rows(0).expect("CAV");
            vec![s0, v0, vk]
        }
        SystemVariant::Ccc => unreachable!("CCC has n = 0"),
    };
    Ok(selection(dim, &rows))
}

/// Output matrix measuring only the CAV's own two states.
pub fn cav_output_matrix(model: &StateSpaceModel) -> DMatrix<f64> {
    let (s0, v0) = model.index.vehicle_rows(0).expect("CAV");
    selection(model.dim(), &[s0, v0])
}

fn selection(dim: usize, rows: &[usize]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(rows.len(), dim);
    for (r, &col) in rows.iter().enumerate() {
        c[(r, col)] = 1.0;
    }
    c
}

/// Finite-horizon controllability Gramian.
///
/// Integrates `W' = A W + W Aᵀ + B Bᵀ`, `W(0) = 0` with classical RK4.
pub fn gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64, dt: f64) -> Result<GramianResult> {
    if !(t > 0.0 && dt > 0.0) {
        return Err(LccError::Domain(format!("horizon {t} and step {dt} must be positive")));
    }
    let dim = a.nrows();
    let steps = (t / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let q = b * b.transpose();
    let at = a.transpose();
    let rhs = |w: &DMatrix<f64>| a * w + w * &at + &q;
    let mut w = DMatrix::zeros(dim, dim);
    for _ in 0..steps {
        let k1 = rhs(&w);
        let k2 = rhs(&(&w + &k1 * (h / 2.0)));
        let k3 = rhs(&(&w + &k2 * (h / 2.0)));
        let k4 = rhs(&(&w + &k3 * h));
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let w = (&w + w.transpose()) * 0.5;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(LccError::Numerical("gramian has non-finite entries".into()));
    }
    let eig = w.clone().symmetric_eigen().eigenvalues;
    let lambda_min = eig.min();
    let lambda_max = eig.max();
    let trace_inv = if lambda_min > SINGULAR_RATIO * lambda_max {
        Some(eig.iter().map(|l| 1.0 / l).sum())
    } else {
        None
    };
    Ok(GramianResult {
        w,
        t_horizon: t,
        lambda_min,
        lambda_max,
        trace_inv,
    })
}

/// Minimum input energy to steer `x0` to `x_tar` in time `t`.
pub fn min_energy(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    t: f64,
    x0: &DVector<f64>,
    x_tar: &DVector<f64>,
    dt: f64,
) -> Result<f64> {
    let g = gramian(a, b, t, dt)?;
    if g.trace_inv.is_none() || g.lambda_min <= 0.0 {
        return Err(LccError::SingularGramian { lambda_min: g.lambda_min });
    }
    let d = x_tar - expm(a, t) * x0;
    let chol = g
        .w
        .clone()
        .cholesky()
        .ok_or(LccError::SingularGramian { lambda_min: g.lambda_min })?;
    let y = chol.solve(&d);
    Ok(d.dot(&y).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRow {
    pub n: usize,
    pub t: f64,
    pub lambda_min: f64,
    pub trace_inv: Option<f64>,
}

/// Gramian metrics over a grid of platoon sizes and horizons.
///
/// Rows come back ordered by `(n, t)` regardless of evaluation order.
pub fn energy_scaling_study(
    variant: SystemVariant,
    coeffs: LinearCoeffs,
    n_range: &[usize],
    t_list: &[f64],
    dt: f64,
) -> Result<Vec<EnergyRow>> {
    if n_range.is_empty() {
        return Err(LccError::Domain("empty n range".into()));
    }
    if !matches!(variant, SystemVariant::FdLcc | SystemVariant::CfLcc) {
        return Err(LccError::Topology(format!(
            "energy study needs a single-input chain without HDVs ahead, got {variant}"
        )));
    }
    let tasks: Vec<(usize, f64)> = n_range
        .iter()
        .flat_map(|&n| t_list.iter().map(move |&t| (n, t)))
        .collect();
    let mut rows = tasks
        .par_iter()
        .map(|&(n, t)| {
            let sys = build_system(variant, 0, n, coeffs)?;
            let g = gramian(&sys.a, &as_columns(&sys.b), t, dt)?;
            Ok(EnergyRow {
                n,
                t,
                lambda_min: g.lambda_min,
                trace_inv: g.trace_inv,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|x, y| x.n.cmp(&y.n).then(x.t.total_cmp(&y.t)));
    Ok(rows)
}

/// Writes `n,t,lambda_min,trace_inv`; `trace_inv` is blank when singular.
pub fn write_energy_csv<W: Write>(rows: &[EnergyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "t", "lambda_min", "trace_inv"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.t.to_string(),
            format!("{:e}", r.lambda_min),
            r.trace_inv.map(|x| format!("{x:e}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| LccError::Output(e.to_string()))?;
    Ok(())
}

/// `(A, B)` of a model with `B` as a one-column matrix.
pub fn model_pair(model: &StateSpaceModel) -> (DMatrix<f64>, DMatrix<f64>) {
    (model.a.clone(), as_columns(&model.b))
}
