//! Small dense linear-algebra helpers shared by the analysis routines.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{LccError, Result};

/// Numerical rank: singular values above `max(rtol, dim * eps) * sigma_max`.
pub fn numerical_rank<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let dim = m.nrows().max(m.ncols()) as f64;
    let thresh = rtol.max(dim * f64::EPSILON) * smax;
    sv.iter().filter(|&&s| s > thresh).count()
}

/// Smallest singular value relative to the largest.
pub fn relative_sigma_min<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0.0;
    }
    // for a wide matrix the relevant count is the number of rows
    let k = m.nrows().min(m.ncols());
    let mut s: Vec<f64> = sv.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s[k - 1] / smax
}

/// Orthonormal basis of the Krylov space spanned by `B, AB, A²B, ...`.
///
/// Equivalent in exact arithmetic to the column space of the
/// controllability matrix, but built with twice-repeated Gram-Schmidt so
/// that badly scaled chains keep their rank.
pub fn krylov_basis(a: &DMatrix<f64>, b: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let dim = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let mut frontier: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();
    while !frontier.is_empty() && basis.len() < dim {
        let mut accepted = Vec::new();
        for cand in frontier {
            let norm0 = cand.norm();
            if norm0 == 0.0 {
                continue;
            }
            let mut r = cand;
            for _ in 0..2 {
                for q in &basis {
                    let proj = q.dot(&r);
                    r.axpy(-proj, q, 1.0);
                }
            }
            let nr = r.norm();
            if nr > rtol.max(dim as f64 * f64::EPSILON) * norm0 {
                let q = r / nr;
                basis.push(q.clone());
                accepted.push(q);
                if basis.len() == dim {
                    break;
                }
            }
        }
        frontier = accepted.iter().map(|q| a * q).collect();
    }
    if basis.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// Orthonormal basis of the orthogonal complement of the orthonormal columns `q`.
pub fn orthonormal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = q.nrows();
    let mut basis: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let start = basis.len();
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut r = DVector::zeros(dim);
        r[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&r);
                r.axpy(-proj, b, 1.0);
            }
        }
        let nr = r.norm();
        if nr > 1e-8 {
            basis.push(r / nr);
        }
    }
    let extra = &basis[start..];
    if extra.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(extra)
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.is_empty() {
        return Ok(Vec::new());
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(LccError::Numerical("matrix has non-finite entries".into()));
    }
    let ev = a.complex_eigenvalues();
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LccError::Numerical("eigenvalue iteration did not converge".into()));
    }
    Ok(ev.iter().copied().collect())
}

/// Largest real part among the eigenvalues.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Matrix exponential `e^{A t}`.
pub fn expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (a * t).exp()
}

/// Greedy nearest-neighbour matching of two eigenvalue multisets.
pub fn spectra_match(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    for x in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|(_, p), (_, q)| (*p - x).norm().total_cmp(&(*q - x).norm()));
        match best {
            Some((i, y)) if (y - x).norm() <= tol * (1.0 + x.norm()) => used[i] = true,
            _ => return false,
        }
    }
    true
}
