//! Closed-form orthogonal Procrustes alignment.
//!
//! `R = U Vᵀ` where `U Σ Vᵀ` is the SVD of `XᵀY`; this `R` minimizes
//! `‖XR − Y‖_F` over all orthogonal matrices, reflections included.
//! The SVD is a one-sided (Hestenes) Jacobi iteration.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Off-diagonal rotations below this relative size count as converged.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 60;

/// Thin SVD `M = U diag(σ) Vᵀ` with `r = min(p, q)`.
///
/// Singular values are descending. Each pair of singular vectors is signed
/// so the largest-magnitude entry of the `U` column is positive (lowest row
/// index on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    /// p×r, orthonormal columns.
    pub u: Array2<f64>,
    pub singular_values: Array1<f64>,
    /// q×r, orthonormal columns.
    pub v: Array2<f64>,
}

impl Svd {
    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.u * &self.singular_values.view().insert_axis(Axis(0));
        scaled.dot(&self.v.t())
    }
}

pub fn svd(m: ArrayView2<'_, f64>) -> Result<Svd> {
    let (p, q) = m.dim();
    if p == 0 || q == 0 {
        return Err(Error::ShapeMismatch(format!("cannot decompose a {p}x{q} matrix")));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("SVD input"));
    }

    let (u, singular_values, v) = if p >= q {
        tall_svd(m.to_owned())?
    } else {
        let (u, sv, v) = tall_svd(m.t().to_owned())?;
        (v, sv, u)
    };
    let mut result = Svd { u, singular_values, v };
    apply_sign_convention(&mut result);
    Ok(result)
}

/// SVD of a p×q matrix with p ≥ q; returns (U p×q, σ, V q×q) sorted by σ.
fn tall_svd(mut a: Array2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (p, q) = a.dim();
    let mut v = Array2::<f64>::eye(q);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let (alpha, beta, gamma) = {
                    let ci = a.column(i);
                    let cj = a.column(j);
                    (ci.dot(&ci), cj.dot(&cj), ci.dot(&cj))
                };
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, i, j, c, s);
                rotate_columns(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let norms: Vec<f64> = a.columns().into_iter().map(|c| c.dot(&c).sqrt()).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let sigma_max = norms[order[0]];
    let rank_floor = p.max(q) as f64 * f64::EPSILON * sigma_max;

    let mut u = Array2::<f64>::zeros((p, q));
    let mut sorted_v = Array2::<f64>::zeros((q, q));
    let mut sigma = Array1::<f64>::zeros(q);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        sigma[k] = norms[j];
        sorted_v.column_mut(k).assign(&v.column(j));
        if norms[j] > rank_floor && norms[j] > 0.0 {
            let col = a.column(j).mapv(|x| x / norms[j]);
            u.column_mut(k).assign(&col);
        } else {
            deficient.push(k);
        }
    }
    complete_orthonormal(&mut u, &deficient);
    Ok((u, sigma, sorted_v))
}

fn rotate_columns(m: &mut Array2<f64>, i: usize, j: usize, c: f64, s: f64) {
    for mut row in m.rows_mut() {
        let (x, y) = (row[i], row[j]);
        row[i] = c * x - s * y;
        row[j] = s * x + c * y;
    }
}

/// Fills columns `missing` of `u` with unit vectors orthogonal to every
/// other column, by Gram–Schmidt over the standard basis.
fn complete_orthonormal(u: &mut Array2<f64>, missing: &[usize]) {
    let (p, r) = u.dim();
    let mut filled: Vec<usize> = (0..r).filter(|k| !missing.contains(k)).collect();
    for &k in missing {
        let mut best: Option<(f64, Array1<f64>)> = None;
        for e in 0..p {
            let mut cand = Array1::<f64>::zeros(p);
            cand[e] = 1.0;
            // Two passes of projection keep the result orthogonal to rounding.
            for _ in 0..2 {
                for &f in &filled {
                    let col = u.column(f);
                    let proj = col.dot(&cand);
                    cand.scaled_add(-proj, &col);
                }
            }
            let norm = cand.dot(&cand).sqrt();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, cand));
            }
        }
        let (norm, cand) = best.expect("p >= 1");
        u.column_mut(k).assign(&cand.mapv(|x| x / norm));
        filled.push(k);
    }
}

fn apply_sign_convention(svd: &mut Svd) {
    for k in 0..svd.u.ncols() {
        let col = svd.u.column(k);
        let mut pivot = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            svd.u.column_mut(k).mapv_inplace(|x| -x);
            svd.v.column_mut(k).mapv_inplace(|x| -x);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesResult {
    /// d×d orthogonal map applied on the right: `X R ≈ Y`.
    pub r: Array2<f64>,
    /// `‖XR − Y‖_F`
    pub residual: f64,
}

pub fn orthogonal_procrustes(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<ProcrustesResult> {
    if x.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "X is {:?} but Y is {:?}",
            x.dim(),
            y.dim()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::InsufficientData("Procrustes needs at least one row".into()));
    }
    let decomposition = svd(x.t().dot(&y).view())?;
    let r = decomposition.u.dot(&decomposition.v.t());
    let residual = frobenius_error(x.dot(&r).view(), y)?;
    Ok(ProcrustesResult { r, residual })
}

/// `X R`
pub fn apply_map(x: ArrayView2<'_, f64>, r: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x.ncols() != r.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "X has {} columns but R has {} rows",
            x.ncols(),
            r.nrows()
        )));
    }
    Ok(x.dot(&r))
}

/// `‖A − B‖_F`
pub fn frobenius_error(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `‖MᵀM − I‖_F`, the orthonormality defect of the columns of `m`.
pub fn orthonormality_defect(m: ArrayView2<'_, f64>) -> f64 {
    let gram = m.t().dot(&m);
    let eye = Array2::<f64>::eye(gram.nrows());
    frobenius_error(gram.view(), eye.view()).expect("square")
}
