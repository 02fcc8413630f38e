//! Dense least-squares helpers on `ndarray` types.
//!
//! Everything here solves small-to-medium normal equations with a plain
//! Cholesky factorization. The ridge variant adds a fixed diagonal bump and
//! is the fallback the forecasting layer uses when a design is collinear.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Cholesky factorization of a symmetric positive definite matrix.
/// Returns the lower factor L with A = L L^T, or an error when a pivot
/// collapses (singular or indefinite input).
pub fn cholesky(a: &Array2<f64>, context: &str) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Domain {
            msg: format!("cholesky needs a square matrix, got {}x{}", n, a.ncols()),
        });
    }
    let max_diag = (0..n).map(|i| a[[i, i]].abs()).fold(0.0_f64, f64::max);
    let tol = 1e-12 * max_diag.max(1.0);
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > tol) {
            return Err(Error::SingularDesign {
                context: context.to_string(),
            });
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / dj;
        }
    }
    Ok(l)
}

/// Solve A x = b for multiple right-hand sides given the lower Cholesky
/// factor of A.
pub fn cholesky_solve(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let k = b.ncols();
    let mut x = b.clone();
    // forward substitution L y = b
    for col in 0..k {
        for i in 0..n {
            let mut s = x[[i, col]];
            for j in 0..i {
                s -= l[[i, j]] * x[[j, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
        // back substitution L^T x = y
        for i in (0..n).rev() {
            let mut s = x[[i, col]];
            for j in (i + 1)..n {
                s -= l[[j, i]] * x[[j, col]];
            }
            x[[i, col]] = s / l[[i, i]];
        }
    }
    x
}

/// Solve equilibrated normal equations XtX beta = XtY. Scaling the system
/// to unit diagonal first makes the singularity test scale-free: an exactly
/// collinear design produces a pivot at rounding level regardless of the
/// magnitude of the regressors.
fn solve_normal_equations(
    xtx: &Array2<f64>,
    xty: &Array2<f64>,
    context: &str,
) -> Result<Array2<f64>> {
    let k = xtx.nrows();
    let mut scale = Vec::with_capacity(k);
    for i in 0..k {
        let d = xtx[[i, i]];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularDesign {
                context: context.to_string(),
            });
        }
        scale.push(d.sqrt());
    }
    let mut c = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            c[[i, j]] = xtx[[i, j]] / (scale[i] * scale[j]);
        }
    }
    // unit diagonal: a fixed pivot tolerance is meaningful
    let mut l = Array2::<f64>::zeros((k, k));
    for j in 0..k {
        let mut d = c[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > 1e-10) {
            return Err(Error::SingularDesign {
                context: context.to_string(),
            });
        }
        let dj = d.sqrt();
        l[[j, j]] = dj;
        for i in (j + 1)..k {
            let mut s = c[[i, j]];
            for p in 0..j {
                s -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = s / dj;
        }
    }
    let mut rhs = xty.clone();
    for i in 0..k {
        for col in 0..rhs.ncols() {
            rhs[[i, col]] /= scale[i];
        }
    }
    let mut z = cholesky_solve(&l, &rhs);
    for i in 0..k {
        for col in 0..z.ncols() {
            z[[i, col]] /= scale[i];
        }
    }
    Ok(z)
}

/// Ordinary least squares of `targets` on `design` via normal equations.
/// Returns the coefficient matrix (design columns x target columns).
pub fn ols(design: ArrayView2<f64>, targets: ArrayView2<f64>, context: &str) -> Result<Array2<f64>> {
    let xtx = design.t().dot(&design);
    let xty = design.t().dot(&targets);
    solve_normal_equations(&xtx, &xty, context)
}

/// Ridge-stabilized least squares. `lambda` is applied relative to the mean
/// normal-equation diagonal so the same fixed constant stabilizes designs
/// of any magnitude.
pub fn ols_ridge(
    design: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    lambda: f64,
    context: &str,
) -> Result<Array2<f64>> {
    let mut xtx = design.t().dot(&design);
    let k = xtx.nrows();
    let mean_diag = (0..k).map(|i| xtx[[i, i]]).sum::<f64>() / k as f64;
    let bump = lambda * mean_diag.max(1.0);
    for i in 0..k {
        xtx[[i, i]] += bump;
    }
    let xty = design.t().dot(&targets);
    solve_normal_equations(&xtx, &xty, context)
}

/// Single-target convenience wrapper around [`ols`].
pub fn ols_single(design: ArrayView2<f64>, target: ArrayView1<f64>, context: &str) -> Result<Array1<f64>> {
    let t = target
        .to_owned()
        .into_shape_with_order((target.len(), 1))
        .expect("column reshape");
    let beta = ols(design, t.view(), context)?;
    Ok(beta.column(0).to_owned())
}

/// Inverse of a symmetric positive definite matrix (used for VIF checks on
/// small correlation matrices).
pub fn spd_inverse(a: &Array2<f64>, context: &str) -> Result<Array2<f64>> {
    let n = a.nrows();
    let l = cholesky(a, context)?;
    let eye = Array2::<f64>::eye(n);
    Ok(cholesky_solve(&l, &eye))
}

/// General matrix inverse via Gauss-Jordan elimination with partial
/// pivoting.
pub fn invert(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Domain {
            msg: format!("invert needs a square matrix, got {}x{}", n, a.ncols()),
        });
    }
    let mut aug = Array2::<f64>::zeros((n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            aug[[i, j]] = a[[i, j]];
        }
        aug[[i, n + i]] = 1.0;
    }
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = aug[[col, col]].abs();
        for r in (col + 1)..n {
            let v = aug[[r, col]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < 1e-12 {
            return Err(Error::SingularDesign {
                context: "matrix inverse".to_string(),
            });
        }
        if pivot_row != col {
            for j in 0..2 * n {
                let tmp = aug[[col, j]];
                aug[[col, j]] = aug[[pivot_row, j]];
                aug[[pivot_row, j]] = tmp;
            }
        }
        let pivot = aug[[col, col]];
        for j in 0..2 * n {
            aug[[col, j]] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = aug[[r, col]];
            if f != 0.0 {
                for j in 0..2 * n {
                    aug[[r, j]] -= f * aug[[col, j]];
                }
            }
        }
    }
    let mut inv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            inv[[i, j]] = aug[[i, n + j]];
        }
    }
    Ok(inv)
}
