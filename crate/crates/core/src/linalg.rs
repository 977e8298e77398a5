//! Dense symmetric solves for the small normal-equation systems of the
//! surrogate fits.

/// Outcome of a failed factorization: the first column whose pivot fell
/// below the tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Singular {
    pub column: usize,
    pub pivot: f64,
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major, p × p)
/// by Cholesky factorization. A pivot `<= tol` (or non-finite) is reported
/// as [`Singular`].
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64], tol: f64) -> Result<Vec<f64>, Singular> {
    let p = b.len();
    debug_assert_eq!(a.len(), p * p);
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !d.is_finite() || d <= tol {
            return Err(Singular {
                column: j,
                pivot: d,
            });
        }
        let djj = d.sqrt();
        l[j * p + j] = djj;
        for i in (j + 1)..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / djj;
        }
    }
    // forward: L y = b
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    // backward: L^T x = y
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Ok(x)
}
