use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Reject `m` when it is numerically singular; returns `det m` otherwise.
///
/// For `1x1` the test is `|det| < tol`. For larger matrices the determinant
/// is divided by the product of column norms (the Hadamard bound), which
/// makes the test invariant to column scaling.
pub(crate) fn check_nonsingular(m: &Matrix, tol: f64, what: &'static str) -> Result<f64> {
    let det = m.determinant();
    let scale: f64 = if m.nrows() <= 1 {
        1.0
    } else {
        m.column_iter().map(|c| c.norm()).product()
    };
    if !det.is_finite() || scale == 0.0 || det.abs() < tol * scale {
        return Err(Error::Singular {
            what,
            det,
            time: None,
            matrix: Box::new(m.clone()),
        });
    }
    Ok(det)
}

/// Solve `m·z = rhs` by LU with partial pivoting.
pub(crate) fn solve(m: &Matrix, rhs: &Vector, what: &'static str) -> Result<Vector> {
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Singular {
        what,
        det: 0.0,
        time: None,
        matrix: Box::new(m.clone()),
    })
}

pub(crate) fn solve_matrix(m: &Matrix, rhs: &Matrix, what: &'static str) -> Result<Matrix> {
    m.clone().lu().solve(rhs).ok_or_else(|| Error::Singular {
        what,
        det: 0.0,
        time: None,
        matrix: Box::new(m.clone()),
    })
}
