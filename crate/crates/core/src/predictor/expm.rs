use crate::error::{Error, Result};
use crate::Matrix;

/// Degree of the diagonal Padé approximant.
const PADE_DEGREE: usize = 6;

/// `e^M` by scaling and squaring with a diagonal Padé kernel.
///
/// `M` is scaled by `2^-s` until its infinity norm is at most 1/2, the
/// `[6/6]` Padé approximant is evaluated, and the result is squared `s`
/// times.
pub fn matrix_exponential(m: &Matrix) -> Result<Matrix> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let norm = inf_norm(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = m / 2f64.powi(squarings);

    // Padé coefficients c_j = (2q − j)! q! / ((2q)! j! (q − j)!).
    let q = PADE_DEGREE;
    let mut c = 1.0;
    let mut x = a.clone();
    let ident = Matrix::identity(n, n);
    let mut num = &ident + &a * 0.5;
    let mut den = &ident - &a * 0.5;
    let mut positive = true;
    c *= 0.5;
    for j in 2..=q {
        c *= (q - j + 1) as f64 / (j * (2 * q - j + 1)) as f64;
        x = &a * &x;
        num += &x * c;
        if positive {
            den += &x * c;
        } else {
            den -= &x * c;
        }
        positive = !positive;
    }

    let mut e = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::NoConvergence("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        e = &e * &e;
    }
    if !e.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential result".into()));
    }
    Ok(e)
}

fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
