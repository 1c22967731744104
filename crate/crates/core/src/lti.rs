//! Stability of the closed loop for linear plants.
//!
//! For `ẋ = Ax + Bu, y = Cx` under the lookahead law the joint state
//! `(x, u)` obeys `d/dt (x, u) = Φ_T (x, u) + (0, Ψ_T) r(t + T)` with
//!
//! ```text
//! Φ_T = [ A              B    ]      Ψ_T = α·J⁻¹
//!       [ −α·J⁻¹·C·e^{AT}  −α·I ]      J   = C·A⁻¹(e^{AT} − I)·B
//! ```
//!
//! The position plant has a singular `A`, so its `Φ_T` and characteristic
//! polynomial come from dedicated closed forms. Stability is decided three
//! ways: the closed-form condition `a < α ∧ T > 1/(α − a)`, a Routh table
//! on the characteristic polynomial, and the largest real part of the
//! spectrum.

use std::fmt;

use nalgebra::Schur;

use crate::dynamics::LtiPlant;
use crate::error::{Error, Result};
use crate::predictor::{expm1_minus_x, lti_jacobian};
use crate::Matrix;

/// Half-width of the band around zero treated as marginal.
pub const MARGINAL_EPS: f64 = 1e-9;

/// Relative size below which a Routh pivot counts as zero.
pub const ROUTH_ZERO_PIVOT: f64 = 1e-12;

/// Largest matrix accepted by [`eigen_max_real`].
pub const MAX_EIGEN_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Marginal,
    Unstable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Marginal => "marginal",
            Verdict::Unstable => "unstable",
        })
    }
}

impl Verdict {
    pub fn from_max_real(max_real: f64) -> Self {
        if max_real < -MARGINAL_EPS {
            Verdict::Stable
        } else if max_real <= MARGINAL_EPS {
            Verdict::Marginal
        } else {
            Verdict::Unstable
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouthColumn {
    /// First column, top to bottom. Truncated after a zero pivot.
    pub entries: Vec<f64>,
    /// Row index of the first zero pivot, if any.
    pub zero_pivot: Option<usize>,
}

impl RouthColumn {
    pub fn verdict(&self) -> Verdict {
        if self.entries.iter().any(|&c| c < 0.0) {
            // A sign change above the zero pivot already proves a root in
            // the right half plane.
            let limit = self.zero_pivot.unwrap_or(self.entries.len());
            if self.entries[..limit].iter().any(|&c| c < 0.0) {
                return Verdict::Unstable;
            }
        }
        if self.zero_pivot.is_some() {
            Verdict::Marginal
        } else {
            Verdict::Stable
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub phi: Matrix,
    /// `None` for the position system, where it plays no role.
    pub psi: Option<Matrix>,
    pub char_poly: Vec<f64>,
    pub routh: RouthColumn,
    pub max_real_eigenvalue: f64,
    pub hurwitz: Verdict,
}

impl StabilityReport {
    fn from_phi(phi: Matrix, psi: Option<Matrix>, char_poly: Vec<f64>) -> Result<Self> {
        let routh = routh_first_column(&char_poly)?;
        let max_real_eigenvalue = eigen_max_real(&phi)?;
        Ok(Self {
            phi,
            psi,
            char_poly,
            routh,
            max_real_eigenvalue,
            hurwitz: Verdict::from_max_real(max_real_eigenvalue),
        })
    }

    pub fn routh_verdict(&self) -> Verdict {
        self.routh.verdict()
    }

    /// Flat `key = value` text record.
    pub fn to_record(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|c| format!("{c:.9e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let rows = |m: &Matrix| {
            m.row_iter()
                .map(|r| list(&r.iter().copied().collect::<Vec<_>>()))
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut out = String::new();
        out.push_str(&format!("phi = {}\n", rows(&self.phi)));
        if let Some(psi) = &self.psi {
            out.push_str(&format!("psi = {}\n", rows(psi)));
        }
        out.push_str(&format!("char_poly = {}\n", list(&self.char_poly)));
        out.push_str(&format!(
            "routh_first_column = {}\n",
            list(&self.routh.entries)
        ));
        out.push_str(&format!("routh_verdict = {}\n", self.routh.verdict()));
        out.push_str(&format!(
            "max_real_eigenvalue = {:.9e}\n",
            self.max_real_eigenvalue
        ));
        out.push_str(&format!("hurwitz = {}\n", self.hurwitz));
        out
    }
}

fn check_position_args(a: f64, horizon: f64, alpha: f64) -> Result<()> {
    if !(a.is_finite() && a != 0.0) {
        return Err(Error::InvalidArgument(format!(
            "drag a must be finite and != 0, got {a}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "T must be > 0, got {horizon}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    Ok(())
}

/// `(Φ_T, Ψ_T)` for an LTI plant with speedup gain `α`.
pub fn build_phi_psi(lti: &LtiPlant, horizon: f64, alpha: f64) -> Result<(Matrix, Matrix)> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "T must be > 0, got {horizon}"
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be > 0, got {alpha}"
        )));
    }
    let (n, k) = (lti.state_dim(), lti.io_dim());
    let (exp_at, jac) = lti_jacobian(lti, horizon)?;
    let jac_inv = jac.clone().try_inverse().ok_or_else(|| Error::Singular {
        what: "lookahead jacobian CA^-1(e^AT - I)B",
        det: jac.determinant(),
        time: None,
        matrix: Box::new(jac.clone()),
    })?;
    let psi = &jac_inv * alpha;
    let mut phi = Matrix::zeros(n + k, n + k);
    phi.view_mut((0, 0), (n, n)).copy_from(lti.a());
    phi.view_mut((0, n), (n, k)).copy_from(lti.b());
    phi.view_mut((n, 0), (k, n))
        .copy_from(&(-(&psi * lti.c() * exp_at)));
    phi.view_mut((n, n), (k, k))
        .copy_from(&(-Matrix::identity(k, k) * alpha));
    Ok((phi, psi))
}

/// Closed-loop matrix of the position system, last row scaled by `α`.
pub fn position_phi(a: f64, horizon: f64, alpha: f64) -> Result<Matrix> {
    check_position_args(a, horizon, alpha)?;
    let at = a * horizon;
    let den = expm1_minus_x(at);
    Ok(Matrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            1.0,
            0.0,
            0.0,
            a,
            1.0,
            -alpha * a * a / den,
            -alpha * a * at.exp_m1() / den,
            -alpha,
        ],
    ))
}

/// Monic characteristic polynomial of [`position_phi`], highest degree
/// first: `[1, α − a, α·a²T/D, α·a²/D]` with `D = e^{aT} − 1 − aT`.
pub fn position_char_poly(a: f64, horizon: f64, alpha: f64) -> Result<Vec<f64>> {
    check_position_args(a, horizon, alpha)?;
    let den = expm1_minus_x(a * horizon);
    let a2 = a * a;
    Ok(vec![
        1.0,
        alpha - a,
        alpha * a2 * horizon / den,
        alpha * a2 / den,
    ])
}

/// Closed-form Hurwitz condition for the position system.
pub fn position_stability_condition(a: f64, horizon: f64, alpha: f64) -> Result<Verdict> {
    check_position_args(a, horizon, alpha)?;
    // At a = α the s² coefficient vanishes while the others stay positive;
    // the roots then sum to zero with a negative real root, so a complex
    // pair sits in the right half plane.
    let gap = alpha - a;
    if gap <= 0.0 {
        return Ok(Verdict::Unstable);
    }
    let boundary = 1.0 / gap;
    if (horizon - boundary).abs() <= MARGINAL_EPS * boundary.max(1.0) {
        Ok(Verdict::Marginal)
    } else if horizon > boundary {
        Ok(Verdict::Stable)
    } else {
        Ok(Verdict::Unstable)
    }
}

/// First column of the Routh table for a monic polynomial given highest
/// degree first. Stops at the first zero pivot instead of perturbing it.
pub fn routh_first_column(coeffs: &[f64]) -> Result<RouthColumn> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidArgument(
            "polynomial degree must be >= 1".into(),
        ));
    }
    if coeffs[0] != 1.0 {
        return Err(Error::InvalidArgument(format!(
            "leading coefficient must be 1, got {}",
            coeffs[0]
        )));
    }
    if !coeffs.iter().all(|c| c.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficients".into()));
    }
    let degree = coeffs.len() - 1;
    let width = degree / 2 + 1;
    let row_from = |start: usize| -> Vec<f64> {
        (0..width)
            .map(|j| coeffs.get(start + 2 * j).copied().unwrap_or(0.0))
            .collect()
    };
    let zero_tol = ROUTH_ZERO_PIVOT * coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let mut upper = row_from(0);
    let mut lower = row_from(1);
    let mut entries = vec![upper[0]];
    for row in 1..=degree {
        let pivot = lower[0];
        entries.push(pivot);
        if row == degree {
            break;
        }
        if pivot.abs() <= zero_tol {
            return Ok(RouthColumn {
                entries,
                zero_pivot: Some(row),
            });
        }
        let next: Vec<f64> = (0..width)
            .map(|j| {
                let a = upper.get(j + 1).copied().unwrap_or(0.0);
                let b = lower.get(j + 1).copied().unwrap_or(0.0);
                (pivot * a - upper[0] * b) / pivot
            })
            .collect();
        upper = std::mem::replace(&mut lower, next);
    }
    let zero_pivot = entries
        .last()
        .filter(|c| c.abs() <= zero_tol)
        .map(|_| degree);
    Ok(RouthColumn {
        entries,
        zero_pivot,
    })
}

/// Largest real part of the spectrum of a small real matrix, via Hessenberg
/// reduction and shifted QR (real Schur form).
pub fn eigen_max_real(m: &Matrix) -> Result<f64> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidArgument(
            "eigenvalues need a non-empty square matrix".into(),
        ));
    }
    if n > MAX_EIGEN_DIM {
        return Err(Error::InvalidArgument(format!(
            "matrix dimension {n} exceeds {MAX_EIGEN_DIM}"
        )));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("eigenvalue argument".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NoConvergence("shifted QR for eigenvalues".into()))?;
    let (_, t) = schur.unpack();
    let mut max_real = f64::NEG_INFINITY;
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            // 2x2 block: complex pair with real part equal to half the trace,
            // or two real roots when the discriminant is non-negative.
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            let re = if disc >= 0.0 {
                half_tr + disc.sqrt()
            } else {
                half_tr
            };
            max_real = max_real.max(re);
            i += 2;
        } else {
            max_real = max_real.max(t[(i, i)]);
            i += 1;
        }
    }
    Ok(max_real)
}

/// Monic characteristic polynomial `det(λI − M)`, highest degree first,
/// by the Faddeev–LeVerrier recursion.
pub fn characteristic_polynomial(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument(
            "characteristic polynomial needs a square matrix".into(),
        ));
    }
    let mut coeffs = vec![1.0];
    let mut aux = Matrix::zeros(n, n);
    let ident = Matrix::identity(n, n);
    for j in 1..=n {
        aux = m * (&aux + &ident * coeffs[j - 1]);
        let c = -aux.trace() / j as f64;
        coeffs.push(c);
    }
    Ok(coeffs)
}

/// Stability report for an LTI plant under the lookahead law.
pub fn lti_stability_report(lti: &LtiPlant, horizon: f64, alpha: f64) -> Result<StabilityReport> {
    let (phi, psi) = build_phi_psi(lti, horizon, alpha)?;
    let char_poly = characteristic_polynomial(&phi)?;
    StabilityReport::from_phi(phi, Some(psi), char_poly)
}

/// Stability report for the position system.
pub fn position_stability_report(a: f64, horizon: f64, alpha: f64) -> Result<StabilityReport> {
    let phi = position_phi(a, horizon, alpha)?;
    let char_poly = position_char_poly(a, horizon, alpha)?;
    StabilityReport::from_phi(phi, None, char_poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e() -> f64 {
        std::f64::consts::E
    }

    #[test]
    fn phi_limit_for_long_horizon() {
        let lti = LtiPlant::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let (phi, _) = build_phi_psi(&lti, 30.0, 1.0).unwrap();
        let limit = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!((phi - limit).amax() < 1e-8);
    }

    #[test]
    fn phi_scalar_at_unit_horizon() {
        let lti = LtiPlant::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let (phi, psi) = build_phi_psi(&lti, 1.0, 1.0).unwrap();
        let em1 = (-1f64).exp();
        let expected = Matrix::from_row_slice(2, 2, &[-1.0, 1.0, -em1 / (1.0 - em1), -1.0]);
        assert_relative_eq!(phi, expected, epsilon = 1e-14);
        assert_relative_eq!(psi[(0, 0)], 1.0 / (1.0 - em1), epsilon = 1e-14);

        let (phi2, psi2) = build_phi_psi(&lti, 1.0, 2.0).unwrap();
        assert_eq!(phi2.row(0), phi.row(0));
        assert_relative_eq!(phi2.row(1).into_owned(), phi.row(1) * 2.0, epsilon = 1e-15);
        assert_relative_eq!(psi2[(0, 0)], 2.0 * psi[(0, 0)], epsilon = 1e-15);
    }

    #[test]
    fn build_phi_rejects_singular_a() {
        let lti = LtiPlant::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(
            build_phi_psi(&lti, 1.0, 1.0),
            Err(Error::Singular {
                what: "state matrix A",
                ..
            })
        ));
    }

    #[test]
    fn position_phi_rows() {
        let phi = position_phi(-1.0, 1.0, 1.0).unwrap();
        let den = (-1f64).exp();
        assert_relative_eq!(phi[(2, 0)], -1.0 / den, epsilon = 1e-14);
        assert_relative_eq!(
            phi[(2, 1)],
            -(-1.0) * ((-1f64).exp() - 1.0) / den,
            epsilon = 1e-14
        );
        assert_eq!(phi[(2, 2)], -1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let a = rng.gen_range(-2.0..2.0);
            let t = rng.gen_range(0.1..5.0);
            let p1 = position_phi(a, t, 1.0).unwrap();
            let p3 = position_phi(a, t, 3.0).unwrap();
            assert_eq!(
                p1.rows(0, 2),
                Matrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, a, 1.0])
            );
            assert_eq!(p1.rows(0, 2), p3.rows(0, 2));
            assert_relative_eq!(
                p3.row(2).into_owned(),
                p1.row(2) * 3.0,
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn position_char_poly_values() {
        let c = position_char_poly(0.5, 3.0, 1.0).unwrap();
        let d = 1.5f64.exp() - 1.0 - 1.5;
        let expected = [1.0, 0.5, 0.25 * 3.0 / d, 0.25 / d];
        for (x, y) in c.iter().zip(expected) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
        assert!((c[2] - 0.37846).abs() < 1e-4 && (c[3] - 0.12615).abs() < 1e-4);

        let c = position_char_poly(-1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(c[1], 2.0);
        assert_relative_eq!(c[2], e(), epsilon = 1e-13);
        assert_relative_eq!(c[3], e(), epsilon = 1e-13);
    }

    #[test]
    fn routh_examples() {
        let col = routh_first_column(&position_char_poly(-1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(col.entries.len(), 4);
        assert_relative_eq!(col.entries[2], e() / 2.0, epsilon = 1e-13);
        assert_eq!(col.verdict(), Verdict::Stable);

        let col = routh_first_column(&position_char_poly(-1.0, 0.5, 1.0).unwrap()).unwrap();
        assert_eq!(col.zero_pivot, Some(2));
        assert_eq!(col.verdict(), Verdict::Marginal);

        let col = routh_first_column(&[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(col.entries, vec![1.0, 3.0, 2.0]);
        assert_eq!(col.verdict(), Verdict::Stable);

        // (λ − 1)(λ + 2) = λ² + λ − 2
        let col = routh_first_column(&[1.0, 1.0, -2.0]).unwrap();
        assert_eq!(col.verdict(), Verdict::Unstable);

        assert!(routh_first_column(&[1.0]).is_err());
        assert!(routh_first_column(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn routh_matches_known_factorizations() {
        // (λ + 1)(λ + 2)(λ + 3)(λ + 4) = λ⁴ + 10λ³ + 35λ² + 50λ + 24
        let col = routh_first_column(&[1.0, 10.0, 35.0, 50.0, 24.0]).unwrap();
        assert_eq!(col.verdict(), Verdict::Stable);
        assert_eq!(col.entries.len(), 5);
        // (λ² + 1)(λ + 1) has imaginary roots.
        let col = routh_first_column(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(col.verdict(), Verdict::Marginal);
    }

    #[test]
    fn closed_form_conditions() {
        assert_eq!(
            position_stability_condition(-1.0, 1.0, 1.0).unwrap(),
            Verdict::Stable
        );
        assert_eq!(
            position_stability_condition(0.5, 3.0, 1.0).unwrap(),
            Verdict::Stable
        );
        assert_eq!(
            position_stability_condition(0.5, 1.5, 1.0).unwrap(),
            Verdict::Unstable
        );
        assert_eq!(
            position_stability_condition(0.5, 0.4, 5.0).unwrap(),
            Verdict::Stable
        );
        assert_eq!(
            position_stability_condition(-1.0, 0.5, 1.0).unwrap(),
            Verdict::Marginal
        );
        assert_eq!(
            position_stability_condition(1.5, 9.0, 1.0).unwrap(),
            Verdict::Unstable
        );
        assert!(position_stability_condition(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn eigen_examples() {
        let d = Matrix::from_diagonal(&crate::Vector::from_row_slice(&[-1.0, -2.0]));
        assert_relative_eq!(eigen_max_real(&d).unwrap(), -1.0, epsilon = 1e-14);
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(eigen_max_real(&rot).unwrap().abs() < 1e-14);
        let phi = position_phi(-1.0, 1.0, 1.0).unwrap();
        assert!(eigen_max_real(&phi).unwrap() < 0.0);
        assert!(eigen_max_real(&Matrix::zeros(11, 11)).is_err());
    }

    #[test]
    fn faddeev_leverrier_small_cases() {
        // det(λI − [[1,2],[3,4]]) = λ² − 5λ − 2
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let c = characteristic_polynomial(&m).unwrap();
        assert_relative_eq!(c[1], -5.0, epsilon = 1e-14);
        assert_relative_eq!(c[2], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn denominators_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a: f64 = rng.gen_range(-3.0..3.0);
            let t: f64 = rng.gen_range(1e-3..10.0);
            if a == 0.0 {
                continue;
            }
            assert!(expm1_minus_x(a * t) > 0.0);
        }
    }

    #[test]
    fn report_record() {
        let r = position_stability_report(0.5, 3.0, 1.0).unwrap();
        assert_eq!(r.hurwitz, Verdict::Stable);
        assert_eq!(r.routh_verdict(), Verdict::Stable);
        let text = r.to_record();
        assert!(text.contains("hurwitz = stable"));
        assert!(text.lines().all(|l| l.contains(" = ")));
    }
}
