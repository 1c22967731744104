//! Plant models.
//!
//! A plant is either memoryless, `y = g(u)`, or a state-space system
//! `ẋ = f(x, u)`, `y = h(x)` with state dimension `n` and input/output
//! dimension `k`. The named plants cover the position-control example (a
//! particle with drag following a ramp), the inverted pendulum, LTI systems
//! and planar single integrators. Arbitrary systems are supported through
//! [`OdePlant`] and [`MemorylessPlant`] callbacks.
//!
//! Well-posedness of the flow (local Lipschitz continuity of `f` and
//! `∂f/∂u`, linear growth in `x`) is a documented precondition on user
//! callbacks and is never checked at runtime.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::{Matrix, Vector};

pub type MemorylessMap = Arc<dyn Fn(&Vector) -> (Vector, Matrix) + Send + Sync>;
pub type DriftFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;
pub type OutputFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlantKind {
    Memoryless,
    GenericOde,
    Lti,
    Position,
    Pendulum,
    Integrator,
}

impl fmt::Display for PlantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlantKind::Memoryless => "memoryless",
            PlantKind::GenericOde => "generic-ode",
            PlantKind::Lti => "lti",
            PlantKind::Position => "position",
            PlantKind::Pendulum => "pendulum",
            PlantKind::Integrator => "integrator",
        })
    }
}

/// Static map `y = g(u)` together with its analytic Jacobian.
#[derive(Clone)]
pub struct MemorylessPlant {
    k: usize,
    map: MemorylessMap,
}

impl MemorylessPlant {
    pub fn new(k: usize, map: MemorylessMap) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "memoryless plant needs k >= 1".into(),
            ));
        }
        Ok(Self { k, map })
    }

    /// `g(u) = u`.
    pub fn identity(k: usize) -> Result<Self> {
        Self::new(
            k,
            Arc::new(move |u: &Vector| (u.clone(), Matrix::identity(k, k))),
        )
    }

    /// Componentwise `g(u) = u³ + u`, a monotone map with Jacobian `3u² + 1`.
    pub fn cubic(k: usize) -> Result<Self> {
        Self::new(
            k,
            Arc::new(|u: &Vector| {
                let y = u.map(|v| v * v * v + v);
                let j = Matrix::from_diagonal(&u.map(|v| 3.0 * v * v + 1.0));
                (y, j)
            }),
        )
    }

    pub fn io_dim(&self) -> usize {
        self.k
    }

    pub fn eval(&self, u: &Vector) -> Result<(Vector, Matrix)> {
        check_dim("memoryless input", self.k, u.len())?;
        let (y, j) = (self.map)(u);
        check_dim("memoryless output", self.k, y.len())?;
        if j.nrows() != self.k || j.ncols() != self.k {
            return Err(Error::Dimension {
                context: "memoryless jacobian",
                expected: self.k,
                found: j.nrows(),
            });
        }
        Ok((y, j))
    }
}

impl fmt::Debug for MemorylessPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MemorylessPlant")
            .field("k", &self.k)
            .finish()
    }
}

/// State-space plant given by user callbacks.
#[derive(Clone)]
pub struct OdePlant {
    n: usize,
    k: usize,
    drift: DriftFn,
    output: OutputFn,
}

impl OdePlant {
    pub fn new(n: usize, k: usize, drift: DriftFn, output: OutputFn) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArgument(
                "generic plant needs n >= 1 and k >= 1".into(),
            ));
        }
        Ok(Self {
            n,
            k,
            drift,
            output,
        })
    }
}

impl fmt::Debug for OdePlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdePlant")
            .field("n", &self.n)
            .field("k", &self.k)
            .finish()
    }
}

/// `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiPlant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl LtiPlant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidArgument(
                "A must be square and non-empty".into(),
            ));
        }
        check_dim("rows of B", n, b.nrows())?;
        let k = b.ncols();
        if k == 0 {
            return Err(Error::InvalidArgument("B needs at least one column".into()));
        }
        check_dim("rows of C", k, c.nrows())?;
        check_dim("columns of C", n, c.ncols())?;
        if a.iter()
            .chain(b.iter())
            .chain(c.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("LTI matrices".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn io_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Particle with drag tracking the ramp `r·t`, written in residual
/// coordinates `x₁ = y − r·t`, `x₂ = v`:
///
/// ```text
/// ẋ₁ = x₂ − r
/// ẋ₂ = a·x₂ + u
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionPlant {
    a: f64,
    r_slope: f64,
}

impl PositionPlant {
    pub fn new(a: f64, r_slope: f64) -> Result<Self> {
        if !a.is_finite() || !r_slope.is_finite() {
            return Err(Error::NonFinite("position plant parameters".into()));
        }
        if a == 0.0 {
            return Err(Error::validation(
                "plant.a",
                "drag coefficient must satisfy a != 0",
            ));
        }
        Ok(Self { a, r_slope })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn r_slope(&self) -> f64 {
        self.r_slope
    }
}

/// Inverted pendulum, angle measured from the upright equilibrium:
/// `ẋ₁ = x₂`, `ẋ₂ = a·sin x₁ − b·x₂ + u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumPlant {
    a: f64,
    b: f64,
}

impl PendulumPlant {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::validation("plant.a", "pendulum requires a > 0"));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::validation("plant.b", "pendulum requires b > 0"));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

/// `ẋ = u` in `R^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorPlant {
    k: usize,
}

impl IntegratorPlant {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "integrator plant needs k >= 1".into(),
            ));
        }
        Ok(Self { k })
    }

    pub fn dim(&self) -> usize {
        self.k
    }
}

/// Any plant the controller can drive. Immutable once built; cloning is cheap.
#[derive(Debug, Clone)]
pub enum PlantModel {
    Memoryless(MemorylessPlant),
    GenericOde(OdePlant),
    Lti(LtiPlant),
    Position(PositionPlant),
    Pendulum(PendulumPlant),
    Integrator(IntegratorPlant),
}

impl From<MemorylessPlant> for PlantModel {
    fn from(p: MemorylessPlant) -> Self {
        PlantModel::Memoryless(p)
    }
}

impl From<OdePlant> for PlantModel {
    fn from(p: OdePlant) -> Self {
        PlantModel::GenericOde(p)
    }
}

impl From<LtiPlant> for PlantModel {
    fn from(p: LtiPlant) -> Self {
        PlantModel::Lti(p)
    }
}

impl From<PositionPlant> for PlantModel {
    fn from(p: PositionPlant) -> Self {
        PlantModel::Position(p)
    }
}

impl From<PendulumPlant> for PlantModel {
    fn from(p: PendulumPlant) -> Self {
        PlantModel::Pendulum(p)
    }
}

impl From<IntegratorPlant> for PlantModel {
    fn from(p: IntegratorPlant) -> Self {
        PlantModel::Integrator(p)
    }
}

impl PlantModel {
    pub fn kind(&self) -> PlantKind {
        match self {
            PlantModel::Memoryless(_) => PlantKind::Memoryless,
            PlantModel::GenericOde(_) => PlantKind::GenericOde,
            PlantModel::Lti(_) => PlantKind::Lti,
            PlantModel::Position(_) => PlantKind::Position,
            PlantModel::Pendulum(_) => PlantKind::Pendulum,
            PlantModel::Integrator(_) => PlantKind::Integrator,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            PlantModel::Memoryless(_) => 0,
            PlantModel::GenericOde(p) => p.n,
            PlantModel::Lti(p) => p.state_dim(),
            PlantModel::Position(_) | PlantModel::Pendulum(_) => 2,
            PlantModel::Integrator(p) => p.k,
        }
    }

    pub fn io_dim(&self) -> usize {
        match self {
            PlantModel::Memoryless(p) => p.k,
            PlantModel::GenericOde(p) => p.k,
            PlantModel::Lti(p) => p.io_dim(),
            PlantModel::Position(_) | PlantModel::Pendulum(_) => 1,
            PlantModel::Integrator(p) => p.k,
        }
    }

    pub fn is_memoryless(&self) -> bool {
        matches!(self, PlantModel::Memoryless(_))
    }

    /// `f(x, u)`.
    pub fn eval_drift(&self, x: &Vector, u: &Vector) -> Result<Vector> {
        if self.is_memoryless() {
            return Err(Error::Unsupported("memoryless plant has no drift".into()));
        }
        check_dim("state", self.state_dim(), x.len())?;
        check_dim("input", self.io_dim(), u.len())?;
        let mut out = Vector::zeros(self.state_dim());
        self.drift_into(x, u, &mut out)?;
        Ok(out)
    }

    /// Drift without dimension checks, written into `out`. Hot path of the
    /// lookahead simulation.
    pub(crate) fn drift_into(&self, x: &Vector, u: &Vector, out: &mut Vector) -> Result<()> {
        match self {
            PlantModel::Memoryless(_) => {
                return Err(Error::Unsupported("memoryless plant has no drift".into()))
            }
            PlantModel::GenericOde(p) => {
                let f = (p.drift)(x, u);
                check_dim("drift callback output", p.n, f.len())?;
                out.copy_from(&f);
            }
            PlantModel::Lti(p) => {
                out.gemv(1.0, &p.a, x, 0.0);
                out.gemv(1.0, &p.b, u, 1.0);
            }
            PlantModel::Position(p) => {
                out[0] = x[1] - p.r_slope;
                out[1] = p.a * x[1] + u[0];
            }
            PlantModel::Pendulum(p) => {
                out[0] = x[1];
                out[1] = p.a * x[0].sin() - p.b * x[1] + u[0];
            }
            PlantModel::Integrator(_) => out.copy_from(u),
        }
        Ok(())
    }

    /// `h(x)`; for a memoryless plant use [`PlantModel::eval_memoryless`].
    pub fn eval_output(&self, x: &Vector) -> Result<Vector> {
        if self.is_memoryless() {
            return Err(Error::Unsupported(
                "memoryless plant output is defined on u, use eval_memoryless".into(),
            ));
        }
        check_dim("state", self.state_dim(), x.len())?;
        Ok(match self {
            PlantModel::Memoryless(_) => unreachable!(),
            PlantModel::GenericOde(p) => {
                let y = (p.output)(x);
                check_dim("output callback", p.k, y.len())?;
                y
            }
            PlantModel::Lti(p) => &p.c * x,
            PlantModel::Position(_) | PlantModel::Pendulum(_) => Vector::from_element(1, x[0]),
            PlantModel::Integrator(_) => x.clone(),
        })
    }

    /// `(g(u), ∂g/∂u(u))` for a memoryless plant.
    pub fn eval_memoryless(&self, u: &Vector) -> Result<(Vector, Matrix)> {
        match self {
            PlantModel::Memoryless(p) => p.eval(u),
            other => Err(Error::Unsupported(format!(
                "eval_memoryless on a {} plant",
                other.kind()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn position_drift_at_origin() {
        let p: PlantModel = PositionPlant::new(-1.0, 2.0).unwrap().into();
        let f = p.eval_drift(&v(&[0.0, 0.0]), &v(&[0.0])).unwrap();
        assert_eq!(f, v(&[-2.0, 0.0]));
    }

    #[test]
    fn pendulum_upright_equilibrium() {
        let p: PlantModel = PendulumPlant::new(1.0, 0.2).unwrap().into();
        let f = p.eval_drift(&v(&[0.0, 0.0]), &v(&[0.0])).unwrap();
        assert_eq!(f, v(&[0.0, 0.0]));
        let y = p.eval_output(&v(&[PI / 6.0, 0.0])).unwrap();
        assert_eq!(y[0], PI / 6.0);
    }

    #[test]
    fn integrator_identity_input_map() {
        let p: PlantModel = IntegratorPlant::new(2).unwrap().into();
        let f = p.eval_drift(&v(&[3.0, 4.0]), &v(&[1.0, -1.0])).unwrap();
        assert_eq!(f, v(&[1.0, -1.0]));
    }

    #[test]
    fn outputs() {
        let p: PlantModel = PositionPlant::new(-1.0, 2.0).unwrap().into();
        assert_eq!(p.eval_output(&v(&[1.5, 0.2])).unwrap()[0], 1.5);

        let lti = LtiPlant::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]),
            Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let p: PlantModel = lti.into();
        assert_eq!(p.eval_output(&v(&[2.0, 3.0])).unwrap()[0], 2.0);
    }

    #[test]
    fn memoryless_maps() {
        let id: PlantModel = MemorylessPlant::identity(1).unwrap().into();
        let (y, j) = id.eval_memoryless(&v(&[0.7])).unwrap();
        assert_eq!((y[0], j[(0, 0)]), (0.7, 1.0));

        let cubic: PlantModel = MemorylessPlant::cubic(1).unwrap().into();
        let (y, j) = cubic.eval_memoryless(&v(&[1.0])).unwrap();
        assert_eq!((y[0], j[(0, 0)]), (2.0, 4.0));
        let (y, j) = cubic.eval_memoryless(&v(&[0.0])).unwrap();
        assert_eq!((y[0], j[(0, 0)]), (0.0, 1.0));
    }

    #[test]
    fn error_paths() {
        let p: PlantModel = PositionPlant::new(-1.0, 2.0).unwrap().into();
        assert!(matches!(
            p.eval_drift(&v(&[0.0]), &v(&[0.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            p.eval_drift(&v(&[0.0, 0.0]), &v(&[0.0, 1.0])),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            p.eval_memoryless(&v(&[0.0])),
            Err(Error::Unsupported(_))
        ));
        let m: PlantModel = MemorylessPlant::identity(1).unwrap().into();
        assert!(matches!(
            m.eval_drift(&Vector::zeros(0), &v(&[0.0])),
            Err(Error::Unsupported(_))
        ));
        assert!(PositionPlant::new(0.0, 1.0).is_err());
        assert!(PendulumPlant::new(-1.0, 0.2).is_err());
        assert!(PendulumPlant::new(1.0, 0.0).is_err());
    }

    #[test]
    fn drift_matches_hand_derivation_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pos = PositionPlant::new(-0.7, 1.3).unwrap();
        let pen = PendulumPlant::new(1.0, 0.2).unwrap();
        let lti = LtiPlant::new(
            Matrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.5, -3.0]),
            Matrix::from_row_slice(2, 1, &[1.0, -1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let models: [PlantModel; 3] = [pos.into(), pen.into(), lti.clone().into()];
        for _ in 0..20 {
            let x = v(&[rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)]);
            let u = v(&[rng.gen_range(-5.0..5.0)]);
            let expected = [
                v(&[x[1] - 1.3, -0.7 * x[1] + u[0]]),
                v(&[x[1], x[0].sin() - 0.2 * x[1] + u[0]]),
                v(&[-x[0] + 2.0 * x[1] + u[0], 0.5 * x[0] - 3.0 * x[1] - u[0]]),
            ];
            for (m, e) in models.iter().zip(expected.iter()) {
                let f = m.eval_drift(&x, &u).unwrap();
                assert_relative_eq!(f, e.clone(), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn position_ramp_following_equilibrium() {
        for (a, r) in [(-1.0, 2.0), (0.5, -3.0), (2.0, 0.25)] {
            let p: PlantModel = PositionPlant::new(a, r).unwrap().into();
            let f = p.eval_drift(&v(&[0.3, r]), &v(&[-a * r])).unwrap();
            assert_eq!(f, v(&[0.0, 0.0]));
        }
    }

    #[test]
    fn generic_ode_callbacks() {
        let p = OdePlant::new(
            1,
            1,
            Arc::new(|x: &Vector, u: &Vector| Vector::from_element(1, -x[0] + u[0])),
            Arc::new(|x: &Vector| x.clone()),
        )
        .unwrap();
        let p: PlantModel = p.into();
        assert_eq!(p.eval_drift(&v(&[1.0]), &v(&[3.0])).unwrap()[0], 2.0);
        assert_eq!(p.kind(), PlantKind::GenericOde);
    }

    proptest::proptest! {
        #[test]
        fn integrator_drift_is_linear_in_u(
            x in proptest::array::uniform2(-1e3f64..1e3),
            u in proptest::array::uniform2(-1e3f64..1e3),
            s in -1e3f64..1e3,
        ) {
            let p: PlantModel = IntegratorPlant::new(2).unwrap().into();
            let x = v(&x);
            let u = v(&u);
            let lhs = p.eval_drift(&x, &(&u * s)).unwrap();
            let rhs = p.eval_drift(&x, &u).unwrap() * s;
            proptest::prop_assert_eq!(lhs, rhs);
        }
    }
}
