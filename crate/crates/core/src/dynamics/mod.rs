//! The Rössler vector field in the `(a, b, c)` normal form
//!
//! ```text
//! ẋ = −y − z
//! ẏ = x + a·y
//! ż = b·x + z·(x − c)
//! ```
//!
//! whose fixed points are the origin `P_In` and `P_Out = (c − ab, b − c/a, c/a − b)`.

mod classical;
mod integrator;
mod spectrum;

pub use classical::{convert_classical, ClassicalParams, Conversion};
pub use integrator::{
    integrate, integrate_fixed_step, DenseSegment, IntegratorConfig, Stepper, Termination,
    Trajectory,
};
pub use spectrum::{
    check_assumptions, classify_fixed_point, eigenvalues, AssumptionReport, FixedPointAnalysis,
    FixedPointKind,
};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of phase space.
pub type State = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("parameters must be finite, got ({a}, {b}, {c})")]
    NonFinite { a: f64, b: f64, c: f64 },
    #[error("degenerate parameters: c/a − b = {value:e}, the second fixed point is not isolated")]
    Degenerate { value: f64 },
    #[error("not a saddle-focus: spectrum {eigenvalues:?} is entirely real")]
    NotSaddleFocus { eigenvalues: [(f64, f64); 3] },
    #[error("state is not a fixed point (|F| = {residual:e})")]
    NotFixedPoint { residual: f64 },
    #[error("classical parameters need C² − 4AB > 0 and A ≠ 0 (A={a}, B={b}, C={c})")]
    ClassicalDomain { a: f64, b: f64, c: f64 },
    #[error("conversion mismatch: pushforward residual {residual:e} exceeds {limit:e}")]
    ConversionMismatch { residual: f64, limit: f64 },
    #[error("tolerance {0:e} outside [1e-13, 1e-3]")]
    Tolerance(f64),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0}")]
    NonFiniteState(f64),
}

/// Parameters `(a, b, c)` of the normal form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Params {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, DynamicsError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(DynamicsError::NonFinite { a, b, c });
        }
        Ok(Params { a, b, c })
    }

    /// `a, b ∈ (0, 1)` and `c > 1`.
    pub fn in_range(&self) -> bool {
        self.a > 0.0 && self.a < 1.0 && self.b > 0.0 && self.b < 1.0 && self.c > 1.0
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self, DynamicsError> {
        Params::new(v[0], v[1], v[2])
    }

    #[inline]
    pub fn field(&self, s: &State) -> State {
        Vector3::new(
            -s.y - s.z,
            s.x + self.a * s.y,
            self.b * s.x + s.z * (s.x - self.c),
        )
    }

    #[inline]
    pub fn jacobian(&self, s: &State) -> Matrix3<f64> {
        Matrix3::new(
            0.0,
            -1.0,
            -1.0,
            1.0,
            self.a,
            0.0,
            self.b + s.z,
            0.0,
            s.x - self.c,
        )
    }

    /// `(P_In, P_Out)`.
    pub fn fixed_points(&self) -> Result<(State, State), DynamicsError> {
        let d = self.c / self.a - self.b;
        if !d.is_finite() || d == 0.0 {
            return Err(DynamicsError::Degenerate { value: d });
        }
        Ok((
            State::zeros(),
            Vector3::new(self.c - self.a * self.b, self.b - self.c / self.a, d),
        ))
    }

    /// `P_Out` alone; see [`Params::fixed_points`].
    pub fn p_out(&self) -> Result<State, DynamicsError> {
        Ok(self.fixed_points()?.1)
    }
}

/// Free function form of [`Params::field`].
pub fn eval_field(p: &Params, s: &State) -> State {
    p.field(s)
}

/// Free function form of [`Params::jacobian`].
pub fn eval_jacobian(p: &Params, s: &State) -> Matrix3<f64> {
    p.jacobian(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p() -> Params {
        Params::new(0.5, 0.5, 2.0).unwrap()
    }

    #[test]
    fn field_values() {
        assert_eq!(p().field(&State::zeros()), State::zeros());
        let f = p().field(&Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(f, Vector3::new(-2.0, 1.5, -0.5));
        let out = Vector3::new(1.75, -3.5, 3.5);
        assert_eq!(p().field(&out), State::zeros());
    }

    #[test]
    fn jacobian_at_origin() {
        let j = p().jacobian(&State::zeros());
        let expected = Matrix3::new(0.0, -1.0, -1.0, 1.0, 0.5, 0.0, 0.5, 0.0, -2.0);
        assert_eq!(j, expected);
        assert_eq!(j.column(1).into_owned(), Vector3::new(-1.0, 0.5, 0.0));
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let s = Vector3::new(1.0, 1.0, 1.0);
        let h = 1e-6;
        let j = p().jacobian(&s);
        for k in 0..3 {
            let mut e = State::zeros();
            e[k] = h;
            let col = (p().field(&(s + e)) - p().field(&(s - e))) / (2.0 * h);
            for r in 0..3 {
                assert_abs_diff_eq!(col[r], j[(r, k)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn fixed_point_formulas() {
        let (pin, pout) = p().fixed_points().unwrap();
        assert_eq!(pin, State::zeros());
        assert_eq!(pout, Vector3::new(1.75, -3.5, 3.5));
        let q = Params::new(0.2, 0.3, 1.5).unwrap();
        let pout = q.p_out().unwrap();
        assert_abs_diff_eq!(pout.x, 1.44, epsilon = 1e-12);
        assert_abs_diff_eq!(pout.y, -7.2, epsilon = 1e-12);
        assert_abs_diff_eq!(pout.z, 7.2, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_second_fixed_point() {
        let q = Params::new(0.5, 4.0, 2.0).unwrap();
        assert!(matches!(q.fixed_points(), Err(DynamicsError::Degenerate { .. })));
        assert!(Params::new(f64::NAN, 0.1, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn field_vanishes_at_fixed_points(a in 0.01f64..0.99, b in 0.01f64..0.99, c in 1.01f64..20.0) {
            let q = Params::new(a, b, c).unwrap();
            let (pin, pout) = q.fixed_points().unwrap();
            prop_assert_eq!(q.field(&pin), State::zeros());
            let scale = 1.0 + pout.norm().powi(2);
            prop_assert!(q.field(&pout).norm() <= 1e-12 * scale);
        }

        #[test]
        fn jacobian_fd_random_states(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let q = Params::new(0.2, 0.3, 4.0).unwrap();
            let s = Vector3::new(x, y, z);
            let h = 1e-5;
            let j = q.jacobian(&s);
            for k in 0..3 {
                let mut e = State::zeros();
                e[k] = h;
                let col = (q.field(&(s + e)) - q.field(&(s - e))) / (2.0 * h);
                for r in 0..3 {
                    prop_assert!((col[r] - j[(r, k)]).abs() <= 1e-6);
                }
            }
        }
    }
}
