use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Params, State};

/// Parameters `(A, B, C)` of the original form `Ẋ = −Y − Z, Ẏ = X + AY, Ż = B + Z(X − C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ClassicalParams {
    pub A: f64,
    pub B: f64,
    pub C: f64,
}

impl ClassicalParams {
    pub fn field(&self, s: &State) -> State {
        Vector3::new(-s.y - s.z, s.x + self.A * s.y, self.B + s.z * (s.x - self.C))
    }

    /// Fixed points `(A·Z, −Z, Z)` with `A Z² − C Z + B = 0`, smaller `|Z|` first.
    pub fn fixed_points(&self) -> Option<(State, State)> {
        let disc = self.C * self.C - 4.0 * self.A * self.B;
        if disc <= 0.0 || self.A == 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        // stable quadratic roots
        let q = 0.5 * (self.C + self.C.signum() * sq);
        let (z1, z2) = (q / self.A, self.B / q);
        let (small, big) = if z1.abs() < z2.abs() { (z1, z2) } else { (z2, z1) };
        let pt = |z: f64| Vector3::new(self.A * z, -z, z);
        Some((pt(small), pt(big)))
    }
}

/// Result of moving from `(A, B, C)` to the normal form.
///
/// The state map is the translation `(X, Y, Z) = (x − a p₁, y + p₁, z − p₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub classical: ClassicalParams,
    pub params: Params,
    pub p1: f64,
    /// Max relative mismatch between the transported field and the normal-form field.
    pub pushforward_residual: f64,
}

impl Conversion {
    /// Normal-form state to classical state.
    pub fn to_classical(&self, s: &State) -> State {
        let (a, p1) = (self.params.a, self.p1);
        Vector3::new(s.x - a * p1, s.y + p1, s.z - p1)
    }

    pub fn from_classical(&self, s: &State) -> State {
        let (a, p1) = (self.params.a, self.p1);
        Vector3::new(s.x + a * p1, s.y - p1, s.z + p1)
    }
}

const PUSHFORWARD_LIMIT: f64 = 1e-9;

/// Coefficient matching gives `a = A`, `b = −p₁`, `c = C + A p₁`, where `A p₁² + C p₁ + B = 0`.
/// The result is checked on a fixed sample of states before it is returned.
pub fn convert_classical(cp: ClassicalParams) -> Result<Conversion, DynamicsError> {
    #[allow(non_snake_case)]
    let ClassicalParams { A, B, C } = cp;
    let disc = C * C - 4.0 * A * B;
    if !(disc > 0.0) || A == 0.0 || !A.is_finite() || !B.is_finite() || !C.is_finite() {
        return Err(DynamicsError::ClassicalDomain { a: A, b: B, c: C });
    }
    let p1 = (-C + disc.sqrt()) / (2.0 * A);
    let params = Params::new(A, -p1, C + A * p1)?;
    let mut conv = Conversion {
        classical: cp,
        params,
        p1,
        pushforward_residual: 0.0,
    };
    let mut worst = 0.0f64;
    for k in 0..10 {
        let t = k as f64;
        let s = Vector3::new(
            3.0 * (0.7 * t + 0.3).sin(),
            4.0 * (1.3 * t + 1.1).cos(),
            2.0 * (0.9 * t).sin() + 0.5,
        );
        let lhs = cp.field(&conv.to_classical(&s));
        let rhs = params.field(&s);
        let r = (lhs - rhs).norm() / (1.0 + rhs.norm());
        worst = worst.max(r);
    }
    conv.pushforward_residual = worst;
    if !(worst <= PUSHFORWARD_LIMIT) {
        return Err(DynamicsError::ConversionMismatch {
            residual: worst,
            limit: PUSHFORWARD_LIMIT,
        });
    }
    Ok(conv)
}
