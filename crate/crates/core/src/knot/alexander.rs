use serde::{Deserialize, Serialize};

use super::{project, GaussCode, KnotError, LaurentPoly, PolygonalKnot, ProjectOptions};

/// Alexander polynomial of a knot diagram, normalized to lowest exponent 0 and a positive
/// leading coefficient.
///
/// Arcs run from one undercrossing to the next. At crossing `c` with over arc `k`, incoming
/// under arc `i` and outgoing under arc `j`, the row of `c` is `(1 − t)` at `k` and `t`, `−1`
/// at `i`, `j` for a positive crossing (`−1`, `t` for a negative one). The determinant of the
/// matrix with its last row and column removed is taken by fraction-free elimination.
pub fn alexander(code: &GaussCode) -> Result<LaurentPoly, KnotError> {
    code.validate()?;
    let n = code.crossing_count();
    if n <= 1 {
        return Ok(LaurentPoly::one());
    }
    let len = code.passages.len();
    // arc k starts right after the k-th under passage
    let mut arc_at = vec![0usize; len];
    let first_under = code
        .passages
        .iter()
        .position(|p| !p.over)
        .ok_or(KnotError::Disconnected)?;
    let mut arc = 0usize;
    let mut under_arc_in = vec![0usize; n];
    let mut under_arc_out = vec![0usize; n];
    for step in 1..=len {
        let pos = (first_under + step) % len;
        let p = code.passages[pos];
        arc_at[pos] = arc;
        if !p.over {
            under_arc_in[p.crossing] = arc;
            arc = (arc + 1) % n;
            under_arc_out[p.crossing] = arc;
        }
    }
    let one_minus_t = LaurentPoly::from_coeffs(&[1, -1]);
    let t = LaurentPoly::monomial(1, 1);
    let minus_one = LaurentPoly::monomial(-1, 0);
    let mut m = vec![vec![LaurentPoly::zero(); n]; n];
    for (pos, p) in code.passages.iter().enumerate() {
        if !p.over {
            continue;
        }
        let c = p.crossing;
        let (a_in, a_out) = if code.signs[c] > 0 {
            (&t, &minus_one)
        } else {
            (&minus_one, &t)
        };
        let entries = [
            (arc_at[pos], &one_minus_t),
            (under_arc_in[c], a_in),
            (under_arc_out[c], a_out),
        ];
        for (col, val) in entries {
            m[c][col] = m[c][col].checked_add(val)?;
        }
    }
    m.pop();
    for row in &mut m {
        row.pop();
    }
    let det = bareiss_determinant(m)?;
    if det.is_zero() {
        return Err(KnotError::Disconnected);
    }
    Ok(det.normalized())
}

/// Determinant over `Z[t^±1]` by Bareiss elimination; every division is exact.
fn bareiss_determinant(mut m: Vec<Vec<LaurentPoly>>) -> Result<LaurentPoly, KnotError> {
    let n = m.len();
    if n == 0 {
        return Ok(LaurentPoly::one());
    }
    let mut sign = false;
    let mut prev = LaurentPoly::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(r) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                return Ok(LaurentPoly::zero());
            };
            m.swap(k, r);
            sign = !sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let a = m[i][j].checked_mul(&m[k][k])?;
                let b = m[i][k].checked_mul(&m[k][j])?;
                m[i][j] = a.checked_sub(&b)?.checked_div_exact(&prev)?;
            }
            m[i][k] = LaurentPoly::zero();
        }
        prev = m[k][k].clone();
    }
    let det = m[n - 1][n - 1].clone();
    Ok(if sign { det.neg() } else { det })
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn t_power_minus_one(k: u32) -> LaurentPoly {
    let mut c = vec![0i128; k as usize + 1];
    c[0] = -1;
    c[k as usize] = 1;
    LaurentPoly::from_coeffs(&c)
}

/// `(t^{pq} − 1)(t − 1) / ((t^p − 1)(t^q − 1))`, the Alexander polynomial of `T(p, q)`.
pub fn torus_alexander(p: u32, q: u32) -> Result<LaurentPoly, KnotError> {
    if p < 2 || q < 2 || gcd(p, q) != 1 {
        return Err(KnotError::TorusParams { p, q });
    }
    let num = t_power_minus_one(p * q).checked_mul(&t_power_minus_one(1))?;
    let den = t_power_minus_one(p).checked_mul(&t_power_minus_one(q))?;
    Ok(num.checked_div_exact(&den)?.normalized())
}

/// Knot type up to Alexander-polynomial equivalence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum KnotClass {
    UnknotCompatible,
    TrefoilCompatible,
    TorusCompatible { p: u32, q: u32 },
    Unknown,
}

impl KnotClass {
    pub fn label(&self) -> String {
        match self {
            KnotClass::UnknotCompatible => "unknot-compatible".into(),
            KnotClass::TrefoilCompatible => "trefoil-compatible".into(),
            KnotClass::TorusCompatible { p, q } => format!("torus({p},{q})-compatible"),
            KnotClass::Unknown => "unknown".into(),
        }
    }
}

/// Matches a normalized polynomial against `torus_alexander(p, q)` for coprime
/// `2 ≤ p < q ≤ bound`.
pub fn identify(poly: &LaurentPoly, bound: u32) -> KnotClass {
    let poly = poly.normalized();
    if poly == LaurentPoly::one() {
        return KnotClass::UnknotCompatible;
    }
    let span = poly.span().unwrap_or(0) as u32;
    for p in 2..=bound {
        for q in p + 1..=bound {
            if gcd(p, q) != 1 || (p - 1) * (q - 1) != span {
                continue;
            }
            if torus_alexander(p, q).is_ok_and(|t| t == poly) {
                return if (p, q) == (2, 3) {
                    KnotClass::TrefoilCompatible
                } else {
                    KnotClass::TorusCompatible { p, q }
                };
            }
        }
    }
    KnotClass::Unknown
}

/// Knot-type certificate of a closed curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub polynomial: String,
    pub coefficients: Vec<i128>,
    pub class: KnotClass,
    pub label: String,
    pub crossings_projected: usize,
    pub crossings_reduced: usize,
    pub writhe: i64,
    pub direction: [f64; 3],
}

pub const IDENTIFY_BOUND: u32 = 12;

impl Certificate {
    pub fn from_code(code: &GaussCode, projected: usize, direction: [f64; 3]) -> Result<Self, KnotError> {
        let poly = alexander(code)?;
        let class = identify(&poly, IDENTIFY_BOUND);
        Ok(Certificate {
            polynomial: poly.to_string(),
            coefficients: poly.coeffs().to_vec(),
            class,
            label: class.label(),
            crossings_projected: projected,
            crossings_reduced: code.crossing_count(),
            writhe: code.writhe(),
            direction,
        })
    }

    /// Project, reduce, and compute `Δ`.
    pub fn of_knot(knot: &PolygonalKnot, opts: &ProjectOptions) -> Result<Self, KnotError> {
        let diagram = project(knot, opts)?;
        let reduced = diagram.simplify();
        Certificate::from_code(&reduced.code, diagram.crossing_count(), diagram.direction)
    }

    pub fn same_polynomial(&self, other: &Certificate) -> bool {
        self.coefficients == other.coefficients
    }
}
