use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DynamicsError, Params, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    /// One stable real direction, unstable focus: `γ < 0 < ρ`.
    InType,
    /// One unstable real direction, stable focus: `ρ < 0 < γ`.
    OutType,
    Other,
}

/// Spectrum of the linearization at a saddle-focus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointAnalysis {
    pub location: [f64; 3],
    /// `(re, im)` pairs; the real eigenvalue comes first, then `ρ + iψ`, then `ρ − iψ`.
    pub eigenvalues: [(f64, f64); 3],
    pub real_eig: f64,
    pub rho: f64,
    pub psi: f64,
    pub saddle_index: f64,
    pub kind: FixedPointKind,
    pub shilnikov: bool,
    /// Largest relative residual `|det(J − λI)|` over the three eigenvalues.
    pub residual: f64,
}

/// Eigenvalues of a 3×3 real matrix from its characteristic cubic, each polished by Newton.
///
/// A real root is always returned first. When the remaining pair is real as well, it is
/// returned with zero imaginary parts.
pub fn eigenvalues(j: &Matrix3<f64>) -> [Complex64; 3] {
    let tr = j.trace();
    let m2 = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)] + j[(0, 0)] * j[(2, 2)]
        - j[(0, 2)] * j[(2, 0)]
        + j[(1, 1)] * j[(2, 2)]
        - j[(1, 2)] * j[(2, 1)];
    let det = j.determinant();
    // λ³ + c2 λ² + c1 λ + c0
    let (c2, c1, c0) = (-tr, m2, -det);
    let cubic = |l: Complex64| ((l + c2) * l + c1) * l + c0;
    let dcubic = |l: Complex64| (3.0 * l + 2.0 * c2) * l + c1;

    let mut r = real_cubic_root(c2, c1, c0);
    for _ in 0..3 {
        let f = ((r + c2) * r + c1) * r + c0;
        let df = (3.0 * r + 2.0 * c2) * r + c1;
        if df == 0.0 {
            break;
        }
        let next = r - f / df;
        if !next.is_finite() {
            break;
        }
        r = next;
    }
    // deflate: λ² + q1 λ + q0
    let q1 = c2 + r;
    let q0 = c1 + r * q1;
    let disc = q1 * q1 - 4.0 * q0;
    let (mut l2, mut l3) = if disc < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        (Complex64::new(-q1 / 2.0, im), Complex64::new(-q1 / 2.0, -im))
    } else {
        let sq = disc.sqrt();
        let big = -0.5 * (q1 + q1.signum() * sq);
        let other = if big != 0.0 { q0 / big } else { 0.0 };
        (Complex64::new(big, 0.0), Complex64::new(other, 0.0))
    };
    for l in [&mut l2, &mut l3] {
        let d = dcubic(*l);
        if d.norm() > 0.0 {
            let next = *l - cubic(*l) / d;
            if next.re.is_finite() && next.im.is_finite() {
                *l = next;
            }
        }
    }
    if disc < 0.0 {
        // keep the pair exactly conjugate
        let re = 0.5 * (l2.re + l3.re);
        let im = 0.5 * (l2.im.abs() + l3.im.abs());
        l2 = Complex64::new(re, im);
        l3 = Complex64::new(re, -im);
    }
    [Complex64::new(r, 0.0), l2, l3]
}

fn real_cubic_root(c2: f64, c1: f64, c0: f64) -> f64 {
    // depressed cubic t³ + p t + q with λ = t − c2/3
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let t = if disc >= 0.0 {
        let s = disc.sqrt();
        (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        m * theta.cos()
    };
    t - shift
}

/// Relative residual of `det(J − λI)`.
pub(crate) fn char_residual(j: &Matrix3<f64>, l: Complex64) -> f64 {
    let m = j.map(|v| Complex64::new(v, 0.0)) - Matrix3::identity() * l;
    let d = m.determinant();
    let scale = 1.0 + j.norm().powi(3) + l.norm().powi(3);
    d.norm() / scale
}

/// Spectrum and saddle-focus type of a fixed point.
pub fn classify_fixed_point(p: &Params, s: &State) -> Result<FixedPointAnalysis, DynamicsError> {
    let residual = p.field(s).norm();
    if residual > 1e-10 * (1.0 + s.norm_squared()) {
        return Err(DynamicsError::NotFixedPoint { residual });
    }
    let j = p.jacobian(s);
    let ev = eigenvalues(&j);
    let pairs = ev.map(|l| (l.re, l.im));
    if ev[1].im == 0.0 {
        return Err(DynamicsError::NotSaddleFocus { eigenvalues: pairs });
    }
    let gamma = ev[0].re;
    let rho = ev[1].re;
    let psi = ev[1].im.abs();
    let kind = if gamma < 0.0 && rho > 0.0 {
        FixedPointKind::InType
    } else if gamma > 0.0 && rho < 0.0 {
        FixedPointKind::OutType
    } else {
        FixedPointKind::Other
    };
    let saddle_index = (rho / gamma).abs();
    let residual = ev.iter().map(|&l| char_residual(&j, l)).fold(0.0, f64::max);
    Ok(FixedPointAnalysis {
        location: [s.x, s.y, s.z],
        eigenvalues: pairs,
        real_eig: gamma,
        rho,
        psi,
        saddle_index,
        kind,
        shilnikov: saddle_index < 1.0,
        residual,
    })
}

/// Verdicts on the three standing assumptions of the parameter region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub params: Params,
    /// `a, b ∈ (0, 1)`, `c > 1`.
    pub ranges: bool,
    /// `P_In` is an In-type and `P_Out` an Out-type saddle-focus.
    pub opposing_saddle_foci: bool,
    /// `ν_In < 1` or `ν_Out < 1`.
    pub shilnikov: bool,
    pub in_region: bool,
    pub p_in: Option<FixedPointAnalysis>,
    pub p_out: Option<FixedPointAnalysis>,
    /// Classification failures, e.g. a real spectrum; never fatal.
    pub notes: Vec<String>,
}

pub fn check_assumptions(p: &Params) -> AssumptionReport {
    let ranges = p.in_range();
    let mut notes = Vec::new();
    let (p_in, p_out) = match p.fixed_points() {
        Ok((pin, pout)) => {
            let a_in = classify_fixed_point(p, &pin)
                .map_err(|e| notes.push(format!("P_In: {e}")))
                .ok();
            let a_out = classify_fixed_point(p, &pout)
                .map_err(|e| notes.push(format!("P_Out: {e}")))
                .ok();
            (a_in, a_out)
        }
        Err(e) => {
            notes.push(e.to_string());
            (None, None)
        }
    };
    let opposing = matches!(
        (&p_in, &p_out),
        (Some(i), Some(o)) if i.kind == FixedPointKind::InType && o.kind == FixedPointKind::OutType
    );
    let shilnikov = p_in.as_ref().is_some_and(|a| a.shilnikov)
        || p_out.as_ref().is_some_and(|a| a.shilnikov);
    AssumptionReport {
        params: *p,
        ranges,
        opposing_saddle_foci: opposing,
        shilnikov,
        in_region: ranges && opposing && shilnikov,
        p_in,
        p_out,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    /// Companion-matrix power iteration is overkill; the oracle here is a bracketing
    /// bisection on the real cubic plus Vieta for the pair.
    fn oracle_real_root(j: &Matrix3<f64>) -> f64 {
        let f = |l: f64| (j - Matrix3::identity() * l).determinant();
        let (mut lo, mut hi) = (-1e3, 1e3);
        assert!(f(lo).signum() != f(hi).signum());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid).signum() == f(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn origin_is_in_type() {
        let p = Params::new(0.5, 0.5, 2.0).unwrap();
        let a = classify_fixed_point(&p, &State::zeros()).unwrap();
        assert_eq!(a.kind, FixedPointKind::InType);
        assert!(a.real_eig < 0.0 && a.rho > 0.0);
        let j = p.jacobian(&State::zeros());
        assert_relative_eq!(a.real_eig, oracle_real_root(&j), epsilon = 1e-9);
        let sum: f64 = a.eigenvalues.iter().map(|e| e.0).sum();
        assert_relative_eq!(sum, 0.5 - 2.0, epsilon = 1e-12);
        for &(re, im) in &a.eigenvalues {
            assert!(char_residual(&j, Complex64::new(re, im)) <= 1e-10);
        }
    }

    #[test]
    fn trace_and_determinant_identities() {
        let p = Params::new(0.2, 0.0351, 5.693).unwrap();
        let (pin, pout) = p.fixed_points().unwrap();
        for s in [pin, pout] {
            let j = p.jacobian(&s);
            let ev = eigenvalues(&j);
            let sum: Complex64 = ev.iter().sum();
            let prod: Complex64 = ev.iter().product();
            assert_relative_eq!(sum.re, j.trace(), max_relative = 1e-9);
            assert!(sum.im.abs() < 1e-12);
            assert_relative_eq!(prod.re, j.determinant(), max_relative = 1e-9);
        }
        let out = classify_fixed_point(&p, &pout).unwrap();
        assert_eq!(out.kind, FixedPointKind::OutType);
    }

    #[test]
    fn real_spectrum_is_reported() {
        // diagonal-dominant Jacobian with three real eigenvalues
        let j = Matrix3::new(1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 3.0);
        let ev = eigenvalues(&j);
        let mut re: Vec<f64> = ev.iter().map(|l| l.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(re[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(re[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(re[2], 3.0, epsilon = 1e-12);
        assert_eq!(ev[1].im, 0.0);
        assert_eq!(ev[2].im, 0.0);
    }

    #[test]
    fn not_a_fixed_point() {
        let p = Params::new(0.5, 0.5, 2.0).unwrap();
        assert!(matches!(
            classify_fixed_point(&p, &Vector3::new(1.0, 1.0, 1.0)),
            Err(DynamicsError::NotFixedPoint { .. })
        ));
    }

    #[test]
    fn assumption_verdicts() {
        let good = check_assumptions(&Params::new(0.5, 0.5, 2.0).unwrap());
        assert!(good.ranges);
        let pin = good.p_in.as_ref().unwrap();
        let pout = good.p_out.as_ref().unwrap();
        assert_eq!(
            good.opposing_saddle_foci,
            pin.kind == FixedPointKind::InType && pout.kind == FixedPointKind::OutType
        );
        assert_eq!(good.shilnikov, pin.saddle_index < 1.0 || pout.saddle_index < 1.0);
        let bad = check_assumptions(&Params::new(1.5, 0.5, 2.0).unwrap());
        assert!(!bad.ranges);
        assert!(!bad.in_region);
    }
}
