use std::fmt;

use serde::{Deserialize, Serialize};

use super::KnotError;

/// Integer Laurent polynomial `Σ c_k t^(lo + k)` with exact, overflow-checked arithmetic.
///
/// The zero polynomial has no coefficients. Any other value is kept trimmed so that its first
/// and last coefficients are nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LaurentPoly {
    lo: i32,
    coeffs: Vec<i128>,
}

fn overflow() -> KnotError {
    KnotError::Overflow
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly {
            lo: 0,
            coeffs: Vec::new(),
        }
    }

    pub fn one() -> Self {
        LaurentPoly::monomial(1, 0)
    }

    pub fn monomial(c: i128, e: i32) -> Self {
        LaurentPoly::new(e, vec![c])
    }

    /// `coeffs[k]` is the coefficient of `t^(lo + k)`.
    pub fn new(lo: i32, coeffs: Vec<i128>) -> Self {
        let mut p = LaurentPoly { lo, coeffs };
        p.trim();
        p
    }

    /// Ordinary polynomial from coefficients in increasing degree.
    pub fn from_coeffs(coeffs: &[i128]) -> Self {
        LaurentPoly::new(0, coeffs.to_vec())
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|&&c| c == 0).count();
        if lead == self.coeffs.len() {
            self.coeffs.clear();
            self.lo = 0;
        } else if lead > 0 {
            self.coeffs.drain(..lead);
            self.lo += lead as i32;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[i128] {
        &self.coeffs
    }

    pub fn coeff(&self, e: i32) -> i128 {
        let k = e - self.lo;
        if k < 0 {
            return 0;
        }
        self.coeffs.get(k as usize).copied().unwrap_or(0)
    }

    /// Span `hi − lo`; `None` for zero.
    pub fn span(&self) -> Option<i32> {
        (!self.is_zero()).then(|| self.hi() - self.lo)
    }

    pub fn checked_add(&self, o: &LaurentPoly) -> Result<LaurentPoly, KnotError> {
        if self.is_zero() {
            return Ok(o.clone());
        }
        if o.is_zero() {
            return Ok(self.clone());
        }
        let lo = self.lo.min(o.lo);
        let hi = self.hi().max(o.hi());
        let coeffs = (lo..=hi)
            .map(|e| self.coeff(e).checked_add(o.coeff(e)).ok_or_else(overflow))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LaurentPoly::new(lo, coeffs))
    }

    pub fn neg(&self) -> LaurentPoly {
        LaurentPoly {
            lo: self.lo,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn checked_sub(&self, o: &LaurentPoly) -> Result<LaurentPoly, KnotError> {
        self.checked_add(&o.neg())
    }

    pub fn checked_mul(&self, o: &LaurentPoly) -> Result<LaurentPoly, KnotError> {
        if self.is_zero() || o.is_zero() {
            return Ok(LaurentPoly::zero());
        }
        let mut coeffs = vec![0i128; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in o.coeffs.iter().enumerate() {
                let prod = a.checked_mul(b).ok_or_else(overflow)?;
                coeffs[i + j] = coeffs[i + j].checked_add(prod).ok_or_else(overflow)?;
            }
        }
        Ok(LaurentPoly::new(self.lo + o.lo, coeffs))
    }

    /// Exact quotient `self / d`; fails unless the division leaves no remainder.
    pub fn checked_div_exact(&self, d: &LaurentPoly) -> Result<LaurentPoly, KnotError> {
        if d.is_zero() {
            return Err(KnotError::InexactDivision);
        }
        if self.is_zero() {
            return Ok(LaurentPoly::zero());
        }
        let dl = *d.coeffs.last().expect("nonzero");
        let dn = d.coeffs.len();
        let mut rem = self.coeffs.clone();
        if rem.len() < dn {
            return Err(KnotError::InexactDivision);
        }
        let qn = rem.len() - dn + 1;
        let mut q = vec![0i128; qn];
        for k in (0..qn).rev() {
            let top = rem[k + dn - 1];
            if top % dl != 0 {
                return Err(KnotError::InexactDivision);
            }
            let c = top / dl;
            q[k] = c;
            if c != 0 {
                for (j, &dc) in d.coeffs.iter().enumerate() {
                    let prod = c.checked_mul(dc).ok_or_else(overflow)?;
                    rem[k + j] = rem[k + j].checked_sub(prod).ok_or_else(overflow)?;
                }
            }
        }
        if rem.iter().any(|&r| r != 0) {
            return Err(KnotError::InexactDivision);
        }
        Ok(LaurentPoly::new(self.lo - d.lo, q))
    }

    pub fn eval_at_one(&self) -> i128 {
        self.coeffs.iter().sum()
    }

    /// `p(1/t)`.
    pub fn reflected(&self) -> LaurentPoly {
        if self.is_zero() {
            return LaurentPoly::zero();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.reverse();
        LaurentPoly::new(-self.hi(), coeffs)
    }

    /// Unit multiple `±t^k · p` with lowest exponent 0 and positive leading coefficient.
    pub fn normalized(&self) -> LaurentPoly {
        if self.is_zero() {
            return LaurentPoly::zero();
        }
        let sign = if *self.coeffs.last().expect("nonzero") < 0 { -1 } else { 1 };
        LaurentPoly::new(0, self.coeffs.iter().map(|c| c * sign).collect())
    }

    /// Palindromic coefficients, i.e. `p(1/t)` is a unit multiple of `p`.
    pub fn is_symmetric(&self) -> bool {
        let n = self.coeffs.len();
        (0..n).all(|i| self.coeffs[i] == self.coeffs[n - 1 - i])
    }

    /// Symmetric form `t^(−span/2) · p` when the span is even.
    pub fn symmetrized(&self) -> Option<LaurentPoly> {
        let n = self.normalized();
        let span = n.span()?;
        (span % 2 == 0).then(|| LaurentPoly::new(-span / 2, n.coeffs.clone()))
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for k in (0..self.coeffs.len()).rev() {
            let c = self.coeffs[k];
            if c == 0 {
                continue;
            }
            let e = self.lo + k as i32;
            let mag = c.unsigned_abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c < 0 { '-' } else { '+' })?;
            }
            first = false;
            let show_mag = mag != 1 || e == 0;
            match (show_mag, e) {
                (_, 0) => write!(f, "{mag}")?,
                (true, 1) => write!(f, "{mag}t")?,
                (false, 1) => write!(f, "t")?,
                (true, e) => write!(f, "{mag}t^{e}")?,
                (false, e) => write!(f, "t^{e}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly() -> impl Strategy<Value = LaurentPoly> {
        (-3i32..3, proptest::collection::vec(-5i128..=5, 0..6))
            .prop_map(|(lo, c)| LaurentPoly::new(lo, c))
    }

    #[test]
    fn display_forms() {
        assert_eq!(LaurentPoly::from_coeffs(&[1, -1, 1]).to_string(), "t^2 - t + 1");
        assert_eq!(LaurentPoly::from_coeffs(&[1, -3, 1]).to_string(), "t^2 - 3t + 1");
        assert_eq!(LaurentPoly::new(-1, vec![1, -1, 1]).to_string(), "t - 1 + t^-1");
        assert_eq!(LaurentPoly::zero().to_string(), "0");
        assert_eq!(LaurentPoly::one().to_string(), "1");
    }

    #[test]
    fn exact_division() {
        // (t^6 − 1)(t − 1) / ((t^2 − 1)(t^3 − 1)) = t^2 − t + 1
        let num = LaurentPoly::from_coeffs(&[-1, 0, 0, 0, 0, 0, 1])
            .checked_mul(&LaurentPoly::from_coeffs(&[-1, 1]))
            .unwrap();
        let den = LaurentPoly::from_coeffs(&[-1, 0, 1])
            .checked_mul(&LaurentPoly::from_coeffs(&[-1, 0, 0, 1]))
            .unwrap();
        assert_eq!(
            num.checked_div_exact(&den).unwrap(),
            LaurentPoly::from_coeffs(&[1, -1, 1])
        );
        assert_eq!(
            LaurentPoly::from_coeffs(&[1, 1]).checked_div_exact(&LaurentPoly::from_coeffs(&[1, 2])),
            Err(KnotError::InexactDivision)
        );
    }

    #[test]
    fn overflow_is_reported() {
        let big = LaurentPoly::monomial(i128::MAX / 2 + 1, 0);
        assert_eq!(big.checked_add(&big), Err(KnotError::Overflow));
    }

    #[test]
    fn normalization() {
        let p = LaurentPoly::new(-2, vec![-1, 1, -1]);
        let n = p.normalized();
        assert_eq!(n, LaurentPoly::from_coeffs(&[1, -1, 1]));
        assert_eq!(n.symmetrized().unwrap(), LaurentPoly::new(-1, vec![1, -1, 1]));
        assert!(n.is_symmetric());
    }

    proptest! {
        #[test]
        fn ring_laws(p in poly(), q in poly(), r in poly()) {
            let pq = p.checked_mul(&q).unwrap();
            prop_assert_eq!(&pq, &q.checked_mul(&p).unwrap());
            let lhs = p.checked_mul(&q.checked_add(&r).unwrap()).unwrap();
            let rhs = pq.checked_add(&p.checked_mul(&r).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert!(p.checked_sub(&p).unwrap().is_zero());
        }

        #[test]
        fn multiply_then_divide(p in poly(), q in poly()) {
            prop_assume!(!q.is_zero());
            let pq = p.checked_mul(&q).unwrap();
            prop_assert_eq!(pq.checked_div_exact(&q).unwrap(), p);
        }

        #[test]
        fn reflection_is_an_involution(p in poly()) {
            prop_assert_eq!(p.reflected().reflected(), p.clone());
            prop_assert_eq!(p.reflected().eval_at_one(), p.eval_at_one());
        }
    }
}
