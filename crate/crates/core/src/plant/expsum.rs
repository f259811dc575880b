use nalgebra::ComplexField;
use serde::Serialize;

use crate::scalar::{cr, Cplx, Real};

/// Finite sum `sum_j c_j exp(s_j z)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ExpSum<T> {
    /// `(coefficient, exponent)` pairs.
    pub terms: Vec<(Cplx<T>, Cplx<T>)>,
}

impl<T: Real> ExpSum<T> {
    pub fn zero() -> Self {
        ExpSum { terms: Vec::new() }
    }

    pub fn constant(c: Cplx<T>) -> Self {
        ExpSum {
            terms: vec![(c, Cplx::new(T::zero(), T::zero()))],
        }
    }

    pub fn exp(coef: Cplx<T>, exponent: Cplx<T>) -> Self {
        ExpSum {
            terms: vec![(coef, exponent)],
        }
    }

    pub fn eval(&self, z: T) -> Cplx<T> {
        self.terms
            .iter()
            .fold(Cplx::new(T::zero(), T::zero()), |acc, &(c, s)| acc + c * (s * cr(z)).exp())
    }

    pub fn derivative(&self) -> Self {
        ExpSum {
            terms: self.terms.iter().map(|&(c, s)| (c * s, s)).collect(),
        }
    }

    pub fn scale(&self, k: Cplx<T>) -> Self {
        ExpSum {
            terms: self.terms.iter().map(|&(c, s)| (c * k, s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        ExpSum { terms }
    }

    /// `(conj f)(z)`: conjugates coefficients and exponents.
    pub fn conj(&self) -> Self {
        ExpSum {
            terms: self.terms.iter().map(|&(c, s)| (c.conj(), s.conj())).collect(),
        }
    }

    /// Merges terms with identical exponents and drops zero coefficients.
    pub fn compact(&self) -> Self {
        let mut out: Vec<(Cplx<T>, Cplx<T>)> = Vec::with_capacity(self.terms.len());
        for &(c, s) in &self.terms {
            match out.iter_mut().find(|(_, e)| *e == s) {
                Some(slot) => slot.0 += c,
                None => out.push((c, s)),
            }
        }
        out.retain(|(c, _)| *c != Cplx::new(T::zero(), T::zero()));
        ExpSum { terms: out }
    }

    /// `int_0^1 f(z) conj(g(z)) dz` in closed form.
    pub fn inner(&self, other: &Self) -> Cplx<T> {
        let mut acc = Cplx::new(T::zero(), T::zero());
        for &(a, p) in &self.terms {
            for &(b, q) in &other.terms {
                acc += a * b.conj() * exp_integral(p + q.conj());
            }
        }
        acc
    }
}

/// `int_0^1 exp(s z) dz = (e^s - 1)/s`, by Taylor series for small `|s|`.
pub fn exp_integral<T: Real>(s: Cplx<T>) -> Cplx<T> {
    if s.modulus() < T::one() {
        let mut term = Cplx::new(T::one(), T::zero());
        let mut sum = term;
        for k in 2..40usize {
            term = term * s / cr(T::of_usize(k));
            sum += term;
            if term.modulus() <= T::eps() * sum.modulus() {
                break;
            }
        }
        sum
    } else {
        (s.exp() - cr(T::one())) / s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_continuous_across_branch() {
        for &r in &[0.999_999, 1.000_001] {
            let s = Cplx::new(r * 0.6, r * 0.8);
            let a = exp_integral(s);
            let b = (s.exp() - 1.0) / s;
            assert!((a - b).norm() < 1e-13);
        }
        assert_eq!(exp_integral(Cplx::new(0.0, 0.0)), Cplx::new(1.0, 0.0));
    }

    #[test]
    fn derivative_and_compact() {
        let f = ExpSum::exp(Cplx::new(2.0, 0.0), Cplx::new(1.0, 1.0))
            .add(&ExpSum::exp(Cplx::new(1.0, 0.0), Cplx::new(1.0, 1.0)));
        let c = f.compact();
        assert_eq!(c.terms.len(), 1);
        let d = f.derivative();
        let z = 0.3;
        let fd = (f.eval(z + 1e-6) - f.eval(z - 1e-6)) / 2e-6;
        assert!((d.eval(z) - fd).norm() < 1e-7);
    }
}
