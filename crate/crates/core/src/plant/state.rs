use serde::Serialize;

use super::expsum::ExpSum;
use crate::scalar::{Cplx, Real};

/// Element `(h1, h2, h3)` of `L2(0,1; C^2) x C` with exponential-sum components.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct StateFunction<T> {
    pub h1: ExpSum<T>,
    pub h2: ExpSum<T>,
    pub h3: Cplx<T>,
}

impl<T: Real> StateFunction<T> {
    pub fn new(h1: ExpSum<T>, h2: ExpSum<T>, h3: Cplx<T>) -> Self {
        StateFunction { h1, h2, h3 }
    }

    pub fn zero() -> Self {
        StateFunction {
            h1: ExpSum::zero(),
            h2: ExpSum::zero(),
            h3: Cplx::new(T::zero(), T::zero()),
        }
    }

    pub fn h1_at(&self, z: T) -> Cplx<T> {
        self.h1.eval(z)
    }

    pub fn h2_at(&self, z: T) -> Cplx<T> {
        self.h2.eval(z)
    }

    pub fn scale(&self, k: Cplx<T>) -> Self {
        StateFunction {
            h1: self.h1.scale(k),
            h2: self.h2.scale(k),
            h3: self.h3 * k,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        StateFunction {
            h1: self.h1.add(&other.h1),
            h2: self.h2.add(&other.h2),
            h3: self.h3 + other.h3,
        }
    }

    /// `self + k * other`.
    pub fn axpy(&self, k: Cplx<T>, other: &Self) -> Self {
        self.add(&other.scale(k))
    }

    pub fn conj(&self) -> Self {
        StateFunction {
            h1: self.h1.conj(),
            h2: self.h2.conj(),
            h3: self.h3.conj(),
        }
    }

    pub fn compact(&self) -> Self {
        StateFunction {
            h1: self.h1.compact(),
            h2: self.h2.compact(),
            h3: self.h3,
        }
    }

    /// Mismatch `|h3 - h1(0)|` of the domain coupling.
    pub fn domain_defect(&self) -> T {
        use nalgebra::ComplexField;
        (self.h3 - self.h1_at(T::zero())).modulus()
    }

    pub fn norm(&self) -> T {
        inner_product(self, self).re.max(T::zero()).sqrt()
    }
}

/// `<f, g> = int f1 conj(g1) + int f2 conj(g2) + f3 conj(g3)`.
pub fn inner_product<T: Real>(f: &StateFunction<T>, g: &StateFunction<T>) -> Cplx<T> {
    f.h1.inner(&g.h1) + f.h2.inner(&g.h2) + f.h3 * g.h3.conj()
}
