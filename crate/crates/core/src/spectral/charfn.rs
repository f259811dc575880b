use thiserror::Error;

use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("point lies in the excluded set")]
    Excluded,
    #[error("singular linear system")]
    Singular,
    #[error("non-finite value")]
    NonFinite,
}

/// Scalar analytic function `lambda -> g(lambda)` whose zeros are eigenvalues.
///
/// Implementations must be reentrant; grid scans evaluate concurrently.
pub trait CharFunction<T: Real>: Sync {
    fn eval(&self, lambda: Cplx<T>) -> Result<Cplx<T>, EvalError>;

    /// Points where the evaluator is invalid (poles of an embedded resolvent).
    fn excluded_points(&self) -> &[Cplx<T>] {
        &[]
    }

    /// Declares `g(conj z) = conj g(z)`.
    fn conjugate_symmetric(&self) -> bool {
        false
    }
}

/// Closure-backed [`CharFunction`].
pub struct FnCharFunction<T, F> {
    f: F,
    excluded: Vec<Cplx<T>>,
    symmetric: bool,
}

impl<T: Real, F> FnCharFunction<T, F>
where
    F: Fn(Cplx<T>) -> Cplx<T> + Sync,
{
    pub fn new(f: F) -> Self {
        FnCharFunction {
            f,
            excluded: Vec::new(),
            symmetric: false,
        }
    }

    pub fn conjugate_symmetric(mut self, yes: bool) -> Self {
        self.symmetric = yes;
        self
    }

    pub fn with_excluded(mut self, pts: Vec<Cplx<T>>) -> Self {
        self.excluded = pts;
        self
    }
}

impl<T: Real, F> CharFunction<T> for FnCharFunction<T, F>
where
    F: Fn(Cplx<T>) -> Cplx<T> + Sync,
{
    fn eval(&self, lambda: Cplx<T>) -> Result<Cplx<T>, EvalError> {
        let v = (self.f)(lambda);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn excluded_points(&self) -> &[Cplx<T>] {
        &self.excluded
    }

    fn conjugate_symmetric(&self) -> bool {
        self.symmetric
    }
}

impl<T: Real, C: CharFunction<T> + ?Sized> CharFunction<T> for &C {
    fn eval(&self, lambda: Cplx<T>) -> Result<Cplx<T>, EvalError> {
        (**self).eval(lambda)
    }
    fn excluded_points(&self) -> &[Cplx<T>] {
        (**self).excluded_points()
    }
    fn conjugate_symmetric(&self) -> bool {
        (**self).conjugate_symmetric()
    }
}
