//! The coupled plant/observer/feedback loop and its spectrum.
//!
//! With feedback `u = kappa_b h1(1) + Kf^T q` the closed loop is
//!
//! ```text
//! x' = A x,      x2(1) = kappa_b x1(1) + Kf^T q
//! q' = A4 q + A3 x,   A3 h = a3 h1(1)
//! ```
//!
//! Its eigenvalues outside `sigma(A4)` are the zeros of
//! `h2(1) - kappa_b h1(1) - Kf^T (lambda - A4)^{-1} A3 h` at `h = phi_I(lambda)`;
//! points of `sigma(A4)` are tested separately on an overdetermined system.

use nalgebra::ComplexField;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gains::{FeedbackFunctional, GainMethod, GainSet};
use crate::linalg::{eigenvalues, lstsq_residual, min_singular, solve, CMatrix, CVector};
use crate::observer::ObserverRealization;
use crate::plant::{Plant, StateFunction};
use crate::scalar::{cr, to_c64, Cplx, Real};
use crate::spectral::{
    find_roots, spectral_order, CharFunction, EvalError, Rect, Root, RootMethod, RootOptions, SpectralError,
    SpectrumResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeedbackVariant {
    /// `u = k_ring x1(1) + K^T q`.
    Homogeneous,
    /// Feedback on the inhomogeneous reconstruction, rearranged to be explicit in `u`.
    Inhomogeneous,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedLoopError {
    #[error("inhomogeneous feedback denominator {value:e} is too close to zero")]
    SingularDenominator { value: f64 },
    #[error("gain length {k} does not match observer order {n}")]
    Dimension { n: usize, k: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Coefficients of the rearranged inhomogeneous feedback.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InhFeedback<T> {
    pub k_u: Cplx<T>,
    pub k_y: Cplx<T>,
    /// `1 - k_u + K^T B1`.
    pub denominator: Cplx<T>,
    pub k_ring_inh: Cplx<T>,
    pub k_inh: Vec<Cplx<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopBlocks<T: Real> {
    #[serde(skip)]
    pub a4: CMatrix<T>,
    /// `A3 h = a3 * h1(1)`.
    pub a3: Vec<Cplx<T>>,
    /// `C + c_hat_u Kf`.
    pub c_hat: Vec<Cplx<T>>,
    /// Bounded feedback row acting on `q`.
    pub kf: Vec<Cplx<T>>,
    /// Coefficient of `x1(1)` in the feedback.
    pub kappa_b: Cplx<T>,
    pub variant: FeedbackVariant,
    pub inh: Option<InhFeedback<T>>,
    /// Eigenvalues of the modal model, in observer-coordinate order.
    pub modal_lambdas: Vec<Cplx<T>>,
    pub plant: Plant<T>,
}

fn dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter().zip(b).fold(cr(T::zero()), |s, (x, y)| s + *x * *y)
}

/// Assembles the closed-loop blocks for either feedback variant.
pub fn assemble<T: Real>(
    plant: &Plant<T>,
    real: &ObserverRealization<T>,
    gains: &GainSet<T>,
    variant: FeedbackVariant,
) -> Result<ClosedLoopBlocks<T>, ClosedLoopError> {
    let n = real.order();
    if gains.k.len() != n {
        return Err(ClosedLoopError::Dimension { n, k: gains.k.len() });
    }
    let k_ring = cr(plant.derived.k_ring);
    let (kappa_b, kf, inh) = match variant {
        FeedbackVariant::Homogeneous => (k_ring, gains.k.clone(), None),
        FeedbackVariant::Inhomogeneous => {
            let (k_u, k_y) = match gains.method {
                GainMethod::Paper => {
                    let e = FeedbackFunctional::new(plant);
                    (
                        e.apply(real.phi_u.h3, real.anchors.lambda_u),
                        e.apply(real.phi_y.h3, real.anchors.lambda_y),
                    )
                }
                // the bounded part is only defined through its modal truncation
                GainMethod::PolePlacement => (dot(&gains.k, &real.b1), dot(&gains.k, &real.g1)),
            };
            let d = cr(T::one()) - k_u + dot(&gains.k, &real.b1);
            if d.modulus() <= T::lit(1e-8) {
                return Err(ClosedLoopError::SingularDenominator {
                    value: d.modulus().into(),
                });
            }
            let kb = (k_ring + k_y - dot(&gains.k, &real.g1)) / d;
            let kinh: Vec<_> = gains.k.iter().map(|k| *k / d).collect();
            (
                kb,
                kinh.clone(),
                Some(InhFeedback {
                    k_u,
                    k_y,
                    denominator: d,
                    k_ring_inh: kb,
                    k_inh: kinh,
                }),
            )
        }
    };
    let (m, b) = real.drift();
    let mut a4 = m;
    let mut a3 = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..n {
            a4[(i, j)] += b[(i, 0)] * kf[j];
        }
        a3.push(b[(i, 0)] * kappa_b + b[(i, 1)]);
    }
    let c_hat = (0..n).map(|i| real.c[i] + real.c_hat_u * kf[i]).collect();
    Ok(ClosedLoopBlocks {
        a4,
        a3,
        c_hat,
        kf,
        kappa_b,
        variant,
        inh,
        modal_lambdas: real.lambdas.clone(),
        plant: *plant,
    })
}

impl<T: Real> ClosedLoopBlocks<T> {
    pub fn order(&self) -> usize {
        self.a3.len()
    }

    /// `A3 h`.
    pub fn apply_a3(&self, h: &StateFunction<T>) -> Vec<Cplx<T>> {
        let y = h.h1_at(T::one());
        self.a3.iter().map(|a| *a * y).collect()
    }

    /// `h2(1) - kappa_b h1(1)`.
    pub fn boundary(&self, h: &StateFunction<T>) -> Cplx<T> {
        h.h2_at(T::one()) - self.kappa_b * h.h1_at(T::one())
    }

    pub fn a4_eigenvalues(&self) -> Vec<Cplx<T>> {
        let mut ev = eigenvalues(&self.a4);
        ev.sort_by(spectral_order);
        ev
    }

    pub fn char_function(&self) -> ClosedLoopCharFunction<'_, T> {
        ClosedLoopCharFunction {
            blocks: self,
            excluded: self.a4_eigenvalues(),
        }
    }

    /// Finite-block test at `lambda`.
    ///
    /// Eigenvectors with a plant component solve
    /// `[Kf^T; lambda - A4] v = [h2(1) - kappa_b h1(1); A3 h]`, `h = phi_I(lambda)`;
    /// those without satisfy `(lambda - A4) v = 0`, `Kf^T v = 0`.
    pub fn check_finite_block(&self, lambda: Cplx<T>, tol: T) -> FiniteBlockCheck<T> {
        let n = self.order();
        let h = self.plant.homogeneous_eigenfunction(lambda);
        let h = h.scale(cr(T::one() / h.norm()));
        let mut m = CMatrix::<T>::zeros(n + 1, n);
        let mut rhs = CVector::<T>::zeros(n + 1);
        rhs[0] = self.boundary(&h);
        let a3h = self.apply_a3(&h);
        for j in 0..n {
            m[(0, j)] = self.kf[j];
            for i in 0..n {
                m[(i + 1, j)] = -self.a4[(i, j)];
            }
            m[(j + 1, j)] += lambda;
            rhs[j + 1] = a3h[j];
        }
        let nrm = rhs.norm().max(T::eps());
        let with_plant = lstsq_residual(&m, &rhs, T::lit(1e-8)) / nrm;

        let shifted = m.rows(1, n).into_owned();
        let (smin, v) = min_singular(&shifted);
        let scale = self.a4.norm().max(lambda.modulus()).max(T::one());
        let kv = dot(&self.kf, v.as_slice()).modulus() / (T::one() + self.kf.iter().fold(T::zero(), |a, k| a.max(k.modulus())));
        let without_plant = (smin / scale).max(kv);
        FiniteBlockCheck {
            lambda,
            residual_with_plant: with_plant,
            residual_without_plant: without_plant,
            is_eigenvalue: with_plant < tol || without_plant < tol,
        }
    }

    /// Closed-loop spectrum in `region`: zeros of the characteristic function
    /// plus members of `sigma(A4)` confirmed by [`Self::check_finite_block`].
    pub fn compute_spectrum(&self, region: Rect<T>, opts: &RootOptions<T>) -> Result<ClosedLoopSpectrum<T>, ClosedLoopError> {
        let f = self.char_function();
        let mut res = find_roots(&f, region, opts)?;
        let checks: Vec<FiniteBlockCheck<T>> = f
            .excluded
            .par_iter()
            .filter(|z| region.contains(**z))
            .map(|z| self.check_finite_block(*z, T::lit(1e-6)))
            .collect();
        for c in &checks {
            if c.is_eigenvalue {
                let rad = opts.dedup * (T::one() + c.lambda.modulus());
                if res.roots.iter().all(|r| (r.value - c.lambda).modulus() >= rad) {
                    res.roots.push(Root {
                        value: c.lambda,
                        residual: c.residual_with_plant.min(c.residual_without_plant),
                        iterations: 0,
                        method: RootMethod::FiniteBlock,
                    });
                }
            }
        }
        res.roots.sort_by(|a, b| spectral_order(&a.value, &b.value));
        Ok(ClosedLoopSpectrum {
            spectrum: res,
            a4_eigenvalues: f.excluded.clone(),
            finite_block: checks,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiniteBlockCheck<T> {
    pub lambda: Cplx<T>,
    /// Relative least-squares residual of the system with a plant component.
    pub residual_with_plant: T,
    /// Residual of the pure observer eigenvector condition.
    pub residual_without_plant: T,
    pub is_eigenvalue: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopSpectrum<T> {
    pub spectrum: SpectrumResult<T>,
    pub a4_eigenvalues: Vec<Cplx<T>>,
    pub finite_block: Vec<FiniteBlockCheck<T>>,
}

impl<T: Real> ClosedLoopSpectrum<T> {
    pub fn values(&self) -> Vec<Cplx<T>> {
        self.spectrum.values()
    }

    /// Largest real part, or `None` for an empty set.
    pub fn abscissa(&self) -> Option<T> {
        self.spectrum.roots.iter().map(|r| r.value.re).reduce(|a, b| a.max(b))
    }
}

/// Characteristic function of the closed loop, meromorphic with poles in `sigma(A4)`.
pub struct ClosedLoopCharFunction<'a, T: Real> {
    blocks: &'a ClosedLoopBlocks<T>,
    excluded: Vec<Cplx<T>>,
}

impl<T: Real> CharFunction<T> for ClosedLoopCharFunction<'_, T> {
    fn eval(&self, lambda: Cplx<T>) -> Result<Cplx<T>, EvalError> {
        let b = self.blocks;
        let n = b.order();
        let h = b.plant.homogeneous_eigenfunction(lambda);
        let y = h.h1_at(T::one());
        let base = b.boundary(&h);
        if n == 0 {
            return Ok(base);
        }
        let mut m = -b.a4.clone();
        for i in 0..n {
            m[(i, i)] += lambda;
        }
        let rhs = CVector::<T>::from_iterator(n, b.a3.iter().map(|a| *a * y));
        let w = solve(m, &rhs).ok_or(EvalError::Singular)?;
        let v = base - dot(&b.kf, w.as_slice());
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
        true
    }
}

/// Distance from each of `targets` to the nearest of `computed`; the maximum.
pub fn max_nearest_distance<T: Real>(targets: &[Cplx<T>], computed: &[Cplx<T>]) -> T {
    targets
        .iter()
        .map(|t| {
            computed
                .iter()
                .map(|c| (*c - *t).modulus())
                .fold(T::max_value().unwrap(), |a, b| a.min(b))
        })
        .fold(T::zero(), |a, b| a.max(b))
}

/// Default closed-loop scan region.
pub fn default_region<T: Real>() -> Rect<T> {
    Rect::new(T::lit(-60.0), T::lit(5.0), T::lit(-250.0), T::lit(250.0))
}

/// Default grid for a closed-loop scan: about `0.5` spacing in both directions.
pub fn default_options<T: Real>(region: &Rect<T>) -> RootOptions<T> {
    RootOptions::for_region(region, T::lit(0.5), T::lit(0.5))
}

/// `re+imi` with six decimals.
pub fn describe<T: Real>(z: Cplx<T>) -> String {
    let z = to_c64(z);
    format!("{:.6}{:+.6}i", z.re, z.im)
}
