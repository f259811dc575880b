//! Closed-form eigenstructure of the coupled transport system
//!
//! ```text
//! w1_t = alpha w2_z,  w2_t = beta w1_z,  w3' = gamma w2(0),
//! w3 = w1(0),  u = w2(1),  y = w1(1)
//! ```
//!
//! under a boundary functional `h -> h2(1) - r h1(1)`.

mod expsum;
mod state;

pub use expsum::{exp_integral, ExpSum};
pub use state::{inner_product, StateFunction};

use std::fmt;

use log::debug;
use nalgebra::ComplexField;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::params::{DerivedParams, ParamError, SystemParams};
use crate::scalar::{cr, cx, to_c64, Cplx, Real};
use crate::spectral::{
    count_roots_argument_principle, find_roots, CharFunction, EvalError, Rect, RootOptions, SpectralError,
};

/// Which boundary law closes the plant at `z = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BoundaryKind {
    /// `u = w2(1)` with `u = 0`.
    Open,
    /// `w2(1) = rho w1(1)`: the observer intermediate system.
    Intermediate,
    /// `w2(1) = k_ring w1(1)`: the plant under the unbounded feedback part only.
    Controller,
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryKind::Open => "plant",
            BoundaryKind::Intermediate => "intermediate",
            BoundaryKind::Controller => "controller-intermediate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error("multiple eigenvalue detected near {re}{im:+}i (count {count})")]
    MultipleEigenvalue { re: f64, im: f64, count: i64 },
    #[error("insufficient roots in region: found {found}, needed {needed}")]
    InsufficientRoots { found: usize, needed: usize },
    #[error("root count mismatch: scan found {found}, argument principle counts {counted}")]
    CountMismatch { found: usize, counted: i64 },
    #[error("anchor {re}{im:+}i is too close to the spectrum")]
    AnchorNearSpectrum { re: f64, im: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// The example plant together with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plant<T> {
    pub params: SystemParams<T>,
    pub derived: DerivedParams<T>,
    /// `gamma * beta * tau`.
    pub g: T,
}

/// One eigenvalue with its eigenfunction and biorthonormal adjoint eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenMode<T> {
    pub lambda: Cplx<T>,
    /// Unit-norm eigenfunction.
    pub phi: StateFunction<T>,
    /// Adjoint eigenfunction scaled so that `<phi, phi_star> = 1`.
    pub phi_star: StateFunction<T>,
    pub index: usize,
}

impl<T: Real> Plant<T> {
    pub fn new(params: SystemParams<T>) -> Result<Self, ParamError> {
        let derived = params.derive()?;
        Ok(Plant {
            params,
            derived,
            g: params.gamma * params.beta * derived.tau,
        })
    }

    pub fn reference() -> Self {
        Self::new(SystemParams::reference()).expect("reference parameters are valid")
    }

    pub fn tau(&self) -> T {
        self.derived.tau
    }

    /// Boundary coefficient `r` of the functional `h2(1) - r h1(1)`.
    pub fn coefficient(&self, kind: BoundaryKind) -> T {
        match kind {
            BoundaryKind::Open => T::zero(),
            BoundaryKind::Intermediate => self.derived.rho,
            BoundaryKind::Controller => self.derived.k_ring,
        }
    }

    /// `A h = (alpha h2', beta h1', gamma h2(0))`.
    pub fn apply_a(&self, h: &StateFunction<T>) -> StateFunction<T> {
        let p = &self.params;
        StateFunction::new(
            h.h2.derivative().scale(cr(p.alpha)),
            h.h1.derivative().scale(cr(p.beta)),
            h.h2_at(T::zero()) * cr(p.gamma),
        )
    }

    /// Formal adjoint `A* g = (-beta g2', -alpha g1', -beta g2(0))`.
    pub fn apply_adjoint(&self, g: &StateFunction<T>) -> StateFunction<T> {
        let p = &self.params;
        StateFunction::new(
            g.h2.derivative().scale(cr(-p.beta)),
            g.h1.derivative().scale(cr(-p.alpha)),
            g.h2_at(T::zero()) * cr(-p.beta),
        )
    }

    /// `h2(1) - r h1(1)`.
    pub fn boundary(&self, h: &StateFunction<T>, r: T) -> Cplx<T> {
        h.h2_at(T::one()) - h.h1_at(T::one()) * cr(r)
    }

    /// Output trace `h1(1)`.
    pub fn output(&self, h: &StateFunction<T>) -> Cplx<T> {
        h.h1_at(T::one())
    }

    /// Residuals of the two adjoint-domain conditions for coefficient `r`:
    /// `gamma g3 - alpha g1(0)` and `alpha r g1(1) + beta g2(1)`.
    pub fn adjoint_domain_defect(&self, g: &StateFunction<T>, r: T) -> (T, T) {
        let p = &self.params;
        let a = g.h3 * cr(p.gamma) - g.h1_at(T::zero()) * cr(p.alpha);
        let b = g.h1_at(T::one()) * cr(p.alpha * r) + g.h2_at(T::one()) * cr(p.beta);
        (a.modulus(), b.modulus())
    }

    /// Solution of `A h = lambda h`, `h3 = h1(0)` with no condition at `z = 1`:
    ///
    /// `h1 = (lambda+g) e^{lambda tau z} + (g-lambda) e^{-lambda tau z}`,
    /// `h2 = beta tau ((lambda+g) e^{lambda tau z} - (g-lambda) e^{-lambda tau z})`, `h3 = 2g`.
    ///
    /// Regular at `lambda = 0`, where it reduces to `(2g, 0, 2g)`.
    pub fn homogeneous_eigenfunction(&self, lambda: Cplx<T>) -> StateFunction<T> {
        let tau = cr(self.tau());
        let g = cr(self.g);
        let (cp, cm) = (lambda + g, g - lambda);
        let s = lambda * tau;
        let bt = cr(self.params.beta) * tau;
        StateFunction::new(
            ExpSum {
                terms: vec![(cp, s), (cm, -s)],
            },
            ExpSum {
                terms: vec![(bt * cp, s), (-bt * cm, -s)],
            },
            cp + cm,
        )
    }

    /// Solution of `A* g = mu g` in the adjoint domain (up to the condition at `z = 1`).
    pub fn adjoint_eigenfunction(&self, mu: Cplx<T>) -> StateFunction<T> {
        let tau = cr(self.tau());
        let g = cr(self.g);
        let (dp, dm) = (g + mu, g - mu);
        let s = mu * tau;
        let at = cr(self.params.alpha) * tau;
        StateFunction::new(
            ExpSum {
                terms: vec![(dp, s), (dm, -s)],
            },
            ExpSum {
                terms: vec![(-at * dp, s), (at * dm, -s)],
            },
            (dp + dm) * cr(self.params.alpha / self.params.gamma),
        )
    }

    /// `lambda -> h2(1) - r h1(1)` evaluated on [`Self::homogeneous_eigenfunction`].
    pub fn char_function(&self, kind: BoundaryKind) -> BoundaryCharFunction<T> {
        BoundaryCharFunction {
            plant: *self,
            r: self.coefficient(kind),
        }
    }

    /// Characteristic function of the observer intermediate system.
    pub fn intermediate_char_function(&self) -> BoundaryCharFunction<T> {
        self.char_function(BoundaryKind::Intermediate)
    }

    /// Real part of the asymptotic vertical chain for coefficient `r`.
    pub fn chain_real_part(&self, kind: BoundaryKind) -> T {
        let bt = self.params.beta * self.tau();
        let r = self.coefficient(kind);
        let ratio = (bt + r) / (bt - r);
        ratio.abs().ln() / (T::lit(2.0) * self.tau())
    }

    /// Rectangle that contains at least the `n` lowest eigenvalues.
    pub fn default_mode_region(&self, kind: BoundaryKind, n: usize) -> Rect<T> {
        let chain = self.chain_real_part(kind);
        let ga = self.g.abs();
        let im = T::of_usize(n / 2 + 3) * T::pi() / self.tau();
        Rect::new(
            chain.min(T::zero()) - T::lit(2.0) * ga - T::lit(20.0),
            chain.max(T::zero()) + ga + T::lit(10.0),
            -im,
            im,
        )
    }

    fn mode_scan_options(&self, region: &Rect<T>) -> RootOptions<T> {
        RootOptions::for_region(region, T::one(), T::pi() / (T::lit(16.0) * self.tau()))
    }

    /// All eigenvalues in `region`, certified by an argument-principle count.
    pub fn eigenvalues_in(&self, kind: BoundaryKind, region: Rect<T>) -> Result<Vec<Cplx<T>>, ModeError> {
        let f = self.char_function(kind);
        let res = find_roots(&f, region, &self.mode_scan_options(&region))?;
        let samples = (res.roots.len() * 8).max(64);
        let counted = count_roots_argument_principle(&f, region, samples)?;
        if counted != res.roots.len() as i64 {
            return Err(ModeError::CountMismatch {
                found: res.roots.len(),
                counted,
            });
        }
        Ok(res.values())
    }

    /// The `n` eigenvalues of smallest `|Im|` (positive imaginary part first),
    /// extended by one when the cut would split a conjugate pair.
    pub fn eigenvalues(&self, kind: BoundaryKind, n: usize) -> Result<Vec<Cplx<T>>, ModeError> {
        let region = self.default_mode_region(kind, n);
        let mut all = self.eigenvalues_in(kind, region)?;
        if all.len() < n {
            return Err(ModeError::InsufficientRoots {
                found: all.len(),
                needed: n,
            });
        }
        let mut take = n;
        if n > 0 && all[n - 1].im > T::zero() && all.len() > n {
            take += 1;
        }
        all.truncate(take);
        Ok(all)
    }

    /// Eigenmodes for the `n` lowest eigenvalues under boundary law `kind`.
    ///
    /// Each eigenvalue is checked to be simple by a winding count on a small
    /// box around it.
    pub fn eigenmodes(&self, kind: BoundaryKind, n: usize) -> Result<Vec<EigenMode<T>>, ModeError> {
        let lams = self.eigenvalues(kind, n)?;
        self.check_simple(kind, &lams)?;
        Ok(lams
            .iter()
            .enumerate()
            .map(|(i, &l)| self.mode_at(l, i))
            .collect())
    }

    /// Builds the biorthonormalised mode at a known eigenvalue.
    pub fn mode_at(&self, lambda: Cplx<T>, index: usize) -> EigenMode<T> {
        let phi = self.homogeneous_eigenfunction(lambda);
        let phi = phi.scale(cr(T::one() / phi.norm()));
        let psi = self.adjoint_eigenfunction(lambda.conj());
        let s = inner_product(&phi, &psi);
        EigenMode {
            lambda,
            phi,
            phi_star: psi.scale(cr(T::one()) / s.conj()),
            index,
        }
    }

    fn check_simple(&self, kind: BoundaryKind, lams: &[Cplx<T>]) -> Result<(), ModeError> {
        let f = self.char_function(kind);
        let counts: Vec<Result<i64, ModeError>> = lams
            .par_iter()
            .map(|&l| {
                let gap = lams
                    .iter()
                    .filter(|&&o| o != l)
                    .map(|&o| (o - l).modulus())
                    .fold(T::lit(4.0), |a, b| a.min(b));
                let half = gap / T::lit(4.0);
                Ok(count_roots_argument_principle(&f, Rect::around(l, half), 32)?)
            })
            .collect();
        for (l, c) in lams.iter().zip(counts) {
            let c = c?;
            if c != 1 {
                let z = to_c64(*l);
                return Err(ModeError::MultipleEigenvalue {
                    re: z.re,
                    im: z.im,
                    count: c,
                });
            }
        }
        debug!("{} eigenvalues certified simple", lams.len());
        Ok(())
    }

    /// Solution of `lambda h = A h` with `h2(1) - r h1(1) = input_value`.
    pub fn boundary_value_mode(
        &self,
        anchor: Cplx<T>,
        input_value: Cplx<T>,
        kind: BoundaryKind,
    ) -> Result<StateFunction<T>, ModeError> {
        let h = self.homogeneous_eigenfunction(anchor);
        let k = self.boundary(&h, self.coefficient(kind));
        if k.modulus() <= T::lit(1e-8) * h.norm() {
            let z = to_c64(anchor);
            return Err(ModeError::AnchorNearSpectrum { re: z.re, im: z.im });
        }
        Ok(h.scale(input_value / k))
    }

    /// `b_i = alpha conj(phi*_{i,1}(1))`, the modal coefficients of the boundary input.
    pub fn modal_input_coefficients(&self, modes: &[EigenMode<T>]) -> Vec<Cplx<T>> {
        modes
            .iter()
            .map(|m| m.phi_star.h1_at(T::one()).conj() * cr(self.params.alpha))
            .collect()
    }

    /// `C_i = phi_{i,1}(1)`.
    pub fn modal_output_coefficients(&self, modes: &[EigenMode<T>]) -> Vec<Cplx<T>> {
        modes.iter().map(|m| self.output(&m.phi)).collect()
    }
}

impl<T: Real> EigenMode<T> {
    /// `||A phi - lambda phi|| / ||phi||`, exact in the exponential-sum representation.
    pub fn eigen_residual(&self, plant: &Plant<T>) -> T {
        let r = plant.apply_a(&self.phi).axpy(-self.lambda, &self.phi);
        r.norm() / self.phi.norm()
    }

    /// Same as [`Self::eigen_residual`] but sampled at `m` collocation points
    /// plus the scalar component.
    pub fn collocation_residual(&self, plant: &Plant<T>, m: usize) -> T {
        let ap = plant.apply_a(&self.phi);
        let mut num = (ap.h3 - self.lambda * self.phi.h3).modulus_squared();
        let mut den = self.phi.h3.modulus_squared();
        for k in 0..m {
            let z = T::of_usize(k) / T::of_usize(m - 1);
            num += (ap.h1_at(z) - self.lambda * self.phi.h1_at(z)).modulus_squared()
                + (ap.h2_at(z) - self.lambda * self.phi.h2_at(z)).modulus_squared();
            den += self.phi.h1_at(z).modulus_squared() + self.phi.h2_at(z).modulus_squared();
        }
        (num / den).sqrt()
    }
}

/// `lambda -> (beta tau - r)(lambda + g) e^{lambda tau} - (beta tau + r)(g - lambda) e^{-lambda tau}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCharFunction<T> {
    plant: Plant<T>,
    r: T,
}

impl<T: Real> BoundaryCharFunction<T> {
    pub fn coefficient(&self) -> T {
        self.r
    }

    pub fn value(&self, lambda: Cplx<T>) -> Cplx<T> {
        let tau = self.plant.tau();
        let bt = self.plant.params.beta * tau;
        let g = cr(self.plant.g);
        let e = (lambda * cr(tau)).exp();
        cr(bt - self.r) * (lambda + g) * e - cr(bt + self.r) * (g - lambda) / e
    }

    /// Analytic derivative of [`Self::value`].
    pub fn derivative(&self, lambda: Cplx<T>) -> Cplx<T> {
        let tau = cr(self.plant.tau());
        let bt = self.plant.params.beta * self.plant.tau();
        let g = cr(self.plant.g);
        let e = (lambda * tau).exp();
        let one = cx(T::one(), T::zero());
        cr(bt - self.r) * e * (one + tau * (lambda + g)) + cr(bt + self.r) / e * (one + tau * (g - lambda))
    }
}

impl<T: Real> CharFunction<T> for BoundaryCharFunction<T> {
    fn eval(&self, lambda: Cplx<T>) -> Result<Cplx<T>, EvalError> {
        let v = self.value(lambda);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn conjugate_symmetric(&self) -> bool {
        true
    }
}
