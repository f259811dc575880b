//! Finite-dimensional modal observer for the intermediate system.
//!
//! With `q` the modal weights, the observer runs
//!
//! ```text
//! q' = Lambda q + B2 u + G2 y + L (yhat - y)
//! yhat = C^T q + c_hat_u u + c_hat_y y
//! ```
//!
//! which is the transformed form of the inhomogeneous modal ansatz
//! `x = sum p_i phi_i + u phi_u + y phi_y` with `q = p + B1 u + G1 y`.

use nalgebra::ComplexField;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::gains::GainSet;
use crate::linalg::{zoh, CMatrix, CVector};
use crate::plant::{inner_product, BoundaryKind, EigenMode, ModeError, Plant, StateFunction};
use crate::scalar::{cr, to_c64, Cplx, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObserverError {
    #[error("gain vectors have length {k}/{l}, expected {n}")]
    Dimension { n: usize, k: usize, l: usize },
    #[error(transparent)]
    Anchor(#[from] ModeError),
}

/// Anchor points of the boundary-value functions `phi_u`, `phi_y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchors<T> {
    pub lambda_u: Cplx<T>,
    pub lambda_y: Cplx<T>,
}

impl<T: Real> Anchors<T> {
    pub fn new(lambda_u: Cplx<T>, lambda_y: Cplx<T>) -> Self {
        Anchors { lambda_u, lambda_y }
    }

    /// `0` for both, or `-1` when `0` is (numerically) an intermediate eigenvalue.
    pub fn default_for(plant: &Plant<T>) -> Self {
        let zero = cr(T::zero());
        let a = if plant
            .boundary_value_mode(zero, cr(T::one()), BoundaryKind::Intermediate)
            .is_ok()
        {
            zero
        } else {
            cr(-T::one())
        };
        Anchors::new(a, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverRealization<T> {
    pub lambdas: Vec<Cplx<T>>,
    pub b1: Vec<Cplx<T>>,
    pub b0: Vec<Cplx<T>>,
    pub g1: Vec<Cplx<T>>,
    pub g0: Vec<Cplx<T>>,
    pub b2: Vec<Cplx<T>>,
    pub g2: Vec<Cplx<T>>,
    pub l: Vec<Cplx<T>>,
    pub c: Vec<Cplx<T>>,
    pub c_u: Cplx<T>,
    pub c_y: Cplx<T>,
    pub c_hat_u: Cplx<T>,
    pub c_hat_y: Cplx<T>,
    pub phi_u: StateFunction<T>,
    pub phi_y: StateFunction<T>,
    pub anchors: Anchors<T>,
    pub modes: Vec<EigenMode<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObserverState<T> {
    pub q_hat: Vec<Cplx<T>>,
    pub t: T,
}

impl<T: Real> ObserverState<T> {
    pub fn zero(n: usize) -> Self {
        ObserverState {
            q_hat: vec![cr(T::zero()); n],
            t: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reconstruction {
    Homogeneous,
    Inhomogeneous,
}

fn dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter().zip(b).fold(cr(T::zero()), |s, (x, y)| s + *x * *y)
}

/// Builds the observer matrices of order `modes.len()`.
pub fn build_realization<T: Real>(
    plant: &Plant<T>,
    modes: &[EigenMode<T>],
    gains: &GainSet<T>,
    anchors: Anchors<T>,
) -> Result<ObserverRealization<T>, ObserverError> {
    let n = modes.len();
    if gains.k.len() != n || gains.l.len() != n {
        return Err(ObserverError::Dimension {
            n,
            k: gains.k.len(),
            l: gains.l.len(),
        });
    }
    let rho = plant.derived.rho;
    let phi_u = plant.boundary_value_mode(anchors.lambda_u, cr(T::one()), BoundaryKind::Intermediate)?;
    let phi_y = plant.boundary_value_mode(anchors.lambda_y, cr(-rho), BoundaryKind::Intermediate)?;
    let a_phi_u = plant.apply_a(&phi_u);
    let a_phi_y = plant.apply_a(&phi_y);
    let proj = |h: &StateFunction<T>| -> Vec<Cplx<T>> { modes.iter().map(|m| inner_product(h, &m.phi_star)).collect() };
    let lambdas: Vec<_> = modes.iter().map(|m| m.lambda).collect();
    let b1 = proj(&phi_u);
    let b0 = proj(&a_phi_u);
    let g1 = proj(&phi_y);
    let g0 = proj(&a_phi_y);
    let b2: Vec<_> = (0..n).map(|i| b0[i] - lambdas[i] * b1[i]).collect();
    let g2: Vec<_> = (0..n).map(|i| g0[i] - lambdas[i] * g1[i]).collect();
    let c = plant.modal_output_coefficients(modes);
    let c_u = plant.output(&phi_u);
    let c_y = plant.output(&phi_y);
    Ok(ObserverRealization {
        c_hat_u: c_u - dot(&c, &b1),
        c_hat_y: c_y - dot(&c, &g1),
        lambdas,
        b1,
        b0,
        g1,
        g0,
        b2,
        g2,
        l: gains.l.clone(),
        c,
        c_u,
        c_y,
        phi_u,
        phi_y,
        anchors,
        modes: modes.to_vec(),
    })
}

impl<T: Real> ObserverRealization<T> {
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    /// `yhat = C^T q + c_hat_u u + c_hat_y y`.
    pub fn output(&self, q: &[Cplx<T>], u: T, y: T) -> Cplx<T> {
        dot(&self.c, q) + self.c_hat_u * cr(u) + self.c_hat_y * cr(y)
    }

    /// Right-hand side of the transformed observer.
    pub fn rhs(&self, state: &ObserverState<T>, u: T, y: T) -> Vec<Cplx<T>> {
        let q = &state.q_hat;
        let innov = self.output(q, u, y) - cr(y);
        (0..self.order())
            .map(|i| self.lambdas[i] * q[i] + self.b2[i] * cr(u) + self.g2[i] * cr(y) + self.l[i] * innov)
            .collect()
    }

    /// Right-hand side of the untransformed coordinates `p = q - B1 u - G1 y`,
    /// which needs input derivatives. Kept as a reference form.
    pub fn rhs_untransformed(&self, p: &[Cplx<T>], u: T, y: T, u_dot: T, y_dot: T) -> Vec<Cplx<T>> {
        let yhat = dot(&self.c, p) + self.c_u * cr(u) + self.c_y * cr(y);
        let innov = yhat - cr(y);
        (0..self.order())
            .map(|i| {
                self.lambdas[i] * p[i] + self.b0[i] * cr(u) + self.g0[i] * cr(y) - self.b1[i] * cr(u_dot)
                    - self.g1[i] * cr(y_dot)
                    + self.l[i] * innov
            })
            .collect()
    }

    /// `M = Lambda + L C^T` and the input columns `[B2 + L c_hat_u, G2 + L (c_hat_y - 1)]`.
    pub fn drift(&self) -> (CMatrix<T>, CMatrix<T>) {
        let n = self.order();
        let mut m = CMatrix::<T>::zeros(n, n);
        let mut b = CMatrix::<T>::zeros(n, 2);
        for i in 0..n {
            m[(i, i)] = self.lambdas[i];
            for j in 0..n {
                m[(i, j)] += self.l[i] * self.c[j];
            }
            b[(i, 0)] = self.b2[i] + self.l[i] * self.c_hat_u;
            b[(i, 1)] = self.g2[i] + self.l[i] * (self.c_hat_y - cr(T::one()));
        }
        (m, b)
    }

    /// Exact step propagator for a fixed `dt`.
    pub fn stepper(&self, dt: T) -> ObserverStepper<T> {
        let (m, b) = self.drift();
        let (phi, gamma) = zoh(&m, &b, dt);
        ObserverStepper { phi, gamma, dt }
    }

    /// One exact step under zero-order-hold inputs.
    pub fn step_exponential(&self, state: &ObserverState<T>, u: T, y: T, dt: T) -> ObserverState<T> {
        self.stepper(dt).step(state, u, y)
    }

    /// Homogeneous `sum q_i phi_i` or inhomogeneous `sum p_i phi_i + u phi_u + y phi_y`.
    pub fn reconstruct(&self, state: &ObserverState<T>, which: Reconstruction, u: T, y: T) -> StateFunction<T> {
        let q = &state.q_hat;
        let mut out = StateFunction::zero();
        match which {
            Reconstruction::Homogeneous => {
                for (m, qi) in self.modes.iter().zip(q) {
                    out = out.axpy(*qi, &m.phi);
                }
            }
            Reconstruction::Inhomogeneous => {
                for (i, m) in self.modes.iter().enumerate() {
                    let p = q[i] - self.b1[i] * cr(u) - self.g1[i] * cr(y);
                    out = out.axpy(p, &m.phi);
                }
                out = out.axpy(cr(u), &self.phi_u).axpy(cr(y), &self.phi_y);
            }
        }
        out.compact()
    }

    /// Modal projection `q_i = <x, phi*_i>`.
    pub fn project(&self, x: &StateFunction<T>) -> ObserverState<T> {
        ObserverState {
            q_hat: self.modes.iter().map(|m| inner_product(x, &m.phi_star)).collect(),
            t: T::zero(),
        }
    }

    /// JSON with complex numbers as `[re, im]` pairs.
    pub fn to_json(&self) -> Value {
        let v = |xs: &[Cplx<T>]| -> Value {
            Value::Array(
                xs.iter()
                    .map(|z| {
                        let z = to_c64(*z);
                        json!([z.re, z.im])
                    })
                    .collect(),
            )
        };
        let s = |z: Cplx<T>| {
            let z = to_c64(z);
            json!([z.re, z.im])
        };
        json!({
            "order": self.order(),
            "lambda": v(&self.lambdas),
            "B1": v(&self.b1),
            "B0": v(&self.b0),
            "G1": v(&self.g1),
            "G0": v(&self.g0),
            "B2": v(&self.b2),
            "G2": v(&self.g2),
            "L": v(&self.l),
            "C": v(&self.c),
            "c_u": s(self.c_u),
            "c_y": s(self.c_y),
            "c_hat_u": s(self.c_hat_u),
            "c_hat_y": s(self.c_hat_y),
            "lambda_u": s(self.anchors.lambda_u),
            "lambda_y": s(self.anchors.lambda_y),
        })
    }
}

/// Precomputed `exp(M dt)` and ZOH input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverStepper<T: Real> {
    pub phi: CMatrix<T>,
    pub gamma: CMatrix<T>,
    pub dt: T,
}

impl<T: Real> ObserverStepper<T> {
    pub fn step(&self, state: &ObserverState<T>, u: T, y: T) -> ObserverState<T> {
        let q = CVector::<T>::from_column_slice(&state.q_hat);
        let w = CVector::<T>::from_column_slice(&[cr(u), cr(y)]);
        let next = &self.phi * q + &self.gamma * w;
        ObserverState {
            q_hat: next.iter().copied().collect(),
            t: state.t + self.dt,
        }
    }
}

/// Largest `|Im|` of a complex sequence.
pub fn max_imag<T: Real>(xs: &[Cplx<T>]) -> T {
    xs.iter().fold(T::zero(), |m, z| m.max(z.im.abs()))
}

/// `max |x|` over a slice.
pub fn max_abs<T: Real>(xs: &[Cplx<T>]) -> T {
    xs.iter().fold(T::zero(), |m, z| m.max(z.modulus()))
}
