//! Desired closed-loop spectra and the modal feedback/observer gains that target them.

use std::fmt;

use nalgebra::ComplexField;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{BoundaryKind, EigenMode, ModeError, Plant};
use crate::scalar::{cr, cx, to_c64, Cplx, Real};
use crate::spectral::Rect;

/// Which gain synthesis to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GainMethod {
    /// Closed-form gains of the delay-equation design.
    #[serde(rename = "paper")]
    Paper,
    /// Pole placement on the truncated modal model.
    #[serde(rename = "pole-placement")]
    PolePlacement,
}

impl fmt::Display for GainMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GainMethod::Paper => "paper",
            GainMethod::PolePlacement => "pole-placement",
        })
    }
}

impl std::str::FromStr for GainMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(GainMethod::Paper),
            "pole-placement" => Ok(GainMethod::PolePlacement),
            other => Err(format!("unknown gain method `{other}` (expected paper or pole-placement)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SpectrumKind {
    Controller,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GainError {
    #[error("mode {index} is unreachable (b = 0)")]
    Unreachable { index: usize },
    #[error("mode {index} is unobservable (C = 0)")]
    Unobservable { index: usize },
    #[error("repeated modal eigenvalue at {re}{im:+}i")]
    RepeatedEigenvalue { re: f64, im: f64 },
    #[error("non-finite gain at mode {index}")]
    NonFinite { index: usize },
    #[error(transparent)]
    Modes(#[from] ModeError),
}

/// Roots of `(lambda + kappa)(e^{lambda tau} + mu e^{-lambda tau})`:
/// `-kappa` and the chain `ln(mu)/(2 tau) + i (2k+1) pi/(2 tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesiredSpectrum<T> {
    pub kind: SpectrumKind,
    pub kappa: T,
    pub mu: T,
    pub tau: T,
}

impl<T: Real> DesiredSpectrum<T> {
    pub fn new(kind: SpectrumKind, plant: &Plant<T>) -> Self {
        let p = &plant.params;
        let (kappa, mu) = match kind {
            SpectrumKind::Controller => (p.kappa_c, p.mu_c),
            SpectrumKind::Observer => (p.kappa_o, p.mu_o),
        };
        DesiredSpectrum {
            kind,
            kappa,
            mu,
            tau: plant.tau(),
        }
    }

    pub fn chain_real_part(&self) -> T {
        self.mu.ln() / (T::lit(2.0) * self.tau)
    }

    /// Chain root with index `k` (any integer; negative `k` gives the lower half plane).
    pub fn chain(&self, k: i64) -> Cplx<T> {
        let odd = T::lit((2 * k + 1) as f64);
        cx(self.chain_real_part(), odd * T::pi() / (T::lit(2.0) * self.tau))
    }

    pub fn real_root(&self) -> Cplx<T> {
        cr(-self.kappa)
    }

    pub fn char_value(&self, lambda: Cplx<T>) -> Cplx<T> {
        let e = (lambda * cr(self.tau)).exp();
        (lambda + cr(self.kappa)) * (e + cr(self.mu) / e)
    }

    /// The `m` roots of smallest `|Im|`, positive imaginary part first.
    pub fn lowest(&self, m: usize) -> Vec<Cplx<T>> {
        let mut out = Vec::with_capacity(m);
        if m > 0 {
            out.push(self.real_root());
        }
        let mut k = 0;
        while out.len() < m {
            let z = self.chain(k);
            out.push(z);
            if out.len() < m {
                out.push(z.conj());
            }
            k += 1;
        }
        out
    }

    /// All roots inside `region`.
    pub fn in_region(&self, region: &Rect<T>) -> Vec<Cplx<T>> {
        let mut out = Vec::new();
        if region.contains(self.real_root()) {
            out.push(self.real_root());
        }
        let step = T::pi() / self.tau;
        let kmax: f64 = ((region.im_max.abs().max(region.im_min.abs())) / step).ceil().into();
        let kmax = kmax as i64 + 1;
        for k in -kmax - 1..=kmax {
            let z = self.chain(k);
            if region.contains(z) {
                out.push(z);
            }
        }
        out.sort_by(crate::spectral::spectral_order);
        out
    }
}

/// Desired spectrum for the controller or observer design.
pub fn desired_spectrum<T: Real>(kind: SpectrumKind, plant: &Plant<T>) -> DesiredSpectrum<T> {
    DesiredSpectrum::new(kind, plant)
}

/// The bounded part of the state feedback evaluated on functions whose delay
/// coordinate is `theta -> e^{lambda theta}`:
/// `E h = h3 (c1 e^{lambda tau} + c2 e^{-lambda tau})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackFunctional<T> {
    pub c1: T,
    pub c2: T,
    pub tau: T,
}

impl<T: Real> FeedbackFunctional<T> {
    pub fn new(plant: &Plant<T>) -> Self {
        let p = &plant.params;
        let bgt = p.beta * p.gamma * plant.tau();
        let den = p.gamma * (p.mu_c + T::one());
        FeedbackFunctional {
            c1: (bgt - p.kappa_c) / den,
            c2: -p.mu_c * (bgt + p.kappa_c) / den,
            tau: plant.tau(),
        }
    }

    /// Value on the delay coordinate `theta -> e^{lambda theta}`.
    pub fn on_exponential(&self, lambda: Cplx<T>) -> Cplx<T> {
        let e = (lambda * cr(self.tau)).exp();
        cr(self.c1) * e + cr(self.c2) / e
    }

    /// `E h` for `h` an eigenfunction-like element at `lambda`, scaled by its third component.
    pub fn apply(&self, h3: Cplx<T>, lambda: Cplx<T>) -> Cplx<T> {
        h3 * self.on_exponential(lambda)
    }
}

/// Feedback gains `k_i = phi_{i,3} (c1 e^{lambda_i tau} + c2 e^{-lambda_i tau})`.
pub fn feedback_gains_paper<T: Real>(plant: &Plant<T>, modes: &[EigenMode<T>]) -> Vec<Cplx<T>> {
    let e = FeedbackFunctional::new(plant);
    modes.iter().map(|m| e.apply(m.phi.h3, m.lambda)).collect()
}

/// Observer gains from the closed-form delay-coordinate expression.
///
/// With `s = (2 - e^{conj(lambda) theta_minus})^{-1} (beta tau - rho)/(2 beta tau) phi*_{i,3}`:
/// `l_i = -conj(s) [lambda e^{lambda tau} (1 + mu_o) + kappa_o (1 + mu_o) + kappa_o (1 - e^{lambda theta_minus})]`.
pub fn observer_gains_paper<T: Real>(plant: &Plant<T>, modes: &[EigenMode<T>], theta_minus: T) -> Vec<Cplx<T>> {
    let p = &plant.params;
    let tau = plant.tau();
    let bt = p.beta * tau;
    let rho = plant.derived.rho;
    let one = cr(T::one());
    let two = cr(T::lit(2.0));
    modes
        .iter()
        .map(|m| {
            let lc = m.lambda.conj();
            let s = (bt - rho) / (T::lit(2.0) * bt);
            let s = cr(s) * m.phi_star.h3 / (two - (lc * cr(theta_minus)).exp());
            let l = m.lambda;
            let ko = cr(p.kappa_o);
            let mo = cr(p.mu_o);
            let bracket = l * (l * cr(tau)).exp() * (one + mo) + ko * (one + mo) + ko * (one - (l * cr(theta_minus)).exp());
            -s.conj() * bracket
        })
        .collect()
}

/// Observer gains that place each modal eigenvalue exactly on the desired chain
/// in the limit of infinitely many modes, from the residues of
/// `Delta_des / Delta_int` with `C_i = phi_{i,1}(1)`.
pub fn observer_gains_residue<T: Real>(plant: &Plant<T>, modes: &[EigenMode<T>]) -> Vec<Cplx<T>> {
    let des = DesiredSpectrum::new(SpectrumKind::Observer, plant);
    let f = plant.intermediate_char_function();
    let bt = plant.params.beta * plant.tau();
    let norm = cr(bt - plant.derived.rho);
    modes
        .iter()
        .map(|m| {
            let c = plant.output(&m.phi);
            -des.char_value(m.lambda) * norm / (c * f.derivative(m.lambda))
        })
        .collect()
}

/// One-input pole placement for `diag(lambda) + b k^T`:
/// `k_i = -prod_j (lambda_i - d_j) / (b_i prod_{j != i} (lambda_i - lambda_j))`.
///
/// The observer case is the same formula with `b` replaced by `C`.
pub fn place_diagonal<T: Real>(
    lambdas: &[Cplx<T>],
    b: &[Cplx<T>],
    targets: &[Cplx<T>],
    kind: SpectrumKind,
) -> Result<Vec<Cplx<T>>, GainError> {
    let n = lambdas.len();
    let scale = lambdas.iter().fold(T::one(), |a, l| a.max(l.modulus()));
    for i in 0..n {
        if b[i].modulus() == T::zero() || !b[i].re.is_finite() {
            return Err(match kind {
                SpectrumKind::Controller => GainError::Unreachable { index: i },
                SpectrumKind::Observer => GainError::Unobservable { index: i },
            });
        }
        for j in 0..i {
            if (lambdas[i] - lambdas[j]).modulus() <= T::eps() * T::lit(100.0) * scale {
                let z = to_c64(lambdas[i]);
                return Err(GainError::RepeatedEigenvalue { re: z.re, im: z.im });
            }
        }
    }
    let mut k = Vec::with_capacity(n);
    for i in 0..n {
        let mut num = cr(T::one());
        for d in targets {
            num *= lambdas[i] - *d;
        }
        let mut den = b[i];
        for j in 0..n {
            if j != i {
                den *= lambdas[i] - lambdas[j];
            }
        }
        let ki = -num / den;
        if !(ki.re.is_finite() && ki.im.is_finite()) {
            return Err(GainError::NonFinite { index: i });
        }
        k.push(ki);
    }
    Ok(k)
}

/// Gains by pole placement on the modal model.
///
/// For the controller the placement is done on the modes of the plant under the
/// unbounded feedback part alone, then expressed in the observer coordinates via
/// `K_i = sum_j k_j <phi_i, psi*_j>`. For the observer it is done on `(Lambda, C)`.
pub fn gains_pole_placement<T: Real>(
    plant: &Plant<T>,
    modes: &[EigenMode<T>],
    kind: SpectrumKind,
) -> Result<Vec<Cplx<T>>, GainError> {
    let n = modes.len();
    let des = DesiredSpectrum::new(kind, plant);
    match kind {
        SpectrumKind::Observer => {
            let lams: Vec<_> = modes.iter().map(|m| m.lambda).collect();
            let c = plant.modal_output_coefficients(modes);
            place_diagonal(&lams, &c, &des.lowest(n), kind)
        }
        SpectrumKind::Controller => {
            let cmodes = plant.eigenmodes(BoundaryKind::Controller, n)?;
            let lams: Vec<_> = cmodes.iter().map(|m| m.lambda).collect();
            let b = plant.modal_input_coefficients(&cmodes);
            let kc = place_diagonal(&lams, &b, &des.lowest(cmodes.len()), kind)?;
            Ok(map_controller_gains(modes, &cmodes, &kc))
        }
    }
}

/// `K_i = sum_j k_j <phi_i, psi*_j>`.
pub fn map_controller_gains<T: Real>(modes: &[EigenMode<T>], cmodes: &[EigenMode<T>], kc: &[Cplx<T>]) -> Vec<Cplx<T>> {
    modes
        .iter()
        .map(|m| {
            cmodes
                .iter()
                .zip(kc)
                .fold(cr(T::zero()), |acc, (c, k)| acc + *k * crate::plant::inner_product(&m.phi, &c.phi_star))
        })
        .collect()
}

/// Feedback and observer gains for one mode list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSet<T> {
    pub k: Vec<Cplx<T>>,
    pub l: Vec<Cplx<T>>,
    pub method: GainMethod,
}

impl<T: Real> GainSet<T> {
    pub fn zero(n: usize) -> Self {
        GainSet {
            k: vec![cr(T::zero()); n],
            l: vec![cr(T::zero()); n],
            method: GainMethod::PolePlacement,
        }
    }

    pub fn compute(
        plant: &Plant<T>,
        modes: &[EigenMode<T>],
        method: GainMethod,
        theta_minus: Option<T>,
    ) -> Result<Self, GainError> {
        let (k, l) = match method {
            GainMethod::Paper => {
                let th = theta_minus.unwrap_or(-T::lit(2.0) * plant.tau());
                (feedback_gains_paper(plant, modes), observer_gains_paper(plant, modes, th))
            }
            GainMethod::PolePlacement => (
                gains_pole_placement(plant, modes, SpectrumKind::Controller)?,
                gains_pole_placement(plant, modes, SpectrumKind::Observer)?,
            ),
        };
        for (i, v) in k.iter().chain(&l).enumerate() {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(GainError::NonFinite { index: i % modes.len().max(1) });
            }
        }
        Ok(GainSet { k, l, method })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::C64;

    #[test]
    fn scalar_placement() {
        let k = place_diagonal(&[C64::new(-1.0, 0.0)], &[C64::new(2.0, 0.0)], &[C64::new(-5.0, 0.0)], SpectrumKind::Controller)
            .unwrap();
        assert!((k[0] - (C64::new(-1.0, 0.0) - C64::new(-5.0, 0.0)) / -2.0).norm() < 1e-15);
        assert!((-1.0 + 2.0 * k[0].re + 5.0).abs() < 1e-14);
    }

    #[test]
    fn nothing_to_move() {
        let lams = [C64::new(-1.0, 2.0), C64::new(-1.0, -2.0), C64::new(-3.0, 0.0)];
        let b = [C64::new(1.0, 1.0), C64::new(1.0, -1.0), C64::new(0.5, 0.0)];
        let k = place_diagonal(&lams, &b, &lams, SpectrumKind::Controller).unwrap();
        assert!(k.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn unreachable_and_repeated() {
        let lams = [C64::new(-1.0, 0.0), C64::new(-2.0, 0.0)];
        assert_eq!(
            place_diagonal(&lams, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &lams, SpectrumKind::Observer),
            Err(GainError::Unobservable { index: 1 })
        );
        let rep = [C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)];
        assert!(matches!(
            place_diagonal(&rep, &[C64::new(1.0, 0.0); 2], &lams, SpectrumKind::Controller),
            Err(GainError::RepeatedEigenvalue { .. })
        ));
    }

    #[test]
    fn method_strings() {
        assert_eq!("paper".parse::<GainMethod>().unwrap(), GainMethod::Paper);
        assert_eq!(GainMethod::PolePlacement.to_string(), "pole-placement");
        assert!("magic".parse::<GainMethod>().is_err());
    }

    #[test]
    fn unit_mu_chain_on_axis() {
        let mut params = crate::params::SystemParams::<f64>::reference();
        params.mu_c = 1.0;
        let plant = Plant::new(params).unwrap();
        let d = DesiredSpectrum::new(SpectrumKind::Controller, &plant);
        assert_eq!(d.chain_real_part(), 0.0);
        assert_eq!(d.chain(3).re, 0.0);
    }

    #[test]
    fn zero_scalar_component_gives_zero_gain() {
        let plant = Plant::<f64>::reference();
        let e = FeedbackFunctional::new(&plant);
        assert_eq!(e.apply(C64::new(0.0, 0.0), C64::new(-3.0, 40.0)), C64::new(0.0, 0.0));
    }
}
