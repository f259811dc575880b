//! End-to-end assembly of one design and the order-convergence study.

use nalgebra::ComplexField;
use serde::Serialize;
use thiserror::Error;

use crate::closedloop::{
    assemble, default_options, max_nearest_distance, ClosedLoopBlocks, ClosedLoopError, ClosedLoopSpectrum,
    FeedbackVariant,
};
use crate::gains::{DesiredSpectrum, GainError, GainMethod, GainSet, SpectrumKind};
use crate::observer::{build_realization, Anchors, ObserverError, ObserverRealization};
use crate::plant::{BoundaryKind, EigenMode, ModeError, Plant};
use crate::scalar::{to_c64, Cplx, Real};
use crate::spectral::{Rect, RootMethod, RootOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error(transparent)]
    Modes(#[from] ModeError),
    #[error(transparent)]
    Gains(#[from] GainError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    ClosedLoop(#[from] ClosedLoopError),
}

/// Modes, gains, observer and closed-loop blocks for one approximation order.
#[derive(Debug, Clone)]
pub struct Design<T: Real> {
    pub plant: Plant<T>,
    pub modes: Vec<EigenMode<T>>,
    pub gains: GainSet<T>,
    pub realization: ObserverRealization<T>,
    pub blocks: ClosedLoopBlocks<T>,
}

impl<T: Real> Design<T> {
    pub fn build(
        plant: &Plant<T>,
        n: usize,
        method: GainMethod,
        theta_minus: Option<T>,
        variant: FeedbackVariant,
    ) -> Result<Self, DesignError> {
        let modes = plant.eigenmodes(BoundaryKind::Intermediate, n)?;
        let gains = GainSet::compute(plant, &modes, method, theta_minus)?;
        Self::with_gains(plant, modes, gains, variant)
    }

    pub fn with_gains(
        plant: &Plant<T>,
        modes: Vec<EigenMode<T>>,
        gains: GainSet<T>,
        variant: FeedbackVariant,
    ) -> Result<Self, DesignError> {
        let realization = build_realization(plant, &modes, &gains, Anchors::default_for(plant))?;
        let blocks = assemble(plant, &realization, &gains, variant)?;
        Ok(Design {
            plant: *plant,
            modes,
            gains,
            realization,
            blocks,
        })
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }

    pub fn spectrum(&self, region: Rect<T>, opts: &RootOptions<T>) -> Result<ClosedLoopSpectrum<T>, DesignError> {
        Ok(self.blocks.compute_spectrum(region, opts)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Label {
    #[serde(rename = "closed-loop")]
    ClosedLoop,
    #[serde(rename = "desired-ctrl")]
    DesiredCtrl,
    #[serde(rename = "desired-obs")]
    DesiredObs,
    #[serde(rename = "intermediate")]
    Intermediate,
    #[serde(rename = "plant")]
    Plant,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::ClosedLoop => "closed-loop",
            Label::DesiredCtrl => "desired-ctrl",
            Label::DesiredObs => "desired-obs",
            Label::Intermediate => "intermediate",
            Label::Plant => "plant",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
    pub method: RootMethod,
    pub label: Label,
}

fn desired_rows<T: Real>(des: &DesiredSpectrum<T>, region: &Rect<T>, label: Label) -> Vec<SpectrumRow> {
    des.in_region(region)
        .into_iter()
        .map(|z| {
            let r: f64 = des.char_value(z).modulus().into();
            let z = to_c64(z);
            SpectrumRow {
                re: z.re,
                im: z.im,
                residual: r,
                method: RootMethod::ClosedForm,
                label,
            }
        })
        .collect()
}

/// Closed-loop roots with the desired spectra and, optionally, the open-loop
/// and intermediate spectra as overlays.
pub fn labelled_spectrum<T: Real>(
    design: &Design<T>,
    spectrum: &ClosedLoopSpectrum<T>,
    region: &Rect<T>,
    overlays: bool,
) -> Result<Vec<SpectrumRow>, DesignError> {
    let mut rows: Vec<SpectrumRow> = spectrum
        .spectrum
        .roots
        .iter()
        .map(|r| {
            let z = to_c64(r.value);
            SpectrumRow {
                re: z.re,
                im: z.im,
                residual: r.residual.into(),
                method: r.method,
                label: Label::ClosedLoop,
            }
        })
        .collect();
    let plant = &design.plant;
    rows.extend(desired_rows(&DesiredSpectrum::new(SpectrumKind::Controller, plant), region, Label::DesiredCtrl));
    rows.extend(desired_rows(&DesiredSpectrum::new(SpectrumKind::Observer, plant), region, Label::DesiredObs));
    if overlays {
        for (kind, label) in [(BoundaryKind::Intermediate, Label::Intermediate), (BoundaryKind::Open, Label::Plant)] {
            let f = plant.char_function(kind);
            for z in plant.eigenvalues_in(kind, *region)? {
                let r: f64 = f.value(z).modulus().into();
                let z = to_c64(z);
                rows.push(SpectrumRow {
                    re: z.re,
                    im: z.im,
                    residual: r,
                    method: RootMethod::CharEq,
                    label,
                });
            }
        }
    }
    Ok(rows)
}

/// Number of desired eigenvalues nearest the origin used by the distance metric.
pub const CONVERGENCE_TARGETS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// Requested order.
    pub n: usize,
    /// Modes actually used (one more when a conjugate pair is completed).
    pub modes: usize,
    pub d_ctrl: f64,
    pub d_obs: f64,
    /// Largest real part among the computed closed-loop eigenvalues.
    pub abscissa: f64,
    pub eigenvalues: usize,
}

/// `max` over the lowest desired values of the distance to the nearest computed eigenvalue.
pub fn desired_distance<T: Real>(des: &DesiredSpectrum<T>, computed: &[Cplx<T>]) -> T {
    max_nearest_distance(&des.lowest(CONVERGENCE_TARGETS), computed)
}

/// Sorted, deduplicated orders.
pub fn normalize_orders(orders: &[usize]) -> Vec<usize> {
    let mut o = orders.to_vec();
    o.sort_unstable();
    o.dedup();
    o
}

/// Closed-loop distance to both desired spectra for each order.
pub fn convergence_study<T: Real>(
    plant: &Plant<T>,
    orders: &[usize],
    method: GainMethod,
    theta_minus: Option<T>,
    region: Rect<T>,
    opts: Option<RootOptions<T>>,
) -> Result<Vec<ConvergenceRow>, DesignError> {
    let opts = opts.unwrap_or_else(|| default_options(&region));
    let ctrl = DesiredSpectrum::new(SpectrumKind::Controller, plant);
    let obs = DesiredSpectrum::new(SpectrumKind::Observer, plant);
    normalize_orders(orders)
        .into_iter()
        .map(|n| {
            let d = Design::build(plant, n, method, theta_minus, FeedbackVariant::Homogeneous)?;
            let s = d.spectrum(region, &opts)?;
            let v = s.values();
            log::info!("order {n}: {} closed-loop eigenvalues", v.len());
            Ok(ConvergenceRow {
                n,
                modes: d.order(),
                d_ctrl: desired_distance(&ctrl, &v).into(),
                d_obs: desired_distance(&obs, &v).into(),
                abscissa: s.abscissa().map(Into::into).unwrap_or(f64::NEG_INFINITY),
                eigenvalues: v.len(),
            })
        })
        .collect()
}

/// `true` when `xs` ends below where it starts and is nonincreasing except for
/// at most one step that grows by no more than 10 %.
pub fn mostly_decreasing(xs: &[f64]) -> bool {
    if xs.len() < 2 {
        return true;
    }
    let ups: Vec<_> = xs.windows(2).filter(|w| w[1] > w[0]).collect();
    xs[xs.len() - 1] < xs[0] && ups.len() <= 1 && ups.iter().all(|w| w[1] <= w[0] * 1.1)
}
