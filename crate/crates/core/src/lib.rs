//! Late-lumping observer-based state feedback for a boundary-controlled
//! hyperbolic system with a dynamic boundary condition.
//!
//! The numerical kernel is generic over [`Real`] (`f32`/`f64`); the aliases at
//! the crate root fix `f64`.

pub mod checks;
pub mod closedloop;
pub mod config;
pub mod design;
pub mod gains;
pub mod linalg;
pub mod observer;
pub mod oracle;
pub mod params;
pub mod plant;
pub mod scalar;
pub mod simulator;
pub mod spectral;

pub use closedloop::{assemble, FeedbackVariant};
pub use config::RunConfig;
pub use design::Label;
pub use gains::{GainMethod, SpectrumKind};
pub use observer::{build_realization, Anchors, Reconstruction};
pub use plant::{inner_product, BoundaryKind};
pub use scalar::{Cplx, Real, C64};
pub use spectral::{Rect, RootMethod, RootOptions};

pub type SystemParams = params::SystemParams<f64>;
pub type DerivedParams = params::DerivedParams<f64>;
pub type Plant = plant::Plant<f64>;
pub type EigenMode = plant::EigenMode<f64>;
pub type StateFunction = plant::StateFunction<f64>;
pub type GainSet = gains::GainSet<f64>;
pub type DesiredSpectrum = gains::DesiredSpectrum<f64>;
pub type ObserverRealization = observer::ObserverRealization<f64>;
pub type ClosedLoopBlocks = closedloop::ClosedLoopBlocks<f64>;
pub type SpectrumResult = spectral::SpectrumResult<f64>;
pub type PlantGrid = simulator::PlantGrid<f64>;
pub type SimTrace = simulator::SimTrace<f64>;
pub type Design = design::Design<f64>;
