//! The kernel instantiated at single precision.

use latelump::closedloop::default_region;
use latelump::design::Design;
use latelump::gains::DesiredSpectrum;
use latelump::plant::Plant;
use latelump::simulator::{run_closed_loop, ObserverStart, PlantGrid, SimOptions};
use latelump::{BoundaryKind, FeedbackVariant, GainMethod, RootOptions, SpectrumKind};

#[test]
fn derived_constants() {
    let p = Plant::<f32>::reference();
    let q = latelump::Plant::reference();
    assert!((p.tau() as f64 - q.tau()).abs() < 1e-7);
    assert!((p.derived.rho as f64 - q.derived.rho).abs() < 1e-5);
    assert!((p.derived.k_ring as f64 - q.derived.k_ring).abs() < 1e-5);
}

#[test]
fn eigenvalues_agree_with_double_precision() {
    let p = Plant::<f32>::reference();
    let q = latelump::Plant::reference();
    for kind in [BoundaryKind::Intermediate, BoundaryKind::Controller] {
        let a = p.eigenvalues(kind, 5).unwrap();
        let b = q.eigenvalues(kind, 5).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            let d = ((x.re as f64 - y.re).powi(2) + (x.im as f64 - y.im).powi(2)).sqrt();
            assert!(d < 1e-3 * (1.0 + y.norm()), "{kind:?}: {x} vs {y}");
        }
    }
    let des = DesiredSpectrum::new(SpectrumKind::Controller, &p);
    assert!((des.chain_real_part() + 10.0).abs() < 1e-4);
}

#[test]
fn design_and_simulation_run() {
    let p = Plant::<f32>::reference();
    let d = Design::build(&p, 4, GainMethod::PolePlacement, None, FeedbackVariant::Homogeneous).unwrap();
    let region = default_region::<f32>();
    let s = d.spectrum(region, &RootOptions::for_region(&region, 0.5, 0.5)).unwrap();
    assert!(!s.values().is_empty());
    assert!(s.abscissa().unwrap() < 0.0);

    let x0 = p.mode_at(p.eigenvalues(BoundaryKind::Open, 2).unwrap()[1], 1).phi;
    let mut g = PlantGrid::<f32>::new(p.params.alpha, p.params.beta, p.params.gamma, 100).unwrap();
    let opts = SimOptions {
        duration: 10.0 * p.tau(),
        start: ObserverStart::Zero,
    };
    let tr = run_closed_loop(&mut g, &d.realization, &d.blocks, &x0, &opts).unwrap();
    let first = tr.rows[0].state_norm;
    let last = tr.rows.last().unwrap().state_norm;
    assert!(last.is_finite() && last < first);
}
