use latelump::observer::{ObserverState, Reconstruction};
use latelump::{build_realization, Anchors, BoundaryKind, Design, FeedbackVariant, GainMethod, GainSet, Plant, C64};

fn design(n: usize) -> Design {
    Design::build(&Plant::reference(), n, GainMethod::PolePlacement, None, FeedbackVariant::Homogeneous).unwrap()
}

fn state(n: usize) -> ObserverState<f64> {
    ObserverState {
        q_hat: (0..n).map(|i| C64::new((i as f64).sin(), 0.3 * (i as f64).cos())).collect(),
        t: 0.0,
    }
}

#[test]
fn boundary_terms_equal_the_input_coefficients() {
    let p = Plant::reference();
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 8).unwrap();
    let b = p.modal_input_coefficients(&modes);
    let gains = GainSet::zero(modes.len());
    for anchor in [C64::new(0.0, 0.0), C64::new(-3.0, 5.0), C64::new(12.0, 0.0)] {
        let r = build_realization(&p, &modes, &gains, Anchors::new(anchor, anchor)).unwrap();
        for i in 0..r.order() {
            assert!((r.b2[i] - b[i]).norm() < 1e-8 * b[i].norm(), "anchor {anchor}, mode {i}");
            assert!((r.g2[i] + b[i] * p.derived.rho).norm() < 1e-8 * b[i].norm());
        }
    }
}

#[test]
fn inhomogeneous_reconstruction_meets_the_boundary_and_output() {
    let d = design(8);
    let r = &d.realization;
    let p = &d.plant;
    let s = state(r.order());
    for (u, y) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-0.7, 2.3)] {
        let x = r.reconstruct(&s, Reconstruction::Inhomogeneous, u, y);
        let bc = p.boundary(&x, p.derived.rho);
        assert!((bc - (u - p.derived.rho * y)).norm() < 1e-10, "{u} {y}: {bc}");
        assert!((x.h3 - x.h1_at(0.0)).norm() < 1e-10);
        let yhat = r.output(&s.q_hat, u, y);
        assert!((p.output(&x) - yhat).norm() < 1e-10, "{u} {y}");
    }
    // homogeneous reconstruction stays in the intermediate domain
    let x = r.reconstruct(&s, Reconstruction::Homogeneous, 1.0, 1.0);
    assert!(p.boundary(&x, p.derived.rho).norm() < 1e-10);
}

#[test]
fn projection_inverts_modal_synthesis() {
    let d = design(8);
    let r = &d.realization;
    let s = state(r.order());
    let x = r.reconstruct(&s, Reconstruction::Homogeneous, 0.0, 0.0);
    let back = r.project(&x);
    for (a, b) in back.q_hat.iter().zip(&s.q_hat) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn exact_step_matches_fine_rk4() {
    let d = design(8);
    let r = &d.realization;
    let n = r.order();
    let (u, y) = (0.4, -1.1);
    let dt = d.plant.tau() / 50.0;
    let mut exact = state(n);
    let stepper = r.stepper(dt);
    let mut rk = state(n);
    let f = |q: &[C64]| r.rhs(&ObserverState { q_hat: q.to_vec(), t: 0.0 }, u, y);
    let h = dt / 40.0;
    for _ in 0..200 {
        exact = stepper.step(&exact, u, y);
        for _ in 0..40 {
            let q = &rk.q_hat;
            let add = |a: &[C64], b: &[C64], s: f64| -> Vec<C64> { a.iter().zip(b).map(|(x, k)| x + k * s).collect() };
            let k1 = f(q);
            let k2 = f(&add(q, &k1, h / 2.0));
            let k3 = f(&add(q, &k2, h / 2.0));
            let k4 = f(&add(q, &k3, h));
            rk.q_hat = (0..n).map(|i| q[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0)).collect();
        }
    }
    let scale = rk.q_hat.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for (a, b) in exact.q_hat.iter().zip(&rk.q_hat) {
        assert!((a - b).norm() < 1e-9 * scale, "{a} vs {b}");
    }
    assert!((exact.t - 200.0 * dt).abs() < 1e-12);
    assert_eq!(r.step_exponential(&state(n), u, y, dt), stepper.step(&state(n), u, y));
}

#[test]
fn drift_has_the_placed_observer_spectrum() {
    let d = design(10);
    let (m, _) = d.realization.drift();
    let ev = latelump::linalg::eigenvalues(&m);
    let des = latelump::DesiredSpectrum::new(latelump::SpectrumKind::Observer, &d.plant);
    for t in des.lowest(d.order()) {
        let near = ev.iter().map(|z| (z - t).norm()).fold(f64::INFINITY, f64::min);
        assert!(near < 1e-6 * (1.0 + t.norm()), "{t}");
    }
}

#[test]
fn mismatched_gains_are_rejected() {
    let p = Plant::reference();
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 4).unwrap();
    let err = build_realization(&p, &modes, &GainSet::zero(3), Anchors::default_for(&p));
    assert!(err.is_err());
}

#[test]
fn json_export_has_every_block() {
    let d = design(4);
    let j = d.realization.to_json();
    for key in ["lambda", "B1", "B0", "G1", "G0", "B2", "G2", "L", "C", "c_hat_u", "c_hat_y", "lambda_u"] {
        assert!(j.get(key).is_some(), "{key}");
    }
    assert_eq!(j["order"], d.order());
    assert_eq!(j["B1"].as_array().unwrap().len(), d.order());
}
