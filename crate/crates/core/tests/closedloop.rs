use nalgebra::DMatrix;

use latelump::closedloop::{default_options, default_region, ClosedLoopError};
use latelump::linalg::{conjugate_pairing, real_eigenvalues, realification};
use latelump::spectral::CharFunction;
use latelump::{BoundaryKind, Design, FeedbackVariant, GainMethod, GainSet, Plant, Rect, RootMethod, C64};

fn nearest(z: C64, set: &[C64]) -> f64 {
    set.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min)
}

fn decoupled(n: usize) -> Design {
    let p = Plant::reference();
    let modes = p.eigenmodes(BoundaryKind::Intermediate, n).unwrap();
    let k = modes.len();
    Design::with_gains(&p, modes, GainSet::zero(k), FeedbackVariant::Homogeneous).unwrap()
}

/// With `K = 0` and `L = 0` the loop is block triangular: the plant under
/// `u = k_ring y` and the modal observer copy.
#[test]
fn zero_gains_decouple() {
    let d = decoupled(6);
    let b = &d.blocks;
    for i in 0..d.order() {
        for j in 0..d.order() {
            let want = if i == j { d.modes[i].lambda } else { C64::new(0.0, 0.0) };
            assert!((b.a4[(i, j)] - want).norm() < 1e-12);
        }
    }
    let region = Rect::new(-40.0, 5.0, -120.0, 120.0);
    let s = d.spectrum(region, &default_options(&region)).unwrap();
    let got = s.values();
    let plant = d.plant.eigenvalues_in(BoundaryKind::Controller, region).unwrap();
    for z in &plant {
        assert!(nearest(*z, &got) < 1e-7, "controller-intermediate {z} missing");
    }
    for m in &d.modes {
        if region.contains(m.lambda) {
            assert!(nearest(m.lambda, &got) < 1e-7, "observer mode {} missing", m.lambda);
            let c = b.check_finite_block(m.lambda, 1e-6);
            assert!(c.is_eigenvalue);
        }
    }
    assert_eq!(got.len(), plant.len() + d.modes.iter().filter(|m| region.contains(m.lambda)).count());
}

/// `f(lambda) det(lambda - A4)` equals the bordered determinant
/// `det [[h2(1) - kappa h1(1), -Kf^T], [-A3 h, lambda - A4]]`.
#[test]
fn characteristic_function_is_a_bordered_determinant() {
    let d = Design::build(&Plant::reference(), 6, GainMethod::PolePlacement, None, FeedbackVariant::Homogeneous).unwrap();
    let b = &d.blocks;
    let f = b.char_function();
    let n = d.order();
    for lam in [C64::new(-3.0, 17.0), C64::new(-12.5, -80.0), C64::new(1.0, 0.0)] {
        let h = d.plant.homogeneous_eigenfunction(lam);
        let mut big = DMatrix::<C64>::zeros(n + 1, n + 1);
        big[(0, 0)] = h.h2_at(1.0) - b.kappa_b * h.h1_at(1.0);
        let a3h = b.apply_a3(&h);
        for i in 0..n {
            big[(0, i + 1)] = -b.kf[i];
            big[(i + 1, 0)] = -a3h[i];
            for j in 0..n {
                big[(i + 1, j + 1)] = -b.a4[(i, j)];
            }
            big[(i + 1, i + 1)] += lam;
        }
        let mut shifted = -b.a4.clone();
        for i in 0..n {
            shifted[(i, i)] += lam;
        }
        let want = big.determinant() / shifted.determinant();
        let got = f.eval(lam).unwrap();
        assert!((got - want).norm() < 1e-9 * (1.0 + want.norm()), "{lam}: {got} vs {want}");
        // conjugate symmetry of a real loop
        let gc = f.eval(lam.conj()).unwrap();
        assert!((gc - got.conj()).norm() < 1e-9 * (1.0 + got.norm()));
    }
}

#[test]
fn a4_is_similar_to_a_real_matrix() {
    for method in [GainMethod::PolePlacement, GainMethod::Paper] {
        let d = Design::build(&Plant::reference(), 8, method, None, FeedbackVariant::Homogeneous).unwrap();
        let b = &d.blocks;
        let pairing = conjugate_pairing(&b.modal_lambdas, 1e-8).unwrap();
        let (t, tinv) = realification::<f64>(&pairing);
        let r = &tinv * &b.a4 * &t;
        let im = r.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        assert!(im < 1e-8 * r.norm(), "{method}: {im}");
        let real_ev = real_eigenvalues(&r.map(|z| z.re));
        for z in b.a4_eigenvalues() {
            assert!(nearest(z, &real_ev) < 1e-7 * (1.0 + z.norm()), "{method} {z}");
        }
    }
}

#[test]
fn closed_loop_spectrum_is_stable_and_symmetric() {
    let d = Design::build(&Plant::reference(), 8, GainMethod::PolePlacement, None, FeedbackVariant::Homogeneous).unwrap();
    let region = default_region();
    let s = d.spectrum(region, &default_options(&region)).unwrap();
    let v = s.values();
    assert!(v.len() >= 12, "{}", v.len());
    assert!(s.abscissa().unwrap() < 0.0);
    for z in &v {
        if z.im.abs() < 249.0 {
            assert!(nearest(z.conj(), &v) < 1e-6, "{z} has no conjugate");
        }
    }
    for r in &s.spectrum.roots {
        assert!(matches!(r.method, RootMethod::CharEq | RootMethod::FiniteBlock));
    }
}

#[test]
fn inhomogeneous_variant() {
    for method in [GainMethod::PolePlacement, GainMethod::Paper] {
        let d = Design::build(&Plant::reference(), 8, method, None, FeedbackVariant::Inhomogeneous).unwrap();
        let inh = d.blocks.inh.as_ref().unwrap();
        assert!(inh.denominator.norm() > 1e-8);
        assert_eq!(inh.k_ring_inh, d.blocks.kappa_b);
        let region = default_region();
        let s = d.spectrum(region, &default_options(&region)).unwrap();
        assert!(!s.values().is_empty(), "{method}");
    }
    // for pole placement the rearranged law is algebraically the homogeneous one
    let p = Plant::reference();
    let hom = Design::build(&p, 8, GainMethod::PolePlacement, None, FeedbackVariant::Homogeneous).unwrap();
    let inh = Design::build(&p, 8, GainMethod::PolePlacement, None, FeedbackVariant::Inhomogeneous).unwrap();
    assert!((hom.blocks.kappa_b - inh.blocks.kappa_b).norm() < 1e-10);
}

#[test]
fn gain_length_mismatch() {
    let p = Plant::reference();
    let d = decoupled(4);
    let err = latelump::assemble(&p, &d.realization, &GainSet::zero(2), FeedbackVariant::Homogeneous);
    assert!(matches!(err, Err(ClosedLoopError::Dimension { .. })));
}
