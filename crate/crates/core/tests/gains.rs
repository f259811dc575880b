use latelump::gains::{
    feedback_gains_paper, gains_pole_placement, observer_gains_residue, place_diagonal, DesiredSpectrum,
    FeedbackFunctional, GainError,
};
use latelump::{BoundaryKind, GainMethod, GainSet, Plant, SpectrumKind, C64};

/// `det(t - Lambda - b k^T) / det(t - Lambda) = 1 - sum b_i k_i / (t - lambda_i)`.
fn secular(lams: &[C64], b: &[C64], k: &[C64], t: C64) -> C64 {
    C64::new(1.0, 0.0) - lams.iter().zip(b).zip(k).map(|((l, b), k)| b * k / (t - l)).sum::<C64>()
}

#[test]
fn desired_values() {
    let p = Plant::reference();
    let step = std::f64::consts::PI / p.tau();
    let c = DesiredSpectrum::new(SpectrumKind::Controller, &p);
    let o = DesiredSpectrum::new(SpectrumKind::Observer, &p);
    assert!((c.chain_real_part() + 10.0).abs() < 1e-12);
    assert!((o.chain_real_part() + 30.0).abs() < 1e-12);
    let low = c.lowest(5);
    assert_eq!(low[0], C64::new(-15.0, 0.0));
    assert!((low[1] - C64::new(-10.0, step / 2.0)).norm() < 1e-12);
    assert_eq!(low[2], low[1].conj());
    assert!((low[3] - C64::new(-10.0, 1.5 * step)).norm() < 1e-11);
    for z in o.lowest(21) {
        assert!(o.char_value(z).norm() < 1e-10 * (1.0 + z.norm()));
    }
}

#[test]
fn controller_placement_hits_targets() {
    let p = Plant::reference();
    for n in [4, 9, 16] {
        let cmodes = p.eigenmodes(BoundaryKind::Controller, n).unwrap();
        let lams: Vec<C64> = cmodes.iter().map(|m| m.lambda).collect();
        let b = p.modal_input_coefficients(&cmodes);
        let targets = DesiredSpectrum::new(SpectrumKind::Controller, &p).lowest(lams.len());
        let k = place_diagonal(&lams, &b, &targets, SpectrumKind::Controller).unwrap();
        for t in &targets {
            assert!(secular(&lams, &b, &k, *t).norm() < 1e-8, "n={n} {t}");
        }
        // the modal eigenvalues themselves are moved
        let k_norm = k.iter().map(|x| x.norm()).fold(0.0, f64::max);
        assert!(k_norm > 0.0);
    }
}

#[test]
fn observer_placement_hits_targets() {
    let p = Plant::reference();
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 12).unwrap();
    let lams: Vec<C64> = modes.iter().map(|m| m.lambda).collect();
    let c = p.modal_output_coefficients(&modes);
    let l = gains_pole_placement(&p, &modes, SpectrumKind::Observer).unwrap();
    for t in DesiredSpectrum::new(SpectrumKind::Observer, &p).lowest(lams.len()) {
        assert!(secular(&lams, &c, &l, t).norm() < 1e-8, "{t}");
    }
}

#[test]
fn gains_are_conjugate_consistent() {
    let p = Plant::reference();
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 8).unwrap();
    for method in [GainMethod::PolePlacement, GainMethod::Paper] {
        let g = GainSet::compute(&p, &modes, method, None).unwrap();
        for (i, m) in modes.iter().enumerate() {
            if let Some(j) = modes.iter().position(|o| (o.lambda - m.lambda.conj()).norm() < 1e-9 && o.index != m.index) {
                let (ki, kj) = (g.k[i], g.k[j]);
                // real feedback: K^T q is real for conjugate-paired q
                assert!((ki - kj.conj()).norm() < 1e-8 * (1.0 + ki.norm()), "{method} k {i} {j}");
                assert!((g.l[i] - g.l[j].conj()).norm() < 1e-8 * (1.0 + g.l[i].norm()), "{method} l {i} {j}");
            }
        }
    }
}

/// The closed-form bounded feedback completes `h2(1) - k_ring h1(1)` to a
/// function whose zeros are exactly the desired controller spectrum.
#[test]
fn closed_form_feedback_functional_vanishes_on_the_target() {
    let p = Plant::reference();
    let e = FeedbackFunctional::new(&p);
    let f = |z: C64| {
        let h = p.homogeneous_eigenfunction(z);
        (p.boundary(&h, p.derived.k_ring) - e.apply(h.h3, z), h.norm())
    };
    for z in DesiredSpectrum::new(SpectrumKind::Controller, &p).lowest(15) {
        let (v, s) = f(z);
        assert!(v.norm() < 1e-12 * s, "{z}: {v}");
    }
    for z in [C64::new(-3.0, 10.0), C64::new(-20.0, 0.0), C64::new(-10.0, 40.0)] {
        let (v, s) = f(z);
        assert!(v.norm() > 1e-3 * s, "{z}");
    }
    // and the modal gains are that functional on each eigenfunction
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 6).unwrap();
    for (m, k) in modes.iter().zip(feedback_gains_paper(&p, &modes)) {
        assert!((k - e.apply(m.phi.h3, m.lambda)).norm() < 1e-14 * (1.0 + k.norm()));
    }
}

#[test]
fn pole_placement_observer_gains_approach_residues() {
    let p = Plant::reference();
    let mut prev = f64::INFINITY;
    for n in [8, 16, 32] {
        let modes = p.eigenmodes(BoundaryKind::Intermediate, n).unwrap();
        let pp = gains_pole_placement(&p, &modes, SpectrumKind::Observer).unwrap();
        let res = observer_gains_residue(&p, &modes);
        let gap = (0..3).map(|i| (pp[i] - res[i]).norm() / res[i].norm()).fold(0.0, f64::max);
        assert!(gap < prev, "n={n}: {gap} !< {prev}");
        prev = gap;
    }
    assert!(prev < 0.05, "{prev}");
}

#[test]
fn placement_rejects_degenerate_models() {
    let l = [C64::new(-1.0, 0.0), C64::new(-2.0, 0.0)];
    let t = [C64::new(-3.0, 0.0), C64::new(-4.0, 0.0)];
    let zero_b = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    assert_eq!(
        place_diagonal(&l, &zero_b, &t, SpectrumKind::Controller),
        Err(GainError::Unreachable { index: 1 })
    );
    assert_eq!(
        place_diagonal(&l, &zero_b, &t, SpectrumKind::Observer),
        Err(GainError::Unobservable { index: 1 })
    );
    let rep = [C64::new(-1.0, 0.0), C64::new(-1.0, 0.0)];
    assert!(matches!(
        place_diagonal(&rep, &[C64::new(1.0, 0.0); 2], &t, SpectrumKind::Controller),
        Err(GainError::RepeatedEigenvalue { .. })
    ));
}
