use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use latelump::params::{validate_config, Violation};
use latelump::plant::ExpSum;
use latelump::{inner_product, BoundaryKind, Plant, StateFunction, SystemParams, C64};

fn eval(e: &ExpSum<f64>, z: f64) -> C64 {
    e.terms.iter().map(|(c, s)| c * (s * z).exp()).sum()
}

fn deriv(e: &ExpSum<f64>, z: f64) -> C64 {
    e.terms.iter().map(|(c, s)| c * s * (s * z).exp()).sum()
}

fn simpson(m: usize, f: impl Fn(f64) -> C64) -> C64 {
    let h = 1.0 / m as f64;
    let mut s = f(0.0) + f(1.0);
    for k in 1..m {
        s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

fn quad_inner(f: &StateFunction, g: &StateFunction) -> C64 {
    simpson(20_000, |z| eval(&f.h1, z) * eval(&g.h1, z).conj() + eval(&f.h2, z) * eval(&g.h2, z).conj())
        + f.h3 * g.h3.conj()
}

fn random_sum(rng: &mut ChaCha8Rng, terms: usize) -> ExpSum<f64> {
    ExpSum {
        terms: (0..terms)
            .map(|_| {
                (
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    C64::new(rng.gen_range(-4.0..4.0), rng.gen_range(-25.0..25.0)),
                )
            })
            .collect(),
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> StateFunction {
    let h1 = random_sum(rng, 3);
    let h2 = random_sum(rng, 3);
    let h3 = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    StateFunction::new(h1, h2, h3)
}

#[test]
fn derived_constants() {
    let p = Plant::reference();
    let tau = 1.0 / (11.0f64 * 21.0).sqrt();
    assert!((p.tau() - 0.0657951694959769).abs() < 1e-15);
    assert!((p.tau() - tau).abs() < 1e-16);
    // rho = beta tau (mu_o - 1)/(mu_o + 1), mu_o = exp(-60 tau), i.e. -beta tau tanh(30 tau)
    assert!((p.derived.rho - (-21.0 * tau * (30.0 * tau).tanh())).abs() < 1e-14);
    assert!((p.derived.rho + 1.3293779219608084).abs() < 1e-13);
    assert!((p.derived.k_ring - (-21.0 * tau * (10.0 * tau).tanh())).abs() < 1e-14);
    assert!((p.derived.k_ring + 0.7972382171045871).abs() < 1e-13);
    assert!((p.g - 31.0 * 21.0 * tau).abs() < 1e-12);
}

#[test]
fn config_reports_every_violation() {
    let mut raw = BTreeMap::new();
    raw.insert("alpha".to_string(), -1.0);
    raw.insert("beta".to_string(), 21.0);
    raw.insert("gamma".to_string(), 0.0);
    raw.insert("mu_c".to_string(), 1.5);
    raw.insert("kappa_c".to_string(), 15.0);
    raw.insert("kappa_o".to_string(), 35.0);
    raw.insert("delta".to_string(), 1.0);
    let err = validate_config::<f64>(&raw).unwrap_err();
    let keys: Vec<&str> = err.violations().iter().map(Violation::key).collect();
    for k in ["alpha", "gamma", "mu_c", "mu_o", "delta"] {
        assert!(keys.contains(&k), "{k} missing from {keys:?}");
    }
    assert!(!keys.contains(&"beta"));
}

#[test]
fn config_accepts_reference() {
    let r = SystemParams::reference();
    let names = ["alpha", "beta", "gamma", "mu_c", "kappa_c", "mu_o", "kappa_o"];
    let raw: BTreeMap<String, f64> = names.iter().map(|k| k.to_string()).zip(r.values()).collect();
    assert_eq!(validate_config::<f64>(&raw).unwrap(), r);
}

#[test]
fn inner_product_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let f = random_state(&mut rng);
        let g = random_state(&mut rng);
        let exact = inner_product(&f, &g);
        let q = quad_inner(&f, &g);
        assert!((exact - q).norm() < 1e-10 * (1.0 + q.norm()), "{exact} vs {q}");
    }
}

#[test]
fn lowest_eigenvalues() {
    let p = Plant::reference();
    let inter = p.eigenvalues(BoundaryKind::Intermediate, 3).unwrap();
    assert!((inter[0] - C64::new(-21.58, 0.0)).norm() < 5e-3, "{inter:?}");
    assert!((inter[1] - C64::new(-25.03, 35.65)).norm() < 1e-2, "{inter:?}");
    assert!((inter[2] - inter[1].conj()).norm() < 1e-10);

    let ctrl = p.eigenvalues(BoundaryKind::Controller, 3).unwrap();
    assert!((ctrl[0] - C64::new(-7.36, 0.0)).norm() < 5e-3, "{ctrl:?}");
    assert!((ctrl[1] - C64::new(-8.31, 36.8)).norm() < 5e-2, "{ctrl:?}");

    // the open plant is conservative apart from the integrator at 0
    let open = p.eigenvalues(BoundaryKind::Open, 9).unwrap();
    assert!(open[0].norm() < 1e-9, "{open:?}");
    assert!((open[1].im - 36.9).abs() < 5e-2, "{open:?}");
    for z in &open {
        assert!(z.re.abs() < 1e-9, "{z}");
    }
}

#[test]
fn eigenfunctions_satisfy_the_operator_pointwise() {
    let p = Plant::reference();
    for kind in [BoundaryKind::Open, BoundaryKind::Intermediate, BoundaryKind::Controller] {
        let r = p.coefficient(kind);
        for m in p.eigenmodes(kind, 20).unwrap() {
            assert!(m.collocation_residual(&p, 64) < 1e-10, "{kind:?} {}", m.lambda);
            // the Gram-matrix norm of a cancelling sum bottoms out near sqrt(eps)
            assert!(m.eigen_residual(&p) < 1e-7 * (1.0 + m.lambda.norm()), "{kind:?} {}", m.lambda);
            // domain: h3 = h1(0), h2(1) = r h1(1)
            let phi = &m.phi;
            assert!((phi.h3 - eval(&phi.h1, 0.0)).norm() < 1e-12);
            let scale = 1.0 + eval(&phi.h1, 1.0).norm();
            assert!((eval(&phi.h2, 1.0) - eval(&phi.h1, 1.0) * r).norm() < 1e-8 * scale, "{kind:?} {}", m.lambda);
            // adjoint domain
            let (d0, d1) = p.adjoint_domain_defect(&m.phi_star, r);
            let s = m.phi_star.norm();
            assert!(d0 < 1e-10 * s && d1 < 1e-8 * s, "{d0} {d1}");
        }
    }
}

#[test]
fn biorthonormal_by_quadrature() {
    let p = Plant::reference();
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 10).unwrap();
    for (i, a) in modes.iter().enumerate() {
        for (j, b) in modes.iter().enumerate() {
            let d = if i == j { 1.0 } else { 0.0 };
            assert!((quad_inner(&a.phi, &b.phi_star) - d).norm() < 1e-8, "{i} {j}");
        }
    }
}

/// Every eigenvalue obeys `Re lambda = c + ln(|lambda - g| / |lambda + g|) / (2 tau)`,
/// so the chain approaches `Re = c` like `-c g / (tau Im^2)`.
#[test]
fn asymptotic_vertical_chain() {
    let p = Plant::reference();
    for kind in [BoundaryKind::Intermediate, BoundaryKind::Controller] {
        let c = p.chain_real_part(kind);
        let lams = p.eigenvalues(kind, 62).unwrap();
        let upper: Vec<C64> = lams.iter().filter(|z| z.im > 0.0).copied().collect();
        for z in &upper {
            let exact = c + ((z - p.g).norm() / (z + p.g).norm()).ln() / (2.0 * p.tau());
            assert!((z.re - exact).abs() < 1e-9, "{kind:?} {z}");
        }
        let predicted = -c * p.g / p.tau();
        let mut prev = f64::INFINITY;
        for z in &upper[10..=30] {
            let off = z.re - c;
            assert!(off.abs() < prev, "{kind:?}: offset not shrinking at {z}");
            prev = off.abs();
            let ratio = off * z.im * z.im / predicted;
            assert!((ratio - 1.0).abs() < 0.1, "{kind:?} {z}: ratio {ratio}");
        }
    }
}

/// `<A h, phi*_i> - lambda_i <h, phi*_i> = b_i (h2(1) - rho h1(1))` for `h`
/// outside the domain, which identifies `b_i` as the modal input coefficient.
#[test]
fn input_coefficients_weak_form() {
    let p = Plant::reference();
    let rho = p.derived.rho;
    let modes = p.eigenmodes(BoundaryKind::Intermediate, 8).unwrap();
    let b = p.modal_input_coefficients(&modes);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..4 {
        let h1 = random_sum(&mut rng, 2);
        let h2 = random_sum(&mut rng, 2);
        let h3 = eval(&h1, 0.0);
        let h = StateFunction::new(h1, h2, h3);
        let v = eval(&h.h2, 1.0) - eval(&h.h1, 1.0) * rho;
        for (m, bi) in modes.iter().zip(&b) {
            let g = &m.phi_star;
            let ah = simpson(20_000, |z| {
                deriv(&h.h2, z) * p.params.alpha * eval(&g.h1, z).conj()
                    + deriv(&h.h1, z) * p.params.beta * eval(&g.h2, z).conj()
            }) + eval(&h.h2, 0.0) * p.params.gamma * g.h3.conj();
            let lhs = ah - m.lambda * quad_inner(&h, g);
            let rhs = bi * v;
            assert!((lhs - rhs).norm() < 1e-7 * (1.0 + rhs.norm()), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn boundary_value_mode_weak_form() {
    let p = Plant::reference();
    let lam = C64::new(0.0, 0.0);
    let phi = p.boundary_value_mode(lam, C64::new(1.0, 0.0), BoundaryKind::Intermediate).unwrap();
    assert!((p.boundary(&phi, p.derived.rho) - 1.0).norm() < 1e-12);
    assert!((phi.h3 - eval(&phi.h1, 0.0)).norm() < 1e-12);
    let r = p.apply_a(&phi).axpy(-lam, &phi);
    assert!(r.norm() < 1e-10 * phi.norm());
    // an anchor on the spectrum is rejected
    let l0 = p.eigenvalues(BoundaryKind::Intermediate, 1).unwrap()[0];
    assert!(p.boundary_value_mode(l0, C64::new(1.0, 0.0), BoundaryKind::Intermediate).is_err());
}
