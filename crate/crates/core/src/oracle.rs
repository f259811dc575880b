//! Dense finite-difference discretisations used as independent eigenvalue references.
//!
//! Second-order upwind differences in the Riemann invariants on `n` cells,
//! first order at the node next to the inflow boundary. Unknowns are
//! `P_0..P_{n-1}`, `M_1..M_n`, `w3`, then any observer states; `P_n` and `M_0`
//! are eliminated through the boundary conditions.

use nalgebra::{ComplexField, DMatrix};
use thiserror::Error;

use crate::closedloop::ClosedLoopBlocks;
use crate::linalg::{conjugate_pairing, real_eigenvalues, real_part, realification, CMatrix};
use crate::plant::{BoundaryKind, Plant};
use crate::scalar::{cr, Cplx, Real};
use crate::spectral::spectral_order;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("observer eigenvalues are not conjugate-paired")]
    Unpaired,
    #[error("realified observer block has imaginary residue {0:e}")]
    NotReal(f64),
}

/// Sparse linear expression over the unknowns.
type Expr<T> = Vec<(usize, Cplx<T>)>;

struct Layout<T> {
    n: usize,
    sa: T,
    sb: T,
    /// `P_n` as an expression (set by the boundary law).
    p_end: Expr<T>,
}

impl<T: Real> Layout<T> {
    fn p(&self, k: usize) -> Expr<T> {
        if k == self.n {
            self.p_end.clone()
        } else {
            vec![(k, cr(T::one()))]
        }
    }

    fn m(&self, k: usize) -> Expr<T> {
        if k == 0 {
            // M_0 = 2 sqrt(beta) w3 - P_0
            vec![(2 * self.n, cr(T::lit(2.0) * self.sb)), (0, cr(-T::one()))]
        } else {
            vec![(self.n + k - 1, cr(T::one()))]
        }
    }

    fn w3(&self) -> usize {
        2 * self.n
    }
}

fn add<T: Real>(a: &mut CMatrix<T>, row: usize, e: &Expr<T>, c: Cplx<T>) {
    for (j, v) in e {
        a[(row, *j)] += *v * c;
    }
}

fn transport_rows<T: Real>(a: &mut CMatrix<T>, lay: &Layout<T>, plant: &Plant<T>) {
    let n = lay.n;
    let c = cr(T::one() / plant.tau());
    let h = cr(T::one() / T::of_usize(n));
    let two = cr(T::lit(2.0));
    let three = cr(T::lit(3.0));
    let four = cr(T::lit(4.0));
    for k in 0..n {
        let row = k;
        if k + 2 <= n {
            let s = c / (two * h);
            add(a, row, &lay.p(k), -three * s);
            add(a, row, &lay.p(k + 1), four * s);
            add(a, row, &lay.p(k + 2), -s);
        } else {
            let s = c / h;
            add(a, row, &lay.p(k + 1), s);
            add(a, row, &lay.p(k), -s);
        }
    }
    for k in 1..=n {
        let row = n + k - 1;
        if k >= 2 {
            let s = -c / (two * h);
            add(a, row, &lay.m(k), three * s);
            add(a, row, &lay.m(k - 1), -four * s);
            add(a, row, &lay.m(k - 2), s);
        } else {
            let s = -c / h;
            add(a, row, &lay.m(k), s);
            add(a, row, &lay.m(k - 1), -s);
        }
    }
    let p = &plant.params;
    let g = cr(p.gamma / lay.sa);
    let w = lay.w3();
    add(a, w, &lay.p(0), g);
    a[(w, w)] -= g * cr(lay.sb);
}

/// `P_n` for the law `w2(1) = r w1(1) + v`, with `v` given as an expression.
fn boundary_expr<T: Real>(lay_n: usize, sa: T, sb: T, r: Cplx<T>, v: &Expr<T>) -> Expr<T> {
    let one = cr(T::one());
    let (ia, ib) = (one / cr(sa), one / cr(sb));
    let den = ia - r * ib;
    let mut e = vec![(2 * lay_n - 1, (ia + r * ib) / den)];
    for (j, c) in v {
        e.push((*j, *c * cr(T::lit(2.0)) / den));
    }
    e
}

/// Discretised plant under `w2(1) = r w1(1)`; dimension `2n + 1`.
pub fn boundary_law_matrix<T: Real>(plant: &Plant<T>, kind: BoundaryKind, n: usize) -> DMatrix<T> {
    let (sa, sb) = (plant.params.alpha.sqrt(), plant.params.beta.sqrt());
    let r = cr(plant.coefficient(kind));
    let lay = Layout {
        n,
        sa,
        sb,
        p_end: boundary_expr(n, sa, sb, r, &Vec::new()),
    };
    let mut a = CMatrix::<T>::zeros(2 * n + 1, 2 * n + 1);
    transport_rows(&mut a, &lay, plant);
    real_part(&a).0
}

/// Discretised closed loop: plant grid plus the observer in real coordinates.
pub fn closed_loop_matrix<T: Real>(blocks: &ClosedLoopBlocks<T>, n: usize) -> Result<DMatrix<T>, OracleError> {
    let plant = &blocks.plant;
    let (sa, sb) = (plant.params.alpha.sqrt(), plant.params.beta.sqrt());
    let no = blocks.order();
    let dim = 2 * n + 1 + no;
    let base = 2 * n + 1;

    let pairing = conjugate_pairing(&blocks.modal_lambdas, T::lit(1e-8)).ok_or(OracleError::Unpaired)?;
    let (t, tinv) = realification::<T>(&pairing);

    // v = Kf^T q = (Kf^T T) r
    let kt: Vec<Cplx<T>> = (0..no)
        .map(|j| (0..no).fold(cr(T::zero()), |s, i| s + blocks.kf[i] * t[(i, j)]))
        .collect();
    let v: Expr<T> = kt.iter().enumerate().map(|(j, c)| (base + j, *c)).collect();
    let lay = Layout {
        n,
        sa,
        sb,
        p_end: boundary_expr(n, sa, sb, blocks.kappa_b, &v),
    };
    let mut a = CMatrix::<T>::zeros(dim, dim);
    transport_rows(&mut a, &lay, plant);

    // r' = T^{-1} A4 T r + T^{-1} a3 w1(1),  w1(1) = (P_n + M_n) / (2 sqrt(beta))
    let a4r = &tinv * &blocks.a4 * &t;
    let mut y: Expr<T> = lay.p(n);
    y.extend(lay.m(n));
    let y: Expr<T> = y.into_iter().map(|(j, c)| (j, c / cr(T::lit(2.0) * sb))).collect();
    for i in 0..no {
        for j in 0..no {
            a[(base + i, base + j)] += a4r[(i, j)];
        }
        let a3r = (0..no).fold(cr(T::zero()), |s, k| s + tinv[(i, k)] * blocks.a3[k]);
        add(&mut a, base + i, &y, a3r);
    }
    let (re, im) = real_part(&a);
    let scale = re.amax().max(T::one());
    if im > T::lit(1e-8) * scale {
        return Err(OracleError::NotReal(im.into()));
    }
    Ok(re)
}

/// Eigenvalues in canonical order.
pub fn oracle_eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<Cplx<T>> {
    let mut ev = real_eigenvalues(a);
    ev.sort_by(spectral_order);
    ev
}

/// For each reference root, the nearest oracle eigenvalue and the distance.
pub fn nearest_matches<T: Real>(roots: &[Cplx<T>], oracle: &[Cplx<T>]) -> Vec<(Cplx<T>, Cplx<T>, T)> {
    roots
        .iter()
        .map(|r| {
            let best = oracle
                .iter()
                .min_by(|a, b| (**a - *r).modulus().partial_cmp(&(**b - *r).modulus()).unwrap())
                .copied()
                .unwrap_or(cr(T::zero()));
            (*r, best, (best - *r).modulus())
        })
        .collect()
}
