//! Dense linear-algebra helpers over complex matrices.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::scalar::{cr, cx, Cplx, Real};

pub type CMatrix<T> = DMatrix<Cplx<T>>;
pub type CVector<T> = DVector<Cplx<T>>;

/// Eigenvalues by complex Schur decomposition.
pub fn eigenvalues<T: Real>(a: &CMatrix<T>) -> Vec<Cplx<T>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    if a.nrows() == 1 {
        return vec![a[(0, 0)]];
    }
    let schur = nalgebra::Schur::new(a.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Eigenvalues of a real matrix by real Schur decomposition.
pub fn real_eigenvalues<T: Real>(a: &DMatrix<T>) -> Vec<Cplx<T>> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve<T: Real>(a: CMatrix<T>, b: &CVector<T>) -> Option<CVector<T>> {
    let x = a.lu().solve(b)?;
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(x)
}

/// Least-squares residual `|| M M^+ N - N ||` with singular values below
/// `rel_tol * sigma_max` treated as zero.
pub fn lstsq_residual<T: Real>(m: &CMatrix<T>, n: &CVector<T>, rel_tol: T) -> T {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
    let cut = rel_tol * smax;
    // projection onto the numerical column space
    let mut proj = CVector::<T>::zeros(n.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let col = u.column(k);
            let coef = col.dotc(n);
            proj += col * coef;
        }
    }
    (proj - n).norm()
}

/// Smallest singular value and its right singular vector.
pub fn min_singular<T: Real>(a: &CMatrix<T>) -> (T, CVector<T>) {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let (k, s) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, T::max_value().unwrap()), |(bk, bs), (k, &s)| if s < bs { (k, s) } else { (bk, bs) });
    let v = vt.row(k).transpose().map(|z| z.conj());
    (s, v)
}

/// Zero-order-hold discretisation of `x' = M x + B w`:
/// returns `(exp(M dt), int_0^dt exp(M s) ds B)` from one augmented exponential.
pub fn zoh<T: Real>(m: &CMatrix<T>, b: &CMatrix<T>, dt: T) -> (CMatrix<T>, CMatrix<T>) {
    let n = m.nrows();
    let k = b.ncols();
    let mut aug = CMatrix::<T>::zeros(n + k, n + k);
    aug.view_mut((0, 0), (n, n)).copy_from(m);
    aug.view_mut((0, n), (n, k)).copy_from(b);
    let e = (aug * cr(dt)).exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, k)).into_owned())
}

/// Index of the conjugate partner of each value (itself for real values).
pub fn conjugate_pairing<T: Real>(values: &[Cplx<T>], tol: T) -> Option<Vec<usize>> {
    let mut out = vec![usize::MAX; values.len()];
    for i in 0..values.len() {
        let scale = tol * (T::one() + values[i].modulus());
        if values[i].im.abs() <= scale {
            out[i] = i;
            continue;
        }
        if out[i] != usize::MAX {
            continue;
        }
        let j = (0..values.len()).find(|&j| j != i && out[j] == usize::MAX && (values[j] - values[i].conj()).modulus() <= scale)?;
        out[i] = j;
        out[j] = i;
    }
    Some(out)
}

/// Change of basis `q = T r` mapping real coordinates to conjugate-paired complex ones:
/// for a pair `(i, j)` with `i < j`, `q_i = r_i + i r_j` and `q_j = r_i - i r_j`.
pub fn realification<T: Real>(pairing: &[usize]) -> (CMatrix<T>, CMatrix<T>) {
    let n = pairing.len();
    let mut t = CMatrix::<T>::zeros(n, n);
    let mut tinv = CMatrix::<T>::zeros(n, n);
    let half = T::lit(0.5);
    for i in 0..n {
        let j = pairing[i];
        if j == i {
            t[(i, i)] = cr(T::one());
            tinv[(i, i)] = cr(T::one());
        } else if i < j {
            t[(i, i)] = cr(T::one());
            t[(i, j)] = cx(T::zero(), T::one());
            t[(j, i)] = cr(T::one());
            t[(j, j)] = cx(T::zero(), -T::one());
            // r_i = (q_i + q_j)/2, r_j = (q_i - q_j)/(2i)
            tinv[(i, i)] = cr(half);
            tinv[(i, j)] = cr(half);
            tinv[(j, i)] = cx(T::zero(), -half);
            tinv[(j, j)] = cx(T::zero(), half);
        }
    }
    (t, tinv)
}

/// Real part of a matrix whose imaginary part is numerically zero.
pub fn real_part<T: Real>(a: &CMatrix<T>) -> (DMatrix<T>, T) {
    let im = a.iter().fold(T::zero(), |m, z| m.max(z.im.abs()));
    (a.map(|z| z.re), im)
}
