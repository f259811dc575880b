use std::fmt;

use log::debug;
use nalgebra::ComplexField;
use rayon::prelude::*;
use serde::Serialize;

use super::{CharFunction, Rect, SpectralError};
use crate::scalar::{cx, Cplx, Real};

/// Origin of a reported eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RootMethod {
    #[serde(rename = "char-eq")]
    CharEq,
    #[serde(rename = "finite-block")]
    FiniteBlock,
    #[serde(rename = "discretization-oracle")]
    DiscretizationOracle,
    #[serde(rename = "closed-form")]
    ClosedForm,
}

impl fmt::Display for RootMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RootMethod::CharEq => "char-eq",
            RootMethod::FiniteBlock => "finite-block",
            RootMethod::DiscretizationOracle => "discretization-oracle",
            RootMethod::ClosedForm => "closed-form",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root<T> {
    pub value: Cplx<T>,
    /// `|f(value)|` divided by the scan's normalisation scale.
    pub residual: T,
    pub iterations: usize,
    pub method: RootMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult<T> {
    pub roots: Vec<Root<T>>,
    /// Converged roots that fell inside an exclusion disk.
    pub dropped: Vec<Root<T>>,
    pub region: Rect<T>,
    /// Median grid magnitude used to normalise residuals.
    pub scale: T,
    /// Seeds whose refinement failed or left the region.
    pub failed_seeds: usize,
}

impl<T: Real> SpectrumResult<T> {
    pub fn values(&self) -> Vec<Cplx<T>> {
        self.roots.iter().map(|r| r.value).collect()
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions<T> {
    pub nx: usize,
    pub ny: usize,
    pub tol: T,
    /// Roots closer than `dedup * (1 + |z|)` are merged.
    pub dedup: T,
    /// Radius of the mask around excluded points.
    pub exclusion_radius: T,
    pub max_iter: usize,
}

impl<T: Real> RootOptions<T> {
    pub fn new(nx: usize, ny: usize) -> Self {
        RootOptions {
            nx,
            ny,
            tol: default_tol(),
            dedup: T::lit(1e-6),
            exclusion_radius: T::lit(1e-4),
            max_iter: 60,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    /// Grid with roughly `step` spacing along both axes (at least 8 nodes each).
    pub fn for_region(region: &Rect<T>, step_re: T, step_im: T) -> Self {
        let nodes = |len: T, step: T| -> usize {
            let n: f64 = (len / step).ceil().into();
            (n as usize + 1).max(8)
        };
        Self::new(
            nodes(region.width(), step_re),
            nodes(region.height(), step_im),
        )
    }
}

fn default_tol<T: Real>() -> T {
    if T::eps() < T::lit(1e-10) {
        T::lit(1e-9)
    } else {
        T::lit(1e-4)
    }
}

/// Relative finite-difference step.
fn diff_step<T: Real>() -> T {
    if T::eps() < T::lit(1e-10) {
        T::lit(1e-6)
    } else {
        T::eps().cbrt()
    }
}

/// Outcome of a single Newton refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined<T> {
    pub value: Cplx<T>,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration with a central-difference derivative and step halving.
///
/// The residual is the raw `|f|`. Fails only when a step runs away.
pub fn refine_root<T: Real, F: CharFunction<T> + ?Sized>(
    f: &F,
    seed: Cplx<T>,
    tol: T,
    max_iter: usize,
) -> Result<Refined<T>, SpectralError> {
    newton(f, seed, T::one(), tol, max_iter, None)
}

fn newton<T: Real, F: CharFunction<T> + ?Sized>(
    f: &F,
    seed: Cplx<T>,
    scale: T,
    tol: T,
    max_iter: usize,
    max_step: Option<T>,
) -> Result<Refined<T>, SpectralError> {
    let diverged = || SpectralError::Divergence {
        re: seed.re.into(),
        im: seed.im.into(),
    };
    let eval = |z: Cplx<T>| f.eval(z).ok().map(|v| (v, v.modulus() / scale));
    let (mut fz, mut res) = eval(seed).ok_or_else(diverged)?;
    let mut z = seed;
    let hrel = diff_step::<T>();
    let two = T::lit(2.0);
    let bound = max_step.unwrap_or_else(|| T::lit(1e3) * (T::one() + seed.modulus()));
    let mut it = 0;
    let mut stalled = 0;
    while it < max_iter {
        if res < tol {
            // one polishing step, kept only if it helps
            if let Some((z2, r2)) = newton_step(&eval, z, fz, hrel, two) {
                if r2 < res {
                    z = z2;
                    res = r2;
                }
            }
            return Ok(Refined {
                value: z,
                residual: res,
                iterations: it,
                converged: true,
            });
        }
        it += 1;
        let h = hrel * (T::one() + z.modulus());
        let hc = cx(h, T::zero());
        let (fp, fm) = match (eval(z + hc), eval(z - hc)) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => return Err(diverged()),
        };
        let d = (fp - fm) / (hc * cx(two, T::zero()));
        if d.modulus() == T::zero() || !d.re.is_finite() || !d.im.is_finite() {
            break;
        }
        let mut step = fz / d;
        if step.modulus() > bound {
            return Err(diverged());
        }
        let mut accepted = false;
        for _ in 0..12 {
            if let Some((fn_, rn)) = eval(z - step) {
                if rn < res || rn < tol {
                    z -= step;
                    fz = fn_;
                    res = rn;
                    accepted = true;
                    break;
                }
            }
            step = step / cx(two, T::zero());
        }
        if !accepted {
            stalled += 1;
            if stalled > 2 {
                break;
            }
            // take the full step anyway to escape shallow minima
            let full = fz / d;
            match eval(z - full) {
                Some((fn_, rn)) => {
                    z -= full;
                    fz = fn_;
                    res = rn;
                }
                None => break,
            }
        }
        if (z - seed).modulus() > bound {
            return Err(diverged());
        }
    }
    Ok(Refined {
        value: z,
        residual: res,
        iterations: it,
        converged: res < tol,
    })
}

fn newton_step<T: Real, E>(eval: &E, z: Cplx<T>, fz: Cplx<T>, hrel: T, two: T) -> Option<(Cplx<T>, T)>
where
    E: Fn(Cplx<T>) -> Option<(Cplx<T>, T)>,
{
    let h = cx(hrel * (T::one() + z.modulus()), T::zero());
    let d = (eval(z + h)?.0 - eval(z - h)?.0) / (h * cx(two, T::zero()));
    if d.modulus() == T::zero() {
        return None;
    }
    let z2 = z - fz / d;
    let (_, r2) = eval(z2)?;
    Some((z2, r2))
}

fn near_excluded<T: Real>(z: Cplx<T>, excluded: &[Cplx<T>], r: T) -> bool {
    excluded.iter().any(|e| (z - *e).modulus() < r)
}

fn median<T: Real>(mut v: Vec<T>) -> T {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return T::one();
    }
    v[v.len() / 2]
}

/// Canonical ordering: `|Im|` ascending, positive imaginary part first, then real part.
pub fn spectral_order<T: Real>(a: &Cplx<T>, b: &Cplx<T>) -> std::cmp::Ordering {
    a.im.abs()
        .partial_cmp(&b.im.abs())
        .unwrap()
        .then(b.im.partial_cmp(&a.im).unwrap())
        .then(a.re.partial_cmp(&b.re).unwrap())
}

/// Locates all zeros of `f` inside `region`.
///
/// Seeds are the discrete local minima of `|f|` on an `nx x ny` grid plus the
/// centres of cells across which both `Re f` and `Im f` change sign. Each seed
/// is refined by damped Newton; accepted roots satisfy `|f| / scale < tol`
/// where `scale` is the median grid magnitude.
pub fn find_roots<T: Real, F: CharFunction<T> + ?Sized>(
    f: &F,
    region: Rect<T>,
    opts: &RootOptions<T>,
) -> Result<SpectrumResult<T>, SpectralError> {
    if !region.has_positive_area() {
        return Err(SpectralError::EmptyRegion);
    }
    if opts.nx < 8 || opts.ny < 8 {
        return Err(SpectralError::GridTooCoarse(opts.nx, opts.ny));
    }
    if opts.tol <= T::zero() {
        return Err(SpectralError::BadTolerance);
    }
    let (nx, ny) = (opts.nx, opts.ny);
    let dx = region.width() / T::of_usize(nx - 1);
    let dy = region.height() / T::of_usize(ny - 1);
    let node = |i: usize, j: usize| cx(region.re_min + dx * T::of_usize(i), region.im_min + dy * T::of_usize(j));
    let excluded = f.excluded_points();
    let mask = opts.exclusion_radius;

    let values: Vec<Option<Cplx<T>>> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let z = node(k % nx, k / nx);
            if near_excluded(z, excluded, mask) {
                return None;
            }
            f.eval(z).ok()
        })
        .collect();
    let mags: Vec<Option<T>> = values.iter().map(|v| v.map(|v| v.modulus())).collect();
    let finite: Vec<T> = mags.iter().flatten().copied().collect();
    if finite.is_empty() {
        return Err(SpectralError::NoValidNodes);
    }
    let mut scale = median(finite);
    if scale <= T::zero() || !scale.is_finite() {
        scale = T::one();
    }

    let at = |i: usize, j: usize| mags[j * nx + i];
    let mut seeds = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let Some(m) = at(i, j) else { continue };
            let mut is_min = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= nx as i64 || jj >= ny as i64 {
                        continue;
                    }
                    if let Some(mn) = at(ii as usize, jj as usize) {
                        if mn < m {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
            }
            if is_min {
                seeds.push(node(i, j));
            }
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [values[j * nx + i], values[j * nx + i + 1], values[(j + 1) * nx + i], values[(j + 1) * nx + i + 1]];
            if c.iter().any(|v| v.is_none()) {
                continue;
            }
            let c: Vec<Cplx<T>> = c.iter().map(|v| v.unwrap()).collect();
            let changes = |g: &dyn Fn(&Cplx<T>) -> T| {
                let pos = c.iter().any(|v| g(v) > T::zero());
                let neg = c.iter().any(|v| g(v) < T::zero());
                pos && neg
            };
            if changes(&|v| v.re) && changes(&|v| v.im) {
                let half = T::lit(0.5);
                seeds.push(node(i, j) + cx(dx * half, dy * half));
            }
        }
    }
    debug!("find_roots: {} seeds on {}x{} grid", seeds.len(), nx, ny);

    let max_step = T::lit(4.0) * (dx.max(dy) + T::one());
    let slack = T::lit(1e-9) * (T::one() + region.width().max(region.height()));
    let refined: Vec<Option<Root<T>>> = seeds
        .par_iter()
        .map(|s| match newton(f, *s, scale, opts.tol, opts.max_iter, Some(max_step)) {
            Ok(r) if r.converged && region.contains_with_slack(r.value, slack) => Some(Root {
                value: r.value,
                residual: r.residual,
                iterations: r.iterations,
                method: RootMethod::CharEq,
            }),
            _ => None,
        })
        .collect();
    let failed_seeds = refined.iter().filter(|r| r.is_none()).count();
    let mut found: Vec<Root<T>> = refined.into_iter().flatten().collect();

    if f.conjugate_symmetric() {
        let partners: Vec<Root<T>> = found
            .par_iter()
            .filter(|r| r.value.im != T::zero() && region.contains_with_slack(r.value.conj(), slack))
            .filter_map(|r| {
                let n = newton(f, r.value.conj(), scale, opts.tol, opts.max_iter, Some(max_step)).ok()?;
                n.converged.then_some(Root {
                    value: n.value,
                    residual: n.residual,
                    iterations: n.iterations,
                    method: RootMethod::CharEq,
                })
            })
            .collect();
        found.extend(partners);
    }

    let mut roots = dedup(found, opts.dedup);
    if f.conjugate_symmetric() {
        roots = symmetrize(f, roots, scale, opts.dedup);
    }
    let (mut roots, dropped): (Vec<_>, Vec<_>) = roots
        .into_iter()
        .partition(|r| !near_excluded(r.value, excluded, mask));
    roots.retain(|r| r.residual < opts.tol);
    roots.sort_by(|a, b| spectral_order(&a.value, &b.value));
    Ok(SpectrumResult {
        roots,
        dropped,
        region,
        scale,
        failed_seeds,
    })
}

fn dedup<T: Real>(mut found: Vec<Root<T>>, radius: T) -> Vec<Root<T>> {
    found.sort_by(|a, b| a.residual.partial_cmp(&b.residual).unwrap());
    let mut out: Vec<Root<T>> = Vec::new();
    for r in found {
        let rad = radius * (T::one() + r.value.modulus());
        if out.iter().all(|o| (o.value - r.value).modulus() >= rad) {
            out.push(r);
        }
    }
    out
}

/// Snaps near-real roots onto the axis and mirrors each upper root onto its
/// lower partner so that the returned set is exactly conjugate-closed.
fn symmetrize<T: Real, F: CharFunction<T> + ?Sized>(f: &F, roots: Vec<Root<T>>, scale: T, radius: T) -> Vec<Root<T>> {
    let residual = |z: Cplx<T>| f.eval(z).ok().map(|v| v.modulus() / scale);
    let mut out: Vec<Root<T>> = Vec::with_capacity(roots.len());
    for mut r in roots.iter().copied() {
        let rad = radius * (T::one() + r.value.modulus());
        if r.value.im.abs() < rad {
            let snapped = cx(r.value.re, T::zero());
            if let Some(res) = residual(snapped) {
                if res <= r.residual.max(T::lit(10.0) * T::eps()) * T::lit(10.0) {
                    r.value = snapped;
                    r.residual = res;
                }
            }
        } else if r.value.im < T::zero() {
            let partner = roots
                .iter()
                .filter(|o| o.value.im > T::zero())
                .find(|o| (o.value.conj() - r.value).modulus() < rad);
            if let Some(p) = partner {
                r.value = p.value.conj();
                r.residual = residual(r.value).unwrap_or(p.residual);
            }
        }
        out.push(r);
    }
    out
}

/// Winding number of `f` along the boundary of `region`, counter-clockwise.
///
/// Samples each edge uniformly and bisects any step whose phase jump exceeds
/// `pi/3`. A sample with `|f|` below `1e-8` times the median contour
/// magnitude is treated as a root on the contour.
pub fn count_roots_argument_principle<T: Real, F: CharFunction<T> + ?Sized>(
    f: &F,
    region: Rect<T>,
    samples_per_edge: usize,
) -> Result<i64, SpectralError> {
    if !region.has_positive_area() {
        return Err(SpectralError::EmptyRegion);
    }
    let m = samples_per_edge.max(4);
    let corners = region.corners();
    let mut pts = Vec::with_capacity(4 * m);
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        for k in 0..m {
            let t = T::of_usize(k) / T::of_usize(m);
            pts.push(a + (b - a) * cx(t, T::zero()));
        }
    }
    let vals: Vec<Result<Cplx<T>, SpectralError>> = pts
        .par_iter()
        .map(|&z| {
            f.eval(z).map_err(|_| SpectralError::ContourEvaluation {
                re: z.re.into(),
                im: z.im.into(),
            })
        })
        .collect();
    let vals: Vec<Cplx<T>> = vals.into_iter().collect::<Result<_, _>>()?;
    let scale = median(vals.iter().map(|v| v.modulus()).collect());
    let guard = T::lit(1e-8) * scale;
    let check = |z: Cplx<T>, v: Cplx<T>| -> Result<(), SpectralError> {
        if v.modulus() <= guard {
            Err(SpectralError::RootOnContour {
                re: z.re.into(),
                im: z.im.into(),
                value: v.modulus().into(),
            })
        } else {
            Ok(())
        }
    };
    let mut total = T::zero();
    let n = pts.len();
    for k in 0..n {
        let (z0, z1) = (pts[k], pts[(k + 1) % n]);
        check(z0, vals[k])?;
        total += phase_increment(f, z0, vals[k], z1, vals[(k + 1) % n], guard, 0)?;
    }
    let turns: f64 = (total / T::two_pi()).into();
    Ok(turns.round() as i64)
}

fn phase_increment<T: Real, F: CharFunction<T> + ?Sized>(
    f: &F,
    z0: Cplx<T>,
    f0: Cplx<T>,
    z1: Cplx<T>,
    f1: Cplx<T>,
    guard: T,
    depth: usize,
) -> Result<T, SpectralError> {
    let d = (f1 / f0).argument();
    if d.abs() <= T::frac_pi_3() || depth >= 40 {
        return Ok(d);
    }
    let zm = (z0 + z1) * cx(T::lit(0.5), T::zero());
    let fm = f.eval(zm).map_err(|_| SpectralError::ContourEvaluation {
        re: zm.re.into(),
        im: zm.im.into(),
    })?;
    if fm.modulus() <= guard {
        return Err(SpectralError::RootOnContour {
            re: zm.re.into(),
            im: zm.im.into(),
            value: fm.modulus().into(),
        });
    }
    Ok(phase_increment(f, z0, f0, zm, fm, guard, depth + 1)?
        + phase_increment(f, zm, fm, z1, f1, guard, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::FnCharFunction;

    fn quad() -> impl CharFunction<f64> {
        FnCharFunction::new(|z: Cplx<f64>| z * z + Cplx::new(1.0, 0.0)).conjugate_symmetric(true)
    }

    #[test]
    fn unit_quadratic() {
        let r = find_roots(&quad(), Rect::new(-2.0, 2.0, -2.0, 2.0), &RootOptions::new(8, 8)).unwrap();
        let v = r.values();
        assert_eq!(v.len(), 2);
        assert!((v[0] - Cplx::new(0.0, 1.0)).norm() < 1e-10);
        assert_eq!(v[1], v[0].conj());
    }

    #[test]
    fn newton_recovers_perturbed_root() {
        let r = refine_root(&quad(), Cplx::new(0.05, 0.93), 1e-13, 50).unwrap();
        assert!(r.converged);
        assert!((r.value - Cplx::new(0.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn winding_counts() {
        let f = quad();
        assert_eq!(count_roots_argument_principle(&f, Rect::new(-2.0, 2.0, -2.0, 2.0), 16).unwrap(), 2);
        assert_eq!(count_roots_argument_principle(&f, Rect::new(-1.0, 1.0, 0.5, 2.0), 16).unwrap(), 1);
        assert_eq!(count_roots_argument_principle(&f, Rect::new(1.0, 2.0, -2.0, 2.0), 16).unwrap(), 0);
        let err = count_roots_argument_principle(&f, Rect::new(-1.0, 1.0, 1.0, 2.0), 16).unwrap_err();
        assert!(matches!(err, SpectralError::RootOnContour { .. }));
    }

    #[test]
    fn excluded_root_is_reported_separately() {
        let f = FnCharFunction::new(|z: Cplx<f64>| z * z + Cplx::new(1.0, 0.0))
            .with_excluded(vec![Cplx::new(0.0, 1.0)]);
        let r = find_roots(&f, Rect::new(-2.0, 2.0, -2.0, 2.0), &RootOptions::new(9, 9)).unwrap();
        assert_eq!(r.values().len(), 1);
        assert!((r.values()[0] - Cplx::new(0.0, -1.0)).norm() < 1e-10);
        assert_eq!(r.dropped.len(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        let f = quad();
        assert!(matches!(
            find_roots(&f, Rect::new(0.0, 0.0, 0.0, 1.0), &RootOptions::new(8, 8)),
            Err(SpectralError::EmptyRegion)
        ));
        assert!(matches!(
            find_roots(&f, Rect::new(0.0, 1.0, 0.0, 1.0), &RootOptions::new(4, 8)),
            Err(SpectralError::GridTooCoarse(4, 8))
        ));
    }
}
