//! Complex-analytic machinery: characteristic functions, root finding over
//! rectangles, and argument-principle root counts.

mod charfn;
mod roots;

pub use charfn::{CharFunction, EvalError, FnCharFunction};
pub use roots::{
    count_roots_argument_principle, find_roots, refine_root, spectral_order, Refined, Root,
    RootMethod, RootOptions, SpectrumResult,
};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::scalar::{cx, Cplx, Real};

/// Axis-aligned rectangle `[re_min, re_max] x [im_min, im_max]` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect<T> {
    pub re_min: T,
    pub re_max: T,
    pub im_min: T,
    pub im_max: T,
}

impl<T: Real> Rect<T> {
    pub fn new(re_min: T, re_max: T, im_min: T, im_max: T) -> Self {
        Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }

    /// Square box of half-width `r` around `center`.
    pub fn around(center: Cplx<T>, r: T) -> Self {
        Rect::new(center.re - r, center.re + r, center.im - r, center.im + r)
    }

    pub fn width(&self) -> T {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> T {
        self.im_max - self.im_min
    }

    pub fn has_positive_area(&self) -> bool {
        self.width() > T::zero() && self.height() > T::zero()
    }

    pub fn contains(&self, z: Cplx<T>) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Containment with an absolute slack on every side.
    pub fn contains_with_slack(&self, z: Cplx<T>, slack: T) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    /// Corners, counter-clockwise from the lower left.
    pub fn corners(&self) -> [Cplx<T>; 4] {
        [
            cx(self.re_min, self.im_min),
            cx(self.re_max, self.im_min),
            cx(self.re_max, self.im_max),
            cx(self.re_min, self.im_max),
        ]
    }

    pub fn is_conjugate_symmetric(&self) -> bool {
        (self.im_min + self.im_max).abs() <= T::eps() * (T::one() + self.im_max.abs())
    }
}

impl<T: Real + fmt::Display> fmt::Display for Rect<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.re_min, self.re_max, self.im_min, self.im_max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed region `{0}`: expected re_min,re_max,im_min,im_max with re_min<re_max and im_min<im_max")]
pub struct RectParseError(pub String);

impl FromStr for Rect<f64> {
    type Err = RectParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
        match parts {
            Ok(v) if v.len() == 4 && v.iter().all(|x| x.is_finite()) => {
                let r = Rect::new(v[0], v[1], v[2], v[3]);
                if r.has_positive_area() {
                    Ok(r)
                } else {
                    Err(RectParseError(s.to_string()))
                }
            }
            _ => Err(RectParseError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("region must have positive area")]
    EmptyRegion,
    #[error("grid must be at least 8x8, got {0}x{1}")]
    GridTooCoarse(usize, usize),
    #[error("tolerance must be positive")]
    BadTolerance,
    #[error("characteristic function could not be evaluated at any grid node")]
    NoValidNodes,
    #[error("root on contour near {re}{im:+}i (|f| = {value:e})")]
    RootOnContour { re: f64, im: f64, value: f64 },
    #[error("evaluation failed on contour at {re}{im:+}i")]
    ContourEvaluation { re: f64, im: f64 },
    #[error("refinement diverged from seed {re}{im:+}i")]
    Divergence { re: f64, im: f64 },
}
