//! Time-domain co-simulation by the method of characteristics.
//!
//! The plant is carried in Riemann invariants `P = sqrt(beta) w1 + sqrt(alpha) w2`
//! (moving towards `z = 0`) and `M = sqrt(beta) w1 - sqrt(alpha) w2` (moving
//! towards `z = 1`). With `dt = tau dz` each step shifts both arrays by one cell.

use serde::Serialize;
use thiserror::Error;

use crate::closedloop::ClosedLoopBlocks;
use crate::observer::{ObserverRealization, ObserverState};
use crate::plant::StateFunction;
use crate::scalar::{cr, Cplx, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("grid needs at least 2 cells, got {0}")]
    GridTooSmall(usize),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("fit window holds {0} samples, need at least 10")]
    WindowTooShort(usize),
    #[error("non-positive norm in fit window")]
    NonPositive,
    #[error("time step too coarse: |Re lambda| dt = {0}")]
    StepTooCoarse(f64),
}

/// Plant state on a uniform grid of `n` cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantGrid<T> {
    pub n: usize,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub dz: T,
    pub dt: T,
    pub p: Vec<T>,
    pub m: Vec<T>,
    pub w3: T,
    pub t: T,
}

impl<T: Real> PlantGrid<T> {
    /// Zero state. Coefficients are not validated so that `gamma = 0` can be used.
    pub fn new(alpha: T, beta: T, gamma: T, n: usize) -> Result<Self, SimError> {
        if n < 2 {
            return Err(SimError::GridTooSmall(n));
        }
        let dz = T::one() / T::of_usize(n);
        let tau = T::one() / (alpha * beta).sqrt();
        Ok(PlantGrid {
            n,
            alpha,
            beta,
            gamma,
            dz,
            dt: dz * tau,
            p: vec![T::zero(); n + 1],
            m: vec![T::zero(); n + 1],
            w3: T::zero(),
            t: T::zero(),
        })
    }

    pub fn z(&self, k: usize) -> T {
        T::of_usize(k) * self.dz
    }

    /// Loads `(w1, w2, w3)` from real node values.
    pub fn set_physical(&mut self, w1: &[T], w2: &[T], w3: T) {
        let (sa, sb) = (self.alpha.sqrt(), self.beta.sqrt());
        for k in 0..=self.n {
            self.p[k] = sb * w1[k] + sa * w2[k];
            self.m[k] = sb * w1[k] - sa * w2[k];
        }
        self.w3 = w3;
    }

    /// Loads the real part of a state function.
    pub fn set_state(&mut self, x: &StateFunction<T>) {
        let w1: Vec<T> = (0..=self.n).map(|k| x.h1_at(self.z(k)).re).collect();
        let w2: Vec<T> = (0..=self.n).map(|k| x.h2_at(self.z(k)).re).collect();
        self.set_physical(&w1, &w2, x.h3.re);
    }

    pub fn w1(&self) -> Vec<T> {
        let sb = self.beta.sqrt();
        let two = T::lit(2.0);
        self.p.iter().zip(&self.m).map(|(p, m)| (*p + *m) / (two * sb)).collect()
    }

    pub fn w2(&self) -> Vec<T> {
        let sa = self.alpha.sqrt();
        let two = T::lit(2.0);
        self.p.iter().zip(&self.m).map(|(p, m)| (*p - *m) / (two * sa)).collect()
    }

    /// `y = w1(1)`.
    pub fn output(&self) -> T {
        (self.p[self.n] + self.m[self.n]) / (T::lit(2.0) * self.beta.sqrt())
    }

    /// Trapezoidal weight of node `k`.
    fn weight(&self, k: usize) -> T {
        if k == 0 || k == self.n {
            self.dz / T::lit(2.0)
        } else {
            self.dz
        }
    }

    /// `sqrt(int w1^2 + w2^2 + w3^2)`.
    pub fn state_norm(&self) -> T {
        let (w1, w2) = (self.w1(), self.w2());
        let s = (0..=self.n).fold(self.w3 * self.w3, |acc, k| acc + self.weight(k) * (w1[k] * w1[k] + w2[k] * w2[k]));
        s.sqrt()
    }

    /// `(1/4) int P^2 + M^2 = (1/2) int beta w1^2 + alpha w2^2`.
    pub fn energy(&self) -> T {
        let q = T::lit(0.25);
        (0..=self.n).fold(T::zero(), |acc, k| acc + q * self.weight(k) * (self.p[k] * self.p[k] + self.m[k] * self.m[k]))
    }

    /// Advances one step with boundary input `u` applied at the new time. Returns `y`.
    pub fn step(&mut self, u: T) -> T {
        self.step_with(|_| u)
    }

    /// Advances one step with the loop `u = kappa y + v` solved exactly. Returns `(u, y)`.
    pub fn step_feedback(&mut self, kappa: T, v: T) -> (T, T) {
        let (sa, sb) = (self.alpha.sqrt(), self.beta.sqrt());
        let mut u = T::zero();
        let y = self.step_with(|m_end| {
            // y = (M + sqrt(alpha) u)/sqrt(beta), u = kappa y + v
            let d = T::one() - kappa * sa / sb;
            u = (kappa * m_end / sb + v) / d;
            u
        });
        (u, y)
    }

    fn step_with<F: FnMut(T) -> T>(&mut self, mut law: F) -> T {
        let n = self.n;
        let (sa, sb) = (self.alpha.sqrt(), self.beta.sqrt());
        let p0_old = self.p[0];
        let w3_old = self.w3;
        self.p.copy_within(1..=n, 0);
        self.m.copy_within(0..n, 1);
        let c = self.gamma / sa * self.dt / T::lit(2.0);
        let p0_new = self.p[0];
        // w3_new (1 + c sqrt(beta)) = w3_old (1 - c sqrt(beta)) + c (P0_old + P0_new)
        self.w3 = (w3_old * (T::one() - c * sb) + c * (p0_old + p0_new)) / (T::one() + c * sb);
        self.m[0] = T::lit(2.0) * sb * self.w3 - self.p[0];
        let u = law(self.m[n]);
        self.p[n] = self.m[n] + T::lit(2.0) * sa * u;
        self.t += self.dt;
        self.output()
    }

    /// Enforces the `z = 1` closure on the current state for input `u`.
    pub fn apply_boundary(&mut self, u: T) {
        let n = self.n;
        self.p[n] = self.m[n] + T::lit(2.0) * self.alpha.sqrt() * u;
    }

    /// Enforces the `z = 1` closure for the loop `u = kappa y + v`. Returns `u`.
    pub fn apply_feedback_boundary(&mut self, kappa: T, v: T) -> T {
        let (sa, sb) = (self.alpha.sqrt(), self.beta.sqrt());
        let u = (kappa * self.m[self.n] / sb + v) / (T::one() - kappa * sa / sb);
        self.apply_boundary(u);
        u
    }

    pub fn is_finite(&self) -> bool {
        self.w3.is_finite() && self.p.iter().chain(&self.m).all(|v| v.is_finite())
    }
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow<T> {
    pub t: T,
    pub u: T,
    pub y: T,
    pub yhat: T,
    pub state_norm: T,
    pub err_norm: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SimTrace<T> {
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Real> SimTrace<T> {
    pub fn times(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn state_norms(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.state_norm).collect()
    }
}

/// How the observer is initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObserverStart {
    Zero,
    /// Modal projection of the initial plant state.
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions<T> {
    pub duration: T,
    pub start: ObserverStart,
}

/// Closed-loop run: plant, observer under ZOH, and the feedback of `blocks`.
pub fn run_closed_loop<T: Real>(
    grid: &mut PlantGrid<T>,
    real: &ObserverRealization<T>,
    blocks: &ClosedLoopBlocks<T>,
    x0: &StateFunction<T>,
    opts: &SimOptions<T>,
) -> Result<SimTrace<T>, SimError> {
    let n = real.order();
    grid.set_state(x0);
    grid.t = T::zero();
    let mut state = match opts.start {
        ObserverStart::Zero => ObserverState::zero(n),
        ObserverStart::Projection => real.project(x0),
    };
    let stepper = real.stepper(grid.dt);
    let slowest = real.lambdas.iter().fold(T::zero(), |m, l| m.max(l.re.abs()));
    let stiff: f64 = (slowest * grid.dt).into();
    if stiff > 0.5 {
        return Err(SimError::StepTooCoarse(stiff));
    }
    let table = ModeTable::new(real, grid);
    let kappa = blocks.kappa_b.re;
    let kf = &blocks.kf;
    let feedback = |q: &[Cplx<T>]| kf.iter().zip(q).fold(cr(T::zero()), |s, (k, qi)| s + *k * *qi).re;

    let steps: f64 = (opts.duration / grid.dt).round().into();
    let steps = steps as usize;
    let mut trace = SimTrace {
        rows: Vec::with_capacity(steps + 1),
    };
    let mut u = grid.apply_feedback_boundary(kappa, feedback(&state.q_hat));
    let mut y = grid.output();
    trace.rows.push(sample(grid, real, &table, &state, u, y));
    for _ in 0..steps {
        state = stepper.step(&state, u, y);
        let (u1, y1) = grid.step_feedback(kappa, feedback(&state.q_hat));
        u = u1;
        y = y1;
        if !grid.is_finite() || state.q_hat.iter().any(|q| !q.re.is_finite() || !q.im.is_finite()) {
            return Err(SimError::NonFinite { t: grid.t.into() });
        }
        trace.rows.push(sample(grid, real, &table, &state, u, y));
    }
    Ok(trace)
}

/// Open-loop run under the boundary law `u = kappa y`, with no observer.
pub fn run_boundary_law<T: Real>(grid: &mut PlantGrid<T>, kappa: T, steps: usize) -> Result<SimTrace<T>, SimError> {
    let mut trace = SimTrace { rows: Vec::new() };
    let u = grid.apply_feedback_boundary(kappa, T::zero());
    trace.rows.push(TraceRow {
        t: grid.t,
        u,
        y: grid.output(),
        yhat: T::zero(),
        state_norm: grid.state_norm(),
        err_norm: T::zero(),
    });
    for _ in 0..steps {
        let (u, y) = grid.step_feedback(kappa, T::zero());
        if !grid.is_finite() {
            return Err(SimError::NonFinite { t: grid.t.into() });
        }
        trace.rows.push(TraceRow {
            t: grid.t,
            u,
            y,
            yhat: T::zero(),
            state_norm: grid.state_norm(),
            err_norm: T::zero(),
        });
    }
    Ok(trace)
}

/// Mode shapes sampled on the grid nodes.
struct ModeTable<T> {
    w1: Vec<Vec<Cplx<T>>>,
    w2: Vec<Vec<Cplx<T>>>,
    w3: Vec<Cplx<T>>,
}

impl<T: Real> ModeTable<T> {
    fn new(real: &ObserverRealization<T>, grid: &PlantGrid<T>) -> Self {
        let nodes: Vec<T> = (0..=grid.n).map(|k| grid.z(k)).collect();
        ModeTable {
            w1: real.modes.iter().map(|m| nodes.iter().map(|&z| m.phi.h1_at(z)).collect()).collect(),
            w2: real.modes.iter().map(|m| nodes.iter().map(|&z| m.phi.h2_at(z)).collect()).collect(),
            w3: real.modes.iter().map(|m| m.phi.h3).collect(),
        }
    }
}

fn sample<T: Real>(
    grid: &PlantGrid<T>,
    real: &ObserverRealization<T>,
    table: &ModeTable<T>,
    state: &ObserverState<T>,
    u: T,
    y: T,
) -> TraceRow<T> {
    let (w1, w2) = (grid.w1(), grid.w2());
    let q = &state.q_hat;
    let mut err = T::zero();
    for k in 0..=grid.n {
        let mut e1 = cr(T::zero());
        let mut e2 = cr(T::zero());
        for (i, qi) in q.iter().enumerate() {
            e1 += *qi * table.w1[i][k];
            e2 += *qi * table.w2[i][k];
        }
        let d1 = e1.re - w1[k];
        let d2 = e2.re - w2[k];
        err += grid.weight(k) * (d1 * d1 + d2 * d2);
    }
    let e3 = q.iter().zip(&table.w3).fold(cr(T::zero()), |s, (qi, w)| s + *qi * *w).re - grid.w3;
    err += e3 * e3;
    TraceRow {
        t: grid.t,
        u,
        y,
        yhat: real.output(q, u, y).re,
        state_norm: grid.state_norm(),
        err_norm: err.sqrt(),
    }
}

/// Least-squares slope of `ln ||x(t)||` over `t in [t0, t1]`.
pub fn estimate_decay<T: Real>(times: &[T], norms: &[T], window: (T, T)) -> Result<T, SimError> {
    let pts: Vec<(T, T)> = times
        .iter()
        .zip(norms)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, n)| (*t, *n))
        .collect();
    if pts.len() < 10 {
        return Err(SimError::WindowTooShort(pts.len()));
    }
    if pts.iter().any(|(_, n)| !(*n > T::zero())) {
        return Err(SimError::NonPositive);
    }
    let k = T::of_usize(pts.len());
    let (st, sl) = pts.iter().fold((T::zero(), T::zero()), |(a, b), (t, n)| (a + *t, b + n.ln()));
    let (mt, ml) = (st / k, sl / k);
    let (num, den) = pts.iter().fold((T::zero(), T::zero()), |(a, b), (t, n)| {
        let dt = *t - mt;
        (a + dt * (n.ln() - ml), b + dt * dt)
    });
    Ok(num / den)
}
