//! Dormand–Prince 5(4) with a PI step-size controller and the standard quartic dense output.

use serde::{Deserialize, Serialize};

use super::{DynamicsError, Params, State};

const C2: f64 = 1.0 / 5.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const _: () = assert!(C2 == A21);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Mixed absolute/relative local error tolerance, in `[1e-13, 1e-3]`.
    pub tol: f64,
    pub escape_radius: f64,
    /// `‖F‖` below which the trajectory is considered to have reached a fixed point.
    pub fixed_point_eps: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tol: 1e-10,
            escape_radius: 1e4,
            fixed_point_eps: 1e-12,
            min_step: 1e-14,
            max_steps: 20_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Result<Self, DynamicsError> {
        let cfg = IntegratorConfig {
            tol,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(1e-13..=1e-3).contains(&self.tol) {
            return Err(DynamicsError::Tolerance(self.tol));
        }
        Ok(())
    }
}

/// Continuous extension of one accepted step, valid for `t ∈ [t0, t0 + h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSegment {
    pub t0: f64,
    /// Signed step; negative for backward integration.
    pub h: f64,
    rcont: [State; 5],
}

impl DenseSegment {
    fn constant(t0: f64, h: f64, s: State) -> Self {
        DenseSegment {
            t0,
            h,
            rcont: [s, State::zeros(), State::zeros(), State::zeros(), State::zeros()],
        }
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> State {
        self.rcont[0]
    }

    pub fn end(&self) -> State {
        self.rcont[0] + self.rcont[1]
    }

    /// State at the normalized position `θ ∈ [0, 1]`.
    pub fn at_theta(&self, th: f64) -> State {
        let [r1, r2, r3, r4, r5] = &self.rcont;
        let th1 = 1.0 - th;
        r1 + (r2 + (r3 + (r4 + r5 * th1) * th) * th1) * th
    }

    /// `d/dθ` of [`DenseSegment::at_theta`]; divide by `h` for the time derivative.
    pub fn dtheta(&self, th: f64) -> State {
        let [_, r2, r3, r4, r5] = &self.rcont;
        let th1 = 1.0 - th;
        let a = r4 + r5 * th1;
        let da = -r5;
        let b = r3 + a * th;
        let db = a + da * th;
        let c = r2 + b * th1;
        let dc = -b + db * th1;
        c + dc * th
    }

    pub fn at(&self, t: f64) -> State {
        self.at_theta(self.theta(t))
    }

    pub fn theta(&self, t: f64) -> f64 {
        if self.h == 0.0 {
            0.0
        } else {
            (t - self.t0) / self.h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the requested end time.
    TimeLimit,
    /// Stopped by a caller-side event.
    Event,
    Escape,
    FixedPoint,
}

/// Accepted steps of one integration run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub segments: Vec<DenseSegment>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn start(&self) -> State {
        self.states[0]
    }

    pub fn end(&self) -> State {
        *self.states.last().expect("trajectory is never empty")
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Dense-output evaluation at any `t` inside the integrated range.
    pub fn eval(&self, t: f64) -> Option<State> {
        let forward = self.end_time() >= self.times[0];
        let idx = if forward {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        if idx == 0 {
            return (t == self.times[0]).then(|| self.states[0]);
        }
        let seg = self.segments.get(idx - 1).or_else(|| self.segments.last())?;
        let th = seg.theta(t);
        (-1e-12..=1.0 + 1e-12).contains(&th).then(|| seg.at_theta(th))
    }

    /// Step endpoints with `per_step − 1` dense samples inserted inside every step.
    pub fn resampled(&self, per_step: usize) -> Vec<State> {
        let per_step = per_step.max(1);
        let mut out = Vec::with_capacity(self.segments.len() * per_step + 1);
        out.push(self.states[0]);
        for seg in &self.segments {
            for k in 1..=per_step {
                if k == per_step {
                    out.push(seg.end());
                } else {
                    out.push(seg.at_theta(k as f64 / per_step as f64));
                }
            }
        }
        out
    }
}

/// Step-by-step driver; callers that watch for events use it directly.
pub struct Stepper<'a> {
    p: &'a Params,
    cfg: IntegratorConfig,
    t: f64,
    y: State,
    k1: State,
    h: f64,
    dir: f64,
    facold: f64,
    steps: usize,
}

fn err_norm(y0: &State, y1: &State, e: &State, tol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        let sk = tol + tol * y0[i].abs().max(y1[i].abs());
        acc += (e[i] / sk).powi(2);
    }
    (acc / 3.0).sqrt()
}

impl<'a> Stepper<'a> {
    /// `direction` is `+1.0` for forward and `-1.0` for backward time.
    pub fn new(p: &'a Params, s0: State, t0: f64, direction: f64, cfg: IntegratorConfig) -> Self {
        let dir = if direction < 0.0 { -1.0 } else { 1.0 };
        let k1 = p.field(&s0);
        let mut st = Stepper {
            p,
            cfg,
            t: t0,
            y: s0,
            k1,
            h: 0.0,
            dir,
            facold: 1e-4,
            steps: 0,
        };
        st.h = st.initial_step();
        st
    }

    fn initial_step(&self) -> f64 {
        let tol = self.cfg.tol;
        let sk = self.y.map(|v| tol + tol * v.abs());
        let d0 = (self.y.component_div(&sk).norm_squared() / 3.0).sqrt();
        let d1 = (self.k1.component_div(&sk).norm_squared() / 3.0).sqrt();
        let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(1.0);
        let y1 = self.y + self.k1 * (self.dir * h0);
        let f1 = self.p.field(&y1);
        let d2 = ((f1 - self.k1).component_div(&sk).norm_squared() / 3.0).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        self.dir * (100.0 * h0).min(h1).min(1.0)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> State {
        self.y
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Takes one accepted step, never passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<DenseSegment, DynamicsError> {
        let p = self.p;
        let tol = self.cfg.tol;
        let mut last_reject = false;
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(DynamicsError::TooManySteps(self.cfg.max_steps));
            }
            let remaining = t_end - self.t;
            let mut h = self.h;
            let clamped = h.abs() >= remaining.abs();
            if clamped {
                h = remaining;
            }
            if h.abs() < self.cfg.min_step && !clamped {
                return Err(DynamicsError::StepUnderflow { t: self.t, h });
            }
            let y = self.y;
            let k1 = self.k1;
            let k2 = p.field(&(y + k1 * (h * A21)));
            let k3 = p.field(&(y + (k1 * A31 + k2 * A32) * h));
            let k4 = p.field(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
            let k5 = p.field(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
            let k6 = p.field(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
            let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = p.field(&y1);
            let e = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            self.steps += 1;
            if !(y1.iter().all(|v| v.is_finite()) && e.iter().all(|v| v.is_finite())) {
                // shrink hard and retry; a genuine blow-up ends in underflow
                self.h = h * 0.1;
                last_reject = true;
                continue;
            }
            let err = err_norm(&y, &y1, &e, tol);
            let expo1 = 0.2 - 0.04 * 0.75;
            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let fac = (fac11 / self.facold.powf(0.04) / 0.9).clamp(0.2, 10.0);
                let mut hnew = h / fac;
                if last_reject {
                    hnew = if self.dir > 0.0 { hnew.min(h.abs()) } else { hnew.max(-h.abs()) };
                }
                self.facold = err.max(1e-4);
                let ydiff = y1 - y;
                let bspl = k1 * h - ydiff;
                let rcont = [
                    y,
                    ydiff,
                    bspl,
                    ydiff - k7 * h - bspl,
                    (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
                ];
                let seg = DenseSegment { t0: self.t, h, rcont };
                self.t = if clamped { t_end } else { self.t + h };
                self.y = y1;
                self.k1 = k7;
                if !clamped {
                    self.h = hnew;
                }
                return Ok(seg);
            } else {
                self.h = h / (fac11 / 0.9).min(10.0);
                last_reject = true;
            }
        }
    }
}

/// Adaptive integration from `s0` at `t = 0` to `t_end` (negative for backward time).
///
/// Stops early on escape beyond `cfg.escape_radius` or when `‖F‖ < cfg.fixed_point_eps`.
pub fn integrate(
    p: &Params,
    s0: State,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    if !s0.iter().all(|v| v.is_finite()) {
        return Err(DynamicsError::NonFiniteState(0.0));
    }
    if p.field(&s0).norm() < cfg.fixed_point_eps {
        return Ok(Trajectory {
            times: vec![0.0, t_end],
            states: vec![s0, s0],
            segments: vec![DenseSegment::constant(0.0, t_end, s0)],
            termination: Termination::FixedPoint,
        });
    }
    let mut stepper = Stepper::new(p, s0, 0.0, t_end.signum(), *cfg);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![s0],
        segments: Vec::new(),
        termination: Termination::TimeLimit,
    };
    while stepper.time() != t_end {
        let seg = stepper.step(t_end)?;
        traj.times.push(stepper.time());
        traj.states.push(stepper.state());
        traj.segments.push(seg);
        let y = stepper.state();
        if y.norm() > cfg.escape_radius {
            traj.termination = Termination::Escape;
            break;
        }
        if p.field(&y).norm() < cfg.fixed_point_eps {
            traj.termination = Termination::FixedPoint;
            break;
        }
    }
    Ok(traj)
}

/// Classical fixed-step Dormand–Prince (fifth-order solution), used for convergence studies.
pub fn integrate_fixed_step(
    p: &Params,
    s0: State,
    t_end: f64,
    n_steps: usize,
) -> Result<State, DynamicsError> {
    let h = t_end / n_steps as f64;
    let mut y = s0;
    for i in 0..n_steps {
        let k1 = p.field(&y);
        let k2 = p.field(&(y + k1 * (h * A21)));
        let k3 = p.field(&(y + (k1 * A31 + k2 * A32) * h));
        let k4 = p.field(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = p.field(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
        let k6 = p.field(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
        y += (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFiniteState(h * (i + 1) as f64));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn classic() -> Params {
        Params::new(0.2, 0.035131, 5.69297).unwrap()
    }

    #[test]
    fn fixed_point_gives_constant_trajectory() {
        let p = classic();
        let cfg = IntegratorConfig::default();
        let tr = integrate(&p, State::zeros(), 10.0, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::FixedPoint);
        assert!(tr.states.iter().all(|s| *s == State::zeros()));
        assert_eq!(tr.eval(3.3).unwrap(), State::zeros());
    }

    #[test]
    fn times_strictly_monotone() {
        let p = classic();
        let cfg = IntegratorConfig::with_tol(1e-9).unwrap();
        let fwd = integrate(&p, Vector3::new(1.0, 1.0, 0.0), 20.0, &cfg).unwrap();
        assert!(fwd.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(fwd.end_time(), 20.0);
        let bwd = integrate(&p, Vector3::new(1.0, 1.0, 0.0), -2.0, &cfg).unwrap();
        assert!(bwd.times.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn dense_output_interpolates_endpoints_and_midpoints() {
        let p = classic();
        let cfg = IntegratorConfig::with_tol(1e-8).unwrap();
        let tr = integrate(&p, Vector3::new(-3.0, 2.0, 0.1), 5.0, &cfg).unwrap();
        for (i, seg) in tr.segments.iter().enumerate() {
            assert!((seg.at_theta(0.0) - tr.states[i]).norm() < 1e-14);
            assert!((seg.at_theta(1.0) - tr.states[i + 1]).norm() < 1e-12);
        }
        // midpoint of a step against a tight restart from the step start
        let fine = IntegratorConfig::with_tol(1e-13).unwrap();
        let seg = tr.segments[10];
        let tm = seg.t0 + 0.5 * seg.h;
        let reference = integrate(&p, seg.start(), 0.5 * seg.h, &fine).unwrap().end();
        assert!((seg.at(tm) - reference).norm() < 1e-6, "{}", (seg.at(tm) - reference).norm());
        // derivative of the interpolant agrees with the field
        let d = seg.dtheta(0.5) / seg.h;
        assert!((d - p.field(&seg.at_theta(0.5))).norm() < 1e-4);
    }

    #[test]
    fn backward_integration_recovers_start() {
        // backward time expands the strongly contracting z-direction, so the horizon is short
        let p = classic();
        let tol = 1e-11;
        let cfg = IntegratorConfig::with_tol(tol).unwrap();
        let s0 = Vector3::new(-4.0, 1.0, 0.02);
        let fwd = integrate(&p, s0, 0.5, &cfg).unwrap();
        let back = integrate(&p, fwd.end(), -0.5, &cfg).unwrap();
        assert!((back.end() - s0).norm() <= 100.0 * tol * (1.0 + s0.norm()));
    }

    #[test]
    fn fixed_step_order_is_at_least_four() {
        let p = classic();
        let s0 = Vector3::new(-5.0, 2.0, 0.03);
        let ya = integrate_fixed_step(&p, s0, 5.0, 200).unwrap();
        let yb = integrate_fixed_step(&p, s0, 5.0, 400).unwrap();
        let yc = integrate_fixed_step(&p, s0, 5.0, 800).unwrap();
        let order = ((ya - yb).norm() / (yb - yc).norm()).log2();
        assert!(order >= 4.0, "observed order {order}");
    }

    #[test]
    fn tolerance_halving_tracks_order() {
        // error against a tight reference shrinks as tol shrinks
        let p = classic();
        let s0 = Vector3::new(-5.0, 2.0, 0.03);
        let reference = integrate(&p, s0, 10.0, &IntegratorConfig::with_tol(1e-13).unwrap())
            .unwrap()
            .end();
        let err = |tol: f64| {
            let cfg = IntegratorConfig::with_tol(tol).unwrap();
            (integrate(&p, s0, 10.0, &cfg).unwrap().end() - reference).norm()
        };
        let e1 = err(1e-6);
        let e2 = err(1e-9);
        assert!(e2 < e1 / 50.0, "{e1:e} {e2:e}");
    }

    #[test]
    fn linearized_flow_near_origin() {
        let p = classic();
        let j = p.jacobian(&State::zeros());
        let cfg = IntegratorConfig::with_tol(1e-13).unwrap();
        for scale in [1e-5, 1e-6] {
            let d = Vector3::new(0.3, -0.5, 0.8) * scale;
            let t = 1.0;
            let lin = (j * t).exp() * d;
            let end = integrate(&p, d, t, &cfg).unwrap().end();
            // nonlinear remainder is O(|d|²)
            assert!((end - lin).norm() <= 10.0 * scale * scale + 1e-15);
        }
        let _: Matrix3<f64> = j;
    }

    #[test]
    fn escape_and_tolerance_errors() {
        let p = classic();
        let cfg = IntegratorConfig::with_tol(1e-8).unwrap();
        // backward along the stable direction blows up in finite time
        let tr = integrate(&p, Vector3::new(-1e-3, 0.0, -5e-3), -50.0, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::Escape);
        assert!(IntegratorConfig::with_tol(1e-2).is_err());
        assert!(IntegratorConfig::with_tol(1e-14).is_err());
    }
}
