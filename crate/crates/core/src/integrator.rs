//! Fixed-step time integration (classical RK4, forward Euler reference).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::model::{rhs_unchecked, ModelParams, RhsMode, StateVec};

/// Tolerance used when checking that one time span is an integer multiple
/// of another.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Euler => "euler",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Method::Rk4),
            "euler" => Ok(Method::Euler),
            other => Err(Error::Precondition(format!(
                "unknown method `{other}` (expected `rk4` or `euler`)"
            ))),
        }
    }
}

fn default_dt() -> f64 {
    0.01
}
fn default_t_end() -> f64 {
    100.0
}
fn default_output_every() -> f64 {
    0.1
}
fn default_clamp() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationControls {
    /// Step size, days.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Horizon, days. Must be a multiple of `output_every`.
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Output cadence, days. Must be a multiple of `dt`.
    #[serde(default = "default_output_every")]
    pub output_every: f64,
    #[serde(default)]
    pub method: Method,
    /// Clamp negative components to zero after every full step.
    #[serde(default = "default_clamp")]
    pub clamp_negatives: bool,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            t_end: default_t_end(),
            output_every: default_output_every(),
            method: Method::Rk4,
            clamp_negatives: true,
        }
    }
}

/// `Some(k)` when `span` is within [`GRID_TOLERANCE`] of `k * unit`.
fn integer_ratio(span: f64, unit: f64) -> Option<u64> {
    let k = (span / unit).round();
    if k >= 1.0 && (span - k * unit).abs() <= GRID_TOLERANCE {
        Some(k as u64)
    } else {
        None
    }
}

impl IntegrationControls {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(Violation::new("dt", format!("{} must be finite and > 0", self.dt)));
            return out;
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            out.push(Violation::new(
                "t_end",
                format!("{} must be finite and >= dt ({})", self.t_end, self.dt),
            ));
        }
        if !(self.output_every.is_finite() && self.output_every >= self.dt) {
            out.push(Violation::new(
                "output_every",
                format!("{} must be >= dt ({})", self.output_every, self.dt),
            ));
        } else {
            if integer_ratio(self.output_every, self.dt).is_none() {
                out.push(Violation::new(
                    "output_every",
                    format!("{} is not an integer multiple of dt ({})", self.output_every, self.dt),
                ));
            }
            if self.t_end.is_finite() && integer_ratio(self.t_end, self.output_every).is_none() {
                out.push(Violation::new(
                    "t_end",
                    format!(
                        "{} is not an integer multiple of output_every ({})",
                        self.t_end, self.output_every
                    ),
                ));
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidControls(v))
        }
    }

    /// Integration steps between consecutive output samples.
    pub fn steps_per_output(&self) -> u64 {
        integer_ratio(self.output_every, self.dt).unwrap_or(1)
    }

    /// Number of output intervals; the trajectory has one more sample.
    pub fn output_intervals(&self) -> u64 {
        integer_ratio(self.t_end, self.output_every).unwrap_or(0)
    }

    /// The output time grid `0, h, 2h, ..., t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        (0..=self.output_intervals())
            .map(|j| j as f64 * self.output_every)
            .collect()
    }
}

/// Time series of states on a uniform output grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    pub mode: RhsMode,
    pub params: ModelParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&StateVec> {
        self.states.last()
    }

    /// Largest `|sum(state) - n|` over all samples.
    pub fn max_mass_error(&self) -> f64 {
        self.states
            .iter()
            .map(|x| (x.sum() - self.params.n).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_component(&self) -> f64 {
        self.states
            .iter()
            .map(StateVec::min_component)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn ia(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|x| x.ia)
    }
}

/// A one-off transfer of `amount` nodes from `S` to `I_B` at `time`.
///
/// Realizes the delayed launch of refutation: `I_B` is held at zero until
/// the first integration step boundary at or after `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub time: f64,
    pub amount: f64,
}

impl Injection {
    pub(crate) fn apply(&self, x: StateVec) -> StateVec {
        let moved = self.amount.min(x.s).max(0.0);
        StateVec {
            s: x.s - moved,
            ib: x.ib + moved,
            ..x
        }
    }
}

#[inline]
fn step_unchecked(x: &StateVec, p: &ModelParams, mode: RhsMode, dt: f64, method: Method) -> StateVec {
    let f = |y: &StateVec| rhs_unchecked(y, p, mode);
    match method {
        Method::Euler => *x + dt * f(x),
        Method::Rk4 => {
            let k1 = f(x);
            let k2 = f(&(*x + (0.5 * dt) * k1));
            let k3 = f(&(*x + (0.5 * dt) * k2));
            let k4 = f(&(*x + dt * k3));
            *x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        }
    }
}

/// Advances `state` by one step of `dt` days.
pub fn step(state: &StateVec, params: &ModelParams, mode: RhsMode, dt: f64, method: Method) -> Result<StateVec> {
    params.check()?;
    state.check()?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidControls(vec![Violation::new(
            "dt",
            format!("{dt} must be finite and > 0"),
        )]));
    }
    let next = step_unchecked(state, params, mode, dt, method);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Diverged { time: dt })
    }
}

/// Integrates from `initial` over `[0, controls.t_end]`.
pub fn integrate(
    initial: &StateVec,
    params: &ModelParams,
    mode: RhsMode,
    controls: &IntegrationControls,
) -> Result<Trajectory> {
    integrate_with_injection(initial, params, mode, controls, None)
}

/// [`integrate`] with an optional scheduled `S -> I_B` transfer.
///
/// When the transfer falls on an output time, the emitted sample is the
/// post-transfer state.
pub fn integrate_with_injection(
    initial: &StateVec,
    params: &ModelParams,
    mode: RhsMode,
    controls: &IntegrationControls,
    injection: Option<Injection>,
) -> Result<Trajectory> {
    params.check()?;
    initial.check()?;
    controls.check()?;
    if let Some(inj) = injection {
        if !(inj.time.is_finite() && inj.time >= 0.0 && inj.amount.is_finite() && inj.amount >= 0.0) {
            return Err(Error::Precondition(format!(
                "injection needs finite time >= 0 and amount >= 0, got {inj:?}"
            )));
        }
    }

    let dt = controls.dt;
    let per_output = controls.steps_per_output();
    let intervals = controls.output_intervals();
    let total_steps = per_output * intervals;
    let inject_step = injection.map(|inj| (inj.time / dt - GRID_TOLERANCE).ceil().max(0.0) as u64);

    let mut times = Vec::with_capacity(intervals as usize + 1);
    let mut states = Vec::with_capacity(intervals as usize + 1);

    let mut x = *initial;
    if let (Some(inj), Some(0)) = (injection, inject_step) {
        x = inj.apply(x);
    }
    times.push(0.0);
    states.push(x);

    for k in 1..=total_steps {
        x = step_unchecked(&x, params, mode, dt, controls.method);
        let t = k as f64 * dt;
        if !x.is_finite() {
            return Err(Error::Diverged { time: t });
        }
        if controls.clamp_negatives {
            x = x.clamp_non_negative();
        }
        if inject_step == Some(k) {
            x = injection.expect("inject_step implies injection").apply(x);
        }
        if k % per_output == 0 {
            times.push((k / per_output) as f64 * controls.output_every);
            states.push(x);
        }
    }

    Ok(Trajectory {
        times,
        states,
        mode,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rhs;

    fn params() -> ModelParams {
        ModelParams {
            b1: 0.5,
            b2: 0.9,
            o: 0.3,
            w1: 8.0,
            w2: 13.0,
            w3: 7.0,
            r1: 0.1,
            r2: 0.1,
            n: 10_000.0,
        }
    }

    #[test]
    fn euler_step_is_definition() {
        let p = params();
        let x = StateVec::new(9000.0, 600.0, 300.0, 100.0);
        let dt = 0.013;
        let got = step(&x, &p, RhsMode::Conserving, dt, Method::Euler).unwrap();
        let d = rhs(&x, &p, RhsMode::Conserving).unwrap();
        assert_eq!(got, x + dt * d);
    }

    #[test]
    fn step_is_consistent_as_dt_vanishes() {
        let p = params();
        let x = StateVec::new(9000.0, 600.0, 300.0, 100.0);
        let d = rhs(&x, &p, RhsMode::Conserving).unwrap();
        let norm = |v: StateVec| v.to_array().iter().map(|c| c * c).sum::<f64>().sqrt();
        let dt = 1e-6;
        for method in [Method::Rk4, Method::Euler] {
            let y = step(&x, &p, RhsMode::Conserving, dt, method).unwrap();
            let ratio = norm(y - x) / dt / norm(d);
            assert!((ratio - 1.0).abs() < 1e-3, "{method}: {ratio}");
        }
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let mut p = params();
        p.b1 = 0.0;
        p.b2 = 0.0;
        p.o = 0.0;
        p.r1 = 0.3;
        p.r2 = 0.7;
        let x = StateVec::new(5000.0, 3000.0, 2000.0, 0.0);
        for dt in [0.1, 0.05, 0.01] {
            let y = step(&x, &p, RhsMode::Conserving, dt, Method::Rk4).unwrap();
            for (got, start, rate) in [(y.ia, x.ia, p.r1), (y.ib, x.ib, p.r2)] {
                let exact = start * (-rate * dt).exp();
                // Leading local error of RK4 on y' = -r y is (r dt)^5 / 120.
                let bound = 1.01 * start * (rate * dt).powi(5) / 120.0;
                assert!((got - exact).abs() <= bound + 1e-12, "dt={dt}");
            }
            assert_eq!(y.s, x.s);
        }
    }

    #[test]
    fn step_rejects_bad_dt() {
        let x = StateVec::new(1.0, 0.0, 0.0, 0.0);
        assert!(step(&x, &params(), RhsMode::Conserving, 0.0, Method::Rk4).is_err());
    }

    #[test]
    fn controls_validation() {
        assert!(IntegrationControls::default().check().is_ok());
        let c = IntegrationControls {
            output_every: 0.015,
            ..Default::default()
        };
        assert!(c.check().is_err());
        let c = IntegrationControls {
            t_end: 10.05,
            ..Default::default()
        };
        assert!(c.check().is_err());
        let c = IntegrationControls {
            dt: -1.0,
            ..Default::default()
        };
        assert!(c.check().is_err());
        let c = IntegrationControls {
            dt: 1e-5,
            output_every: 0.5,
            t_end: 100.0,
            ..Default::default()
        };
        assert_eq!(c.steps_per_output(), 50_000);
        assert_eq!(c.output_intervals(), 200);
    }

    #[test]
    fn fixed_point_gives_constant_trajectory() {
        let p = params();
        let x0 = StateVec::new(p.n, 0.0, 0.0, 0.0);
        let traj = integrate(&x0, &p, RhsMode::Conserving, &IntegrationControls::default()).unwrap();
        assert_eq!(traj.len(), 1001);
        assert!(traj.states.iter().all(|x| *x == x0));
    }

    #[test]
    fn grid_is_uniform_from_zero() {
        let p = params();
        let x0 = StateVec::new(9850.0, 100.0, 50.0, 0.0);
        let c = IntegrationControls {
            output_every: 0.5,
            t_end: 20.0,
            ..Default::default()
        };
        let traj = integrate(&x0, &p, RhsMode::Conserving, &c).unwrap();
        assert_eq!(traj.times.len(), 41);
        assert_eq!(traj.times[0], 0.0);
        for (j, t) in traj.times.iter().enumerate() {
            assert_eq!(*t, j as f64 * 0.5);
        }
        assert_eq!(traj.states.len(), traj.times.len());
    }

    #[test]
    fn divergence_is_reported_with_time() {
        let mut p = params();
        p.w1 = 1e300;
        p.b1 = 1.0;
        let x0 = StateVec::new(9850.0, 100.0, 50.0, 0.0);
        let c = IntegrationControls {
            clamp_negatives: false,
            ..Default::default()
        };
        match integrate(&x0, &p, RhsMode::Conserving, &c) {
            Err(Error::Diverged { time }) => assert!(time > 0.0 && time <= c.t_end),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn injection_holds_ib_at_zero_until_launch() {
        let p = params();
        let x0 = StateVec::new(9900.0, 100.0, 0.0, 0.0);
        let c = IntegrationControls {
            output_every: 0.5,
            t_end: 10.0,
            ..Default::default()
        };
        let inj = Injection {
            time: 2.0,
            amount: 50.0,
        };
        let traj = integrate_with_injection(&x0, &p, RhsMode::Conserving, &c, Some(inj)).unwrap();
        for (t, x) in traj.times.iter().zip(&traj.states) {
            if *t < 2.0 {
                assert_eq!(x.ib, 0.0);
            } else if *t == 2.0 {
                assert!(x.ib >= 50.0);
            }
        }
        assert!(traj.max_mass_error() < 1e-9 * p.n);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let p = params();
        let x0 = StateVec::new(9850.0, 100.0, 50.0, 0.0);
        let c = IntegrationControls::default();
        let a = integrate(&x0, &p, RhsMode::Conserving, &c).unwrap();
        let b = integrate(&x0, &p, RhsMode::Conserving, &c).unwrap();
        assert_eq!(a, b);
    }
}
