//! Outcome metrics and one-at-a-time sensitivity sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::{rumor_inflow, ModelParams};
use crate::scenario::Scenario;

/// Prevalence threshold, as a fraction of `n`, above which a rumor counts
/// as ongoing.
pub const DEFAULT_THRESHOLD_FRAC: f64 = 0.005;

/// Relative tolerance for [`classify_direction`].
pub const DEFAULT_DIRECTION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimMetrics {
    /// Maximum of `I_A`.
    pub peak_ia: f64,
    /// Earliest time at which `peak_ia` is attained.
    pub peak_time: f64,
    /// Longest contiguous span with `I_A >= threshold_frac * n`, days.
    pub duration: f64,
    /// Cumulative rumor adoptions, `∫ b1 (w1/n) I_A S dt`.
    pub spread_scale: f64,
    /// `R` at the horizon.
    pub final_r: f64,
}

/// Computes [`SimMetrics`] from an output trajectory.
///
/// `spread_scale` uses the trapezoid rule on the output grid. `duration`
/// locates threshold crossings by linear interpolation between samples.
pub fn compute_metrics(traj: &Trajectory, threshold_frac: f64) -> Result<SimMetrics> {
    if traj.is_empty() || traj.states.len() != traj.times.len() {
        return Err(Error::EmptyTrajectory);
    }
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::Precondition(format!(
            "threshold_frac {threshold_frac} must lie in (0, 1)"
        )));
    }

    let (mut peak_ia, mut peak_time) = (traj.states[0].ia, traj.times[0]);
    for (t, x) in traj.times.iter().zip(&traj.states).skip(1) {
        if x.ia > peak_ia {
            peak_ia = x.ia;
            peak_time = *t;
        }
    }

    let spread_scale = trapezoid(traj, &traj.params);
    let duration = longest_run_above(
        &traj.times,
        &traj.ia().collect::<Vec<_>>(),
        threshold_frac * traj.params.n,
    );
    let final_r = traj.states.last().map(|x| x.r).unwrap_or(0.0);

    Ok(SimMetrics {
        peak_ia,
        peak_time,
        duration,
        spread_scale,
        final_r,
    })
}

fn trapezoid(traj: &Trajectory, p: &ModelParams) -> f64 {
    traj.times
        .windows(2)
        .zip(traj.states.windows(2))
        .map(|(t, x)| 0.5 * (t[1] - t[0]) * (rumor_inflow(&x[0], p) + rumor_inflow(&x[1], p)))
        .sum()
}

/// Time where the linear interpolant between `(t0, v0)` and `(t1, v1)`
/// equals `level`. Requires `v0 != v1`.
fn crossing(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    t0 + (level - v0) / (v1 - v0) * (t1 - t0)
}

fn longest_run_above(times: &[f64], values: &[f64], level: f64) -> f64 {
    let last = values.len() - 1;
    let mut best = 0.0f64;
    let mut i = 0;
    while i <= last {
        if values[i] < level {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < last && values[j + 1] >= level {
            j += 1;
        }
        let start = if i == 0 {
            times[0]
        } else {
            crossing(times[i - 1], values[i - 1], times[i], values[i], level)
        };
        let end = if j == last {
            times[last]
        } else {
            crossing(times[j], values[j], times[j + 1], values[j + 1], level)
        };
        best = best.max(end - start);
        i = j + 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Increasing,
    Decreasing,
    NonMonotone,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increasing => "increasing",
            Direction::Decreasing => "decreasing",
            Direction::NonMonotone => "non-monotone",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Monotonic classification with relative tolerance `eps`.
///
/// Increasing when every consecutive delta is `>= -eps * max|v|`,
/// decreasing symmetrically. Fewer than two values, or a sequence flat
/// within tolerance, is degenerate and reported as non-monotone.
pub fn classify_direction(values: &[f64], eps: f64) -> Direction {
    if values.len() < 2 {
        return Direction::NonMonotone;
    }
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = eps * scale;
    let deltas = || values.windows(2).map(|w| w[1] - w[0]);
    let up = deltas().all(|d| d >= -tol);
    let down = deltas().all(|d| d <= tol);
    match (up, down) {
        (true, false) => Direction::Increasing,
        (false, true) => Direction::Decreasing,
        _ => Direction::NonMonotone,
    }
}

/// Mean `|Δ|` over the first half of the consecutive deltas divided by the
/// mean over the second half. `None` with fewer than two deltas or when
/// both halves are flat.
pub fn early_late_ratio(values: &[f64]) -> Option<f64> {
    let deltas: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    if deltas.len() < 2 {
        return None;
    }
    let (early, late) = deltas.split_at(deltas.len() / 2);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (e, l) = (mean(early), mean(late));
    if e == 0.0 && l == 0.0 {
        None
    } else {
        Some(e / l)
    }
}

/// Mean `|Δ|` per grid step.
pub fn mean_abs_step(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (values.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loading {
    /// Early/late ratio above 2: most of the change happens at low values.
    FrontLoaded,
    /// Ratio below 0.5.
    BackLoaded,
    Even,
}

impl Loading {
    pub fn from_ratio(ratio: Option<f64>) -> Self {
        match ratio {
            Some(r) if r > 2.0 => Loading::FrontLoaded,
            Some(r) if r < 0.5 => Loading::BackLoaded,
            _ => Loading::Even,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Loading::FrontLoaded => "front-loaded",
            Loading::BackLoaded => "back-loaded",
            Loading::Even => "even",
        }
    }
}

/// The six adjustable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    B1,
    B2,
    O,
    W1,
    W2,
    W3,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::B1,
        SweepParam::B2,
        SweepParam::O,
        SweepParam::W1,
        SweepParam::W2,
        SweepParam::W3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::B1 => "b1",
            SweepParam::B2 => "b2",
            SweepParam::O => "o",
            SweepParam::W1 => "w1",
            SweepParam::W2 => "w2",
            SweepParam::W3 => "w3",
        }
    }

    /// Fractions sweep `0.0, 0.1, ..., 1.0`; contact weights sweep
    /// `0, 1, ..., 16` contacts per day.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepParam::B1 | SweepParam::B2 | SweepParam::O => (0..=10).map(|i| i as f64 / 10.0).collect(),
            SweepParam::W1 | SweepParam::W2 | SweepParam::W3 => (0..=16).map(f64::from).collect(),
        }
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            SweepParam::B1 => p.b1,
            SweepParam::B2 => p.b2,
            SweepParam::O => p.o,
            SweepParam::W1 => p.w1,
            SweepParam::W2 => p.w2,
            SweepParam::W3 => p.w3,
        }
    }

    pub fn set(self, p: &mut ModelParams, value: f64) {
        match self {
            SweepParam::B1 => p.b1 = value,
            SweepParam::B2 => p.b2 = value,
            SweepParam::O => p.o = value,
            SweepParam::W1 => p.w1 = value,
            SweepParam::W2 => p.w2 = value,
            SweepParam::W3 => p.w3 = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b1" => Ok(SweepParam::B1),
            "b2" => Ok(SweepParam::B2),
            "o" => Ok(SweepParam::O),
            "w1" => Ok(SweepParam::W1),
            "w2" => Ok(SweepParam::W2),
            "w3" => Ok(SweepParam::W3),
            "r1" | "r2" | "n" => Err(Error::FixedParameter(s.to_string())),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    PeakIa,
    PeakTime,
    Duration,
    SpreadScale,
    FinalR,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::PeakIa,
        Metric::PeakTime,
        Metric::Duration,
        Metric::SpreadScale,
        Metric::FinalR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::PeakIa => "peak_ia",
            Metric::PeakTime => "peak_time",
            Metric::Duration => "duration",
            Metric::SpreadScale => "spread_scale",
            Metric::FinalR => "final_r",
        }
    }

    pub fn of(self, m: &SimMetrics) -> f64 {
        match self {
            Metric::PeakIa => m.peak_ia,
            Metric::PeakTime => m.peak_time,
            Metric::Duration => m.duration,
            Metric::SpreadScale => m.spread_scale,
            Metric::FinalR => m.final_r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionSummary {
    pub metric: Metric,
    pub direction: Direction,
    pub early_late_ratio: Option<f64>,
    pub loading: Loading,
    pub mean_abs_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub parameter: SweepParam,
    pub grid: Vec<f64>,
    pub metrics: Vec<SimMetrics>,
    /// One entry per [`Metric::ALL`], in that order.
    pub directions: Vec<DirectionSummary>,
}

impl SweepReport {
    pub fn series(&self, metric: Metric) -> Vec<f64> {
        self.metrics.iter().map(|m| metric.of(m)).collect()
    }

    pub fn direction(&self, metric: Metric) -> Direction {
        self.summary(metric).direction
    }

    pub fn summary(&self, metric: Metric) -> &DirectionSummary {
        self.directions
            .iter()
            .find(|d| d.metric == metric)
            .expect("every metric is summarized")
    }
}

/// Runs one ODE integration per grid value of `parameter`, all other
/// scenario fields held at `base`, and classifies each metric's response.
pub fn sweep(base: &Scenario, parameter: SweepParam, grid: &[f64], threshold_frac: f64) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::Precondition("sweep grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("sweep grid must be strictly increasing".into()));
    }
    let scenarios = grid
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            parameter.set(&mut s.params, v);
            s.validate().map(|_| s)
        })
        .collect::<Result<Vec<_>>>()?;

    let metrics = scenarios
        .par_iter()
        .map(|s| compute_metrics(&s.simulate()?, threshold_frac))
        .collect::<Result<Vec<_>>>()?;

    let directions = Metric::ALL
        .iter()
        .map(|&metric| {
            let values: Vec<f64> = metrics.iter().map(|m| metric.of(m)).collect();
            let ratio = early_late_ratio(&values);
            DirectionSummary {
                metric,
                direction: classify_direction(&values, DEFAULT_DIRECTION_EPS),
                early_late_ratio: ratio,
                loading: Loading::from_ratio(ratio),
                mean_abs_step: mean_abs_step(&values),
            }
        })
        .collect();

    Ok(SweepReport {
        parameter,
        grid: grid.to_vec(),
        metrics,
        directions,
    })
}
