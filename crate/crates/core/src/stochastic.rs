//! Exact event-driven simulation of the conserving dynamics on a
//! well-mixed population of discrete individuals (direct-method SSA).
//!
//! Five channels, each moving one node:
//!
//! | channel           | transition   | rate                    |
//! |-------------------|--------------|-------------------------|
//! | `RumorAdoption`   | S -> I_A     | `b1 * w1 * I_A * S / n` |
//! | `DebunkAdoption`  | S -> I_B     | `b2 * w2 * I_B * S / n` |
//! | `Replacement`     | I_A -> I_B   | `o * w3 * I_A * I_B / n`|
//! | `RumorFade`       | I_A -> R     | `r1 * I_A`              |
//! | `DebunkFade`      | I_B -> R     | `r2 * I_B`              |
//!
//! Each run draws from its own ChaCha8 stream: the ensemble seed selects
//! the key and the run index selects the stream, so parallel ensembles are
//! reproducible regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{Injection, Trajectory};
use crate::model::{ModelParams, RhsMode, StateVec};

/// Identifies the generator in run metadata.
pub const RNG_NAME: &str = "ChaCha8Rng(seed_from_u64(seed), stream = run index)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    RumorAdoption,
    DebunkAdoption,
    Replacement,
    RumorFade,
    DebunkFade,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::RumorAdoption,
        Channel::DebunkAdoption,
        Channel::Replacement,
        Channel::RumorFade,
        Channel::DebunkFade,
    ];

    /// Change in `(s, ia, ib, r)` when this channel fires.
    pub const fn stoichiometry(self) -> [i64; 4] {
        match self {
            Channel::RumorAdoption => [-1, 1, 0, 0],
            Channel::DebunkAdoption => [-1, 0, 1, 0],
            Channel::Replacement => [0, -1, 1, 0],
            Channel::RumorFade => [0, -1, 0, 1],
            Channel::DebunkFade => [0, 0, -1, 1],
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Integer compartment counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub s: u64,
    pub ia: u64,
    pub ib: u64,
    pub r: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.s + self.ia + self.ib + self.r
    }

    pub fn to_state(self) -> StateVec {
        StateVec::new(self.s as f64, self.ia as f64, self.ib as f64, self.r as f64)
    }

    /// Converts a state with integer-valued, non-negative components.
    pub fn from_state(x: &StateVec) -> Result<Self> {
        let conv = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53) {
                Ok(v as u64)
            } else {
                Err(Error::Precondition(format!(
                    "stochastic initial {name} = {v} is not a non-negative integer"
                )))
            }
        };
        Ok(Self {
            s: conv("s", x.s)?,
            ia: conv("ia", x.ia)?,
            ib: conv("ib", x.ib)?,
            r: conv("r", x.r)?,
        })
    }

    fn apply(&mut self, channel: Channel) {
        match channel {
            Channel::RumorAdoption => {
                self.s -= 1;
                self.ia += 1;
            }
            Channel::DebunkAdoption => {
                self.s -= 1;
                self.ib += 1;
            }
            Channel::Replacement => {
                self.ia -= 1;
                self.ib += 1;
            }
            Channel::RumorFade => {
                self.ia -= 1;
                self.r += 1;
            }
            Channel::DebunkFade => {
                self.ib -= 1;
                self.r += 1;
            }
        }
    }
}

/// Per-channel event rates, events per day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRates {
    pub rumor_adoption: f64,
    pub debunk_adoption: f64,
    pub replacement: f64,
    pub rumor_fade: f64,
    pub debunk_fade: f64,
}

impl EventRates {
    pub fn new(x: &Counts, p: &ModelParams) -> Self {
        let (s, ia, ib) = (x.s as f64, x.ia as f64, x.ib as f64);
        Self {
            rumor_adoption: p.b1 * p.w1 * ia * s / p.n,
            debunk_adoption: p.b2 * p.w2 * ib * s / p.n,
            replacement: p.o * p.w3 * ia * ib / p.n,
            rumor_fade: p.r1 * ia,
            debunk_fade: p.r2 * ib,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.rumor_adoption,
            self.debunk_adoption,
            self.replacement,
            self.rumor_fade,
            self.debunk_fade,
        ]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Picks the channel whose cumulative-rate bucket contains `u * total`.
    fn select(&self, u: f64) -> Channel {
        let rates = self.as_array();
        let mut target = u * self.total();
        for (i, rate) in rates.iter().enumerate() {
            if target < *rate {
                return Channel::ALL[i];
            }
            target -= rate;
        }
        // Rounding can leave `target` a hair above the last bucket.
        let last = rates.iter().rposition(|r| *r > 0.0).unwrap_or(0);
        Channel::ALL[last]
    }
}

/// Output grid and horizon for a stochastic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingControls {
    pub t_end: f64,
    pub output_every: f64,
}

impl SamplingControls {
    fn check(&self) -> Result<()> {
        if !(self.output_every.is_finite() && self.output_every > 0.0 && self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::Precondition(format!("invalid sampling controls {self:?}")));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        let intervals = (self.t_end / self.output_every + crate::integrator::GRID_TOLERANCE).floor() as u64;
        (0..=intervals).map(|j| j as f64 * self.output_every).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticRun {
    pub seed: u64,
    pub stream: u64,
    /// Sample-and-hold states on the output grid; integer-valued.
    pub trajectory: Trajectory,
    pub event_count: u64,
    /// Events fired per channel, indexed like [`Channel::ALL`].
    pub channel_counts: [u64; 5],
}

/// One exact sample path of the conserving dynamics.
///
/// The run ends at the horizon or once the total event rate is zero (and
/// no refutation launch is pending); remaining grid points hold the final
/// state.
pub fn gillespie_run(
    initial: &StateVec,
    params: &ModelParams,
    controls: &SamplingControls,
    injection: Option<Injection>,
    seed: u64,
    stream: u64,
) -> Result<StochasticRun> {
    params.check()?;
    controls.check()?;
    let mut x = Counts::from_state(initial)?;
    if (x.total() as f64 - params.n).abs() > 0.0 {
        return Err(Error::Precondition(format!(
            "initial counts sum to {} but n = {}",
            x.total(),
            params.n
        )));
    }
    let mut pending = match injection {
        Some(inj) => {
            if !(inj.time.is_finite() && inj.time >= 0.0 && inj.amount >= 0.0 && inj.amount.fract() == 0.0) {
                return Err(Error::Precondition(format!("invalid injection {inj:?}")));
            }
            Some((inj.time, inj.amount as u64))
        }
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let grid = controls.times();
    let mut states = Vec::with_capacity(grid.len());
    let mut next_sample = 0usize;
    let mut t = 0.0f64;
    let mut events = 0u64;
    let mut channel_counts = [0u64; 5];

    let inject = |x: &mut Counts, amount: u64| {
        let moved = amount.min(x.s);
        x.s -= moved;
        x.ib += moved;
    };

    if let Some((time, amount)) = pending {
        if time <= 0.0 {
            inject(&mut x, amount);
            pending = None;
        }
    }

    loop {
        let rates = EventRates::new(&x, params);
        let total = rates.total();
        let t_event = if total > 0.0 {
            let u: f64 = rng.random();
            t - (1.0 - u).ln() / total
        } else {
            f64::INFINITY
        };
        let t_next = match pending {
            Some((time, _)) => t_event.min(time),
            None => t_event,
        };

        while next_sample < grid.len() && grid[next_sample] < t_next {
            states.push(x.to_state());
            next_sample += 1;
        }
        if next_sample == grid.len() {
            break;
        }

        match pending {
            Some((time, amount)) if time <= t_event => {
                // The competing exponential clock is memoryless, so it is
                // simply redrawn after the launch.
                t = time;
                inject(&mut x, amount);
                pending = None;
            }
            _ => {
                t = t_event;
                let channel = rates.select(rng.random());
                x.apply(channel);
                events += 1;
                channel_counts[channel.index()] += 1;
            }
        }
    }

    Ok(StochasticRun {
        seed,
        stream,
        trajectory: Trajectory {
            times: grid,
            states,
            mode: RhsMode::Conserving,
            params: *params,
        },
        event_count: events,
        channel_counts,
    })
}

/// `runs` independent sample paths; run `i` uses stream `i` of `seed`.
pub fn run_ensemble(
    initial: &StateVec,
    params: &ModelParams,
    controls: &SamplingControls,
    injection: Option<Injection>,
    seed: u64,
    runs: usize,
) -> Result<Vec<StochasticRun>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|i| gillespie_run(initial, params, controls, injection, seed, i))
        .collect()
}

/// Pointwise sample mean and standard deviation per compartment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<StateVec>,
    /// Sample standard deviation (`runs - 1` denominator; zero for one run).
    pub sd: Vec<StateVec>,
    pub runs: usize,
}

impl EnsembleStats {
    /// Standard error of the mean at sample `i`, floored at `1 / runs`:
    /// the mean of integer counts over `runs` paths cannot resolve less.
    pub fn standard_error(&self, i: usize) -> StateVec {
        let runs = self.runs as f64;
        let floor = 1.0 / runs;
        self.sd[i].map(|sd| (sd / runs.sqrt()).max(floor))
    }
}

pub fn ensemble_stats(runs: &[StochasticRun]) -> Result<EnsembleStats> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Precondition("ensemble_stats needs at least one run".into()))?;
    let times = &first.trajectory.times;
    for run in runs {
        if run.trajectory.times != *times {
            return Err(Error::Precondition("runs do not share an output grid".into()));
        }
        if run.trajectory.params != first.trajectory.params {
            return Err(Error::Precondition("runs do not share parameters".into()));
        }
        if run.trajectory.states.len() != times.len() {
            return Err(Error::Precondition("run has a truncated trajectory".into()));
        }
    }
    let count = runs.len() as f64;
    let mut mean = Vec::with_capacity(times.len());
    let mut sd = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let mut acc = [0.0f64; 4];
        for run in runs {
            for (a, v) in acc.iter_mut().zip(run.trajectory.states[i].to_array()) {
                *a += v;
            }
        }
        let m = acc.map(|a| a / count);
        let mut ss = [0.0f64; 4];
        for run in runs {
            for ((s, v), mu) in ss.iter_mut().zip(run.trajectory.states[i].to_array()).zip(m) {
                *s += (v - mu) * (v - mu);
            }
        }
        let var = if runs.len() > 1 {
            ss.map(|s| s / (count - 1.0))
        } else {
            [0.0; 4]
        };
        mean.push(StateVec::from_array(m));
        sd.push(StateVec::from_array(var.map(f64::sqrt)));
    }
    Ok(EnsembleStats {
        times: times.clone(),
        mean,
        sd,
        runs: runs.len(),
    })
}

/// Agreement of an ensemble mean with a deterministic trajectory on the
/// same grid, for one compartment.
#[derive(Debug, Clone, PartialEq)]
pub struct Agreement {
    /// Fraction of grid points where `|mean - ode| <= k * SE`.
    pub fraction_within: f64,
    /// Largest `|mean - ode|`.
    pub max_abs_deviation: f64,
}

/// Compares ensemble and ODE for the compartment selected by `pick`.
pub fn agreement(
    ode: &Trajectory,
    stats: &EnsembleStats,
    k: f64,
    pick: impl Fn(&StateVec) -> f64,
) -> Result<Agreement> {
    if ode.times.len() != stats.times.len() || ode.times.iter().zip(&stats.times).any(|(a, b)| (a - b).abs() > 1e-9) {
        return Err(Error::Precondition("ODE and ensemble grids differ".into()));
    }
    let mut within = 0usize;
    let mut max_dev = 0.0f64;
    for i in 0..ode.times.len() {
        let dev = (pick(&stats.mean[i]) - pick(&ode.states[i])).abs();
        max_dev = max_dev.max(dev);
        if dev <= k * pick(&stats.standard_error(i)) {
            within += 1;
        }
    }
    Ok(Agreement {
        fraction_within: within as f64 / ode.times.len() as f64,
        max_abs_deviation: max_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: f64) -> ModelParams {
        ModelParams {
            b1: 0.3,
            b2: 0.6,
            o: 0.3,
            w1: 8.0,
            w2: 13.0,
            w3: 7.0,
            r1: 0.1,
            r2: 0.1,
            n,
        }
    }

    fn sampling() -> SamplingControls {
        SamplingControls {
            t_end: 30.0,
            output_every: 0.5,
        }
    }

    #[test]
    fn absorbing_state_fires_nothing() {
        let p = params(1000.0);
        let x0 = StateVec::new(900.0, 0.0, 0.0, 100.0);
        let run = gillespie_run(&x0, &p, &sampling(), None, 1, 0).unwrap();
        assert_eq!(run.event_count, 0);
        assert!(run.trajectory.states.iter().all(|x| *x == x0));
        assert_eq!(run.trajectory.len(), 61);
    }

    #[test]
    fn same_seed_same_run() {
        let p = params(1000.0);
        let x0 = StateVec::new(980.0, 15.0, 5.0, 0.0);
        let a = gillespie_run(&x0, &p, &sampling(), None, 42, 3).unwrap();
        let b = gillespie_run(&x0, &p, &sampling(), None, 42, 3).unwrap();
        assert_eq!(a, b);
        let c = gillespie_run(&x0, &p, &sampling(), None, 42, 4).unwrap();
        assert_ne!(a.trajectory.states, c.trajectory.states);
    }

    #[test]
    fn rejects_counts_not_summing_to_n() {
        let p = params(1000.0);
        let x0 = StateVec::new(900.0, 15.0, 5.0, 0.0);
        assert!(matches!(
            gillespie_run(&x0, &p, &sampling(), None, 1, 0),
            Err(Error::Precondition(_))
        ));
        let frac = StateVec::new(979.5, 15.5, 5.0, 0.0);
        assert!(gillespie_run(&frac, &p, &sampling(), None, 1, 0).is_err());
    }

    #[test]
    fn every_sample_is_conserving_and_r_is_monotone() {
        let p = params(2000.0);
        let x0 = StateVec::new(1970.0, 20.0, 10.0, 0.0);
        for stream in 0..20 {
            let run = gillespie_run(&x0, &p, &sampling(), None, 7, stream).unwrap();
            let mut last_r = 0.0;
            for x in &run.trajectory.states {
                assert_eq!(x.sum(), p.n);
                assert!(x.min_component() >= 0.0);
                assert!(x.r >= last_r);
                last_r = x.r;
            }
            assert_eq!(run.channel_counts.iter().sum::<u64>(), run.event_count);
        }
    }

    #[test]
    fn no_channel_moves_ib_to_ia() {
        for ch in Channel::ALL {
            let [_, dia, dib, _] = ch.stoichiometry();
            assert!(!(dia > 0 && dib < 0), "{ch:?}");
            assert_eq!(ch.stoichiometry().iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn channel_counts_match_final_state() {
        let p = params(1000.0);
        let x0 = StateVec::new(970.0, 20.0, 10.0, 0.0);
        let run = gillespie_run(&x0, &p, &sampling(), None, 11, 0).unwrap();
        let mut delta = [0i64; 4];
        for (ch, count) in Channel::ALL.iter().zip(run.channel_counts) {
            for (d, st) in delta.iter_mut().zip(ch.stoichiometry()) {
                *d += st * count as i64;
            }
        }
        // Events past the horizon are never applied.
        let last = run.trajectory.last().unwrap();
        let expected = [
            x0.s + delta[0] as f64,
            x0.ia + delta[1] as f64,
            x0.ib + delta[2] as f64,
            x0.r + delta[3] as f64,
        ];
        assert_eq!(last.to_array(), expected);
    }

    #[test]
    fn delayed_launch_injects_at_the_scheduled_time() {
        let p = params(1000.0);
        let x0 = StateVec::new(990.0, 10.0, 0.0, 0.0);
        let inj = Injection { time: 3.0, amount: 5.0 };
        let run = gillespie_run(&x0, &p, &sampling(), Some(inj), 5, 0).unwrap();
        for (t, x) in run.trajectory.times.iter().zip(&run.trajectory.states) {
            if *t < 3.0 {
                assert_eq!(x.ib, 0.0);
            }
            assert_eq!(x.sum(), p.n);
        }
        assert!(
            run.channel_counts[Channel::DebunkAdoption as usize] + run.channel_counts[Channel::DebunkFade as usize] > 0
        );
    }

    #[test]
    fn stats_of_single_and_identical_runs() {
        let p = params(1000.0);
        let x0 = StateVec::new(970.0, 20.0, 10.0, 0.0);
        let run = gillespie_run(&x0, &p, &sampling(), None, 3, 0).unwrap();
        let one = ensemble_stats(std::slice::from_ref(&run)).unwrap();
        assert_eq!(one.mean, run.trajectory.states);
        assert!(one.sd.iter().all(|s| *s == StateVec::ZERO));

        let two = ensemble_stats(&[run.clone(), run.clone()]).unwrap();
        assert!(two.sd.iter().all(|s| *s == StateVec::ZERO));
        assert_eq!(two.mean.len(), run.trajectory.len());
    }

    #[test]
    fn stats_reject_mismatched_grids() {
        let p = params(1000.0);
        let x0 = StateVec::new(970.0, 20.0, 10.0, 0.0);
        let a = gillespie_run(&x0, &p, &sampling(), None, 3, 0).unwrap();
        let short = SamplingControls {
            t_end: 10.0,
            output_every: 0.5,
        };
        let b = gillespie_run(&x0, &p, &short, None, 3, 0).unwrap();
        assert!(ensemble_stats(&[a, b]).is_err());
        assert!(ensemble_stats(&[]).is_err());
    }

    #[test]
    fn channel_selection_follows_cumulative_rates() {
        let rates = EventRates {
            rumor_adoption: 1.0,
            debunk_adoption: 0.0,
            replacement: 2.0,
            rumor_fade: 1.0,
            debunk_fade: 0.0,
        };
        assert_eq!(rates.select(0.0), Channel::RumorAdoption);
        assert_eq!(rates.select(0.3), Channel::Replacement);
        assert_eq!(rates.select(0.74), Channel::Replacement);
        assert_eq!(rates.select(0.76), Channel::RumorFade);
        assert_eq!(rates.select(1.0), Channel::RumorFade);
    }
}
