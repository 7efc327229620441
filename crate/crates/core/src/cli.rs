//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 validation error,
//! 3 numerical divergence. Diagnostics go to stderr; data goes to files
//! and stdout.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{compute_metrics, sweep, Metric, SweepParam, DEFAULT_THRESHOLD_FRAC};
use crate::error::{Error, Result};
use crate::integrator::{IntegrationControls, Method};
use crate::model::{ModelParams, RhsMode, StateVec};
use crate::output::{
    meta_path, write_compare_csv, write_directions_csv, write_ensemble_csv, write_sweep_csv, write_trajectory_csv, Meta,
};
use crate::scenario::{expand_preset, load_scenario_unvalidated, PresetId, Scenario, DEFAULT_POPULATION};
use crate::stochastic::{agreement, ensemble_stats, RNG_NAME};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Version of the `.meta` layout.
const META_FORMAT: &str = "1";

#[derive(Parser, Debug)]
#[command(
    name = "rumorsim",
    version,
    about = "Competitive rumor / refutation spreading simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one scenario and write trajectory.csv.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Vary one parameter over a grid and write sweep.csv plus a direction summary.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        common: CommonArgs,
        /// Parameter to vary: b1, b2, o, w1, w2 or w3.
        #[arg(long)]
        param: String,
        /// Comma-separated grid values; defaults to 0..1 step 0.1 for b1/b2/o and 0..16 step 1 for w1/w2/w3.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Run a stochastic ensemble and write its mean and standard deviation.
    Stochastic {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
    /// Compare the ODE against a stochastic ensemble point by point.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
    },
    /// List presets with their expanded values.
    Presets {
        /// Population size.
        #[arg(long, default_value_t = DEFAULT_POPULATION)]
        n: f64,
        /// Also write each preset as a scenario document into this directory.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Repeat the command recorded in a .meta sidecar.
    Rerun {
        meta: PathBuf,
        /// Output directory; defaults to the directory holding the sidecar.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario document (JSON).
    #[arg(long, conflicts_with_all = ["preset", "n"])]
    scenario: Option<PathBuf>,
    /// Named preset; initial-value when neither this nor --scenario is given.
    #[arg(long)]
    preset: Option<PresetId>,
    /// Population size for the preset.
    #[arg(long)]
    n: Option<f64>,
    /// Right-hand side: literal or conserving.
    #[arg(long)]
    mode: Option<RhsMode>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    output_every: Option<f64>,
    /// rk4 or euler.
    #[arg(long)]
    method: Option<Method>,
    /// Days before the refutation seed is launched.
    #[arg(long)]
    debunk_delay: Option<f64>,
    /// Keep negative values instead of clamping them to zero after each step.
    #[arg(long)]
    no_clamp: bool,
    /// Accept ia == ib seeds.
    #[arg(long)]
    allow_equal_seeds: bool,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Prevalence threshold for duration, as a fraction of n.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_FRAC)]
    threshold_frac: f64,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => load_scenario_unvalidated(path)?,
            None => expand_preset(
                self.preset.unwrap_or(PresetId::DEFAULT),
                self.n.unwrap_or(DEFAULT_POPULATION),
            )?,
        };
        if let Some(m) = self.mode {
            s.mode = m;
        }
        if let Some(v) = self.dt {
            s.controls.dt = v;
        }
        if let Some(v) = self.t_end {
            s.controls.t_end = v;
        }
        if let Some(v) = self.output_every {
            s.controls.output_every = v;
        }
        if let Some(v) = self.method {
            s.controls.method = v;
        }
        if let Some(v) = self.debunk_delay {
            s.debunk_delay = v;
        }
        if self.no_clamp {
            s.controls.clamp_negatives = false;
        }
        if self.allow_equal_seeds {
            s.allow_equal_seeds = true;
        }
        s.validate()?;
        Ok(s)
    }
}

/// A fully resolved command: everything needed to produce its outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Run {
        scenario: Scenario,
        threshold_frac: f64,
    },
    Sweep {
        scenario: Scenario,
        threshold_frac: f64,
        param: SweepParam,
        grid: Vec<f64>,
    },
    Stochastic {
        scenario: Scenario,
        runs: usize,
        seed: u64,
    },
    Compare {
        scenario: Scenario,
        runs: usize,
        seed: u64,
        threshold_frac: f64,
    },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Run { .. } => "run",
            Job::Sweep { .. } => "sweep",
            Job::Stochastic { .. } => "stochastic",
            Job::Compare { .. } => "compare",
        }
    }

    pub fn scenario(&self) -> &Scenario {
        match self {
            Job::Run { scenario, .. }
            | Job::Sweep { scenario, .. }
            | Job::Stochastic { scenario, .. }
            | Job::Compare { scenario, .. } => scenario,
        }
    }

    /// Main CSV written by this job, relative to the output directory.
    pub fn primary_file(&self) -> &'static str {
        match self {
            Job::Run { .. } => "trajectory.csv",
            Job::Sweep { .. } => "sweep.csv",
            Job::Stochastic { .. } => "ensemble.csv",
            Job::Compare { .. } => "compare.csv",
        }
    }

    pub fn to_meta(&self) -> Meta {
        let mut m = Meta::new();
        m.set("format", META_FORMAT);
        m.set("tool", "rumorsim");
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", self.name());
        scenario_to_meta(self.scenario(), &mut m);
        match self {
            Job::Run { threshold_frac, .. } => m.set("threshold_frac", threshold_frac),
            Job::Sweep {
                threshold_frac,
                param,
                grid,
                ..
            } => {
                m.set("threshold_frac", threshold_frac);
                m.set("param", param);
                m.set("grid", grid.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
            }
            Job::Stochastic { runs, seed, .. } => {
                m.set("runs", runs);
                m.set("seed", seed);
                m.set("rng", RNG_NAME);
            }
            Job::Compare {
                runs,
                seed,
                threshold_frac,
                ..
            } => {
                m.set("runs", runs);
                m.set("seed", seed);
                m.set("rng", RNG_NAME);
                m.set("threshold_frac", threshold_frac);
            }
        }
        m
    }

    pub fn from_meta(m: &Meta, path: &Path) -> Result<Self> {
        let r = MetaReader { meta: m, path };
        let format = r.str("format")?;
        if format != META_FORMAT {
            return Err(r.bad("format", format!("unsupported sidecar format `{format}`")));
        }
        let scenario = scenario_from_meta(&r)?;
        let job = match r.str("command")? {
            "run" => Job::Run {
                scenario,
                threshold_frac: r.num("threshold_frac")?,
            },
            "sweep" => Job::Sweep {
                scenario,
                threshold_frac: r.num("threshold_frac")?,
                param: r.str("param")?.parse()?,
                grid: r
                    .str("grid")?
                    .split(',')
                    .map(|v| v.parse().map_err(|_| r.bad("grid", format!("`{v}` is not a number"))))
                    .collect::<Result<_>>()?,
            },
            "stochastic" => Job::Stochastic {
                scenario,
                runs: r.parse("runs")?,
                seed: r.parse("seed")?,
            },
            "compare" => Job::Compare {
                scenario,
                runs: r.parse("runs")?,
                seed: r.parse("seed")?,
                threshold_frac: r.num("threshold_frac")?,
            },
            other => return Err(r.bad("command", format!("unknown command `{other}`"))),
        };
        if let Some(rng) = m.get("rng") {
            if rng != RNG_NAME {
                return Err(r.bad("rng", format!("recorded generator `{rng}` is not `{RNG_NAME}`")));
            }
        }
        Ok(job)
    }

    /// Computes the outputs and writes them, with the sidecar, into `out`.
    /// Returns a short human-readable summary for stdout.
    pub fn execute(&self, out: &Path) -> Result<String> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let primary = out.join(self.primary_file());
        let summary = match self {
            Job::Run {
                scenario,
                threshold_frac,
            } => {
                let traj = scenario.simulate()?;
                let m = compute_metrics(&traj, *threshold_frac)?;
                write_trajectory_csv(&traj, &primary)?;
                format!(
                    "peak_ia={}\npeak_time={}\nduration={}\nspread_scale={}\nfinal_r={}\nmass_drift={}\n",
                    m.peak_ia,
                    m.peak_time,
                    m.duration,
                    m.spread_scale,
                    m.final_r,
                    traj.last().map(|x| x.sum() - scenario.params.n).unwrap_or(0.0)
                )
            }
            Job::Sweep {
                scenario,
                threshold_frac,
                param,
                grid,
            } => {
                let report = sweep(scenario, *param, grid, *threshold_frac)?;
                write_sweep_csv(&report, &primary)?;
                write_directions_csv(&report, &out.join("sweep_directions.csv"))?;
                let mut text = format!(
                    "{:<14}{:<16}{:<14}{}\n",
                    "metric", "direction", "loading", "mean_abs_step"
                );
                for d in &report.directions {
                    text.push_str(&format!(
                        "{:<14}{:<16}{:<14}{}\n",
                        d.metric.as_str(),
                        d.direction.as_str(),
                        d.loading.as_str(),
                        d.mean_abs_step
                    ));
                }
                text
            }
            Job::Stochastic { scenario, runs, seed } => {
                require_conserving(scenario)?;
                let ensemble = scenario.simulate_ensemble(*runs, *seed)?;
                let stats = ensemble_stats(&ensemble)?;
                write_ensemble_csv(&stats, &primary)?;
                let peak = stats.mean.iter().map(|x| x.ia).fold(0.0, f64::max);
                let events: u64 = ensemble.iter().map(|r| r.event_count).sum();
                format!("runs={runs}\nevents={events}\nmean_peak_ia={peak}\n")
            }
            Job::Compare {
                scenario,
                runs,
                seed,
                threshold_frac,
            } => {
                require_conserving(scenario)?;
                let ode = scenario.simulate()?;
                let ensemble = scenario.simulate_ensemble(*runs, *seed)?;
                let stats = ensemble_stats(&ensemble)?;
                write_compare_csv(&ode, &stats, &primary)?;
                let a = agreement(&ode, &stats, 3.0, |x| x.ia)?;
                let ode_peak = compute_metrics(&ode, *threshold_frac)?.peak_ia;
                let mean_peak = stats.mean.iter().map(|x| x.ia).fold(0.0, f64::max);
                format!(
                    "ia_within_3se={}\nia_max_abs_deviation={}\node_{}={}\nensemble_mean_{}={}\n",
                    a.fraction_within,
                    a.max_abs_deviation,
                    Metric::PeakIa.as_str(),
                    ode_peak,
                    Metric::PeakIa.as_str(),
                    mean_peak
                )
            }
        };
        self.to_meta().write(&meta_path(&primary))?;
        Ok(summary)
    }
}

fn require_conserving(s: &Scenario) -> Result<()> {
    if s.mode != RhsMode::Conserving {
        return Err(Error::Precondition(
            "the stochastic simulator implements the conserving dynamics only; use --mode conserving".into(),
        ));
    }
    Ok(())
}

fn scenario_to_meta(s: &Scenario, m: &mut Meta) {
    m.set("label", s.label.replace(['\n', '\r'], " "));
    let p = &s.params;
    for (k, v) in [
        ("b1", p.b1),
        ("b2", p.b2),
        ("o", p.o),
        ("w1", p.w1),
        ("w2", p.w2),
        ("w3", p.w3),
        ("r1", p.r1),
        ("r2", p.r2),
        ("n", p.n),
        ("s0", s.initial.s),
        ("ia0", s.initial.ia),
        ("ib0", s.initial.ib),
        ("r0", s.initial.r),
        ("debunk_delay", s.debunk_delay),
    ] {
        m.set(k, v);
    }
    m.set("allow_equal_seeds", s.allow_equal_seeds);
    m.set("mode", s.mode);
    m.set("method", s.controls.method);
    m.set("dt", s.controls.dt);
    m.set("t_end", s.controls.t_end);
    m.set("output_every", s.controls.output_every);
    m.set("clamp_negatives", s.controls.clamp_negatives);
}

fn scenario_from_meta(r: &MetaReader) -> Result<Scenario> {
    let s = Scenario {
        label: r.str("label")?.to_string(),
        params: ModelParams {
            b1: r.num("b1")?,
            b2: r.num("b2")?,
            o: r.num("o")?,
            w1: r.num("w1")?,
            w2: r.num("w2")?,
            w3: r.num("w3")?,
            r1: r.num("r1")?,
            r2: r.num("r2")?,
            n: r.num("n")?,
        },
        initial: StateVec::new(r.num("s0")?, r.num("ia0")?, r.num("ib0")?, r.num("r0")?),
        debunk_delay: r.num("debunk_delay")?,
        mode: r.str("mode")?.parse()?,
        controls: IntegrationControls {
            dt: r.num("dt")?,
            t_end: r.num("t_end")?,
            output_every: r.num("output_every")?,
            method: r.str("method")?.parse()?,
            clamp_negatives: r.parse("clamp_negatives")?,
        },
        allow_equal_seeds: r.parse("allow_equal_seeds")?,
    };
    s.validate()?;
    Ok(s)
}

struct MetaReader<'a> {
    meta: &'a Meta,
    path: &'a Path,
}

impl MetaReader<'_> {
    fn bad(&self, key: &str, message: String) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            message: format!("{key}: {message}"),
        }
    }

    fn str(&self, key: &str) -> Result<&str> {
        self.meta.get(key).ok_or_else(|| self.bad(key, "missing".into()))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key)?;
        v.parse().map_err(|_| self.bad(key, format!("cannot parse `{v}`")))
    }

    fn num(&self, key: &str) -> Result<f64> {
        self.parse(key)
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::UnknownParameter(_) => EXIT_USAGE,
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_INVALID,
    }
}

fn presets(n: f64, write: Option<&Path>) -> Result<String> {
    let mut text = String::new();
    for id in PresetId::ALL {
        text.push_str(&format!("{id}: {}\n", id.description()));
        for (key, value, prov) in id.provenance(n)? {
            text.push_str(&format!("  {key:<16}{value:<14}{}\n", prov.as_str()));
        }
        if let Some(dir) = write {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            crate::scenario::save_scenario(&expand_preset(id, n)?, &dir.join(format!("{id}.json")))?;
        }
    }
    Ok(text)
}

fn dispatch(command: Command) -> Result<String> {
    let (job, out) = match command {
        Command::Presets { n, write } => return presets(n, write.as_deref()),
        Command::Rerun { meta, out } => {
            let m = Meta::read(&meta)?;
            let job = Job::from_meta(&m, &meta)?;
            if m.get("version") != Some(env!("CARGO_PKG_VERSION")) {
                eprintln!(
                    "warning: {} was written by version {}, this is {}",
                    meta.display(),
                    m.get("version").unwrap_or("unknown"),
                    env!("CARGO_PKG_VERSION")
                );
            }
            let dir = out.unwrap_or_else(|| meta.parent().map(Path::to_path_buf).unwrap_or_default());
            (job, dir)
        }
        Command::Run { scenario, common } => (
            Job::Run {
                scenario: scenario.resolve()?,
                threshold_frac: common.threshold_frac,
            },
            common.out,
        ),
        Command::Sweep {
            scenario,
            common,
            param,
            grid,
        } => {
            let param: SweepParam = param.parse()?;
            (
                Job::Sweep {
                    scenario: scenario.resolve()?,
                    threshold_frac: common.threshold_frac,
                    param,
                    grid: grid.unwrap_or_else(|| param.default_grid()),
                },
                common.out,
            )
        }
        Command::Stochastic {
            scenario,
            common,
            ensemble,
        } => (
            Job::Stochastic {
                scenario: scenario.resolve()?,
                runs: ensemble.runs,
                seed: ensemble.seed,
            },
            common.out,
        ),
        Command::Compare {
            scenario,
            common,
            ensemble,
        } => (
            Job::Compare {
                scenario: scenario.resolve()?,
                runs: ensemble.runs,
                seed: ensemble.seed,
                threshold_frac: common.threshold_frac,
            },
            common.out,
        ),
    };
    let summary = job.execute(&out)?;
    eprintln!("wrote {}", out.join(job.primary_file()).display());
    Ok(summary)
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(summary.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
