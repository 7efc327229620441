//! Scenario documents and the preset library.
//!
//! A scenario is stored as JSON:
//!
//! ```json
//! {
//!   "label": "high-quality",
//!   "params": { "b1": 0.3, "b2": 0.6, "o": 0.3, "w1": 8, "w2": 13, "w3": 7,
//!               "r1": 0.1, "r2": 0.1, "n": 10000 },
//!   "initial": { "ia": 100, "ib": 50 },
//!   "debunk_delay": 0,
//!   "mode": "conserving",
//!   "controls": { "dt": 0.01, "t_end": 100, "output_every": 0.1,
//!                 "method": "rk4", "clamp_negatives": true },
//!   "allow_equal_seeds": false
//! }
//! ```
//!
//! Only `params` and `initial.ia` / `initial.ib` are required. `initial.s`
//! defaults to `n - ia - ib - r`, `initial.r` to 0, `mode` to
//! `conserving`, `debunk_delay` to 0 and `controls` to
//! [`IntegrationControls::default`].
//!
//! With a positive `debunk_delay` the `ib` seed is held back in `S` and
//! moved to `I_B` at that time.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::integrator::{integrate_with_injection, Injection, IntegrationControls, Trajectory};
use crate::model::{ModelParams, RhsMode, StateVec};
use crate::stochastic::{run_ensemble, SamplingControls, StochasticRun};

/// Relative tolerance on `sum(initial) == n`.
const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub params: ModelParams,
    pub initial: StateVec,
    /// Days before the refutation seed is launched.
    pub debunk_delay: f64,
    pub mode: RhsMode,
    pub controls: IntegrationControls,
    /// Relaxes the seed rule from `ia > ib` to `ia >= ib`.
    pub allow_equal_seeds: bool,
}

impl Scenario {
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self.params.violations();
        for v in self.initial.violations() {
            out.push(Violation::new(
                match v.field {
                    "s" => "initial.s",
                    "ia" => "initial.ia",
                    "ib" => "initial.ib",
                    _ => "initial.r",
                },
                v.message,
            ));
        }
        out.extend(self.controls.violations());
        if self.params.n.is_finite() && self.params.n > 0.0 {
            let sum = self.initial.sum();
            if (sum - self.params.n).abs() > MASS_TOLERANCE * self.params.n {
                out.push(Violation::new(
                    "initial",
                    format!("compartments sum to {sum} but n = {}", self.params.n),
                ));
            }
        }
        let (ia, ib) = (self.initial.ia, self.initial.ib);
        if ib > 0.0 {
            if self.allow_equal_seeds && ia < ib {
                out.push(Violation::new(
                    "initial.ia",
                    format!("rumor seed ia = {ia} must be >= refutation seed ib = {ib}"),
                ));
            } else if !self.allow_equal_seeds && ia <= ib {
                out.push(Violation::new(
                    "initial.ia",
                    format!(
                        "rumor seed ia = {ia} must exceed refutation seed ib = {ib} \
                         (the rumor has a head start, I_A > I_B); set allow_equal_seeds to permit equality"
                    ),
                ));
            }
        }
        if !(self.debunk_delay.is_finite() && self.debunk_delay >= 0.0) {
            out.push(Violation::new(
                "debunk_delay",
                format!("{} must be finite and >= 0", self.debunk_delay),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidScenario(v))
        }
    }

    /// State at `t = 0` and the scheduled refutation launch, if any.
    pub fn start(&self) -> (StateVec, Option<Injection>) {
        if self.debunk_delay > 0.0 && self.initial.ib > 0.0 {
            let x0 = StateVec {
                s: self.initial.s + self.initial.ib,
                ib: 0.0,
                ..self.initial
            };
            let inj = Injection {
                time: self.debunk_delay,
                amount: self.initial.ib,
            };
            (x0, Some(inj))
        } else {
            (self.initial, None)
        }
    }

    /// Deterministic trajectory of this scenario.
    pub fn simulate(&self) -> Result<Trajectory> {
        self.validate()?;
        let (x0, inj) = self.start();
        integrate_with_injection(&x0, &self.params, self.mode, &self.controls, inj)
    }

    pub fn sampling(&self) -> SamplingControls {
        SamplingControls {
            t_end: self.controls.t_end,
            output_every: self.controls.output_every,
        }
    }

    /// `runs` stochastic sample paths; always the conserving dynamics.
    pub fn simulate_ensemble(&self, runs: usize, seed: u64) -> Result<Vec<StochasticRun>> {
        self.validate()?;
        if runs == 0 {
            return Err(Error::Precondition("at least one run is required".into()));
        }
        let (x0, inj) = self.start();
        run_ensemble(&x0, &self.params, &self.sampling(), inj, seed, runs)
    }

    pub fn to_json(&self) -> String {
        let doc = NormalizedDoc {
            label: &self.label,
            params: &self.params,
            initial: &self.initial,
            debunk_delay: self.debunk_delay,
            mode: self.mode,
            controls: &self.controls,
            allow_equal_seeds: self.allow_equal_seeds,
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("scenario serializes");
        text.push('\n');
        text
    }

    /// Parses and validates a scenario document. `origin` names the source
    /// in diagnostics.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let scenario = Self::parse_json(text, origin)?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parses without validating, so command-line overrides can be applied
    /// before the single validation pass.
    pub(crate) fn parse_json(text: &str, origin: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            let position = format!(" at line {} column {}", inner.line(), inner.column());
            let message = inner.to_string();
            Error::Parse {
                path: origin.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                field,
                message: message.strip_suffix(&position).unwrap_or(&message).to_string(),
            }
        })?;
        let r = doc.initial.r.unwrap_or(0.0);
        let s = doc
            .initial
            .s
            .unwrap_or(doc.params.n - doc.initial.ia - doc.initial.ib - r);
        Ok(Scenario {
            label: doc.label,
            params: doc.params,
            initial: StateVec::new(s, doc.initial.ia, doc.initial.ib, r),
            debunk_delay: doc.debunk_delay,
            mode: doc.mode,
            controls: doc.controls,
            allow_equal_seeds: doc.allow_equal_seeds,
        })
    }
}

#[derive(Serialize)]
struct NormalizedDoc<'a> {
    label: &'a str,
    params: &'a ModelParams,
    initial: &'a StateVec,
    debunk_delay: f64,
    mode: RhsMode,
    controls: &'a IntegrationControls,
    allow_equal_seeds: bool,
}

fn default_label() -> String {
    "custom".to_string()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    #[serde(default = "default_label")]
    label: String,
    params: ModelParams,
    initial: InitialDoc,
    #[serde(default)]
    debunk_delay: f64,
    #[serde(default)]
    mode: RhsMode,
    #[serde(default)]
    controls: IntegrationControls,
    #[serde(default)]
    allow_equal_seeds: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialDoc {
    s: Option<f64>,
    ia: f64,
    ib: f64,
    r: Option<f64>,
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json(&text, path)
}

pub(crate) fn load_scenario_unvalidated(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::parse_json(&text, path)
}

/// Writes the normalized form of `scenario`.
pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario.to_json()).map_err(|e| Error::io(path, e))
}

/// Named scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetId {
    /// Baseline run; the reference point for sensitivity sweeps.
    InitialValue,
    /// Low netizen quality: rumor adoption exceeds refutation adoption.
    LowQuality,
    /// High netizen quality: refutation adoption exceeds rumor adoption.
    HighQuality,
    /// Weak social dissemination, four contacts per day in every process.
    WeakContact,
    /// Strong social dissemination, eight contacts per day.
    StrongContact,
}

/// Population used when none is given.
pub const DEFAULT_POPULATION: f64 = 10_000.0;

/// Baseline parameters shared by all presets before their overrides.
pub const BASELINE: ModelParams = ModelParams {
    b1: 0.5,
    b2: 0.9,
    o: 0.3,
    w1: 8.0,
    w2: 13.0,
    w3: 7.0,
    r1: 0.1,
    r2: 0.1,
    n: DEFAULT_POPULATION,
};

/// Where a preset value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Part of what the preset is defined to show (e.g. `w = 4`).
    Definition,
    /// The magnitude was picked for this tool but its ordering against a
    /// sibling field (e.g. `b1 > b2`) is what the preset is defined to show.
    DefinedOrdering,
    /// A magnitude picked for this tool.
    ImplementationDefault,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Definition => "scenario definition",
            Provenance::DefinedOrdering => "implementation default, ordering by scenario definition",
            Provenance::ImplementationDefault => "implementation default",
        }
    }
}

impl PresetId {
    pub const ALL: [PresetId; 5] = [
        PresetId::InitialValue,
        PresetId::LowQuality,
        PresetId::HighQuality,
        PresetId::WeakContact,
        PresetId::StrongContact,
    ];

    /// The preset sweeps are run against.
    pub const DEFAULT: PresetId = PresetId::InitialValue;

    pub fn as_str(self) -> &'static str {
        match self {
            PresetId::InitialValue => "initial-value",
            PresetId::LowQuality => "low-quality",
            PresetId::HighQuality => "high-quality",
            PresetId::WeakContact => "weak-contact",
            PresetId::StrongContact => "strong-contact",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PresetId::InitialValue => "baseline competitive spread, rumor seeded ahead of refutation",
            PresetId::LowQuality => "low netizen quality (b1 > b2)",
            PresetId::HighQuality => "high netizen quality (b1 < b2)",
            PresetId::WeakContact => "weak social dissemination (w = 4 contacts/day)",
            PresetId::StrongContact => "strong social dissemination (w = 8 contacts/day)",
        }
    }

    /// Fields this preset overrides on top of [`BASELINE`].
    fn overrides(self) -> &'static [(&'static str, f64, Provenance)] {
        use Provenance::{DefinedOrdering as Ord, Definition as Def};
        match self {
            PresetId::InitialValue => &[],
            PresetId::LowQuality => &[("b1", 0.6, Ord), ("b2", 0.3, Ord)],
            PresetId::HighQuality => &[("b1", 0.3, Ord), ("b2", 0.6, Ord)],
            PresetId::WeakContact => &[("w1", 4.0, Def), ("w2", 4.0, Def), ("w3", 4.0, Def)],
            PresetId::StrongContact => &[("w1", 8.0, Def), ("w2", 8.0, Def), ("w3", 8.0, Def)],
        }
    }

    /// Every preset value with its provenance, in display order.
    pub fn provenance(self, n: f64) -> Result<Vec<(String, String, Provenance)>> {
        let s = expand_preset(self, n)?;
        let tag = |k: &str| {
            self.overrides()
                .iter()
                .find(|(f, _, _)| *f == k)
                .map_or(Provenance::ImplementationDefault, |o| o.2)
        };
        let p = s.params;
        let c = s.controls;
        let mut rows: Vec<(String, String, Provenance)> = [
            ("b1", p.b1),
            ("b2", p.b2),
            ("o", p.o),
            ("w1", p.w1),
            ("w2", p.w2),
            ("w3", p.w3),
            ("r1", p.r1),
            ("r2", p.r2),
            ("n", p.n),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string(), tag(k)))
        .collect();
        rows.extend(
            [
                ("initial.s", s.initial.s.to_string()),
                ("initial.ia", s.initial.ia.to_string()),
                ("initial.ib", s.initial.ib.to_string()),
                ("initial.r", s.initial.r.to_string()),
                ("debunk_delay", s.debunk_delay.to_string()),
                ("mode", s.mode.to_string()),
                ("dt", c.dt.to_string()),
                ("t_end", c.t_end.to_string()),
                ("output_every", c.output_every.to_string()),
                ("method", c.method.to_string()),
                ("clamp_negatives", c.clamp_negatives.to_string()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v, Provenance::ImplementationDefault)),
        );
        Ok(rows)
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = PresetId::ALL.iter().map(|p| p.as_str()).collect();
            Error::Precondition(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Builds the complete scenario for `id` with population `n`.
///
/// Seeds are 1% of `n` spreading the rumor and 0.5% spreading the
/// refutation (rounded to whole nodes, rumor seed at least 1 and strictly
/// larger). The refutation is active from `t = 0`; the rumor's head start
/// is carried by its larger seed.
pub fn expand_preset(id: PresetId, n: f64) -> Result<Scenario> {
    if !(n.is_finite() && n >= 1.0 && n.fract() == 0.0) {
        return Err(Error::InvalidParams(vec![Violation::new(
            "n",
            format!("{n} must be a whole number >= 1"),
        )]));
    }
    let mut params = ModelParams { n, ..BASELINE };
    for (field, value, _) in id.overrides() {
        match *field {
            "b1" => params.b1 = *value,
            "b2" => params.b2 = *value,
            "w1" => params.w1 = *value,
            "w2" => params.w2 = *value,
            "w3" => params.w3 = *value,
            other => unreachable!("preset overrides unknown field {other}"),
        }
    }
    let ia = (0.01 * n).round().max(1.0);
    let ib = (0.005 * n).round().min(ia - 1.0);
    let scenario = Scenario {
        label: id.as_str().to_string(),
        params,
        initial: StateVec::new(n - ia - ib, ia, ib, 0.0),
        debunk_delay: 0.0,
        mode: RhsMode::Conserving,
        controls: IntegrationControls::default(),
        allow_equal_seeds: false,
    };
    scenario.validate()?;
    Ok(scenario)
}
