//! Four-compartment competitive spreading model.
//!
//! Compartments: `S` (spreading nothing), `I_A` (spreading the rumor),
//! `I_B` (spreading the refutation) and `R` (faded out). Rumor and
//! refutation compete for susceptible nodes, and contact between the two
//! spreader classes converts rumor spreaders into refutation spreaders,
//! never the reverse.
//!
//! Two right-hand sides are provided. [`RhsMode::Literal`] is the
//! published system verbatim, which leaks mass: `S` loses the full contact
//! flow while `I_A`/`I_B` gain only the adopted fraction, and the
//! replacement term is subtracted from both spreader classes.
//! [`RhsMode::Conserving`] moves the adoption fractions into `dS` and
//! credits the replacement flow to `I_B`, so `S + I_A + I_B + R = n` holds
//! exactly. Contacted-but-not-adopting nodes stay in `S`.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Rate and weight constants of the model. Rates are per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Fraction of rumor contacts that adopt the rumor.
    pub b1: f64,
    /// Fraction of refutation contacts that adopt the refutation.
    pub b2: f64,
    /// Replacement efficiency of `I_A -> I_B` contacts.
    pub o: f64,
    /// Effective contacts per node per day, rumor-spreading process.
    pub w1: f64,
    /// Effective contacts per node per day, rumor-dispelling process.
    pub w2: f64,
    /// Effective contacts per node per day, replacement process.
    pub w3: f64,
    /// Rumor fade-out rate.
    pub r1: f64,
    /// Refutation fade-out rate.
    pub r2: f64,
    /// Population size.
    pub n: f64,
}

impl ModelParams {
    /// Returns every violated field constraint; empty means valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (field, v) in [("b1", self.b1), ("b2", self.b2), ("o", self.o)] {
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::new(field, format!("{v} is outside [0, 1]")));
            }
        }
        for (field, v) in [
            ("w1", self.w1),
            ("w2", self.w2),
            ("w3", self.w3),
            ("r1", self.r1),
            ("r2", self.r2),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(field, format!("{v} must be finite and >= 0")));
            }
        }
        if !(self.n.is_finite() && self.n > 0.0) {
            out.push(Violation::new("n", format!("{} must be finite and > 0", self.n)));
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }
}

/// Checks every [`ModelParams`] invariant and reports all violations by
/// field name.
pub fn validate_params(params: &ModelParams) -> std::result::Result<(), Vec<Violation>> {
    let v = params.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Compartment occupancies at one instant (or their time derivatives).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec {
    pub s: f64,
    pub ia: f64,
    pub ib: f64,
    pub r: f64,
}

impl StateVec {
    pub const ZERO: StateVec = StateVec {
        s: 0.0,
        ia: 0.0,
        ib: 0.0,
        r: 0.0,
    };

    pub const fn new(s: f64, ia: f64, ib: f64, r: f64) -> Self {
        Self { s, ia, ib, r }
    }

    pub fn sum(&self) -> f64 {
        self.s + self.ia + self.ib + self.r
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.s, self.ia, self.ib, self.r]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn min_component(&self) -> f64 {
        self.to_array().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.s), f(self.ia), f(self.ib), f(self.r))
    }

    pub fn clamp_non_negative(self) -> Self {
        self.map(|x| x.max(0.0))
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (field, v) in [("s", self.s), ("ia", self.ia), ("ib", self.ib), ("r", self.r)] {
            if !(v.is_finite() && v >= 0.0) {
                out.push(Violation::new(field, format!("{v} must be finite and >= 0")));
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidState(v))
        }
    }
}

impl Add for StateVec {
    type Output = StateVec;
    fn add(self, o: StateVec) -> StateVec {
        StateVec::new(self.s + o.s, self.ia + o.ia, self.ib + o.ib, self.r + o.r)
    }
}

impl Sub for StateVec {
    type Output = StateVec;
    fn sub(self, o: StateVec) -> StateVec {
        StateVec::new(self.s - o.s, self.ia - o.ia, self.ib - o.ib, self.r - o.r)
    }
}

impl Mul<StateVec> for f64 {
    type Output = StateVec;
    fn mul(self, v: StateVec) -> StateVec {
        v.map(|x| self * x)
    }
}

/// Which right-hand side to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsMode {
    /// The published equations, including their mass leak.
    Literal,
    /// Mass-conserving correction; default for analysis.
    #[default]
    Conserving,
}

impl RhsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RhsMode::Literal => "literal",
            RhsMode::Conserving => "conserving",
        }
    }
}

impl fmt::Display for RhsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RhsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" | "published" => Ok(RhsMode::Literal),
            "conserving" => Ok(RhsMode::Conserving),
            other => Err(Error::Precondition(format!(
                "unknown mode `{other}` (expected `literal` or `conserving`)"
            ))),
        }
    }
}

/// Time derivative of `state`, in counts per day.
///
/// Rejects invalid parameters and negative or non-finite state components;
/// nothing is clamped here.
pub fn rhs(state: &StateVec, params: &ModelParams, mode: RhsMode) -> Result<StateVec> {
    params.check()?;
    state.check()?;
    Ok(rhs_unchecked(state, params, mode))
}

/// [`rhs`] without validation. The integrator evaluates intermediate stage
/// states that may dip marginally below zero, so it uses this directly.
#[inline]
pub(crate) fn rhs_unchecked(x: &StateVec, p: &ModelParams, mode: RhsMode) -> StateVec {
    let rumor_contact = p.w1 / p.n * x.ia * x.s;
    let debunk_contact = p.w2 / p.n * x.ib * x.s;
    let replacement = p.o * p.w3 / p.n * x.ia * x.ib;
    let rumor_fade = p.r1 * x.ia;
    let debunk_fade = p.r2 * x.ib;

    let rumor_adopt = p.b1 * rumor_contact;
    let debunk_adopt = p.b2 * debunk_contact;

    match mode {
        RhsMode::Literal => StateVec {
            s: -rumor_contact - debunk_contact,
            ia: rumor_adopt - replacement - rumor_fade,
            ib: debunk_adopt - replacement - debunk_fade,
            r: rumor_fade + debunk_fade,
        },
        RhsMode::Conserving => StateVec {
            s: -rumor_adopt - debunk_adopt,
            ia: rumor_adopt - replacement - rumor_fade,
            ib: debunk_adopt + replacement - debunk_fade,
            r: rumor_fade + debunk_fade,
        },
    }
}

/// Instantaneous rumor-adoption inflow `b1 * (w1/n) * I_A * S`.
#[inline]
pub fn rumor_inflow(x: &StateVec, p: &ModelParams) -> f64 {
    p.b1 * p.w1 / p.n * x.ia * x.s
}
