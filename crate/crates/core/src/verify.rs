//! Bounded invariant checking.
//!
//! A property file holds one invariant per line:
//!
//! ```text
//! P1: A[] Stroke.tPA imply systolicBP<=185 && diastolicBP<=110 && !hemorrhage
//! Q: A[] curT>=0
//! ```
//!
//! Every choice in the scenario is expanded into a resolved scenario, each
//! one is simulated to the horizon, and every invariant is evaluated after
//! initialization and after every macro-step.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::parse::{is_simple_identifier, parse_expr};
use crate::model::{eval_guard, type_of, EvalError, Expr, Value, VarKind};
use crate::sim::{Composition, Scenario, SimError, SimState, Simulator, Trace};

pub const DEFAULT_SCENARIO_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("properties line {line}: {message}")]
    Property { line: usize, message: String },
    #[error(
        "scenario choices expand to {size} resolved scenarios, more than the cap of {cap}; reduce the choice domains or raise the cap"
    )]
    TooManyScenarios { size: u128, cap: usize },
    #[error(transparent)]
    Scenario(SimError),
    #[error("in scenario [{scenario}]: {source}")]
    Sim {
        scenario: String,
        #[source]
        source: SimError,
    },
}

/// `A[] [Chart.State imply] predicate`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Invariant {
    pub name: String,
    pub location: Option<(String, String)>,
    pub predicate: Expr,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: A[] ", self.name)?;
        if let Some((chart, state)) = &self.location {
            write!(f, "{chart}.{state} imply ")?;
        }
        write!(f, "{}", self.predicate)
    }
}

fn property_error(line: usize, message: impl Into<String>) -> VerifyError {
    VerifyError::Property {
        line,
        message: message.into(),
    }
}

/// Parse one property line without checking names against a composition.
pub fn parse_property(src: &str) -> Result<Invariant, String> {
    let (name, body) = src.split_once(':').ok_or("expected `NAME: A[] ...`")?;
    let name = name.trim();
    if !is_simple_identifier(name) {
        return Err(format!("invalid property name `{name}`"));
    }
    let body = body
        .trim_start()
        .strip_prefix("A[]")
        .ok_or("only `A[]` invariants are supported")?;
    let words: Vec<&str> = body.split_whitespace().collect();
    let (location, predicate_src) = match words.iter().position(|w| *w == "imply") {
        Some(1) => {
            let (chart, state) = words[0]
                .split_once('.')
                .filter(|(c, s)| is_simple_identifier(c) && is_simple_identifier(s))
                .ok_or_else(|| format!("expected `Chart.State` before `imply`, found `{}`", words[0]))?;
            let rest = body.trim_start()[words[0].len()..].trim_start();
            (Some((chart.to_string(), state.to_string())), &rest["imply".len()..])
        }
        Some(_) => return Err("`imply` must follow a single `Chart.State` location".into()),
        None => (None, body),
    };
    let predicate = parse_expr(predicate_src.trim()).map_err(|e| e.to_string())?;
    Ok(Invariant {
        name: name.to_string(),
        location,
        predicate,
    })
}

/// Check that an invariant's chart, state and variables exist in the
/// composition and that its predicate is boolean.
pub fn resolve(inv: &Invariant, composition: &Composition) -> Result<(), String> {
    if let Some((chart, state)) = &inv.location {
        let c = composition
            .chart(chart)
            .ok_or_else(|| format!("unknown chart `{chart}`"))?;
        if c.model.state(state).is_none() {
            return Err(format!("chart `{chart}` has no state `{state}`"));
        }
    }
    if let Some(v) = inv
        .predicate
        .variables()
        .into_iter()
        .find(|v| composition.variable_kind(v).is_none())
    {
        return Err(format!("unknown variable `{v}`"));
    }
    match type_of(&inv.predicate, &|n: &str| composition.variable_kind(n)) {
        Ok(VarKind::Boolean) => Ok(()),
        Ok(k) => Err(format!("predicate must be boolean, found {k}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Parse a property file against a composition. Blank lines and lines
/// starting with `//` or `#` are skipped.
pub fn parse_properties(text: &str, composition: &Composition) -> Result<Vec<Invariant>, VerifyError> {
    let mut out: Vec<Invariant> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") || line.starts_with('#') {
            continue;
        }
        let inv = parse_property(line).map_err(|m| property_error(i + 1, m))?;
        resolve(&inv, composition).map_err(|m| property_error(i + 1, format!("{}: {m}", inv.name)))?;
        if out.iter().any(|p| p.name == inv.name) {
            return Err(property_error(i + 1, format!("duplicate property name `{}`", inv.name)));
        }
        out.push(inv);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chosen {
    pub var: String,
    pub value: Value,
}

/// A scenario with every choice fixed; the chosen values are folded into
/// `scenario.initial`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedScenario {
    pub choices: Vec<Chosen>,
    pub scenario: Scenario,
}

impl fmt::Display for ResolvedScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.choices.is_empty() {
            return f.write_str("no choices");
        }
        let parts: Vec<String> = self.choices.iter().map(|c| format!("{}={}", c.var, c.value)).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Cartesian product of the choice domains, first choice varying slowest.
pub fn enumerate_scenarios(scenario: &Scenario, cap: usize) -> Result<Vec<ResolvedScenario>, VerifyError> {
    let size = scenario
        .choices
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.domain.len() as u128))
        .unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(VerifyError::TooManyScenarios { size, cap });
    }
    let mut base = scenario.clone();
    base.choices.clear();
    let mut out = vec![ResolvedScenario {
        choices: Vec::new(),
        scenario: base,
    }];
    for choice in &scenario.choices {
        out = out
            .into_iter()
            .flat_map(|partial| {
                choice.domain.iter().map(move |value| {
                    let mut next = partial.clone();
                    next.scenario.initial.insert(choice.var.clone(), *value);
                    next.choices.push(Chosen {
                        var: choice.var.clone(),
                        value: *value,
                    });
                    next
                })
            })
            .collect();
    }
    Ok(out)
}

/// Implication at one observation point. Fails only if the valuation lacks
/// a variable the predicate reads.
pub fn eval_invariant(inv: &Invariant, state: &SimState) -> Result<bool, EvalError> {
    if let Some((chart, loc)) = &inv.location {
        if state.active.get(chart) != Some(loc) {
            return Ok(true);
        }
    }
    eval_guard(&inv.predicate, &state.valuation)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Position of the scenario in enumeration order.
    pub scenario_index: usize,
    pub resolved: ResolvedScenario,
    /// Index into `trace.steps` of the violating observation (0 = initialization).
    pub step: usize,
    /// Trace up to and including the violating step.
    pub trace: Trace,
}

impl Counterexample {
    pub fn time(&self) -> i64 {
        self.trace.steps[self.step].time
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

fn sim_error(resolved: &ResolvedScenario, source: SimError) -> VerifyError {
    VerifyError::Sim {
        scenario: resolved.to_string(),
        source,
    }
}

/// Check every property over every resolved scenario up to `horizon`.
pub fn check(
    composition: &Composition,
    scenario: &Scenario,
    properties: &[Invariant],
    horizon: i64,
    cap: usize,
) -> Result<Vec<Verdict>, VerifyError> {
    scenario.validate(composition).map_err(VerifyError::Scenario)?;
    let resolved = enumerate_scenarios(scenario, cap)?;
    let mut verdicts: Vec<Verdict> = properties
        .iter()
        .map(|p| Verdict {
            property: p.name.clone(),
            holds: true,
            counterexample: None,
        })
        .collect();

    for (index, rs) in resolved.iter().enumerate() {
        if verdicts.iter().all(|v| !v.holds) {
            break;
        }
        let sim = Simulator::new(composition, &rs.scenario).map_err(|e| sim_error(rs, e))?;
        let (mut state, first) = sim.init().map_err(|e| sim_error(rs, e))?;
        let mut trace = Trace { steps: vec![first] };
        loop {
            let step = trace.steps.len() - 1;
            for (p, verdict) in properties.iter().zip(verdicts.iter_mut()) {
                if !verdict.holds {
                    continue;
                }
                let ok = eval_invariant(p, &state).map_err(|e| {
                    sim_error(
                        rs,
                        SimError::Runtime {
                            path: format!("property {}", p.name),
                            message: e.to_string(),
                        },
                    )
                })?;
                if !ok {
                    verdict.holds = false;
                    verdict.counterexample = Some(Counterexample {
                        scenario_index: index,
                        resolved: rs.clone(),
                        step,
                        trace: trace.clone(),
                    });
                }
            }
            if state.time >= horizon {
                break;
            }
            trace
                .steps
                .push(sim.macro_step(&mut state).map_err(|e| sim_error(rs, e))?);
        }
    }
    Ok(verdicts)
}

/// Re-simulate a counterexample's scenario and confirm the property is
/// violated at the recorded step.
pub fn replays_to_violation(composition: &Composition, inv: &Invariant, cx: &Counterexample) -> bool {
    let Ok(sim) = Simulator::new(composition, &cx.resolved.scenario) else {
        return false;
    };
    let Ok((mut state, first)) = sim.init() else {
        return false;
    };
    let mut steps = vec![first];
    while steps.len() <= cx.step {
        match sim.macro_step(&mut state) {
            Ok(r) => steps.push(r),
            Err(_) => return false,
        }
    }
    steps == cx.trace.steps && eval_invariant(inv, &state) == Ok(false)
}

/// Plain-text verdict table.
pub fn render_table(verdicts: &[Verdict]) -> String {
    let width = verdicts
        .iter()
        .map(|v| v.property.len())
        .max()
        .unwrap_or(0)
        .max("property".len());
    let mut out = format!("{:<width$}  verdict  detail\n", "property");
    for v in verdicts {
        let detail = match &v.counterexample {
            None => String::new(),
            Some(cx) => format!(
                "violated at t={} in scenario #{} ({})",
                cx.time(),
                cx.scenario_index,
                cx.resolved
            ),
        };
        let verdict = if v.holds { "holds" } else { "FAILS" };
        out.push_str(format!("{:<width$}  {verdict:<7}  {detail}", v.property).trim_end());
        out.push('\n');
    }
    out
}
