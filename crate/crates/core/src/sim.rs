//! Discrete-time execution of charts composed in parallel.
//!
//! One macro-step is one minute and runs in a fixed order:
//!
//! 1. timer charts (advancing `curT`),
//! 2. scenario injections scheduled for the new minute,
//! 3. resource charts (refreshing `RES.*`),
//! 4. guideline charts.
//!
//! Each chart fires at most one transition per step: the enabled outgoing
//! transition of its active state with the lowest priority. Firing runs the
//! source's exit actions, the transition's actions, then the target's entry
//! actions; self-loops re-enter. Raised events are visible to charts later
//! in the same step and are cleared when the step ends.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    eval_guard, validate_model, Action, Diagnostic, EvalError, Expr, GuardedAction, StatechartModel, Trigger, Value,
    VarKind, VariableDecl,
};
use crate::resgen::DEFAULT_HORIZON;

/// Chart name used for scenario injections in traces.
pub const SCENARIO_SOURCE: &str = "@scenario";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("chart `{chart}` is invalid: {}", .diagnostics.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidChart {
        chart: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("duplicate chart name `{0}`")]
    DuplicateChart(String),
    #[error("chart `{chart}` ({role:?}) is out of order; timer charts come first, then resource charts, then guideline charts")]
    ChartOrder { chart: String, role: ChartRole },
    #[error("variable `{name}` is declared {first} elsewhere but {second} in `{chart}`")]
    InconsistentVariable {
        name: String,
        first: VarKind,
        second: VarKind,
        chart: String,
    },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("scenario has unresolved choices for: {}", .0.join(", "))]
    Unresolved(Vec<String>),
    #[error("{path}: {message}")]
    Runtime { path: String, message: String },
    #[error("replay at t={time}: {message}")]
    Replay { time: i64, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartRole {
    Timer,
    Resource,
    Guideline,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chart {
    pub role: ChartRole,
    pub model: StatechartModel,
}

impl Chart {
    pub fn new(role: ChartRole, model: StatechartModel) -> Self {
        Chart { role, model }
    }
}

/// Charts in execution order plus the merged variable declarations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Composition {
    charts: Vec<Chart>,
    shared_variables: Vec<VariableDecl>,
}

impl Composition {
    pub fn new(charts: Vec<Chart>) -> Result<Self, SimError> {
        Self::with_shared(charts, &[])
    }

    /// Like [`Composition::new`], also merging `extra` declarations (which
    /// must agree in kind with the charts').
    pub fn with_shared(charts: Vec<Chart>, extra: &[VariableDecl]) -> Result<Self, SimError> {
        let mut names = BTreeSet::new();
        let mut last_role = ChartRole::Timer;
        let mut shared: Vec<VariableDecl> = Vec::new();
        let mut merge = |decl: &VariableDecl, chart: &str| -> Result<(), SimError> {
            match shared.iter().find(|v| v.name == decl.name) {
                Some(existing) if existing.kind != decl.kind => Err(SimError::InconsistentVariable {
                    name: decl.name.clone(),
                    first: existing.kind,
                    second: decl.kind,
                    chart: chart.to_string(),
                }),
                Some(_) => Ok(()),
                None => {
                    shared.push(decl.clone());
                    Ok(())
                }
            }
        };
        for chart in &charts {
            let name = &chart.model.name;
            let diagnostics: Vec<Diagnostic> = validate_model(&chart.model)
                .into_iter()
                .filter(Diagnostic::is_error)
                .collect();
            if !diagnostics.is_empty() {
                return Err(SimError::InvalidChart {
                    chart: name.clone(),
                    diagnostics,
                });
            }
            if !names.insert(name.clone()) || name == SCENARIO_SOURCE {
                return Err(SimError::DuplicateChart(name.clone()));
            }
            if chart.role < last_role {
                return Err(SimError::ChartOrder {
                    chart: name.clone(),
                    role: chart.role,
                });
            }
            last_role = chart.role;
            for v in &chart.model.variables {
                merge(v, name)?;
            }
        }
        for v in extra {
            merge(v, "shared declarations")?;
        }
        Ok(Composition {
            charts,
            shared_variables: shared,
        })
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, name: &str) -> Option<&Chart> {
        self.charts.iter().find(|c| c.model.name == name)
    }

    pub fn shared_variables(&self) -> &[VariableDecl] {
        &self.shared_variables
    }

    pub fn variable_kind(&self, name: &str) -> Option<VarKind> {
        self.shared_variables.iter().find(|v| v.name == name).map(|v| v.kind)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub t: i64,
    pub var: String,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Choice {
    pub var: String,
    pub domain: Vec<Value>,
}

fn default_horizon() -> i64 {
    DEFAULT_HORIZON
}

/// Initial values, timed injections and finite nondeterministic choices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub initial: BTreeMap<String, Value>,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub choices: Vec<Choice>,
    #[serde(default = "default_horizon")]
    pub horizon: i64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            initial: BTreeMap::new(),
            injections: Vec::new(),
            choices: Vec::new(),
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn is_resolved(&self) -> bool {
        self.choices.is_empty()
    }

    /// Check that every referenced variable is declared with a matching kind.
    pub fn validate(&self, composition: &Composition) -> Result<(), SimError> {
        let check = |var: &str, value: Value, what: &str| -> Result<(), SimError> {
            match composition.variable_kind(var) {
                None => Err(SimError::Scenario(format!(
                    "{what} references undeclared variable `{var}`"
                ))),
                Some(kind) if kind != value.kind() => Err(SimError::Scenario(format!(
                    "{what} gives {} value {value} to {kind} variable `{var}`",
                    value.kind()
                ))),
                Some(_) => Ok(()),
            }
        };
        if self.horizon < 0 {
            return Err(SimError::Scenario("horizon must not be negative".into()));
        }
        for (var, value) in &self.initial {
            check(var, *value, "initial")?;
        }
        for inj in &self.injections {
            if inj.t < 0 || inj.t > self.horizon {
                return Err(SimError::Scenario(format!(
                    "injection of `{}` at t={} lies outside [0, {}]",
                    inj.var, inj.t, self.horizon
                )));
            }
            check(&inj.var, inj.value, "injection")?;
        }
        for choice in &self.choices {
            if choice.domain.is_empty() {
                return Err(SimError::Scenario(format!(
                    "choice `{}` has an empty domain",
                    choice.var
                )));
            }
            for v in &choice.domain {
                check(&choice.var, *v, "choice")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimState {
    /// Active state per chart name.
    pub active: BTreeMap<String, String>,
    pub valuation: BTreeMap<String, Value>,
    /// Macro-step clock in minutes.
    pub time: i64,
    pub pending_events: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredTransition {
    pub source: String,
    pub target: String,
    /// Declaration index of the transition in its chart.
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDelta {
    pub var: String,
    pub value: Value,
}

/// What one chart (or the scenario) did during a step. Only assignments
/// that changed a value are recorded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartActivity {
    pub chart: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fired: Option<FiredTransition>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sets: Vec<VariableDelta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raised: Vec<String>,
}

impl ChartActivity {
    fn new(chart: &str) -> Self {
        ChartActivity {
            chart: chart.to_string(),
            fired: None,
            sets: Vec::new(),
            raised: Vec::new(),
        }
    }

    fn is_empty(&self) -> bool {
        self.fired.is_none() && self.sets.is_empty() && self.raised.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub time: i64,
    pub activity: Vec<ChartActivity>,
}

impl StepReport {
    pub fn fired(&self, chart: &str) -> Option<&FiredTransition> {
        self.activity
            .iter()
            .find(|a| a.chart == chart)
            .and_then(|a| a.fired.as_ref())
    }
}

/// Initialization report followed by one report per macro-step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepReport>,
}

impl Trace {
    /// One line per chart activity:
    /// `t=<minute> chart=<name> fire=<src>-><dst> set <var>=<val> raise <event>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            for a in &step.activity {
                let _ = write!(out, "t={} chart={}", step.time, a.chart);
                if let Some(f) = &a.fired {
                    let _ = write!(out, " fire={}->{}", f.source, f.target);
                }
                for d in &a.sets {
                    let _ = write!(out, " set {}={}", d.var, d.value);
                }
                for e in &a.raised {
                    let _ = write!(out, " raise {e}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// First minute at which `chart` entered `state` through a transition.
    pub fn entered_at(&self, chart: &str, state: &str) -> Option<i64> {
        self.steps
            .iter()
            .find(|s| s.fired(chart).is_some_and(|f| f.target == state && f.source != state))
            .map(|s| s.time)
    }
}

struct ChartIndex {
    states: HashMap<String, usize>,
    /// Outgoing transition indices per state, by ascending priority.
    outgoing: Vec<Vec<usize>>,
}

/// Executes one resolved scenario over a composition.
pub struct Simulator<'c> {
    composition: &'c Composition,
    scenario: Scenario,
    index: Vec<ChartIndex>,
    injections: BTreeMap<i64, Vec<(String, Value)>>,
    kinds: HashMap<String, VarKind>,
}

enum Selection {
    Auto,
    Forced(Option<usize>),
}

impl<'c> Simulator<'c> {
    pub fn new(composition: &'c Composition, scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate(composition)?;
        if !scenario.is_resolved() {
            return Err(SimError::Unresolved(
                scenario.choices.iter().map(|c| c.var.clone()).collect(),
            ));
        }
        let index = composition
            .charts
            .iter()
            .map(|c| {
                let m = &c.model;
                let states: HashMap<String, usize> =
                    m.states.iter().enumerate().map(|(i, s)| (s.name.clone(), i)).collect();
                let mut outgoing = vec![Vec::new(); m.states.len()];
                for (ti, t) in m.transitions.iter().enumerate() {
                    outgoing[states[&t.source]].push(ti);
                }
                for list in &mut outgoing {
                    list.sort_by_key(|&ti| m.transitions[ti].priority);
                }
                ChartIndex { states, outgoing }
            })
            .collect();
        let mut injections: BTreeMap<i64, Vec<(String, Value)>> = BTreeMap::new();
        for inj in &scenario.injections {
            injections.entry(inj.t).or_default().push((inj.var.clone(), inj.value));
        }
        Ok(Simulator {
            composition,
            scenario: scenario.clone(),
            index,
            injections,
            kinds: composition
                .shared_variables
                .iter()
                .map(|v| (v.name.clone(), v.kind))
                .collect(),
        })
    }

    pub fn composition(&self) -> &Composition {
        self.composition
    }

    /// All charts in their initial states with initial entry actions run.
    pub fn init(&self) -> Result<(SimState, StepReport), SimError> {
        let mut state = SimState {
            active: BTreeMap::new(),
            valuation: self
                .composition
                .shared_variables
                .iter()
                .map(|v| (v.name.clone(), v.initial))
                .collect(),
            time: 0,
            pending_events: BTreeSet::new(),
        };
        for (var, value) in &self.scenario.initial {
            state.valuation.insert(var.clone(), *value);
        }
        let mut report = StepReport {
            time: 0,
            activity: Vec::new(),
        };
        self.inject(&mut state, &mut report);
        for chart in &self.composition.charts {
            let m = &chart.model;
            state.active.insert(m.name.clone(), m.initial_state.clone());
            let mut act = ChartActivity::new(&m.name);
            let initial = m.state(&m.initial_state).expect("validated initial state");
            let path = format!("{}/{}", m.name, initial.name);
            self.run_guarded(&mut state, &mut act, &path, "entry", &initial.entry_actions)?;
            if !act.is_empty() {
                report.activity.push(act);
            }
        }
        state.pending_events.clear();
        Ok((state, report))
    }

    fn inject(&self, state: &mut SimState, report: &mut StepReport) {
        let Some(list) = self.injections.get(&state.time) else {
            return;
        };
        let mut act = ChartActivity::new(SCENARIO_SOURCE);
        for (var, value) in list {
            if state.valuation.insert(var.clone(), *value) != Some(*value) {
                act.sets.push(VariableDelta {
                    var: var.clone(),
                    value: *value,
                });
            }
        }
        if !act.is_empty() {
            report.activity.push(act);
        }
    }

    pub fn macro_step(&self, state: &mut SimState) -> Result<StepReport, SimError> {
        self.step_with(state, |_| Selection::Auto)
    }

    fn step_with(&self, state: &mut SimState, select: impl Fn(&str) -> Selection) -> Result<StepReport, SimError> {
        state.time += 1;
        let mut report = StepReport {
            time: state.time,
            activity: Vec::new(),
        };
        let mut injected = false;
        for (ci, chart) in self.composition.charts.iter().enumerate() {
            if chart.role != ChartRole::Timer && !injected {
                self.inject(state, &mut report);
                injected = true;
            }
            let act = self.cycle(ci, state, select(&chart.model.name))?;
            if !act.is_empty() {
                report.activity.push(act);
            }
        }
        if !injected {
            self.inject(state, &mut report);
        }
        state.pending_events.clear();
        Ok(report)
    }

    fn enabled(&self, model: &StatechartModel, ti: usize, state: &SimState) -> Result<bool, SimError> {
        let t = &model.transitions[ti];
        let triggered = match &t.trigger {
            None | Some(Trigger::Tick { .. }) => true,
            Some(Trigger::Event(e)) => state.pending_events.contains(e),
        };
        if !triggered {
            return Ok(false);
        }
        self.guard(&t.guard, state, || {
            format!("{}/transitions[{ti}] ({})/guard", model.name, t.label())
        })
    }

    fn guard(&self, guard: &Expr, state: &SimState, path: impl Fn() -> String) -> Result<bool, SimError> {
        eval_guard(guard, &state.valuation).map_err(|e: EvalError| SimError::Runtime {
            path: path(),
            message: e.to_string(),
        })
    }

    fn cycle(&self, ci: usize, state: &mut SimState, selection: Selection) -> Result<ChartActivity, SimError> {
        let model = &self.composition.charts[ci].model;
        let idx = &self.index[ci];
        let mut act = ChartActivity::new(&model.name);
        let current = idx.states[&state.active[&model.name]];
        let chosen = match selection {
            Selection::Forced(choice) => {
                if let Some(ti) = choice {
                    let ok = model
                        .transitions
                        .get(ti)
                        .is_some_and(|t| idx.states[&t.source] == current);
                    if !ok {
                        return Err(SimError::Replay {
                            time: state.time,
                            message: format!(
                                "chart `{}` cannot fire transition {ti} from `{}`",
                                model.name, model.states[current].name
                            ),
                        });
                    }
                }
                choice
            }
            Selection::Auto => {
                let mut found = None;
                for &ti in &idx.outgoing[current] {
                    if self.enabled(model, ti, state)? {
                        found = Some(ti);
                        break;
                    }
                }
                found
            }
        };
        let Some(ti) = chosen else {
            return Ok(act);
        };
        let t = &model.transitions[ti];
        act.fired = Some(FiredTransition {
            source: t.source.clone(),
            target: t.target.clone(),
            index: ti,
        });
        let source = &model.states[current];
        let path = format!("{}/{}", model.name, source.name);
        self.run_guarded(state, &mut act, &path, "exit", &source.exit_actions)?;
        let tpath = format!("{}/transitions[{ti}] ({})", model.name, t.label());
        for (j, a) in t.actions.iter().enumerate() {
            self.exec(state, &mut act, &format!("{tpath}/actions[{j}]"), a)?;
        }
        state.active.insert(model.name.clone(), t.target.clone());
        let target = &model.states[idx.states[&t.target]];
        let path = format!("{}/{}", model.name, target.name);
        self.run_guarded(state, &mut act, &path, "entry", &target.entry_actions)?;
        Ok(act)
    }

    fn run_guarded(
        &self,
        state: &mut SimState,
        act: &mut ChartActivity,
        base: &str,
        keyword: &str,
        actions: &[GuardedAction],
    ) -> Result<(), SimError> {
        for (i, ga) in actions.iter().enumerate() {
            let path = format!("{base}/{keyword}[{i}]");
            if let Some(g) = &ga.guard {
                if !self.guard(g, state, || format!("{path}/guard"))? {
                    continue;
                }
            }
            self.exec(state, act, &path, &ga.action)?;
        }
        Ok(())
    }

    fn exec(&self, state: &mut SimState, act: &mut ChartActivity, path: &str, action: &Action) -> Result<(), SimError> {
        match action {
            Action::Raise(e) => {
                state.pending_events.insert(e.clone());
                act.raised.push(e.clone());
            }
            Action::Assign { target, value } => {
                let runtime = |message: String| SimError::Runtime {
                    path: path.to_string(),
                    message,
                };
                let Some(&kind) = self.kinds.get(target) else {
                    return Err(runtime(format!("assignment to undeclared variable `{target}`")));
                };
                let v = crate::model::eval_expr(value, &state.valuation).map_err(|e| runtime(e.to_string()))?;
                if v.kind() != kind {
                    return Err(runtime(format!(
                        "cannot assign {} to {kind} variable `{target}`",
                        v.kind()
                    )));
                }
                if state.valuation.insert(target.clone(), v) != Some(v) {
                    act.sets.push(VariableDelta {
                        var: target.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Run from a fresh initialization until the clock reaches `horizon`.
    pub fn run(&self, horizon: i64) -> Result<Trace, SimError> {
        let (mut state, first) = self.init()?;
        let mut trace = Trace { steps: vec![first] };
        self.run_from(&mut state, horizon, &mut trace)?;
        Ok(trace)
    }

    pub fn run_from(&self, state: &mut SimState, horizon: i64, trace: &mut Trace) -> Result<(), SimError> {
        while state.time < horizon {
            trace.steps.push(self.macro_step(state)?);
        }
        Ok(())
    }

    /// Re-execute the fired transitions recorded in `trace`, ignoring guards,
    /// and return the trace this produces.
    pub fn replay(&self, trace: &Trace) -> Result<Trace, SimError> {
        let (mut state, first) = self.init()?;
        let mut out = Trace { steps: vec![first] };
        for step in trace.steps.iter().skip(1) {
            if step.time != state.time + 1 {
                return Err(SimError::Replay {
                    time: step.time,
                    message: format!("expected step t={}", state.time + 1),
                });
            }
            let report = self.step_with(&mut state, |chart| {
                Selection::Forced(step.fired(chart).map(|f| f.index))
            })?;
            out.steps.push(report);
        }
        Ok(out)
    }
}

/// Build the simulator and initial state for a resolved scenario.
pub fn init_composition<'c>(
    composition: &'c Composition,
    scenario: &Scenario,
) -> Result<(Simulator<'c>, SimState), SimError> {
    let sim = Simulator::new(composition, scenario)?;
    let (state, _) = sim.init()?;
    Ok((sim, state))
}

/// Simulate a resolved scenario to `horizon`.
pub fn run(composition: &Composition, scenario: &Scenario, horizon: i64) -> Result<Trace, SimError> {
    Simulator::new(composition, scenario)?.run(horizon)
}
