//! JSON model documents.
//!
//! ```json
//! {
//!   "name": "Stroke",
//!   "variables": [{ "name": "curT", "type": "int", "initial": 0 }],
//!   "events": ["CTscan"],
//!   "states": [{ "name": "CT", "entry": ["entry/ raise CTscan"],
//!                "annotations": ["//@RES: CT_machine, CT_technician"] }],
//!   "transitions": [{ "source": "NeuAss", "target": "CT", "guard": "orderCT" }],
//!   "initial": "Start"
//! }
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::parse::{parse_action, parse_annotation, parse_expr, parse_guarded_action, parse_trigger, ParseError};
use super::validate::{validate_model, Diagnostic};
use super::{Expr, State, StatechartModel, Transition, Value, VarKind, VariableDecl};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Syntax {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("invalid model: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawVar {
    name: String,
    #[serde(rename = "type")]
    kind: VarKind,
    #[serde(default)]
    initial: Option<Value>,
}

impl From<&VariableDecl> for RawVar {
    fn from(v: &VariableDecl) -> Self {
        RawVar {
            name: v.name.clone(),
            kind: v.kind,
            initial: Some(v.initial),
        }
    }
}

impl From<RawVar> for VariableDecl {
    fn from(raw: RawVar) -> Self {
        VariableDecl {
            initial: raw.initial.unwrap_or(Value::default_for(raw.kind)),
            name: raw.name,
            kind: raw.kind,
        }
    }
}

impl Serialize for VariableDecl {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawVar::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for VariableDecl {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        RawVar::deserialize(d).map(Into::into)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    entry: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    exit: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trigger: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    annotations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    priority: Option<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(default)]
    variables: Vec<VariableDecl>,
    #[serde(default)]
    events: Vec<String>,
    states: Vec<RawState>,
    #[serde(default)]
    transitions: Vec<RawTransition>,
    initial: String,
}

fn syntax<T>(path: String, r: Result<T, ParseError>) -> Result<T, ModelError> {
    r.map_err(|source| ModelError::Syntax { path, source })
}

fn build(raw: RawModel) -> Result<StatechartModel, ModelError> {
    let root = raw.name.clone();
    let mut states = Vec::with_capacity(raw.states.len());
    for (i, rs) in raw.states.into_iter().enumerate() {
        let base = format!("{root}/states[{i}] ({})", rs.name);
        let mut state = State::new(rs.name);
        for (j, src) in rs.entry.iter().enumerate() {
            state.entry_actions.push(syntax(
                format!("{base}/entry[{j}]"),
                parse_guarded_action(src, "entry"),
            )?);
        }
        for (j, src) in rs.exit.iter().enumerate() {
            state
                .exit_actions
                .push(syntax(format!("{base}/exit[{j}]"), parse_guarded_action(src, "exit"))?);
        }
        for (j, src) in rs.annotations.iter().enumerate() {
            state
                .annotations
                .push(syntax(format!("{base}/annotations[{j}]"), parse_annotation(src))?);
        }
        states.push(state);
    }

    let mut transitions = Vec::with_capacity(raw.transitions.len());
    for (i, rt) in raw.transitions.into_iter().enumerate() {
        let base = format!("{root}/transitions[{i}] ({}->{})", rt.source, rt.target);
        let default_priority = u32::try_from(i).unwrap_or(u32::MAX);
        let mut t = Transition::new(rt.source, rt.target, rt.priority.unwrap_or(default_priority));
        if let Some(src) = &rt.trigger {
            t.trigger = Some(syntax(format!("{base}/trigger"), parse_trigger(src))?);
        }
        if let Some(src) = &rt.guard {
            t.guard = syntax(format!("{base}/guard"), parse_expr(src))?;
        }
        for (j, src) in rt.actions.iter().enumerate() {
            t.actions
                .push(syntax(format!("{base}/actions[{j}]"), parse_action(src))?);
        }
        for (j, src) in rt.annotations.iter().enumerate() {
            t.annotations
                .push(syntax(format!("{base}/annotations[{j}]"), parse_annotation(src))?);
        }
        transitions.push(t);
    }

    Ok(StatechartModel {
        name: raw.name,
        variables: raw.variables,
        events: raw.events,
        states,
        transitions,
        initial_state: raw.initial,
    })
}

/// Parse a model document without running validation.
pub fn parse_model_unchecked(text: &str) -> Result<StatechartModel, ModelError> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| ModelError::Json {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    build(raw)
}

/// Parse and validate a model document.
pub fn parse_model(text: &str) -> Result<StatechartModel, ModelError> {
    let model = parse_model_unchecked(text)?;
    let errors: Vec<Diagnostic> = validate_model(&model)
        .into_iter()
        .filter(Diagnostic::is_error)
        .collect();
    if errors.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Invalid(errors))
    }
}

fn raw_of(model: &StatechartModel) -> RawModel {
    RawModel {
        name: model.name.clone(),
        variables: model.variables.clone(),
        events: model.events.clone(),
        states: model
            .states
            .iter()
            .map(|s| RawState {
                name: s.name.clone(),
                entry: s.entry_actions.iter().map(|a| a.render("entry")).collect(),
                exit: s.exit_actions.iter().map(|a| a.render("exit")).collect(),
                annotations: s.annotations.iter().map(ToString::to_string).collect(),
            })
            .collect(),
        transitions: model
            .transitions
            .iter()
            .enumerate()
            .map(|(i, t)| RawTransition {
                source: t.source.clone(),
                target: t.target.clone(),
                trigger: t.trigger.as_ref().map(ToString::to_string),
                guard: (t.guard != Expr::Bool(true)).then(|| t.guard.to_string()),
                actions: t.actions.iter().map(ToString::to_string).collect(),
                annotations: t.annotations.iter().map(ToString::to_string).collect(),
                priority: (u32::try_from(i).ok() != Some(t.priority)).then_some(t.priority),
            })
            .collect(),
        initial: model.initial_state.clone(),
    }
}

/// Serialize a model to its JSON document form (pretty-printed, trailing newline).
pub fn serialize_model(model: &StatechartModel) -> String {
    let mut out = serde_json::to_string_pretty(&raw_of(model)).expect("model serialization is infallible");
    out.push('\n');
    out
}
