use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::expr::{type_of, Expr, VarKind};
use super::parse::{is_identifier, is_resource_name, is_simple_identifier, RESERVED};
use super::{Action, GuardedAction, StatechartModel, Trigger};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Element path, e.g. `Stroke/transitions[2] (NeuAss->CT)/guard`.
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{level}: {}: {}", self.path, self.message)
    }
}

struct Checker<'m> {
    model: &'m StatechartModel,
    kinds: HashMap<&'m str, VarKind>,
    out: Vec<Diagnostic>,
}

impl<'m> Checker<'m> {
    fn error(&mut self, path: String, message: impl Into<String>) {
        self.out.push(Diagnostic::error(path, message));
    }

    fn root(&self) -> &str {
        &self.model.name
    }

    fn check_bool_expr(&mut self, path: String, expr: &Expr) {
        let kinds = &self.kinds;
        match type_of(expr, &|n: &str| kinds.get(n).copied()) {
            Ok(VarKind::Boolean) => {}
            Ok(other) => self.error(path, format!("expected a boolean expression, found {other}")),
            Err(e) => self.error(path, e.to_string()),
        }
    }

    fn check_action(&mut self, path: String, action: &Action) {
        match action {
            Action::Raise(event) => {
                if !self.model.events.iter().any(|e| e == event) {
                    self.error(path, format!("raised event `{event}` is not declared"));
                }
            }
            Action::Assign { target, value } => {
                let Some(&kind) = self.kinds.get(target.as_str()) else {
                    self.error(path, format!("assignment to undeclared variable `{target}`"));
                    return;
                };
                let kinds = &self.kinds;
                match type_of(value, &|n: &str| kinds.get(n).copied()) {
                    Ok(k) if k == kind => {}
                    Ok(k) => self.error(path, format!("cannot assign {k} value to {kind} variable `{target}`")),
                    Err(e) => self.error(path, e.to_string()),
                }
            }
        }
    }

    fn check_guarded(&mut self, base: &str, keyword: &str, actions: &[GuardedAction]) {
        for (i, ga) in actions.iter().enumerate() {
            let path = format!("{base}/{keyword}[{i}]");
            if let Some(g) = &ga.guard {
                self.check_bool_expr(format!("{path}/guard"), g);
            }
            self.check_action(path, &ga.action);
        }
    }
}

fn check_name(out: &mut Vec<Diagnostic>, path: String, what: &str, name: &str, dotted: bool) {
    let ok = if dotted {
        is_identifier(name)
    } else {
        is_simple_identifier(name)
    };
    if !ok || RESERVED.contains(&name) {
        out.push(Diagnostic::error(path, format!("invalid {what} name `{name}`")));
    }
}

fn duplicates<'a>(
    out: &mut Vec<Diagnostic>,
    root: &str,
    section: &str,
    what: &str,
    names: impl Iterator<Item = &'a str>,
) {
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, name) in names.enumerate() {
        if let Some(first) = seen.get(name) {
            out.push(Diagnostic::error(
                format!("{root}/{section}[{i}]"),
                format!("duplicate {what} name `{name}` ({section}[{first}] and {section}[{i}])"),
            ));
        } else {
            seen.insert(name, i);
        }
    }
}

/// Check every structural and typing invariant of a model. An empty result
/// means the model is valid.
pub fn validate_model(model: &StatechartModel) -> Vec<Diagnostic> {
    let mut c = Checker {
        model,
        kinds: model.variables.iter().map(|v| (v.name.as_str(), v.kind)).collect(),
        out: Vec::new(),
    };
    let root = c.root().to_string();

    check_name(&mut c.out, root.clone(), "chart", &model.name, false);

    duplicates(
        &mut c.out,
        &root,
        "variables",
        "variable",
        model.variables.iter().map(|v| v.name.as_str()),
    );
    duplicates(
        &mut c.out,
        &root,
        "events",
        "event",
        model.events.iter().map(String::as_str),
    );
    duplicates(
        &mut c.out,
        &root,
        "states",
        "state",
        model.states.iter().map(|s| s.name.as_str()),
    );

    for (i, v) in model.variables.iter().enumerate() {
        let path = format!("{root}/variables[{i}] ({})", v.name);
        check_name(&mut c.out, path.clone(), "variable", &v.name, true);
        if v.initial.kind() != v.kind {
            c.error(
                path,
                format!("initial value {} does not match declared kind {}", v.initial, v.kind),
            );
        }
    }
    for (i, e) in model.events.iter().enumerate() {
        check_name(&mut c.out, format!("{root}/events[{i}]"), "event", e, false);
    }

    if model.states.is_empty() {
        c.error(root.clone(), "a chart needs at least one state");
    }
    if model.state(&model.initial_state).is_none() {
        c.error(
            format!("{root}/initial"),
            format!("initial state `{}` does not exist", model.initial_state),
        );
    }

    for (i, s) in model.states.iter().enumerate() {
        let base = format!("{root}/states[{i}] ({})", s.name);
        check_name(&mut c.out, base.clone(), "state", &s.name, false);
        c.check_guarded(&base, "entry", &s.entry_actions);
        c.check_guarded(&base, "exit", &s.exit_actions);
        check_annotations(&mut c.out, &base, &s.annotations);
    }

    let mut priorities: HashMap<(&str, u32), usize> = HashMap::new();
    for (i, t) in model.transitions.iter().enumerate() {
        let base = format!("{root}/transitions[{i}] ({})", t.label());
        for (end, name) in [("source", &t.source), ("target", &t.target)] {
            if model.state(name).is_none() {
                c.error(base.clone(), format!("{end} state `{name}` does not exist"));
            }
        }
        if let Some(Trigger::Event(e)) = &t.trigger {
            if !model.events.contains(e) {
                c.error(
                    format!("{base}/trigger"),
                    format!("trigger event `{e}` is not declared"),
                );
            }
        }
        c.check_bool_expr(format!("{base}/guard"), &t.guard);
        for (j, a) in t.actions.iter().enumerate() {
            c.check_action(format!("{base}/actions[{j}]"), a);
        }
        check_annotations(&mut c.out, &base, &t.annotations);
        if let Some(first) = priorities.insert((t.source.as_str(), t.priority), i) {
            c.error(
                format!("{base}/priority"),
                format!(
                    "priority {} already used by transitions[{first}] from `{}`",
                    t.priority, t.source
                ),
            );
        }
    }
    c.out
}

fn check_annotations(out: &mut Vec<Diagnostic>, base: &str, annotations: &[super::Annotation]) {
    for (i, a) in annotations.iter().enumerate() {
        let path = format!("{base}/annotations[{i}]");
        if a.resources.is_empty() {
            out.push(Diagnostic::error(path.clone(), "annotation lists no resources"));
        }
        for r in &a.resources {
            if !is_resource_name(r) {
                out.push(Diagnostic::error(path.clone(), format!("invalid resource name `{r}`")));
            }
        }
    }
}
