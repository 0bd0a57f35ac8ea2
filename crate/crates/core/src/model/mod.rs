//! Flat statechart models: abstract syntax, expression language, the JSON
//! model document format and structural validation.

pub mod expr;
mod format;
pub mod parse;
mod validate;

use std::fmt;

pub use expr::{eval_expr, eval_guard, type_of, BinOp, EvalError, Expr, TypeError, Valuation, Value, VarKind};
pub use format::{parse_model, parse_model_unchecked, serialize_model, ModelError};
pub use validate::{validate_model, Diagnostic, Severity};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub kind: VarKind,
    pub initial: Value,
}

impl VariableDecl {
    pub fn boolean(name: impl Into<String>, initial: bool) -> Self {
        VariableDecl {
            name: name.into(),
            kind: VarKind::Boolean,
            initial: Value::Bool(initial),
        }
    }

    pub fn integer(name: impl Into<String>, initial: i64) -> Self {
        VariableDecl {
            name: name.into(),
            kind: VarKind::Integer,
            initial: Value::Int(initial),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Assign { target: String, value: Expr },
    Raise(String),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Assign { target, value } => write!(f, "{target} = {value}"),
            Action::Raise(event) => write!(f, "raise {event}"),
        }
    }
}

/// An entry or exit action, optionally guarded. `guard: None` prints as
/// `entry/ ...`, `Some(true)` as `entry[true]/ ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardedAction {
    pub guard: Option<Expr>,
    pub action: Action,
}

impl GuardedAction {
    pub fn unguarded(action: Action) -> Self {
        GuardedAction { guard: None, action }
    }

    pub fn guarded(guard: Expr, action: Action) -> Self {
        GuardedAction {
            guard: Some(guard),
            action,
        }
    }

    pub fn render(&self, keyword: &str) -> String {
        match &self.guard {
            Some(g) => format!("{keyword}[{g}]/ {}", self.action),
            None => format!("{keyword}/ {}", self.action),
        }
    }
}

/// Resources required by a state or transition, printed as `//@RES: r1, r2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub resources: Vec<String>,
}

impl Annotation {
    pub fn new<S: Into<String>>(resources: impl IntoIterator<Item = S>) -> Self {
        Annotation {
            resources: resources.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "//@RES: {}", self.resources.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Trigger {
    /// Periodic trigger. Every macro-step is one tick regardless of the period.
    Tick {
        seconds: u32,
    },
    Event(String),
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trigger::Tick { seconds } => write!(f, "every {seconds}s"),
            Trigger::Event(e) => f.write_str(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub name: String,
    pub entry_actions: Vec<GuardedAction>,
    pub exit_actions: Vec<GuardedAction>,
    pub annotations: Vec<Annotation>,
}

impl State {
    pub fn new(name: impl Into<String>) -> Self {
        State {
            name: name.into(),
            entry_actions: Vec::new(),
            exit_actions: Vec::new(),
            annotations: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub source: String,
    pub target: String,
    pub trigger: Option<Trigger>,
    pub guard: Expr,
    pub actions: Vec<Action>,
    pub annotations: Vec<Annotation>,
    /// Lower fires first. Defaults to the declaration index.
    pub priority: u32,
}

impl Transition {
    pub fn new(source: impl Into<String>, target: impl Into<String>, priority: u32) -> Self {
        Transition {
            source: source.into(),
            target: target.into(),
            trigger: None,
            guard: Expr::Bool(true),
            actions: Vec::new(),
            annotations: Vec::new(),
            priority,
        }
    }

    pub fn label(&self) -> String {
        format!("{}->{}", self.source, self.target)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StatechartModel {
    pub name: String,
    pub variables: Vec<VariableDecl>,
    pub events: Vec<String>,
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
    pub initial_state: String,
}

impl StatechartModel {
    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn state(&self, name: &str) -> Option<&State> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Indices of transitions whose target is `state`, in declaration order.
    pub fn incoming(&self, state: &str) -> impl Iterator<Item = usize> + '_ {
        let state = state.to_string();
        self.transitions
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.target == state)
            .map(|(i, _)| i)
    }
}

/// States and transitions: the elements that raise medical actions and
/// carry resource annotations.
pub trait Element {
    fn annotations(&self) -> &[Annotation];
    fn annotations_mut(&mut self) -> &mut Vec<Annotation>;
    /// Raised events in declaration order, duplicates preserved. For states
    /// these come from entry actions, for transitions from their actions.
    fn raised_events(&self) -> Vec<&str>;
}

impl Element for State {
    fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    fn annotations_mut(&mut self) -> &mut Vec<Annotation> {
        &mut self.annotations
    }

    fn raised_events(&self) -> Vec<&str> {
        self.entry_actions
            .iter()
            .filter_map(|ga| match &ga.action {
                Action::Raise(e) => Some(e.as_str()),
                Action::Assign { .. } => None,
            })
            .collect()
    }
}

impl Element for Transition {
    fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    fn annotations_mut(&mut self) -> &mut Vec<Annotation> {
        &mut self.annotations
    }

    fn raised_events(&self) -> Vec<&str> {
        self.actions
            .iter()
            .filter_map(|a| match a {
                Action::Raise(e) => Some(e.as_str()),
                Action::Assign { .. } => None,
            })
            .collect()
    }
}

/// Events raised by a state's entry actions or a transition's actions.
pub fn list_raised_actions(element: &impl Element) -> Vec<String> {
    element.raised_events().into_iter().map(String::from).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raised_actions_of_states_and_transitions() {
        let mut ct = State::new("CT");
        ct.entry_actions
            .push(GuardedAction::unguarded(Action::Raise("CTscan".into())));
        assert_eq!(list_raised_actions(&ct), vec!["CTscan"]);

        let mut t = Transition::new("tPAcheck", "tPA", 0);
        t.actions.push(Action::Raise("givetPA".into()));
        assert_eq!(list_raised_actions(&t), vec!["givetPA"]);

        assert!(list_raised_actions(&State::new("idle")).is_empty());
    }

    #[test]
    fn raised_actions_keep_duplicates_and_order() {
        let mut s = State::new("s");
        for e in ["a", "b", "a"] {
            s.entry_actions.push(GuardedAction::unguarded(Action::Raise(e.into())));
        }
        s.entry_actions.push(GuardedAction::unguarded(Action::Assign {
            target: "x".into(),
            value: Expr::Int(1),
        }));
        assert_eq!(list_raised_actions(&s), vec!["a", "b", "a"]);
    }

    #[test]
    fn guarded_action_rendering() {
        let ga = GuardedAction::guarded(
            parse::parse_expr("curT>200").unwrap(),
            Action::Assign {
                target: "RES.CT_machine".into(),
                value: Expr::Bool(true),
            },
        );
        assert_eq!(ga.render("entry"), "entry[curT>200]/ RES.CT_machine = true");
        let ga = GuardedAction::unguarded(Action::Raise("CTscan".into()));
        assert_eq!(ga.render("entry"), "entry/ raise CTscan");
    }
}
