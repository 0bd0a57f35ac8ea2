//! Resource annotation and guard strengthening.
//!
//! [`annotate`] attaches `//@RES:` annotations to every state and transition
//! that raises an action found in the resource map. [`integrate`] then
//! conjoins `RES.<r>` onto guards: a state's annotation strengthens all of
//! its incoming transitions, and a transition's own annotation strengthens
//! itself. States are processed before transitions, so a transition that is
//! both incoming to an annotated state and annotated itself receives the
//! state's conjuncts first.

use thiserror::Error;

use crate::model::{Annotation, Diagnostic, Element, Expr, StatechartModel, VarKind};
use crate::resgen::{resource_var, ResourceMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeaveError {
    #[error("{path}: resource `{resource}` has no declared `RES.{resource}` boolean; synthesize the resource interface first")]
    UndeclaredResource { path: String, resource: String },
}

fn annotate_element(element: &mut impl Element, map: &ResourceMap) {
    let mut resources = Vec::new();
    for action in element.raised_events() {
        if let Some(found) = map.get(action) {
            resources.extend(found.iter().cloned());
        }
    }
    if resources.is_empty() {
        return;
    }
    let annotation = Annotation { resources };
    // Re-running over an already annotated model must not stack copies.
    if !element.annotations().contains(&annotation) {
        element.annotations_mut().push(annotation);
    }
}

/// Attach resource annotations derived from `map`. Nothing but annotations
/// changes, and running it twice adds nothing the second time.
pub fn annotate(model: &StatechartModel, map: &ResourceMap) -> StatechartModel {
    let mut out = model.clone();
    for state in &mut out.states {
        annotate_element(state, map);
    }
    for transition in &mut out.transitions {
        annotate_element(transition, map);
    }
    out
}

/// All resources annotated on an element, annotations concatenated in order.
pub fn collect_annotations(element: &impl Element) -> Vec<String> {
    element
        .annotations()
        .iter()
        .flat_map(|a| a.resources.iter().cloned())
        .collect()
}

/// `guard && RES.r1 && ... && RES.rn`, left-associated.
pub fn strengthen_guard(guard: &Expr, resources: &[String]) -> Expr {
    resources
        .iter()
        .fold(guard.clone(), |acc, r| Expr::and(acc, Expr::var(resource_var(r))))
}

fn require_declared(model: &StatechartModel, path: &str, resources: &[String]) -> Result<(), WeaveError> {
    for r in resources {
        let declared = model
            .variable(&resource_var(r))
            .is_some_and(|v| v.kind == VarKind::Boolean);
        if !declared {
            return Err(WeaveError::UndeclaredResource {
                path: path.to_string(),
                resource: r.clone(),
            });
        }
    }
    Ok(())
}

/// Strengthen guards from annotations. Returns the integrated model plus
/// warnings (an annotated initial state has no incoming edge to guard at
/// start-up).
pub fn integrate(model: &StatechartModel) -> Result<(StatechartModel, Vec<Diagnostic>), WeaveError> {
    let mut out = model.clone();
    let mut warnings = Vec::new();

    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); model.states.len()];
    for (i, t) in model.transitions.iter().enumerate() {
        if let Some(target) = model.state_index(&t.target) {
            incoming[target].push(i);
        }
    }

    for (si, state) in model.states.iter().enumerate() {
        let resources = collect_annotations(state);
        if resources.is_empty() {
            continue;
        }
        let path = format!("{}/states[{si}] ({})", model.name, state.name);
        require_declared(model, &path, &resources)?;
        if state.name == model.initial_state {
            warnings.push(Diagnostic::warning(
                path,
                "initial state is annotated; its resources are not checked when the chart starts",
            ));
        }
        for &ti in &incoming[si] {
            let t = &mut out.transitions[ti];
            t.guard = strengthen_guard(&t.guard, &resources);
        }
    }

    for (ti, t) in model.transitions.iter().enumerate() {
        let resources = collect_annotations(t);
        if resources.is_empty() {
            continue;
        }
        let path = format!("{}/transitions[{ti}] ({})", model.name, t.label());
        require_declared(model, &path, &resources)?;
        let target = &mut out.transitions[ti];
        target.guard = strengthen_guard(&target.guard, &resources);
    }

    Ok((out, warnings))
}

/// Add `decls` to `model.variables`, skipping names already declared.
pub fn declare_variables(model: &StatechartModel, decls: &[crate::model::VariableDecl]) -> StatechartModel {
    let mut out = model.clone();
    for d in decls {
        if out.variable(&d.name).is_none() {
            out.variables.push(d.clone());
        }
    }
    out
}
