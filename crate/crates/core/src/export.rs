//! Timed-automata export in the UPPAAL `.xta` text dialect, plus a `.q`
//! query sidecar.
//!
//! Each chart becomes one process template. Timer charts get a local clock
//! `x` with invariant `x<=1`; their edges wait for `x==1` and reset it, so one
//! edge firing corresponds to one minute. A transition's edge carries the
//! source's exit actions, the transition's actions and the target's entry
//! actions. A target with guarded entry actions splits every incoming edge
//! into one branch per guarded action; the guards must partition the
//! integers so exactly one branch is enabled. A single raised event becomes a
//! broadcast synchronization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Action, BinOp, Expr, GuardedAction, StatechartModel, Transition, Trigger, Value, VarKind};
use crate::sim::{init_composition, ChartRole, Composition, Scenario, SimError};
use crate::verify::Invariant;

/// Local clock of timer processes.
pub const CLOCK: &str = "x";

const KEYWORDS: &[&str] = &[
    "and",
    "assign",
    "bool",
    "break",
    "broadcast",
    "case",
    "chan",
    "clock",
    "commit",
    "committed",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "exists",
    "false",
    "for",
    "forall",
    "guard",
    "if",
    "imply",
    "init",
    "int",
    "meta",
    "not",
    "or",
    "priority",
    "process",
    "progress",
    "return",
    "scalar",
    "select",
    "state",
    "struct",
    "switch",
    "sum",
    "sync",
    "system",
    "trans",
    "true",
    "typedef",
    "urgent",
    "void",
    "while",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{chart}/transitions[{index}] ({label}): event-triggered transitions cannot be exported")]
    EventTrigger { chart: String, index: usize, label: String },
    #[error("{path}: guarded exit actions cannot be exported")]
    GuardedExit { path: String },
    #[error("{path}: an edge can synchronize on at most one raised event, found {}", .events.join(", "))]
    MultipleRaises { path: String, events: Vec<String> },
    #[error("{path}: guarded entry actions must partition the integers: {message}")]
    Partition { path: String, message: String },
    #[error("{path}: entry guard reads `{var}`, which the same edge assigns first")]
    EntryGuardDependency { path: String, var: String },
    #[error("names `{first}` and `{second}` both map to `{sanitized}`")]
    NameCollision {
        first: String,
        second: String,
        sanitized: String,
    },
    #[error("name `{0}` is reserved in the target dialect")]
    Keyword(String),
    #[error("name `{0}` contains `.`; enable name flattening to export it")]
    DottedName(String),
    #[error("computing initial values: {0}")]
    Init(SimError),
    #[error("produced document is malformed: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExportOptions {
    /// Map `.` in identifiers to `_`.
    pub flatten_names: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions { flatten_names: true }
    }
}

/// Injective identifier mapping for one composition.
struct Names {
    flatten: bool,
    global: HashMap<String, String>,
}

impl Names {
    fn sanitize(&self, name: &str) -> Result<String, ExportError> {
        let out = if self.flatten {
            name.replace('.', "_")
        } else if name.contains('.') {
            return Err(ExportError::DottedName(name.to_string()));
        } else {
            name.to_string()
        };
        if KEYWORDS.contains(&out.as_str()) {
            return Err(ExportError::Keyword(name.to_string()));
        }
        Ok(out)
    }

    fn build<'a>(flatten: bool, globals: impl IntoIterator<Item = &'a str>) -> Result<Self, ExportError> {
        let mut names = Names {
            flatten,
            global: HashMap::new(),
        };
        let mut inverse: BTreeMap<String, String> = BTreeMap::new();
        for name in globals {
            if names.global.contains_key(name) {
                continue;
            }
            let s = names.sanitize(name)?;
            if let Some(first) = inverse.get(&s) {
                return Err(ExportError::NameCollision {
                    first: first.clone(),
                    second: name.to_string(),
                    sanitized: s,
                });
            }
            inverse.insert(s.clone(), name.to_string());
            names.global.insert(name.to_string(), s);
        }
        Ok(names)
    }

    fn var(&self, name: &str) -> String {
        self.global.get(name).cloned().unwrap_or_else(|| name.to_string())
    }

    fn expr(&self, e: &Expr) -> String {
        e.map_vars(&|v: &str| self.var(v)).to_string()
    }
}

fn assign_label(names: &Names, target: &str, value: &Expr) -> String {
    let t = names.var(target);
    if let Expr::Binary {
        op: BinOp::Add,
        lhs,
        rhs,
    } = value
    {
        if matches!((&**lhs, &**rhs), (Expr::Var(v), Expr::Int(1)) if v == target) {
            return format!("{t}++");
        }
    }
    format!("{t} = {}", names.expr(value))
}

/// Guard over one integer variable built from comparisons with literals.
fn single_var_breakpoints(e: &Expr, var: &mut Option<String>, points: &mut BTreeSet<i64>) -> bool {
    match e {
        Expr::Bool(_) => true,
        Expr::Not(inner) => single_var_breakpoints(inner, var, points),
        Expr::Binary { op, lhs, rhs } => match op {
            BinOp::And | BinOp::Or => {
                single_var_breakpoints(lhs, var, points) && single_var_breakpoints(rhs, var, points)
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => {
                let (name, c) = match (&**lhs, &**rhs) {
                    (Expr::Var(v), Expr::Int(c)) | (Expr::Int(c), Expr::Var(v)) => (v, *c),
                    _ => return false,
                };
                if var.get_or_insert_with(|| name.clone()) != name {
                    return false;
                }
                points.extend([c.saturating_sub(1), c, c.saturating_add(1)]);
                true
            }
            _ => false,
        },
        _ => false,
    }
}

/// Decide whether exactly one of `guards` holds for every integer value of
/// the single variable they compare against constants.
pub fn partitions_integers(guards: &[Expr]) -> Result<(), String> {
    let mut var = None;
    let mut points = BTreeSet::new();
    for g in guards {
        if !single_var_breakpoints(g, &mut var, &mut points) {
            return Err(format!(
                "`{g}` is not a comparison of one integer variable with constants"
            ));
        }
    }
    let (lo, hi) = match (points.first(), points.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0, 0),
    };
    points.extend([lo.saturating_sub(1), hi.saturating_add(1), i64::MIN, i64::MAX]);
    let name = var.unwrap_or_default();
    for &p in &points {
        let env = |v: &str| (v == name).then_some(Value::Int(p));
        let holding: Vec<usize> = guards
            .iter()
            .enumerate()
            .filter(|(_, g)| crate::model::eval_guard(g, &env).unwrap_or(false))
            .map(|(i, _)| i)
            .collect();
        if holding.len() != 1 {
            return Err(format!("at {name}={p}, {} guards hold", holding.len()));
        }
    }
    Ok(())
}

struct Edge {
    source: String,
    target: String,
    guard: Expr,
    sync: Option<String>,
    assigns: Vec<String>,
}

fn assigned_vars(actions: &[&Action]) -> BTreeSet<String> {
    actions
        .iter()
        .filter_map(|a| match a {
            Action::Assign { target, .. } => Some(target.clone()),
            Action::Raise(_) => None,
        })
        .collect()
}

fn edges_for(model: &StatechartModel, index: usize, t: &Transition, names: &Names) -> Result<Vec<Edge>, ExportError> {
    let path = format!("{}/transitions[{index}] ({})", model.name, t.label());
    if let Some(Trigger::Event(_)) = t.trigger {
        return Err(ExportError::EventTrigger {
            chart: model.name.clone(),
            index,
            label: t.label(),
        });
    }
    let source = model.state(&t.source).expect("validated source");
    let target = model.state(&t.target).expect("validated target");
    let mut prefix: Vec<&Action> = Vec::new();
    for (i, ga) in source.exit_actions.iter().enumerate() {
        if ga.guard.is_some() {
            return Err(ExportError::GuardedExit {
                path: format!("{}/{}/exit[{i}]", model.name, source.name),
            });
        }
        prefix.push(&ga.action);
    }
    prefix.extend(t.actions.iter());

    let guarded: Vec<usize> = (0..target.entry_actions.len())
        .filter(|&i| target.entry_actions[i].guard.is_some())
        .collect();
    let branches: Vec<Option<usize>> = if guarded.is_empty() {
        vec![None]
    } else {
        let guards: Vec<Expr> = guarded
            .iter()
            .map(|&i| target.entry_actions[i].guard.clone().expect("guarded"))
            .collect();
        partitions_integers(&guards).map_err(|message| ExportError::Partition {
            path: format!("{}/{}", model.name, target.name),
            message,
        })?;
        guarded.iter().copied().map(Some).collect()
    };

    let mut edges = Vec::with_capacity(branches.len());
    for branch in branches {
        let mut actions = prefix.clone();
        let mut guard = t.guard.clone();
        for (i, GuardedAction { guard: g, action }) in target.entry_actions.iter().enumerate() {
            match g {
                None => actions.push(action),
                Some(g) if Some(i) == branch => {
                    let written = assigned_vars(&actions);
                    if let Some(var) = g.variables().into_iter().find(|v| written.contains(*v)) {
                        return Err(ExportError::EntryGuardDependency {
                            path: format!("{path} -> {}/entry[{i}]", target.name),
                            var: var.to_string(),
                        });
                    }
                    guard = if guard.is_true_literal() {
                        g.clone()
                    } else {
                        Expr::and(guard, g.clone())
                    };
                    actions.push(action);
                }
                Some(_) => {}
            }
        }
        let raised: Vec<String> = actions
            .iter()
            .filter_map(|a| match a {
                Action::Raise(e) => Some(e.clone()),
                Action::Assign { .. } => None,
            })
            .collect();
        if raised.len() > 1 {
            return Err(ExportError::MultipleRaises { path, events: raised });
        }
        let assigns = actions
            .iter()
            .filter_map(|a| match a {
                Action::Assign { target, value } => Some(assign_label(names, target, value)),
                Action::Raise(_) => None,
            })
            .collect();
        edges.push(Edge {
            source: t.source.clone(),
            target: t.target.clone(),
            guard,
            sync: raised.into_iter().next().map(|e| format!("{}!", names.var(&e))),
            assigns,
        });
    }
    Ok(edges)
}

fn raised_events(comp: &Composition) -> Vec<String> {
    let mut seen = Vec::new();
    let mut note = |a: &Action| {
        if let Action::Raise(e) = a {
            if !seen.contains(e) {
                seen.push(e.clone());
            }
        }
    };
    for c in comp.charts() {
        for s in &c.model.states {
            s.entry_actions
                .iter()
                .chain(&s.exit_actions)
                .for_each(|ga| note(&ga.action));
        }
        for t in &c.model.transitions {
            t.actions.iter().for_each(&mut note);
        }
    }
    seen
}

fn write_process(out: &mut String, model: &StatechartModel, timer: bool, names: &Names) -> Result<(), ExportError> {
    let mut locals = BTreeMap::new();
    for s in &model.states {
        let n = names.sanitize(&s.name)?;
        if let Some(first) = locals.insert(n.clone(), s.name.clone()) {
            return Err(ExportError::NameCollision {
                first,
                second: s.name.clone(),
                sanitized: n,
            });
        }
    }
    let loc = |s: &str| names.sanitize(s).expect("checked above");
    let _ = writeln!(out, "process {}() {{", names.sanitize(&model.name)?);
    if timer {
        let _ = writeln!(out, "clock {CLOCK};");
    }
    out.push_str("state\n");
    let count = model.states.len();
    for (i, s) in model.states.iter().enumerate() {
        let inv = if timer {
            format!(" {{{CLOCK}<=1}}")
        } else {
            String::new()
        };
        let sep = if i + 1 == count { ';' } else { ',' };
        let _ = writeln!(out, "    {}{inv}{sep}", loc(&s.name));
    }
    let _ = writeln!(out, "init {};", loc(&model.initial_state));

    let mut edges = Vec::new();
    for (i, t) in model.transitions.iter().enumerate() {
        edges.extend(edges_for(model, i, t, names)?);
    }
    if !edges.is_empty() {
        out.push_str("trans\n");
        let count = edges.len();
        for (i, e) in edges.into_iter().enumerate() {
            let mut labels = Vec::new();
            let mut guard = e.guard;
            let mut assigns = e.assigns;
            if timer {
                let tick = Expr::binary(BinOp::Eq, Expr::var(CLOCK), Expr::Int(1));
                guard = if guard.is_true_literal() {
                    tick
                } else {
                    Expr::and(tick, guard)
                };
                assigns.insert(0, format!("{CLOCK} = 0"));
            }
            let guard = (!guard.is_true_literal()).then(|| names.expr(&guard));
            if let Some(g) = guard {
                labels.push(format!("guard {g};"));
            }
            if let Some(s) = e.sync {
                labels.push(format!("sync {s};"));
            }
            if !assigns.is_empty() {
                labels.push(format!("assign {};", assigns.join(", ")));
            }
            let sep = if i + 1 == count { ';' } else { ',' };
            let body = if labels.is_empty() {
                " ".to_string()
            } else {
                format!(" {} ", labels.join(" "))
            };
            let _ = writeln!(out, "    {} -> {} {{{body}}}{sep}", loc(&e.source), loc(&e.target));
        }
    }
    out.push_str("}\n");
    Ok(())
}

fn global_names(comp: &Composition) -> Vec<&str> {
    let mut all: Vec<&str> = comp.shared_variables().iter().map(|v| v.name.as_str()).collect();
    for c in comp.charts() {
        all.extend(c.model.events.iter().map(String::as_str));
        all.push(&c.model.name);
    }
    all
}

/// Render the composition as an `.xta` document.
pub fn export_xta(comp: &Composition, options: &ExportOptions) -> Result<String, ExportError> {
    let names = Names::build(options.flatten_names, global_names(comp))?;
    if comp.charts().iter().any(|c| c.role == ChartRole::Timer)
        && comp.shared_variables().iter().any(|v| names.var(&v.name) == CLOCK)
    {
        return Err(ExportError::NameCollision {
            first: CLOCK.to_string(),
            second: CLOCK.to_string(),
            sanitized: CLOCK.to_string(),
        });
    }
    let (_, init) = init_composition(comp, &Scenario::default()).map_err(ExportError::Init)?;

    let mut out = String::new();
    let title = comp
        .charts()
        .iter()
        .rev()
        .find(|c| c.role == ChartRole::Guideline)
        .or(comp.charts().last())
        .map(|c| c.model.name.as_str())
        .unwrap_or("empty");
    let _ = writeln!(out, "// {title}: {} charts", comp.charts().len());
    let events = raised_events(comp);
    for e in &events {
        let _ = writeln!(out, "broadcast chan {};", names.var(e));
    }
    for v in comp.shared_variables() {
        let ty = match v.kind {
            VarKind::Integer => "int",
            VarKind::Boolean => "bool",
        };
        let _ = writeln!(out, "{ty} {} = {};", names.var(&v.name), init.valuation[&v.name]);
    }
    let mut processes = Vec::new();
    for c in comp.charts() {
        out.push('\n');
        write_process(&mut out, &c.model, c.role == ChartRole::Timer, &names)?;
        processes.push(names.var(&c.model.name));
    }
    let _ = writeln!(out, "\nsystem {};", processes.join(", "));
    scan_xta(&out).map_err(ExportError::Malformed)?;
    Ok(out)
}

/// Render invariants as `A[] loc imply expr` queries, each preceded by a
/// `// NAME` comment line.
pub fn export_queries(
    comp: &Composition,
    properties: &[Invariant],
    options: &ExportOptions,
) -> Result<String, ExportError> {
    let names = Names::build(options.flatten_names, global_names(comp))?;
    let mut out = String::new();
    for p in properties {
        let _ = writeln!(out, "// {}", p.name);
        let predicate = names.expr(&p.predicate);
        match &p.location {
            Some((chart, state)) => {
                let _ = writeln!(
                    out,
                    "A[] {}.{} imply {predicate}",
                    names.var(chart),
                    names.sanitize(state)?
                );
            }
            None => {
                let _ = writeln!(out, "A[] {predicate}");
            }
        }
    }
    Ok(out)
}

/// Locations and edges found in one process template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessSummary {
    pub name: String,
    pub locations: usize,
    pub edges: usize,
}

fn identifiers(label: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let bytes = label.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(&label[start..i]);
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

fn balanced(text: &str) -> Result<(), String> {
    let mut stack = Vec::new();
    for (line, l) in text.lines().enumerate() {
        let code = l.split("//").next().unwrap_or("");
        for c in code.chars() {
            match c {
                '(' | '{' | '[' => stack.push(c),
                ')' | '}' | ']' => {
                    let open = stack.pop();
                    let want = match c {
                        ')' => '(',
                        '}' => '{',
                        _ => '[',
                    };
                    if open != Some(want) {
                        return Err(format!("line {}: unbalanced `{c}`", line + 1));
                    }
                }
                _ => {}
            }
        }
    }
    if stack.is_empty() {
        Ok(())
    } else {
        Err("unclosed bracket at end of document".into())
    }
}

/// Well-formedness scan of an exported document: balanced brackets,
/// sections in order, identifiers declared before use, edges between
/// declared locations, and a system line naming every process once.
pub fn scan_xta(text: &str) -> Result<Vec<ProcessSummary>, String> {
    balanced(text)?;
    let mut globals: BTreeSet<String> = BTreeSet::new();
    let mut channels: BTreeSet<String> = BTreeSet::new();
    let mut processes: Vec<ProcessSummary> = Vec::new();
    let mut system_seen = false;
    let mut lines = text.lines().enumerate().peekable();
    let err = |n: usize, m: String| format!("line {}: {m}", n + 1);

    while let Some((n, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if system_seen {
            return Err(err(n, "content after system line".into()));
        }
        if let Some(name) = line.strip_prefix("broadcast chan ").and_then(|r| r.strip_suffix(';')) {
            if !processes.is_empty() {
                return Err(err(n, "declaration after first process".into()));
            }
            channels.insert(name.to_string());
            globals.insert(name.to_string());
        } else if line.starts_with("int ") || line.starts_with("bool ") {
            if !processes.is_empty() {
                return Err(err(n, "declaration after first process".into()));
            }
            let decl = line.strip_suffix(';').ok_or_else(|| err(n, "missing `;`".into()))?;
            let name = decl
                .split_whitespace()
                .nth(1)
                .ok_or_else(|| err(n, "missing name".into()))?;
            if !globals.insert(name.to_string()) {
                return Err(err(n, format!("`{name}` declared twice")));
            }
        } else if let Some(rest) = line.strip_prefix("process ") {
            let name = rest
                .strip_suffix("() {")
                .ok_or_else(|| err(n, "malformed process header".into()))?
                .to_string();
            let summary = scan_process(&mut lines, &name, &globals, &channels)?;
            processes.push(summary);
        } else if let Some(rest) = line.strip_prefix("system ").and_then(|r| r.strip_suffix(';')) {
            let listed: Vec<&str> = rest.split(", ").collect();
            let declared: Vec<&str> = processes.iter().map(|p| p.name.as_str()).collect();
            if listed != declared {
                return Err(err(n, format!("system lists {listed:?}, processes are {declared:?}")));
            }
            system_seen = true;
        } else {
            return Err(err(n, format!("unexpected `{line}`")));
        }
    }
    if !system_seen {
        return Err("missing system line".into());
    }
    Ok(processes)
}

fn scan_process<'a>(
    lines: &mut std::iter::Peekable<impl Iterator<Item = (usize, &'a str)>>,
    name: &str,
    globals: &BTreeSet<String>,
    channels: &BTreeSet<String>,
) -> Result<ProcessSummary, String> {
    let err = |n: usize, m: String| format!("line {} ({name}): {m}", n + 1);
    let mut locals: BTreeSet<String> = BTreeSet::new();
    let mut locations: BTreeSet<String> = BTreeSet::new();
    let mut edges = 0;
    let mut section = "";
    let mut init = None;
    let known = |id: &str, locals: &BTreeSet<String>| {
        globals.contains(id) || locals.contains(id) || id == "true" || id == "false"
    };
    for (n, raw) in lines.by_ref() {
        let line = raw.trim();
        match line {
            "}" => {
                if init.is_none() {
                    return Err(err(n, "missing init".into()));
                }
                return Ok(ProcessSummary {
                    name: name.to_string(),
                    locations: locations.len(),
                    edges,
                });
            }
            "state" | "trans" => {
                section = if line == "state" { "state" } else { "trans" };
                continue;
            }
            _ => {}
        }
        if let Some(c) = line.strip_prefix("clock ").and_then(|r| r.strip_suffix(';')) {
            if !section.is_empty() {
                return Err(err(n, "clock after state section".into()));
            }
            locals.insert(c.to_string());
        } else if let Some(l) = line.strip_prefix("init ").and_then(|r| r.strip_suffix(';')) {
            if !locations.contains(l) {
                return Err(err(n, format!("init names unknown location `{l}`")));
            }
            init = Some(l.to_string());
        } else if section == "state" {
            let body = line.trim_end_matches([',', ';']);
            let (loc, invariant) = match body.split_once(' ') {
                Some((l, inv)) => (l, Some(inv)),
                None => (body, None),
            };
            if let Some(inv) = invariant {
                for id in identifiers(inv) {
                    if !known(id, &locals) {
                        return Err(err(n, format!("invariant uses undeclared `{id}`")));
                    }
                }
            }
            if !locations.insert(loc.to_string()) {
                return Err(err(n, format!("location `{loc}` declared twice")));
            }
        } else if section == "trans" {
            let (ends, labels) = line.split_once(" {").ok_or_else(|| err(n, "malformed edge".into()))?;
            let (src, dst) = ends.split_once(" -> ").ok_or_else(|| err(n, "malformed edge".into()))?;
            for l in [src, dst] {
                if !locations.contains(l) {
                    return Err(err(n, format!("edge uses unknown location `{l}`")));
                }
            }
            let labels = labels.trim_end_matches([',', ';']).trim_end_matches('}');
            for label in labels.split(';').map(str::trim).filter(|l| !l.is_empty()) {
                let (kind, body) = label
                    .split_once(' ')
                    .ok_or_else(|| err(n, format!("bad label `{label}`")))?;
                match kind {
                    "guard" | "assign" => {
                        for id in identifiers(body) {
                            if !known(id, &locals) {
                                return Err(err(n, format!("{kind} uses undeclared `{id}`")));
                            }
                        }
                    }
                    "sync" => {
                        let chan = body.strip_suffix(['!', '?']).unwrap_or(body);
                        if !channels.contains(chan) {
                            return Err(err(n, format!("sync on undeclared channel `{chan}`")));
                        }
                    }
                    other => return Err(err(n, format!("unknown label `{other}`"))),
                }
            }
            edges += 1;
        } else {
            return Err(err(n, format!("unexpected `{line}`")));
        }
    }
    Err(format!("process {name} is not closed"))
}
