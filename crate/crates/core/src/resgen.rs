//! Resource maps, availability schedules, and the charts synthesized from
//! them: a Timer chart that advances `curT`, one `RES.<r>` boolean per
//! resource, and one single-state availability chart per resource.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::model::parse::{is_resource_name, is_simple_identifier, RESERVED};
use crate::model::{Action, BinOp, Expr, GuardedAction, State, StatechartModel, Transition, Trigger, VariableDecl};

/// Name of the shared clock variable.
pub const CLOCK_VAR: &str = "curT";
pub const TIMER_CHART: &str = "Timer";
pub const TIMER_STATE: &str = "timer";
pub const DEFAULT_HORIZON: i64 = 720;

/// `RES.<resource>`
pub fn resource_var(resource: &str) -> String {
    format!("RES.{resource}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResourceError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate action `{action}`")]
    DuplicateAction { line: usize, action: String },
    #[error("line {line}: action `{action}` lists no resources")]
    EmptyResources { line: usize, action: String },
    #[error("line {line}: invalid resource name `{name}`{}", if .name.contains(' ') { " (replace spaces with underscores)" } else { "" })]
    InvalidResource { line: usize, name: String },
    #[error("line {line}: duplicate schedule for `{resource}`")]
    DuplicateResource { line: usize, resource: String },
    #[error("line {line}: window {window} for `{resource}`: {message}")]
    BadWindow {
        line: usize,
        resource: String,
        window: Window,
        message: String,
    },
    #[error("line {line}: windows {first} and {second} for `{resource}` overlap")]
    Overlap {
        line: usize,
        resource: String,
        first: Window,
        second: Window,
    },
}

/// Medical action (event name) to the ordered resources it needs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResourceMap {
    entries: Vec<(String, Vec<String>)>,
}

impl ResourceMap {
    /// Build from pairs; fails on the same conditions as [`parse_resource_map`].
    pub fn from_entries<A, R, I>(entries: I) -> Result<Self, ResourceError>
    where
        A: Into<String>,
        R: Into<String>,
        I: IntoIterator<Item = (A, Vec<R>)>,
    {
        let mut map = ResourceMap::default();
        for (i, (action, resources)) in entries.into_iter().enumerate() {
            map.insert(i + 1, action.into(), resources.into_iter().map(Into::into).collect())?;
        }
        Ok(map)
    }

    fn insert(&mut self, line: usize, action: String, resources: Vec<String>) -> Result<(), ResourceError> {
        if !is_simple_identifier(&action) || RESERVED.contains(&action.as_str()) {
            return Err(ResourceError::Syntax {
                line,
                message: format!("invalid action name `{action}`"),
            });
        }
        if self.get(&action).is_some() {
            return Err(ResourceError::DuplicateAction { line, action });
        }
        if resources.is_empty() {
            return Err(ResourceError::EmptyResources { line, action });
        }
        if let Some(bad) = resources.iter().find(|r| !is_resource_name(r)) {
            return Err(ResourceError::InvalidResource {
                line,
                name: bad.clone(),
            });
        }
        self.entries.push((action, resources));
        Ok(())
    }

    pub fn get(&self, action: &str) -> Option<&[String]> {
        self.entries
            .iter()
            .find(|(a, _)| a == action)
            .map(|(_, r)| r.as_slice())
    }

    pub fn entries(&self) -> &[(String, Vec<String>)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Unique resources in first-occurrence order.
    pub fn resources(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in self.entries.iter().flat_map(|(_, rs)| rs) {
            if !out.contains(&r.as_str()) {
                out.push(r);
            }
        }
        out
    }
}

impl fmt::Display for ResourceMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (action, resources) in &self.entries {
            writeln!(f, "{action}: {}", resources.join(", "))?;
        }
        Ok(())
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

/// Parse `action: r1, r2` lines. `#` starts a comment.
pub fn parse_resource_map(text: &str) -> Result<ResourceMap, ResourceError> {
    let mut map = ResourceMap::default();
    for (line, content) in content_lines(text) {
        let Some((action, list)) = content.split_once(':') else {
            return Err(ResourceError::Syntax {
                line,
                message: "expected `action: resource, ...`".into(),
            });
        };
        let resources: Vec<String> = if list.trim().is_empty() {
            Vec::new()
        } else {
            list.split(',').map(|r| r.trim().to_string()).collect()
        };
        map.insert(line, action.trim().to_string(), resources)?;
    }
    Ok(map)
}

/// An availability window `(start, end]` over integer minutes. A start
/// below zero means available from time 0; `end: None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Window {
    pub start_exclusive: i64,
    pub end_inclusive: Option<i64>,
}

impl Window {
    pub fn new(start_exclusive: i64, end_inclusive: Option<i64>) -> Self {
        Window {
            start_exclusive,
            end_inclusive,
        }
    }

    pub fn always() -> Self {
        Window::new(-1, None)
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start_exclusive < t && self.end_inclusive.is_none_or(|e| t <= e)
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end_inclusive {
            Some(e) => write!(f, "({}, {e})", self.start_exclusive),
            None => write!(f, "({}, inf)", self.start_exclusive),
        }
    }
}

/// Whether some window contains `t`.
pub fn is_available(windows: &[Window], t: i64) -> bool {
    windows.iter().any(|w| w.contains(t))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvailabilitySchedule {
    entries: BTreeMap<String, Vec<Window>>,
    pub horizon: i64,
}

impl Default for AvailabilitySchedule {
    fn default() -> Self {
        AvailabilitySchedule {
            entries: BTreeMap::new(),
            horizon: DEFAULT_HORIZON,
        }
    }
}

impl AvailabilitySchedule {
    pub fn new(horizon: i64) -> Self {
        AvailabilitySchedule {
            entries: BTreeMap::new(),
            horizon,
        }
    }

    /// Add a resource's windows, checking order, overlap and bounds.
    pub fn insert(&mut self, resource: &str, windows: Vec<Window>) -> Result<(), ResourceError> {
        self.insert_at(0, resource, windows)
    }

    fn insert_at(&mut self, line: usize, resource: &str, mut windows: Vec<Window>) -> Result<(), ResourceError> {
        if !is_resource_name(resource) {
            return Err(ResourceError::InvalidResource {
                line,
                name: resource.to_string(),
            });
        }
        if self.entries.contains_key(resource) {
            return Err(ResourceError::DuplicateResource {
                line,
                resource: resource.to_string(),
            });
        }
        let bad = |window: Window, message: &str| ResourceError::BadWindow {
            line,
            resource: resource.to_string(),
            window,
            message: message.to_string(),
        };
        for &w in &windows {
            if w.start_exclusive < -1 || w.end_inclusive.is_some_and(|e| e < 0) {
                return Err(bad(w, "negative bound (use -1 for available from time 0)"));
            }
            if w.end_inclusive.is_some_and(|e| w.start_exclusive >= e) {
                return Err(bad(w, "start must be below end"));
            }
        }
        windows.sort();
        for pair in windows.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.end_inclusive.is_none_or(|e| b.start_exclusive < e) {
                return Err(ResourceError::Overlap {
                    line,
                    resource: resource.to_string(),
                    first: a,
                    second: b,
                });
            }
        }
        self.entries.insert(resource.to_string(), windows);
        Ok(())
    }

    pub fn windows(&self, resource: &str) -> Option<&[Window]> {
        self.entries.get(resource).map(Vec::as_slice)
    }

    pub fn resources(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Windows for `resource`, falling back to never (or always, when
    /// `assume_available`) for resources the schedule does not mention.
    pub fn windows_or_default(&self, resource: &str, assume_available: bool) -> Vec<Window> {
        match self.windows(resource) {
            Some(w) => w.to_vec(),
            None if assume_available => vec![Window::always()],
            None => Vec::new(),
        }
    }

    fn check_horizon(&self) -> Result<(), ResourceError> {
        for (resource, windows) in &self.entries {
            for &w in windows {
                if w.start_exclusive > self.horizon || w.end_inclusive.is_some_and(|e| e > self.horizon) {
                    return Err(ResourceError::BadWindow {
                        line: 0,
                        resource: resource.clone(),
                        window: w,
                        message: format!("outside horizon {}", self.horizon),
                    });
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for AvailabilitySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "horizon: {}", self.horizon)?;
        for (resource, windows) in &self.entries {
            let list: Vec<String> = windows.iter().map(ToString::to_string).collect();
            writeln!(f, "{resource}: {}", list.join(", "))?;
        }
        Ok(())
    }
}

fn parse_bound(s: &str, line: usize) -> Result<Option<i64>, ResourceError> {
    let s = s.trim();
    if s == "inf" {
        return Ok(None);
    }
    s.parse::<i64>().map(Some).map_err(|_| ResourceError::Syntax {
        line,
        message: format!("invalid bound `{s}`"),
    })
}

fn parse_windows(list: &str, line: usize) -> Result<Vec<Window>, ResourceError> {
    let syntax = |message: String| ResourceError::Syntax { line, message };
    let mut windows = Vec::new();
    let mut rest = list.trim();
    while !rest.is_empty() {
        let inner = rest
            .strip_prefix('(')
            .ok_or_else(|| syntax(format!("expected `(` at `{rest}`")))?;
        let close = inner.find(')').ok_or_else(|| syntax("unterminated window".into()))?;
        let (start, end) = inner[..close]
            .split_once(',')
            .ok_or_else(|| syntax("window needs `(start, end)`".into()))?;
        let start = parse_bound(start, line)?.ok_or_else(|| syntax("window start cannot be `inf`".into()))?;
        windows.push(Window::new(start, parse_bound(end, line)?));
        rest = inner[close + 1..].trim_start();
        if let Some(after) = rest.strip_prefix(',') {
            rest = after.trim_start();
            if rest.is_empty() {
                return Err(syntax("trailing `,`".into()));
            }
        } else if !rest.is_empty() {
            return Err(syntax(format!("expected `,` at `{rest}`")));
        }
    }
    Ok(windows)
}

/// Parse `resource: (s1, e1), (s2, e2)` lines plus an optional `horizon: N`.
pub fn parse_schedule(text: &str) -> Result<AvailabilitySchedule, ResourceError> {
    let mut schedule = AvailabilitySchedule::default();
    for (line, content) in content_lines(text) {
        let Some((key, list)) = content.split_once(':') else {
            return Err(ResourceError::Syntax {
                line,
                message: "expected `resource: (start, end), ...`".into(),
            });
        };
        let key = key.trim();
        if key == "horizon" {
            schedule.horizon = list.trim().parse().map_err(|_| ResourceError::Syntax {
                line,
                message: format!("invalid horizon `{}`", list.trim()),
            })?;
            if schedule.horizon <= 0 {
                return Err(ResourceError::Syntax {
                    line,
                    message: "horizon must be positive".into(),
                });
            }
            continue;
        }
        let windows = parse_windows(list, line)?;
        schedule.insert_at(line, key, windows)?;
    }
    schedule.check_horizon()?;
    Ok(schedule)
}

/// One-state chart whose self-loop advances `curT` once per tick.
pub fn synthesize_timer(tick_seconds: u32) -> StatechartModel {
    assert!(tick_seconds > 0, "tick period must be positive");
    let mut tick = Transition::new(TIMER_STATE, TIMER_STATE, 0);
    tick.trigger = Some(Trigger::Tick { seconds: tick_seconds });
    tick.actions.push(Action::Assign {
        target: CLOCK_VAR.into(),
        value: Expr::binary(BinOp::Add, Expr::var(CLOCK_VAR), Expr::Int(1)),
    });
    StatechartModel {
        name: TIMER_CHART.into(),
        variables: vec![VariableDecl::integer(CLOCK_VAR, 0)],
        events: Vec::new(),
        states: vec![State::new(TIMER_STATE)],
        transitions: vec![tick],
        initial_state: TIMER_STATE.into(),
    }
}

/// One `RES.<r> = false` boolean per unique resource, first-occurrence order.
pub fn synthesize_resource_interface(map: &ResourceMap) -> Vec<VariableDecl> {
    map.resources()
        .into_iter()
        .map(|r| VariableDecl::boolean(resource_var(r), false))
        .collect()
}

fn region_guard(lower: Option<i64>, upper: Option<i64>) -> Expr {
    let clock = || Expr::var(CLOCK_VAR);
    let above = lower.map(|l| Expr::binary(BinOp::Gt, clock(), Expr::Int(l)));
    let below = upper.map(|u| Expr::binary(BinOp::Le, clock(), Expr::Int(u)));
    match (above, below) {
        (None, None) => Expr::Bool(true),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (Some(a), Some(b)) => Expr::and(a, b),
    }
}

/// Partition the integer timeline into availability regions: guards for the
/// windows (available) come first, then guards for the gaps between them.
/// The guards are pairwise exclusive and cover every integer `curT`.
pub fn availability_regions(windows: &[Window]) -> Vec<(Expr, bool)> {
    let mut sorted = windows.to_vec();
    sorted.sort();
    let mut available = Vec::new();
    let mut gaps = Vec::new();
    // Upper end of the last region emitted; None = minus infinity.
    let mut cursor: Option<i64> = None;
    let mut open_ended = false;
    for w in &sorted {
        let lower = (w.start_exclusive >= 0).then_some(w.start_exclusive);
        if let Some(start) = lower {
            if cursor.is_none_or(|c| c < start) {
                gaps.push(region_guard(cursor, Some(start)));
            }
        }
        available.push(region_guard(lower, w.end_inclusive));
        match w.end_inclusive {
            Some(e) => cursor = Some(e),
            None => {
                open_ended = true;
                break;
            }
        }
    }
    if !open_ended {
        gaps.push(region_guard(cursor, None));
    }
    available
        .into_iter()
        .map(|g| (g, true))
        .chain(gaps.into_iter().map(|g| (g, false)))
        .collect()
}

/// Single-state chart for `resource`: a `true`-guarded self-loop re-enters
/// the state every cycle and guarded entry actions refresh `RES.<resource>`.
pub fn synthesize_resource_chart(resource: &str, windows: &[Window]) -> StatechartModel {
    let var = resource_var(resource);
    let mut state = State::new(resource);
    for (guard, available) in availability_regions(windows) {
        state.entry_actions.push(GuardedAction::guarded(
            guard,
            Action::Assign {
                target: var.clone(),
                value: Expr::Bool(available),
            },
        ));
    }
    StatechartModel {
        name: resource.to_string(),
        variables: vec![VariableDecl::integer(CLOCK_VAR, 0), VariableDecl::boolean(var, false)],
        events: Vec::new(),
        states: vec![state],
        transitions: vec![Transition::new(resource, resource, 0)],
        initial_state: resource.to_string(),
    }
}
