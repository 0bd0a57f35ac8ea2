//! Strategies for well-typed models, maps, valuations and small
//! compositions over a fixed vocabulary.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::sample::subsequence;

use resweave_core::model::{
    Action, Annotation, BinOp, Expr, GuardedAction, State, StatechartModel, Transition, Trigger, Value, VarKind,
    VariableDecl,
};
use resweave_core::resgen::{resource_var, ResourceMap, Window};
use resweave_core::sim::{Choice, Injection, Scenario};

pub const INTS: &[&str] = &["i0", "i1", "curT", "lab.count"];
pub const BOOLS: &[&str] = &["b0", "b1", "flag.on"];
pub const EVENTS: &[&str] = &["e0", "e1", "e2"];
pub const RESOURCES: &[&str] = &["r0", "r1", "r2", "r3"];

pub fn vocabulary() -> Vec<VariableDecl> {
    INTS.iter()
        .map(|n| VariableDecl::integer(*n, 0))
        .chain(BOOLS.iter().map(|n| VariableDecl::boolean(*n, false)))
        .collect()
}

pub fn resource_interface() -> Vec<VariableDecl> {
    RESOURCES
        .iter()
        .map(|r| VariableDecl::boolean(resource_var(r), false))
        .collect()
}

fn literal() -> impl Strategy<Value = i64> {
    prop_oneof![8 => -50i64..50, 1 => any::<i64>()]
}

pub fn int_expr() -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        literal().prop_map(Expr::Int),
        proptest::sample::select(INTS).prop_map(Expr::var),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (
                proptest::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
        ]
    })
    .boxed()
}

pub fn bool_expr() -> BoxedStrategy<Expr> {
    let compare = (
        proptest::sample::select(vec![BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne]),
        int_expr(),
        int_expr(),
    )
        .prop_map(|(op, l, r)| Expr::binary(op, l, r));
    let leaf = prop_oneof![
        any::<bool>().prop_map(Expr::Bool),
        proptest::sample::select(BOOLS).prop_map(Expr::var),
        compare,
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
            (
                proptest::sample::select(vec![BinOp::And, BinOp::Or, BinOp::Eq, BinOp::Ne]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
        ]
    })
    .boxed()
}

pub fn action() -> BoxedStrategy<Action> {
    prop_oneof![
        (proptest::sample::select(INTS), int_expr()).prop_map(|(t, v)| Action::Assign {
            target: t.to_string(),
            value: v
        }),
        (proptest::sample::select(BOOLS), bool_expr()).prop_map(|(t, v)| Action::Assign {
            target: t.to_string(),
            value: v
        }),
        proptest::sample::select(EVENTS).prop_map(|e| Action::Raise(e.to_string())),
    ]
    .boxed()
}

fn guarded_action() -> BoxedStrategy<GuardedAction> {
    (proptest::option::weighted(0.3, bool_expr()), action())
        .prop_map(|(guard, action)| GuardedAction { guard, action })
        .boxed()
}

fn annotation() -> impl Strategy<Value = Annotation> {
    subsequence(RESOURCES.to_vec(), 1..=3).prop_map(Annotation::new)
}

fn state(name: String, annotated: bool) -> BoxedStrategy<State> {
    let annotations = if annotated {
        proptest::collection::vec(annotation(), 0..=2).boxed()
    } else {
        Just(Vec::new()).boxed()
    };
    (
        proptest::collection::vec(guarded_action(), 0..=2),
        proptest::collection::vec(action().prop_map(GuardedAction::unguarded), 0..=1),
        annotations,
    )
        .prop_map(move |(entry_actions, exit_actions, annotations)| State {
            name: name.clone(),
            entry_actions,
            exit_actions,
            annotations,
        })
        .boxed()
}

fn trigger() -> impl Strategy<Value = Option<Trigger>> {
    prop_oneof![
        4 => Just(None),
        1 => (1u32..=120).prop_map(|seconds| Some(Trigger::Tick { seconds })),
        2 => proptest::sample::select(EVENTS).prop_map(|e| Some(Trigger::Event(e.to_string()))),
    ]
}

fn transition(states: usize, annotated: bool) -> BoxedStrategy<Transition> {
    let annotations = if annotated {
        proptest::collection::vec(annotation(), 0..=1).boxed()
    } else {
        Just(Vec::new()).boxed()
    };
    (
        0..states,
        0..states,
        trigger(),
        prop_oneof![1 => Just(Expr::Bool(true)), 3 => bool_expr()],
        proptest::collection::vec(action(), 0..=2),
        annotations,
    )
        .prop_map(|(s, t, trigger, guard, actions, annotations)| Transition {
            source: format!("s{s}"),
            target: format!("s{t}"),
            trigger,
            guard,
            actions,
            annotations,
            priority: 0,
        })
        .boxed()
}

/// A valid model over the fixed vocabulary. `annotated` controls whether
/// states and transitions may already carry annotations.
pub fn model_with(max_states: usize, max_transitions: usize, annotated: bool) -> BoxedStrategy<StatechartModel> {
    (1..=max_states)
        .prop_flat_map(move |n| {
            let states: Vec<BoxedStrategy<State>> = (0..n).map(|i| state(format!("s{i}"), annotated)).collect();
            (
                states,
                proptest::collection::vec(transition(n, annotated), 0..=max_transitions),
                0..n,
                any::<bool>(),
                proptest::collection::vec(literal(), INTS.len()),
                proptest::collection::vec(any::<bool>(), BOOLS.len()),
            )
        })
        .prop_map(|(states, mut transitions, initial, shifted, ints, bools)| {
            for (i, t) in transitions.iter_mut().enumerate() {
                t.priority = if shifted { 100 + i as u32 } else { i as u32 };
            }
            let variables = INTS
                .iter()
                .zip(ints)
                .map(|(n, v)| VariableDecl::integer(*n, v))
                .chain(BOOLS.iter().zip(bools).map(|(n, v)| VariableDecl::boolean(*n, v)))
                .collect();
            StatechartModel {
                name: "M".into(),
                variables,
                events: EVENTS.iter().map(|e| e.to_string()).collect(),
                states,
                transitions,
                initial_state: format!("s{initial}"),
            }
        })
        .boxed()
}

pub fn model() -> BoxedStrategy<StatechartModel> {
    model_with(6, 10, true)
}

pub fn resource_map() -> BoxedStrategy<ResourceMap> {
    proptest::collection::vec(subsequence(RESOURCES.to_vec(), 1..=3), EVENTS.len())
        .prop_flat_map(|lists| (Just(lists), subsequence(EVENTS.to_vec(), 0..=EVENTS.len())))
        .prop_map(|(lists, keys)| {
            ResourceMap::from_entries(
                keys.into_iter()
                    .zip(lists)
                    .map(|(k, rs)| (k.to_string(), rs.into_iter().map(String::from).collect::<Vec<_>>())),
            )
            .expect("generated map is valid")
        })
        .boxed()
}

/// Complete valuation over the vocabulary and the resource interface.
pub fn valuation() -> BoxedStrategy<BTreeMap<String, Value>> {
    (
        proptest::collection::vec(literal(), INTS.len()),
        proptest::collection::vec(any::<bool>(), BOOLS.len() + RESOURCES.len()),
    )
        .prop_map(|(ints, bools)| {
            let names = vocabulary()
                .into_iter()
                .chain(resource_interface())
                .filter(|v| v.kind == VarKind::Boolean)
                .map(|v| v.name);
            INTS.iter()
                .map(|n| n.to_string())
                .zip(ints.into_iter().map(Value::Int))
                .chain(names.zip(bools.into_iter().map(Value::Bool)))
                .collect()
        })
        .boxed()
}

/// Small guideline chart for random compositions: at most 5 states, no
/// writes to `curT`.
pub fn small_chart(name: &'static str) -> BoxedStrategy<StatechartModel> {
    model_with(5, 7, false)
        .prop_map(move |mut m| {
            m.name = name.to_string();
            let touches_clock = |a: &Action| matches!(a, Action::Assign { target, .. } if target == "curT");
            for s in &mut m.states {
                s.entry_actions.retain(|ga| !touches_clock(&ga.action));
                s.exit_actions.retain(|ga| !touches_clock(&ga.action));
            }
            for t in &mut m.transitions {
                t.actions.retain(|a| !touches_clock(a));
            }
            if let Some(v) = m.variables.iter_mut().find(|v| v.name == "curT") {
                v.initial = Value::Int(0);
            }
            m
        })
        .boxed()
}

fn value_of(kind: VarKind) -> BoxedStrategy<Value> {
    match kind {
        VarKind::Integer => (-5i64..5).prop_map(Value::Int).boxed(),
        VarKind::Boolean => any::<bool>().prop_map(Value::Bool).boxed(),
    }
}

/// Scenario over non-clock vocabulary with at most three choices of at most
/// four values each.
pub fn small_scenario(horizon: i64) -> BoxedStrategy<Scenario> {
    let vars: Vec<VariableDecl> = vocabulary().into_iter().filter(|v| v.name != "curT").collect();
    let pick = proptest::sample::select(vars);
    let choice = pick.clone().prop_flat_map(|v| {
        let name = v.name.clone();
        proptest::collection::vec(value_of(v.kind), 1..=4).prop_map(move |domain| Choice {
            var: name.clone(),
            domain,
        })
    });
    let injection = (pick, 0..=horizon).prop_flat_map(|(v, t)| {
        value_of(v.kind).prop_map(move |value| Injection {
            t,
            var: v.name.clone(),
            value,
        })
    });
    (
        proptest::collection::vec(choice, 0..=3),
        proptest::collection::vec(injection, 0..=3),
    )
        .prop_map(move |(choices, injections)| Scenario {
            initial: BTreeMap::new(),
            injections,
            choices,
            horizon,
        })
        .boxed()
}

/// Sorted, disjoint availability windows; some start unbounded, some stay open.
pub fn windows() -> impl Strategy<Value = Vec<Window>> {
    proptest::collection::vec((1i64..40, 0i64..40, any::<bool>()), 0..4).prop_map(|spans| {
        let mut out = Vec::new();
        let mut cursor = -1i64;
        for (gap, len, open) in spans {
            let start = if out.is_empty() && gap % 3 == 0 {
                -1
            } else {
                cursor + gap
            };
            if open {
                out.push(Window::new(start, None));
                break;
            }
            let end = start + len + 1;
            out.push(Window::new(start, Some(end)));
            cursor = end;
        }
        out
    })
}
