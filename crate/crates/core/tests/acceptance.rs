//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::cell::Cell;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use common::{fixture, gen, stroke};
use resweave_core::export::{export_queries, export_xta, scan_xta, ExportOptions};
use resweave_core::model::{eval_guard, parse_model, serialize_model, StatechartModel, Value};
use resweave_core::resgen::{
    is_available, parse_resource_map, parse_schedule, resource_var, synthesize_resource_chart, synthesize_timer,
};
use resweave_core::sim::{Chart, ChartRole, Composition, Scenario, Simulator};
use resweave_core::verify::{check, replays_to_violation, Invariant, Verdict, DEFAULT_SCENARIO_CAP};
use resweave_core::weaver::{annotate, declare_variables, integrate};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn verdict<'v>(verdicts: &'v [Verdict], name: &str) -> &'v Verdict {
    verdicts.iter().find(|v| v.property == name).expect("property present")
}

fn pattern(verdicts: &[Verdict]) -> String {
    verdicts
        .iter()
        .map(|v| format!("{}={}", v.property, if v.holds { "holds" } else { "fails" }))
        .collect::<Vec<_>>()
        .join(" ")
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn ideal_resources() -> Outcome {
    let start = Instant::now();
    let s = stroke(false, None, true);
    let verdicts = check(
        &s.composition,
        &s.scenario,
        &s.properties,
        s.scenario.horizon,
        DEFAULT_SCENARIO_CAP,
    )
    .map_err(|e| e.to_string())?;
    ensure(verdicts.iter().all(|v| v.holds), || pattern(&verdicts))?;

    // tPA is given exactly in the no-hemorrhage, in-range branches.
    let mut administered = 0;
    for rs in resweave_core::verify::enumerate_scenarios(&s.scenario, DEFAULT_SCENARIO_CAP).unwrap() {
        let trace = Simulator::new(&s.composition, &rs.scenario)
            .unwrap()
            .run(s.scenario.horizon)
            .unwrap();
        let eligible = rs.scenario.initial["hemorrhage"] == Value::Bool(false)
            && rs.scenario.initial["systolicBP"] <= Value::Int(185)
            && rs.scenario.initial["diastolicBP"] <= Value::Int(110);
        let entered = trace.entered_at("Stroke", "tPA");
        ensure(entered.is_some() == eligible, || {
            format!("tPA entered at {entered:?} in {rs}")
        })?;
        if eligible {
            ensure(entered == Some(23), || {
                format!("tPA entered at {entered:?}, expected 23")
            })?;
            administered += 1;
        }
    }
    ensure(administered > 0, || "tPA never administered".into())?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("{}; tPA given in {administered} scenarios", pattern(&verdicts)))
}

fn delayed_ct() -> Outcome {
    let start = Instant::now();
    let s = stroke(false, Some("stroke_delayed.schedule"), false);
    let verdicts = check(
        &s.composition,
        &s.scenario,
        &s.properties,
        s.scenario.horizon,
        DEFAULT_SCENARIO_CAP,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        verdict(&verdicts, "P1").holds && !verdict(&verdicts, "P2").holds,
        || pattern(&verdicts),
    )?;
    let cx = verdict(&verdicts, "P2")
        .counterexample
        .as_ref()
        .ok_or("P2 has no counterexample")?;
    let ct = cx.trace.entered_at("Stroke", "CT");
    ensure(ct == Some(201), || format!("CT entered at {ct:?}"))?;

    let sim = Simulator::new(&s.composition, &cx.resolved.scenario).unwrap();
    let (mut state, _) = sim.init().unwrap();
    for _ in 0..cx.step {
        sim.macro_step(&mut state).unwrap();
    }
    let (tpa, onset) = match (state.valuation["tpaT"], state.valuation["onsetT"]) {
        (Value::Int(a), Value::Int(b)) => (a, b),
        other => return Err(format!("unexpected valuation {other:?}")),
    };
    ensure(tpa - onset > 180, || format!("tpaT-onsetT = {}", tpa - onset))?;
    let p2 = s.properties.iter().find(|p| p.name == "P2").unwrap();
    ensure(replays_to_violation(&s.composition, p2, cx), || {
        "counterexample does not replay".into()
    })?;
    within(start, Duration::from_secs(5))?;
    Ok(format!(
        "{}; CT at t=201, violation at t={}",
        pattern(&verdicts),
        cx.time()
    ))
}

fn extended_case() -> Outcome {
    let start = Instant::now();
    let s = stroke(true, Some("stroke_extended.schedule"), false);
    let verdicts = check(
        &s.composition,
        &s.scenario,
        &s.properties,
        s.scenario.horizon,
        DEFAULT_SCENARIO_CAP,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        verdict(&verdicts, "P1").holds && !verdict(&verdicts, "P2").holds && verdict(&verdicts, "P3").holds,
        || pattern(&verdicts),
    )?;
    let cx = verdict(&verdicts, "P2").counterexample.as_ref().unwrap();
    let p2 = s.properties.iter().find(|p| p.name == "P2").unwrap();
    ensure(replays_to_violation(&s.composition, p2, cx), || {
        "counterexample does not replay".into()
    })?;
    within(start, Duration::from_secs(10))?;
    Ok(pattern(&verdicts))
}

fn weaver_algebra() -> Outcome {
    let cases = Cell::new(0usize);
    let checked = Cell::new(0usize);
    let strategy = (
        gen::model_with(6, 10, false),
        gen::resource_map(),
        proptest::collection::vec(gen::valuation(), 100),
    );
    runner(1000)
        .run(&strategy, |(m, map, vals)| {
            cases.set(cases.get() + 1);
            let a = annotate(&m, &map);
            let mut stripped = a.clone();
            stripped.states.iter_mut().for_each(|s| s.annotations.clear());
            stripped.transitions.iter_mut().for_each(|t| t.annotations.clear());
            prop_assert_eq!(&stripped, &m);
            prop_assert_eq!(&annotate(&a, &map), &a);

            let annotated = declare_variables(&a, &gen::resource_interface());
            let (integrated, _) = integrate(&annotated).unwrap();
            prop_assert_eq!(integrated.transitions.len(), annotated.transitions.len());
            let mut unguarded = integrated.clone();
            let mut reference = annotated.clone();
            for t in unguarded.transitions.iter_mut().chain(reference.transitions.iter_mut()) {
                t.guard = resweave_core::model::Expr::Bool(true);
            }
            prop_assert_eq!(unguarded, reference);

            for v in &vals {
                let mut ideal = v.clone();
                for r in gen::RESOURCES {
                    ideal.insert(resource_var(r), Value::Bool(true));
                }
                for (new, old) in integrated.transitions.iter().zip(&annotated.transitions) {
                    let (g1, g0) = (eval_guard(&new.guard, v).unwrap(), eval_guard(&old.guard, v).unwrap());
                    prop_assert!(!g1 || g0, "{} strengthens {} but admits {:?}", new.guard, old.guard, v);
                    prop_assert_eq!(
                        eval_guard(&new.guard, &ideal).unwrap(),
                        eval_guard(&old.guard, &ideal).unwrap()
                    );
                    checked.set(checked.get() + 1);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure(cases.get() >= 1000, || format!("only {} cases", cases.get()))?;
    Ok(format!(
        "{} (model, map) pairs, {} guard evaluations",
        cases.get(),
        checked.get()
    ))
}

fn resource_coherence() -> Outcome {
    let cases = Cell::new(0usize);
    let strategy = (proptest::collection::vec(gen::windows(), 1..=3), 1i64..=1000);
    runner(100)
        .run(&strategy, |(schedules, horizon)| {
            cases.set(cases.get() + 1);
            let mut charts = vec![Chart::new(ChartRole::Timer, synthesize_timer(60))];
            for (k, ws) in schedules.iter().enumerate() {
                charts.push(Chart::new(
                    ChartRole::Resource,
                    synthesize_resource_chart(&format!("r{k}"), ws),
                ));
            }
            let comp = Composition::new(charts).unwrap();
            let sim = Simulator::new(&comp, &Scenario::default()).unwrap();
            let (mut state, _) = sim.init().unwrap();
            loop {
                for (k, ws) in schedules.iter().enumerate() {
                    let actual = state.valuation[&resource_var(&format!("r{k}"))];
                    prop_assert_eq!(
                        actual,
                        Value::Bool(is_available(ws, state.time)),
                        "r{} at t={}",
                        k,
                        state.time
                    );
                }
                if state.time >= horizon {
                    break;
                }
                sim.macro_step(&mut state).unwrap();
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure(cases.get() >= 100, || format!("only {} cases", cases.get()))?;
    Ok(format!("{} schedules", cases.get()))
}

/// First violation per property as (scenario index, step), or `None` when
/// the simulation or a predicate fails to evaluate.
fn oracle(
    comp: &Composition,
    scenario: &Scenario,
    props: &[Invariant],
    horizon: i64,
) -> Option<Vec<Option<(usize, usize)>>> {
    let radix: Vec<usize> = scenario.choices.iter().map(|c| c.domain.len()).collect();
    let total: usize = radix.iter().product();
    let mut digits = vec![0usize; radix.len()];
    let mut found: Vec<Option<(usize, usize)>> = vec![None; props.len()];
    for index in 0..total {
        if found.iter().all(Option::is_some) {
            break;
        }
        let mut resolved = scenario.clone();
        resolved.choices.clear();
        for (c, &d) in scenario.choices.iter().zip(&digits) {
            resolved.initial.insert(c.var.clone(), c.domain[d]);
        }
        let sim = Simulator::new(comp, &resolved).ok()?;
        let (mut state, _) = sim.init().ok()?;
        for step in 0..=horizon as usize {
            if step > 0 {
                sim.macro_step(&mut state).ok()?;
            }
            for (p, slot) in props.iter().zip(found.iter_mut()) {
                if slot.is_some() {
                    continue;
                }
                if let Some((chart, loc)) = &p.location {
                    if &state.active[chart] != loc {
                        continue;
                    }
                }
                if !eval_guard(&p.predicate, &state.valuation).ok()? {
                    *slot = Some((index, step));
                }
            }
        }
        for k in (0..digits.len()).rev() {
            digits[k] += 1;
            if digits[k] < radix[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    Some(found)
}

fn oracle_case() -> BoxedStrategy<(Composition, Scenario, Vec<Invariant>, i64)> {
    (gen::small_chart("A"), gen::windows(), 1i64..=100)
        .prop_flat_map(|(a, ws, horizon)| {
            let states: Vec<String> = a.states.iter().map(|s| s.name.clone()).collect();
            let location =
                proptest::option::of(proptest::sample::select(states)).prop_map(|s| s.map(|s| ("A".to_string(), s)));
            let props = proptest::collection::vec((location, gen::bool_expr()), 1..=3).prop_map(|ps| {
                ps.into_iter()
                    .enumerate()
                    .map(|(k, (location, predicate))| Invariant {
                        name: format!("Q{k}"),
                        location,
                        predicate,
                    })
                    .collect::<Vec<_>>()
            });
            let scenario = gen::small_scenario(horizon).prop_filter("distinct choices", |s| {
                s.choices.iter().map(|c| &c.var).collect::<BTreeSet<_>>().len() == s.choices.len()
            });
            let charts = vec![
                Chart::new(ChartRole::Timer, synthesize_timer(60)),
                Chart::new(ChartRole::Resource, synthesize_resource_chart("r0", &ws)),
                Chart::new(ChartRole::Guideline, a),
            ];
            let comp = Composition::with_shared(charts, &gen::vocabulary()).unwrap();
            (Just(comp), scenario, props, Just(horizon))
        })
        .boxed()
}

fn checker_vs_oracle() -> Outcome {
    let agreed = Cell::new(0usize);
    let errors = Cell::new(0usize);
    let violations = Cell::new(0usize);
    runner(80)
        .run(&oracle_case(), |(comp, scenario, props, horizon)| {
            let expected = oracle(&comp, &scenario, &props, horizon);
            let actual = check(&comp, &scenario, &props, horizon, 64);
            let Some(expected) = expected else {
                prop_assert!(actual.is_err(), "oracle failed to evaluate but check succeeded");
                errors.set(errors.get() + 1);
                return Ok(());
            };
            let verdicts = actual.map_err(|e| TestCaseError::fail(format!("check failed: {e}")))?;
            prop_assert_eq!(verdicts.len(), props.len());
            for ((v, p), want) in verdicts.iter().zip(&props).zip(&expected) {
                let got = v.counterexample.as_ref().map(|cx| (cx.scenario_index, cx.step));
                prop_assert_eq!(v.holds, want.is_none());
                prop_assert_eq!(got, *want, "{}", p);
                if let Some(cx) = &v.counterexample {
                    prop_assert!(replays_to_violation(&comp, p, cx), "{} does not replay", p);
                    violations.set(violations.get() + 1);
                }
            }
            agreed.set(agreed.get() + 1);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure(agreed.get() >= 50, || {
        format!("only {} evaluable compositions", agreed.get())
    })?;
    Ok(format!(
        "{} compositions agree ({} counterexamples replayed), {} rejected by both",
        agreed.get(),
        violations.get(),
        errors.get()
    ))
}

fn split_edges(m: &StatechartModel) -> usize {
    m.transitions
        .iter()
        .map(|t| {
            let target = m.state(&t.target).unwrap();
            target.entry_actions.iter().filter(|a| a.guard.is_some()).count().max(1)
        })
        .sum()
}

fn exporter_stability() -> Outcome {
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let read = |name: &str| std::fs::read_to_string(golden.join(name)).map_err(|e| format!("{name}: {e}"));
    let options = ExportOptions::default();
    for (extended, stem) in [(false, "stroke"), (true, "stroke_extended")] {
        let s = stroke(
            extended,
            Some(&format!(
                "{}.schedule",
                if extended { "stroke_extended" } else { "stroke_delayed" }
            )),
            false,
        );
        let xta = export_xta(&s.composition, &options).map_err(|e| e.to_string())?;
        let q = export_queries(&s.composition, &s.properties, &options).map_err(|e| e.to_string())?;
        ensure(xta == read(&format!("{stem}.xta"))?, || format!("{stem}.xta differs"))?;
        ensure(q == read(&format!("{stem}.q"))?, || format!("{stem}.q differs"))?;
    }
    let mut processes = 0;
    for extended in [false, true] {
        let schedule = if extended {
            "stroke_extended.schedule"
        } else {
            "stroke_delayed.schedule"
        };
        for (schedule, assume) in [(Some(schedule), false), (None, true)] {
            let s = stroke(extended, schedule, assume);
            let xta = export_xta(&s.composition, &options).map_err(|e| e.to_string())?;
            let summary = scan_xta(&xta).map_err(|e| e.to_string())?;
            ensure(summary.len() == s.composition.charts().len(), || "process count".into())?;
            for (p, chart) in summary.iter().zip(s.composition.charts()) {
                ensure(p.locations == chart.model.states.len(), || {
                    format!("{} locations", p.name)
                })?;
                ensure(p.edges == split_edges(&chart.model), || format!("{} edges", p.name))?;
                processes += 1;
            }
        }
    }
    Ok(format!(
        "4 golden files identical, counts hold for {processes} processes"
    ))
}

fn round_trip() -> Outcome {
    for name in ["stroke.json", "stroke_extended.json"] {
        let text = fixture(name);
        let m = parse_model(&text).map_err(|e| e.to_string())?;
        ensure(serialize_model(&m) == text, || format!("{name} does not round-trip"))?;
    }
    for name in ["stroke.scenario.json", "stroke_extended.scenario.json"] {
        let s = Scenario::parse(&fixture(name)).map_err(|e| e.to_string())?;
        ensure(Scenario::parse(&s.to_json()).unwrap() == s, || {
            format!("{name} does not round-trip")
        })?;
    }
    for name in ["stroke.map", "stroke_extended.map"] {
        let map = parse_resource_map(&fixture(name)).map_err(|e| e.to_string())?;
        ensure(parse_resource_map(&map.to_string()).unwrap() == map, || {
            format!("{name} does not round-trip")
        })?;
    }
    for name in ["stroke_delayed.schedule", "stroke_extended.schedule"] {
        let s = parse_schedule(&fixture(name)).map_err(|e| e.to_string())?;
        ensure(parse_schedule(&s.to_string()).unwrap() == s, || {
            format!("{name} does not round-trip")
        })?;
    }
    let cases = Cell::new(0usize);
    runner(1000)
        .run(&gen::model(), |m| {
            cases.set(cases.get() + 1);
            let text = serialize_model(&m);
            let back = parse_model(&text).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(serialize_model(&back), text);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    ensure(cases.get() >= 1000, || format!("only {} models", cases.get()))?;
    Ok(format!("8 fixtures, {} generated models", cases.get()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1 ideal-resource reproduction", ideal_resources),
        ("AC2 delayed-CT reproduction", delayed_ct),
        ("AC3 extended case reproduction", extended_case),
        ("AC4 weaver algebra", weaver_algebra),
        ("AC5 resource coherence", resource_coherence),
        ("AC6 checker vs. independent oracle", checker_vs_oracle),
        ("AC7 exporter stability", exporter_stability),
        ("AC8 round-trip", round_trip),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
