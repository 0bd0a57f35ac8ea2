use std::path::Path;

use anyhow::{bail, Context as _, Result};
use serde::Serialize;

use resweave_core::export::{export_queries, export_xta, ExportOptions};
use resweave_core::model::{serialize_model, Diagnostic, Value};
use resweave_core::pipeline::{annotation_summary, integrate_annotated, Manifest};
use resweave_core::sim::{Scenario, Simulator, Trace};
use resweave_core::verify::{parse_properties, render_table};
use resweave_core::weaver::annotate as annotate_model;

use crate::load::{self, Source};

pub struct Context {
    pub json_diagnostics: bool,
}

impl Context {
    fn report(&self, diagnostics: &[Diagnostic]) {
        for d in diagnostics {
            if self.json_diagnostics {
                eprintln!("{}", serde_json::to_string(d).expect("diagnostics serialize"));
            } else {
                eprintln!("{d}");
            }
        }
    }
}

pub fn annotate(_ctx: &Context, model: &Path, map: &Path, out: &Path) -> Result<u8> {
    let m = load::model(model)?;
    let map = load::map(Some(map))?;
    let annotated = annotate_model(&m, &map);
    load::write(out, &serialize_model(&annotated))?;
    let summary = annotation_summary(&annotated);
    if summary.is_empty() {
        println!("no elements annotated");
    }
    for line in summary {
        println!("{line}");
    }
    println!("wrote {}", out.display());
    Ok(0)
}

pub fn integrate(
    ctx: &Context,
    model: &Path,
    map: Option<&Path>,
    schedule: Option<&Path>,
    assume_available: bool,
    out: &Path,
) -> Result<u8> {
    let m = load::model(model)?;
    let map = load::map(map)?;
    let schedule = load::schedule(schedule)?;
    let integration = integrate_annotated(&m, &map, schedule.as_ref(), assume_available)?;
    integration.composition()?;
    ctx.report(&integration.diagnostics);
    for chart in integration.charts() {
        let path = out.join(format!("{}.json", chart.model.name));
        load::write(&path, &serialize_model(&chart.model))?;
        println!("wrote {}", path.display());
    }
    let manifest = out.join("manifest.json");
    load::write(&manifest, &Manifest::for_integration(&integration).to_json())?;
    println!("wrote {}", manifest.display());
    Ok(0)
}

fn parse_value(text: &str) -> Result<Value> {
    match text {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => text
            .parse()
            .map(Value::Int)
            .with_context(|| format!("`{text}` is neither a boolean nor an integer")),
    }
}

fn apply_choices(scenario: &mut Scenario, choices: &[String]) -> Result<()> {
    for spec in choices {
        let Some((var, value)) = spec.split_once('=') else {
            bail!("--choice expects VAR=VALUE, got `{spec}`");
        };
        let value = parse_value(value.trim())?;
        let var = var.trim();
        let Some(pos) = scenario.choices.iter().position(|c| c.var == var) else {
            bail!("`{var}` is not a choice variable of the scenario");
        };
        if !scenario.choices[pos].domain.contains(&value) {
            bail!("{value} is not in the domain of choice `{var}`");
        }
        scenario.choices.remove(pos);
        scenario.initial.insert(var.to_string(), value);
    }
    Ok(())
}

fn horizon(flag: Option<i64>, scenario: &Scenario) -> Result<i64> {
    let h = flag.unwrap_or(scenario.horizon);
    if h <= 0 {
        bail!("horizon must be positive, got {h}");
    }
    Ok(h)
}

pub fn simulate(
    ctx: &Context,
    source: &Source,
    scenario: Option<&Path>,
    choices: &[String],
    horizon_flag: Option<i64>,
    replay: Option<&Path>,
    out: &Path,
) -> Result<u8> {
    let loaded = load::composition(source)?;
    ctx.report(&loaded.diagnostics);
    let mut scenario = load::scenario(scenario)?;
    apply_choices(&mut scenario, choices)?;
    let horizon = horizon(horizon_flag, &scenario)?;
    let sim = Simulator::new(&loaded.composition, &scenario)?;
    let trace = match replay {
        Some(path) => {
            let recorded =
                Trace::from_json(&load::read(path)?).with_context(|| format!("parsing {}", path.display()))?;
            sim.replay(&recorded)?
        }
        None => sim.run(horizon)?,
    };
    let text = trace.to_text();
    print!("{text}");
    load::write(&out.join("trace.txt"), &text)?;
    load::write(&out.join("trace.json"), &(trace.to_json() + "\n"))?;
    Ok(0)
}

#[derive(Serialize)]
struct VerdictRecord<'a> {
    property: &'a str,
    holds: bool,
    counterexample_path: Option<String>,
}

pub fn check(
    ctx: &Context,
    source: &Source,
    scenario: Option<&Path>,
    properties: &Path,
    horizon_flag: Option<i64>,
    cap: usize,
    out: &Path,
) -> Result<u8> {
    let loaded = load::composition(source)?;
    ctx.report(&loaded.diagnostics);
    let scenario = load::scenario(scenario)?;
    let horizon = horizon(horizon_flag, &scenario)?;
    let props = parse_properties(&load::read(properties)?, &loaded.composition)
        .with_context(|| format!("parsing {}", properties.display()))?;
    let verdicts = resweave_core::verify::check(&loaded.composition, &scenario, &props, horizon, cap)?;
    print!("{}", render_table(&verdicts));

    let mut records = Vec::with_capacity(verdicts.len());
    for v in &verdicts {
        let counterexample_path = match &v.counterexample {
            Some(cx) => {
                let name = format!("cx_{}.json", v.property);
                let json = serde_json::to_string_pretty(cx).expect("counterexample serializes") + "\n";
                load::write(&out.join(&name), &json)?;
                let header = format!(
                    "# {} violated at t={} (step {}) in scenario #{}: {}\n",
                    v.property,
                    cx.time(),
                    cx.step,
                    cx.scenario_index,
                    cx.resolved
                );
                load::write(
                    &out.join(format!("cx_{}.txt", v.property)),
                    &(header + &cx.trace.to_text()),
                )?;
                println!(
                    "counterexample for {} written to {}",
                    v.property,
                    out.join(&name).display()
                );
                Some(name)
            }
            None => None,
        };
        records.push(VerdictRecord {
            property: &v.property,
            holds: v.holds,
            counterexample_path,
        });
    }
    let json = serde_json::to_string_pretty(&records).expect("verdicts serialize") + "\n";
    load::write(&out.join("verdicts.json"), &json)?;
    Ok(if verdicts.iter().all(|v| v.holds) { 0 } else { 1 })
}

pub fn export(
    ctx: &Context,
    source: &Source,
    properties: Option<&Path>,
    flatten_names: bool,
    out: &Path,
) -> Result<u8> {
    let loaded = load::composition(source)?;
    ctx.report(&loaded.diagnostics);
    let options = ExportOptions { flatten_names };
    let xta = export_xta(&loaded.composition, &options)?;
    let props = match properties {
        Some(p) => parse_properties(&load::read(p)?, &loaded.composition)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => Vec::new(),
    };
    let queries = export_queries(&loaded.composition, &props, &options)?;
    for (ext, text) in [("xta", &xta), ("q", &queries)] {
        let path = out.join(format!("{}.{ext}", loaded.guideline));
        load::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}
