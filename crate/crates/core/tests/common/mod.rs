#![allow(dead_code)]

pub mod gen;

use std::path::PathBuf;

use resweave_core::model::{parse_model, StatechartModel};
use resweave_core::pipeline::{build_integration, Integration};
use resweave_core::resgen::{parse_resource_map, parse_schedule};
use resweave_core::sim::{Composition, Scenario};
use resweave_core::verify::{parse_properties, Invariant};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn model(name: &str) -> StatechartModel {
    parse_model(&fixture(name)).unwrap()
}

/// One of the two stroke fixtures wired through the full pipeline.
pub struct Stroke {
    pub integration: Integration,
    pub composition: Composition,
    pub scenario: Scenario,
    pub properties: Vec<Invariant>,
}

pub fn stroke(extended: bool, schedule: Option<&str>, assume_available: bool) -> Stroke {
    let stem = if extended { "stroke_extended" } else { "stroke" };
    let map = parse_resource_map(&fixture(&format!("{stem}.map"))).unwrap();
    let schedule = schedule.map(|s| parse_schedule(&fixture(s)).unwrap());
    let integration = build_integration(
        &model(&format!("{stem}.json")),
        &map,
        schedule.as_ref(),
        assume_available,
    )
    .unwrap();
    let composition = integration.composition().unwrap();
    let scenario = Scenario::parse(&fixture(&format!("{stem}.scenario.json"))).unwrap();
    let properties = parse_properties(&fixture(&format!("{stem}.props")), &composition).unwrap();
    Stroke {
        integration,
        composition,
        scenario,
        properties,
    }
}
