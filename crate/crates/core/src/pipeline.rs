//! End-to-end assembly: annotated guideline + resource map + schedule →
//! timer, resource charts and integrated guideline, plus the manifest that
//! lists them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Diagnostic, Element, StatechartModel, VariableDecl};
use crate::resgen::{resource_var, synthesize_resource_chart, synthesize_timer, AvailabilitySchedule, ResourceMap};
use crate::sim::{Chart, ChartRole, Composition, SimError};
use crate::weaver::{annotate, collect_annotations, declare_variables, integrate, WeaveError};

/// Tick period of the synthesized timer.
pub const TICK_SECONDS: u32 = 60;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Weave(#[from] WeaveError),
    #[error(transparent)]
    Compose(#[from] SimError),
}

/// Output of the integration step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Integration {
    pub timer: StatechartModel,
    pub resources: Vec<StatechartModel>,
    pub guideline: StatechartModel,
    /// `RES.<r>` declarations, one per annotated resource.
    pub interface: Vec<VariableDecl>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Integration {
    pub fn charts(&self) -> Vec<Chart> {
        let mut charts = vec![Chart::new(ChartRole::Timer, self.timer.clone())];
        charts.extend(
            self.resources
                .iter()
                .cloned()
                .map(|m| Chart::new(ChartRole::Resource, m)),
        );
        charts.push(Chart::new(ChartRole::Guideline, self.guideline.clone()));
        charts
    }

    pub fn composition(&self) -> Result<Composition, SimError> {
        Composition::with_shared(self.charts(), &self.interface)
    }
}

/// Resources named by the model's annotations: those in the map first, in
/// map order, then the rest in order of appearance.
pub fn annotated_resources(model: &StatechartModel, map: &ResourceMap) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    let elements = model
        .states
        .iter()
        .map(collect_annotations)
        .chain(model.transitions.iter().map(collect_annotations));
    for r in elements.flatten() {
        if !seen.contains(&r) {
            seen.push(r);
        }
    }
    let in_map = map.resources();
    let mut ordered: Vec<String> = in_map
        .iter()
        .filter(|r| seen.iter().any(|s| s == *r))
        .map(|r| r.to_string())
        .collect();
    ordered.extend(seen.into_iter().filter(|r| !in_map.contains(&r.as_str())));
    ordered
}

/// Synthesize timer and resource charts for an already annotated model and
/// strengthen its guards. Resources missing from `schedule` (or every
/// resource, when there is no schedule) are never available unless
/// `assume_available` is set.
pub fn integrate_annotated(
    annotated: &StatechartModel,
    map: &ResourceMap,
    schedule: Option<&AvailabilitySchedule>,
    assume_available: bool,
) -> Result<Integration, PipelineError> {
    let resources = annotated_resources(annotated, map);
    let mut diagnostics = Vec::new();
    let root = &annotated.name;
    let fallback = if assume_available { "always" } else { "never" };
    let in_map = map.resources();
    let mut charts = Vec::with_capacity(resources.len());
    for r in &resources {
        if !in_map.contains(&r.as_str()) {
            diagnostics.push(Diagnostic::warning(
                root.clone(),
                format!("annotated resource `{r}` does not appear in the resource map"),
            ));
        }
        let windows = match schedule {
            Some(s) => {
                if s.windows(r).is_none() {
                    diagnostics.push(Diagnostic::warning(
                        root.clone(),
                        format!("no schedule entry for `{r}`; assumed {fallback} available"),
                    ));
                }
                s.windows_or_default(r, assume_available)
            }
            None => {
                if !assume_available {
                    diagnostics.push(Diagnostic::warning(
                        root.clone(),
                        format!("no schedule given; `{r}` assumed never available"),
                    ));
                }
                AvailabilitySchedule::default().windows_or_default(r, assume_available)
            }
        };
        charts.push(synthesize_resource_chart(r, &windows));
    }
    let interface: Vec<VariableDecl> = resources
        .iter()
        .map(|r| VariableDecl::boolean(resource_var(r), false))
        .collect();
    let (guideline, warnings) = integrate(&declare_variables(annotated, &interface))?;
    diagnostics.extend(warnings);
    Ok(Integration {
        timer: synthesize_timer(TICK_SECONDS),
        resources: charts,
        guideline,
        interface,
        diagnostics,
    })
}

/// Annotate, synthesize and integrate in one go.
pub fn build_integration(
    model: &StatechartModel,
    map: &ResourceMap,
    schedule: Option<&AvailabilitySchedule>,
    assume_available: bool,
) -> Result<Integration, PipelineError> {
    integrate_annotated(&annotate(model, map), map, schedule, assume_available)
}

/// One line per annotated element: `<element>: <resources>`.
pub fn annotation_summary(model: &StatechartModel) -> Vec<String> {
    fn line(label: String, element: &impl Element) -> Option<String> {
        let rs = collect_annotations(element);
        (!rs.is_empty()).then(|| format!("{label}: {}", rs.join(", ")))
    }
    model
        .states
        .iter()
        .filter_map(|s| line(format!("state {}", s.name), s))
        .chain(
            model
                .transitions
                .iter()
                .enumerate()
                .filter_map(|(i, t)| line(format!("transition {i} ({})", t.label()), t)),
        )
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestChart {
    pub role: ChartRole,
    /// Relative to the manifest's directory.
    pub path: String,
}

/// Chart files in execution order plus shared declarations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub charts: Vec<ManifestChart>,
    #[serde(default)]
    pub shared_variables: Vec<VariableDecl>,
}

impl Manifest {
    /// Manifest for `integration` using `<chart name>.json` file names.
    pub fn for_integration(integration: &Integration) -> Self {
        Manifest {
            charts: integration
                .charts()
                .iter()
                .map(|c| ManifestChart {
                    role: c.role,
                    path: format!("{}.json", c.model.name),
                })
                .collect(),
            shared_variables: integration.interface.clone(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("manifest serialization is infallible");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::resgen::{parse_resource_map, parse_schedule};

    const CHART: &str = r#"{
        "name": "G",
        "variables": [{ "name": "curT", "type": "int" }],
        "events": ["scan", "treat"],
        "states": [{ "name": "a" }, { "name": "b", "entry": ["entry/ raise scan"] }],
        "transitions": [{ "source": "a", "target": "b" }, { "source": "b", "target": "a", "actions": ["raise treat"] }],
        "initial": "a"
    }"#;

    #[test]
    fn interface_follows_map_order() {
        let model = parse_model(CHART).unwrap();
        let map = parse_resource_map("treat: drug\nscan: scanner, tech\n").unwrap();
        let integration = build_integration(&model, &map, None, true).unwrap();
        let names: Vec<&str> = integration.interface.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["RES.drug", "RES.scanner", "RES.tech"]);
        assert!(integration.diagnostics.is_empty());
        assert_eq!(
            integration.guideline.transitions[0].guard.to_string(),
            "true && RES.scanner && RES.tech"
        );
        let comp = integration.composition().unwrap();
        let order: Vec<&str> = comp.charts().iter().map(|c| c.model.name.as_str()).collect();
        assert_eq!(order, ["Timer", "drug", "scanner", "tech", "G"]);
    }

    #[test]
    fn missing_schedule_entry_warns() {
        let model = parse_model(CHART).unwrap();
        let map = parse_resource_map("scan: scanner\n").unwrap();
        let schedule = parse_schedule("other: (-1, inf)\n").unwrap();
        let integration = build_integration(&model, &map, Some(&schedule), false).unwrap();
        assert_eq!(integration.diagnostics.len(), 1);
        assert!(integration.diagnostics[0].message.contains("assumed never available"));
    }

    #[test]
    fn unannotated_model_is_unchanged() {
        let model = parse_model(CHART).unwrap();
        let integration = build_integration(&model, &ResourceMap::default(), None, false).unwrap();
        assert_eq!(integration.guideline, model);
        assert!(integration.resources.is_empty());
    }

    #[test]
    fn manifest_round_trip() {
        let model = parse_model(CHART).unwrap();
        let map = parse_resource_map("scan: scanner\n").unwrap();
        let m = Manifest::for_integration(&build_integration(&model, &map, None, true).unwrap());
        assert_eq!(m.charts[1].path, "scanner.json");
        assert_eq!(Manifest::parse(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn summary_lists_annotated_elements() {
        let model = parse_model(CHART).unwrap();
        let map = parse_resource_map("scan: scanner, tech\ntreat: drug\n").unwrap();
        assert_eq!(
            annotation_summary(&annotate(&model, &map)),
            ["state b: scanner, tech", "transition 1 (b->a): drug"]
        );
    }
}
