//! Reading inputs and assembling compositions.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};

use resweave_core::model::{parse_model, Diagnostic, StatechartModel};
use resweave_core::pipeline::{build_integration, Manifest};
use resweave_core::resgen::{parse_resource_map, parse_schedule, AvailabilitySchedule, ResourceMap};
use resweave_core::sim::{Chart, ChartRole, Composition, Scenario};

pub enum Source {
    Manifest(PathBuf),
    Model {
        model: PathBuf,
        map: Option<PathBuf>,
        schedule: Option<PathBuf>,
        assume_available: bool,
    },
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn model(path: &Path) -> Result<StatechartModel> {
    parse_model(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn map(path: Option<&Path>) -> Result<ResourceMap> {
    match path {
        Some(p) => parse_resource_map(&read(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(ResourceMap::default()),
    }
}

pub fn schedule(path: Option<&Path>) -> Result<Option<AvailabilitySchedule>> {
    path.map(|p| parse_schedule(&read(p)?).with_context(|| format!("parsing {}", p.display())))
        .transpose()
}

pub fn scenario(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::parse(&read(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(Scenario::default()),
    }
}

/// A loaded composition plus the name used for exported files: the last
/// guideline chart, or the last chart when there is none.
pub struct Loaded {
    pub composition: Composition,
    pub guideline: String,
    pub diagnostics: Vec<Diagnostic>,
}

fn from_manifest(path: &Path) -> Result<Loaded> {
    let manifest = Manifest::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let charts = manifest
        .charts
        .iter()
        .map(|c| Ok(Chart::new(c.role, model(&base.join(&c.path))?)))
        .collect::<Result<Vec<_>>>()?;
    let composition = Composition::with_shared(charts, &manifest.shared_variables)
        .with_context(|| format!("composing {}", path.display()))?;
    finish(composition, Vec::new())
}

fn finish(composition: Composition, diagnostics: Vec<Diagnostic>) -> Result<Loaded> {
    let charts = composition.charts();
    let Some(guideline) = charts
        .iter()
        .rev()
        .find(|c| c.role == ChartRole::Guideline)
        .or(charts.last())
        .map(|c| c.model.name.clone())
    else {
        bail!("composition has no charts");
    };
    Ok(Loaded {
        composition,
        guideline,
        diagnostics,
    })
}

pub fn composition(source: &Source) -> Result<Loaded> {
    match source {
        Source::Manifest(path) => from_manifest(path),
        Source::Model {
            model: model_path,
            map: map_path,
            schedule: schedule_path,
            assume_available,
        } => {
            let m = model(model_path)?;
            let map = map(map_path.as_deref())?;
            let schedule = schedule(schedule_path.as_deref())?;
            let integration = build_integration(&m, &map, schedule.as_ref(), *assume_available)?;
            let composition = integration.composition()?;
            finish(composition, integration.diagnostics)
        }
    }
}
