//! TOML input documents. Every document carries a `schema` version string.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CoarseningMap, DataError, Estimand, ExposureLevel, IntervalEntry, LabelEntry, ObservedDistribution, Scenario,
};

pub const SCHEMA_VERSION: &str = "ivcoarse/1";

fn check_schema(found: &str) -> Result<(), DataError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(DataError::Schema(found.to_string()))
    }
}

fn read(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|e| DataError::Parse(format!("{}: {e}", path.display())))
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, DataError> {
    #[derive(Deserialize)]
    struct Probe {
        #[serde(default)]
        schema: Option<String>,
    }
    let probe: Probe = toml::from_str(text).map_err(|e| DataError::Parse(e.to_string()))?;
    check_schema(probe.schema.as_deref().unwrap_or(""))?;
    toml::from_str(text).map_err(|e| DataError::Parse(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub z: String,
    pub x: String,
    pub y: u8,
    pub count: i64,
}

/// Summary counts keyed by `(z, x, y)`. Cells that are not listed count as zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub schema: String,
    pub instrument_levels: Vec<String>,
    pub exposure_levels: Vec<String>,
    pub counts: Vec<CountEntry>,
}

impl SummaryDocument {
    pub fn from_distribution(dist: &ObservedDistribution) -> Self {
        let counts = dist
            .cells()
            .into_iter()
            .map(|c| CountEntry {
                z: dist.instrument_levels()[c.z].clone(),
                x: dist.exposure_levels()[c.x].clone(),
                y: c.y,
                count: dist.count(c.z, c.x, c.y) as i64,
            })
            .collect();
        Self {
            schema: SCHEMA_VERSION.to_string(),
            instrument_levels: dist.instrument_levels().to_vec(),
            exposure_levels: dist.exposure_levels().to_vec(),
            counts,
        }
    }

    pub fn to_distribution(&self) -> Result<ObservedDistribution, DataError> {
        check_schema(&self.schema)?;
        let kz = self.instrument_levels.len();
        let kx = self.exposure_levels.len();
        let mut counts = vec![vec![[0u64; 2]; kx]; kz];
        let mut seen = vec![vec![[false; 2]; kx]; kz];
        for e in &self.counts {
            let z = self
                .instrument_levels
                .iter()
                .position(|l| *l == e.z)
                .ok_or_else(|| DataError::UnknownLabel(e.z.clone()))?;
            let x = self
                .exposure_levels
                .iter()
                .position(|l| *l == e.x)
                .ok_or_else(|| DataError::UnknownLabel(e.x.clone()))?;
            if e.y > 1 {
                return Err(DataError::BadOutcome { line: 0, value: e.y.to_string() });
            }
            if e.count < 0 {
                return Err(DataError::NegativeCount { z: e.z.clone(), x: e.x.clone(), y: e.y, count: e.count });
            }
            let y = e.y as usize;
            if seen[z][x][y] {
                return Err(DataError::DuplicateCell { z: e.z.clone(), x: e.x.clone(), y: e.y });
            }
            seen[z][x][y] = true;
            counts[z][x][y] = e.count as u64;
        }
        ObservedDistribution::new(self.instrument_levels.clone(), self.exposure_levels.clone(), counts)
    }
}

pub fn parse_summary(text: &str) -> Result<ObservedDistribution, DataError> {
    parse_toml::<SummaryDocument>(text)?.to_distribution()
}

pub fn load_summary(path: &Path) -> Result<ObservedDistribution, DataError> {
    parse_summary(&read(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScenarioDocument {
    schema: String,
    instrument_arity: usize,
    levels: Vec<ExposureLevel>,
    estimand: Estimand,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, DataError> {
    let doc: ScenarioDocument = parse_toml(text)?;
    Scenario::new(doc.instrument_arity, doc.levels, doc.estimand)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, DataError> {
    parse_scenario(&read(path)?)
}

#[derive(Debug, Clone, Deserialize)]
struct CoarseningDocument {
    #[allow(dead_code)]
    schema: String,
    kind: String,
    entries: Vec<toml::Value>,
}

pub fn parse_coarsening(text: &str) -> Result<CoarseningMap, DataError> {
    let doc: CoarseningDocument = parse_toml(text)?;
    match doc.kind.as_str() {
        "interval" => CoarseningMap::intervals(
            doc.entries
                .iter()
                .cloned()
                .map(|v| v.try_into::<IntervalEntry>().map_err(|e| DataError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?,
        ),
        "label" => CoarseningMap::labels(
            doc.entries
                .iter()
                .cloned()
                .map(|v| v.try_into::<LabelEntry>().map_err(|e| DataError::Parse(e.to_string())))
                .collect::<Result<_, _>>()?,
        ),
        other => Err(DataError::InvalidMap(format!("unknown map kind `{other}`"))),
    }
}

pub fn load_coarsening(path: &Path) -> Result<CoarseningMap, DataError> {
    parse_coarsening(&read(path)?)
}
