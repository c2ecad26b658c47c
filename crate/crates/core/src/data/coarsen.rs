use serde::{Deserialize, Serialize};

use super::{CoarsenedRecord, DataError, ExposureValue, RawRecord};

fn yes() -> bool {
    true
}

/// One interval of the realized-exposure axis. Missing bounds are infinite.
/// Endpoints default to lower-inclusive, upper-exclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEntry {
    pub label: String,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default = "yes")]
    pub lower_inclusive: bool,
    #[serde(default)]
    pub upper_inclusive: bool,
}

impl IntervalEntry {
    pub fn new(label: &str, lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { label: label.to_string(), lower, upper, lower_inclusive: true, upper_inclusive: false }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = match self.lower {
            None => true,
            Some(l) if self.lower_inclusive => v >= l,
            Some(l) => v > l,
        };
        let below = match self.upper {
            None => true,
            Some(u) if self.upper_inclusive => v <= u,
            Some(u) => v < u,
        };
        above && below
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub from: String,
    pub to: String,
}

/// Deterministic many-to-one map from realized exposure to analysis level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "entries", rename_all = "snake_case")]
pub enum CoarseningMap {
    Interval(Vec<IntervalEntry>),
    Label(Vec<LabelEntry>),
}

impl CoarseningMap {
    /// Builds an interval map, checking that the entries tile a contiguous
    /// range with no overlap or gap and that labels are distinct.
    pub fn intervals(mut entries: Vec<IntervalEntry>) -> Result<Self, DataError> {
        if entries.is_empty() {
            return Err(DataError::InvalidMap("no entries".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.label == e.label) {
                return Err(DataError::InvalidMap(format!("duplicate coarse label `{}`", e.label)));
            }
            if let (Some(l), Some(u)) = (e.lower, e.upper) {
                if l > u || (l == u && !(e.lower_inclusive && e.upper_inclusive)) {
                    return Err(DataError::InvalidMap(format!("interval `{}` is empty", e.label)));
                }
            }
        }
        entries.sort_by(|a, b| match (a.lower, b.lower) {
            (None, None) => std::cmp::Ordering::Equal,
            (None, _) => std::cmp::Ordering::Less,
            (_, None) => std::cmp::Ordering::Greater,
            (Some(x), Some(y)) => x.total_cmp(&y),
        });
        for pair in entries.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let joined = matches!((a.upper, b.lower), (Some(u), Some(l)) if u == l);
            if !joined {
                return Err(DataError::InvalidMap(format!("gap or overlap between `{}` and `{}`", a.label, b.label)));
            }
            if a.upper_inclusive == b.lower_inclusive {
                let what = if a.upper_inclusive { "overlap" } else { "gap" };
                return Err(DataError::InvalidMap(format!(
                    "{what} at boundary {} between `{}` and `{}`",
                    a.upper.unwrap_or_default(),
                    a.label,
                    b.label
                )));
            }
        }
        Ok(CoarseningMap::Interval(entries))
    }

    pub fn labels(entries: Vec<LabelEntry>) -> Result<Self, DataError> {
        if entries.is_empty() {
            return Err(DataError::InvalidMap("no entries".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.from == e.from) {
                return Err(DataError::InvalidMap(format!("label `{}` mapped twice", e.from)));
            }
        }
        Ok(CoarseningMap::Label(entries))
    }

    /// Re-runs the constructor checks, e.g. after deserialization.
    pub fn validated(self) -> Result<Self, DataError> {
        match self {
            CoarseningMap::Interval(e) => Self::intervals(e),
            CoarseningMap::Label(e) => Self::labels(e),
        }
    }

    /// Coarse labels in axis order (intervals) or first-appearance order (labels).
    pub fn coarse_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let iter: Box<dyn Iterator<Item = &String>> = match self {
            CoarseningMap::Interval(e) => Box::new(e.iter().map(|e| &e.label)),
            CoarseningMap::Label(e) => Box::new(e.iter().map(|e| &e.to)),
        };
        for l in iter {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    pub fn apply(&self, value: &ExposureValue) -> Option<&str> {
        match (self, value) {
            (CoarseningMap::Interval(entries), ExposureValue::Numeric(v)) => {
                entries.iter().find(|e| e.contains(*v)).map(|e| e.label.as_str())
            }
            (CoarseningMap::Label(entries), ExposureValue::Label(s)) => {
                entries.iter().find(|e| &e.from == s).map(|e| e.to.as_str())
            }
            (CoarseningMap::Label(entries), ExposureValue::Numeric(v)) => {
                let s = v.to_string();
                entries.iter().find(|e| e.from == s).map(|e| e.to.as_str())
            }
            (CoarseningMap::Interval(_), ExposureValue::Label(_)) => None,
        }
    }
}

/// Replaces every record's realized exposure by its coarse label, preserving order.
pub fn coarsen(records: &[RawRecord], map: &CoarseningMap) -> Result<Vec<CoarsenedRecord>, DataError> {
    let mut uncovered: Vec<String> = Vec::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        match map.apply(&r.x_star) {
            Some(label) => out.push(CoarsenedRecord { z: r.z.clone(), x: label.to_string(), y: r.y }),
            None => {
                let v = r.x_star.to_string();
                if !uncovered.contains(&v) {
                    uncovered.push(v);
                }
            }
        }
    }
    if uncovered.is_empty() {
        Ok(out)
    } else {
        Err(DataError::Uncovered(uncovered))
    }
}
