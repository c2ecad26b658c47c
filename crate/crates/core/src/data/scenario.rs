use std::fmt;

use serde::{Deserialize, Serialize};

use super::{DataError, ObservedDistribution};

/// Assumptions attached to one coarsened exposure level.
///
/// A level whose outcome may depend on the instrument (`z_dependent`) is either
/// ill-defining (`well_defining = false`) or contaminated (`well_defining =
/// true`); both produce the same constraint system and the flag is kept only
/// for reporting.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExposureLevel {
    pub label: String,
    pub well_defining: bool,
    pub z_dependent: bool,
}

impl ExposureLevel {
    pub fn clean(label: &str) -> Self {
        Self { label: label.to_string(), well_defining: true, z_dependent: false }
    }

    pub fn ill_defining(label: &str) -> Self {
        Self { label: label.to_string(), well_defining: false, z_dependent: true }
    }

    pub fn contaminated(label: &str) -> Self {
        Self { label: label.to_string(), well_defining: true, z_dependent: true }
    }

    /// Well-defining and shielded from the instrument.
    pub fn is_clean(&self) -> bool {
        self.well_defining && !self.z_dependent
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimand {
    /// `ψ_x = p{Y(X=x) = 1}`
    CounterfactualRisk { level: String },
    /// `θ = ψ_treated − ψ_reference`
    RiskDifference { treated: String, reference: String },
}

impl Estimand {
    pub fn risk(level: &str) -> Self {
        Estimand::CounterfactualRisk { level: level.to_string() }
    }

    pub fn difference(treated: &str, reference: &str) -> Self {
        Estimand::RiskDifference { treated: treated.to_string(), reference: reference.to_string() }
    }

    pub fn referenced_levels(&self) -> Vec<&str> {
        match self {
            Estimand::CounterfactualRisk { level } => vec![level],
            Estimand::RiskDifference { treated, reference } => vec![treated, reference],
        }
    }

    pub fn is_contrast(&self) -> bool {
        matches!(self, Estimand::RiskDifference { .. })
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimand::CounterfactualRisk { level } => write!(f, "p{{Y(X={level})=1}}"),
            Estimand::RiskDifference { treated, reference } => {
                write!(f, "p{{Y(X={treated})=1}} - p{{Y(X={reference})=1}}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub instrument_arity: usize,
    pub levels: Vec<ExposureLevel>,
    pub estimand: Estimand,
}

impl Scenario {
    pub fn new(instrument_arity: usize, levels: Vec<ExposureLevel>, estimand: Estimand) -> Result<Self, DataError> {
        let s = Self { instrument_arity, levels, estimand };
        s.check()?;
        Ok(s)
    }

    /// Checks the structural invariants; deserialized scenarios should pass through this.
    pub fn check(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::InvalidScenario(m));
        if !(2..=3).contains(&self.instrument_arity) {
            return bad(format!("instrument arity must be 2 or 3, got {}", self.instrument_arity));
        }
        if self.levels.is_empty() {
            return bad("no exposure levels".into());
        }
        for (i, l) in self.levels.iter().enumerate() {
            if self.levels[..i].iter().any(|o| o.label == l.label) {
                return bad(format!("duplicate level `{}`", l.label));
            }
            if !l.well_defining && !l.z_dependent {
                return bad(format!(
                    "level `{}` is ill-defining, so its outcome must be modelled as instrument-dependent",
                    l.label
                ));
            }
        }
        if !self.levels.iter().any(ExposureLevel::is_clean) {
            return bad("at least one level must be well-defining and instrument-independent".into());
        }
        let refs = self.estimand.referenced_levels();
        if let Estimand::RiskDifference { treated, reference } = &self.estimand {
            if treated == reference {
                return bad("risk difference compares a level with itself".into());
            }
        }
        for r in refs {
            match self.level(r) {
                None => return bad(format!("estimand references unknown level `{r}`")),
                Some(l) if !l.is_clean() => {
                    return bad(format!(
                        "estimand references `{r}`, which is not a clean level; the target would not be linear in the response-type distribution"
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn level(&self, label: &str) -> Option<&ExposureLevel> {
        self.levels.iter().find(|l| l.label == label)
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.levels.iter().map(|l| l.label.clone()).collect()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Copy with one level re-flagged; used to build weaker or stronger variants.
    pub fn with_level(&self, level: ExposureLevel) -> Result<Self, DataError> {
        let mut s = self.clone();
        let i = s.level_index(&level.label).ok_or_else(|| DataError::UnknownLabel(level.label.clone()))?;
        s.levels[i] = level;
        s.check()?;
        Ok(s)
    }

    pub fn with_estimand(&self, estimand: Estimand) -> Result<Self, DataError> {
        Self::new(self.instrument_arity, self.levels.clone(), estimand)
    }
}

/// A scenario paired with data whose labels and shape it matches.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub scenario: Scenario,
    pub dist: ObservedDistribution,
}

/// Checks that the scenario and data agree, reordering exposure levels of the
/// data into scenario order.
pub fn validate(scenario: &Scenario, dist: &ObservedDistribution) -> Result<Validated, DataError> {
    scenario.check()?;
    if scenario.instrument_arity != dist.num_instruments() {
        return Err(DataError::Mismatch(format!(
            "scenario has a {}-level instrument but the data has {}",
            scenario.instrument_arity,
            dist.num_instruments()
        )));
    }
    let mut want = scenario.labels();
    let mut have = dist.exposure_levels().to_vec();
    want.sort();
    have.sort();
    if want != have {
        return Err(DataError::Mismatch(format!(
            "scenario levels [{}] differ from data levels [{}]",
            scenario.labels().join(", "),
            dist.exposure_levels().join(", ")
        )));
    }
    Ok(Validated { scenario: scenario.clone(), dist: dist.reordered(&scenario.labels())? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_level() -> Scenario {
        Scenario::new(
            2,
            vec![ExposureLevel::clean("a"), ExposureLevel::ill_defining("m"), ExposureLevel::clean("b")],
            Estimand::difference("a", "b"),
        )
        .unwrap()
    }

    #[test]
    fn estimand_on_z_dependent_level_is_refused() {
        let s = three_level();
        assert!(s.with_estimand(Estimand::difference("m", "b")).is_err());
        assert!(s.with_estimand(Estimand::risk("m")).is_err());
    }

    #[test]
    fn needs_one_clean_level() {
        let r = Scenario::new(2, vec![ExposureLevel::ill_defining("m")], Estimand::risk("m"));
        assert!(r.is_err());
    }

    #[test]
    fn ill_defining_must_be_z_dependent() {
        let lv = ExposureLevel { label: "m".into(), well_defining: false, z_dependent: false };
        assert!(Scenario::new(2, vec![ExposureLevel::clean("a"), lv], Estimand::risk("a")).is_err());
    }

    #[test]
    fn validation_reorders_and_checks() {
        let d = ObservedDistribution::new(
            vec!["0".into(), "1".into()],
            vec!["b".into(), "a".into(), "m".into()],
            vec![vec![[1, 0], [0, 1], [1, 1]], vec![[2, 0], [0, 2], [0, 1]]],
        )
        .unwrap();
        let v = validate(&three_level(), &d).unwrap();
        assert_eq!(v.dist.exposure_levels(), &["a", "m", "b"]);
        assert_eq!(v.dist.count(1, 2, 0), 2);

        let wrong_arity = Scenario { instrument_arity: 3, ..three_level() };
        assert!(matches!(validate(&wrong_arity, &d), Err(DataError::Mismatch(_))));
        let fewer = Scenario::new(
            2,
            vec![ExposureLevel::clean("a"), ExposureLevel::clean("b")],
            Estimand::difference("a", "b"),
        )
        .unwrap();
        assert!(matches!(validate(&fewer, &d), Err(DataError::Mismatch(_))));
    }
}
