//! Closed-form bounds for a two-level instrument, written out term by term.

use num_rational::BigRational;
use num_traits::Zero;

use super::symbolic::{AffineTerm, Direction, ObservableBasis, Provenance, SymbolicBoundSet};
use super::{BoundResult, BoundsError, Method};
use crate::data::{Estimand, ObservedDistribution, Scenario};

/// One printed term: `constant + Σ coef·p_{level y·z}` with levels given by position
/// in the `(x, x', x'')` triple.
type Printed = (i64, &'static [(i64, usize, u8, usize)]);

const X: usize = 0;
const XP: usize = 1;
const XPP: usize = 2;

/// Lower bound on `ψ_{x'} − ψ_x`.
const TERNARY_LOWER: [Printed; 10] = [
    (-1, &[(1, X, 0, 1), (1, XP, 1, 1)]),
    (-1, &[(1, X, 0, 1), (1, XP, 1, 0)]),
    (-1, &[(1, X, 0, 0), (1, XP, 1, 0)]),
    (-1, &[(1, X, 0, 0), (1, XP, 1, 1)]),
    (-2, &[(2, X, 0, 0), (1, X, 1, 1), (1, XP, 1, 0), (1, XP, 1, 1)]),
    (-2, &[(1, X, 0, 0), (1, X, 0, 1), (1, XP, 0, 0), (2, XP, 1, 1)]),
    (-2, &[(2, X, 0, 1), (1, X, 1, 0), (1, XP, 1, 0), (1, XP, 1, 1)]),
    (-2, &[(1, X, 0, 0), (1, X, 0, 1), (1, XP, 0, 1), (2, XP, 1, 0)]),
    (-2, &[(1, X, 0, 1), (1, XP, 1, 0), (1, XPP, 1, 0), (1, XPP, 0, 1), (1, X, 0, 0), (1, XP, 1, 1)]),
    (-2, &[(1, X, 0, 0), (1, XP, 1, 1), (1, XPP, 0, 0), (1, XPP, 1, 1), (1, X, 0, 1), (1, XP, 1, 0)]),
];

/// Upper bound on `ψ_{x'} − ψ_x`. The last two terms carry `x''` in the
/// positions printed with a bare level index.
const TERNARY_UPPER: [Printed; 10] = [
    (1, &[(-1, XP, 0, 1), (-1, X, 1, 0)]),
    (1, &[(-1, XP, 0, 1), (-1, X, 1, 1)]),
    (1, &[(-1, XP, 0, 0), (-1, X, 1, 0)]),
    (1, &[(-1, XP, 0, 0), (-1, X, 1, 1)]),
    (2, &[(-2, XP, 0, 1), (-1, X, 1, 0), (-1, X, 1, 1), (-1, XP, 1, 0)]),
    (2, &[(-1, X, 0, 1), (-1, XP, 0, 0), (-1, XP, 0, 1), (-2, X, 1, 0)]),
    (2, &[(-2, XP, 0, 0), (-1, X, 1, 0), (-1, X, 1, 1), (-1, XP, 1, 1)]),
    (2, &[(-1, X, 0, 0), (-1, XP, 0, 0), (-1, XP, 0, 1), (-2, X, 1, 1)]),
    (2, &[(-1, X, 1, 0), (-1, XP, 0, 1), (-1, XPP, 1, 0), (-1, XPP, 0, 1), (-1, X, 1, 1), (-1, XP, 0, 0)]),
    (2, &[(-1, X, 1, 1), (-1, XP, 0, 0), (-1, XPP, 0, 0), (-1, XPP, 1, 1), (-1, X, 1, 0), (-1, XP, 0, 1)]),
];

const SINGLE_LOWER: [Printed; 2] = [(0, &[(1, X, 1, 0)]), (0, &[(1, X, 1, 1)])];
const SINGLE_UPPER: [Printed; 2] = [(1, &[(-1, X, 0, 0)]), (1, &[(-1, X, 0, 1)])];

fn build(basis: &ObservableBasis, idx: &[usize], printed: &[Printed], direction: Direction) -> SymbolicBoundSet {
    let terms: Vec<AffineTerm> = printed
        .iter()
        .map(|(constant, cells)| {
            let mut full = vec![BigRational::zero(); basis.full_len()];
            for &(coef, level, y, z) in cells.iter() {
                full[basis.full_index(z, idx[level], y)] += BigRational::from_integer(coef.into());
            }
            basis.canonical(BigRational::from_integer((*constant).into()), full)
        })
        .collect();
    SymbolicBoundSet::new(direction, basis.clone(), terms, Provenance::Transcribed)
}

fn check_arity(basis: &ObservableBasis) -> Result<(), BoundsError> {
    if basis.instrument_arity != 2 {
        return Err(BoundsError::Arity { expected: 2, found: basis.instrument_arity });
    }
    Ok(())
}

fn distinct(labels: &[&str]) -> Result<(), BoundsError> {
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(BoundsError::Mismatch(format!("level `{l}` is used twice")));
        }
    }
    Ok(())
}

/// Ten-term bounds on `ψ_{x'} − ψ_x` for three instrument-independent levels.
pub fn ternary_terms(
    basis: &ObservableBasis,
    x: &str,
    x_prime: &str,
    x_other: &str,
) -> Result<(SymbolicBoundSet, SymbolicBoundSet), BoundsError> {
    check_arity(basis)?;
    distinct(&[x, x_prime, x_other])?;
    if basis.num_levels() != 3 {
        return Err(BoundsError::Mismatch(format!("need exactly three exposure levels, found {}", basis.num_levels())));
    }
    let idx = [basis.level_index(x)?, basis.level_index(x_prime)?, basis.level_index(x_other)?];
    Ok((build(basis, &idx, &TERNARY_LOWER, Direction::Lower), build(basis, &idx, &TERNARY_UPPER, Direction::Upper)))
}

/// The first eight terms of the ternary bounds; they do not involve any third level.
pub fn classic_terms(
    basis: &ObservableBasis,
    x: &str,
    x_prime: &str,
) -> Result<(SymbolicBoundSet, SymbolicBoundSet), BoundsError> {
    check_arity(basis)?;
    distinct(&[x, x_prime])?;
    if !(2..=3).contains(&basis.num_levels()) {
        return Err(BoundsError::Mismatch(format!("need two or three exposure levels, found {}", basis.num_levels())));
    }
    let idx = [basis.level_index(x)?, basis.level_index(x_prime)?];
    Ok((
        build(basis, &idx, &TERNARY_LOWER[..8], Direction::Lower),
        build(basis, &idx, &TERNARY_UPPER[..8], Direction::Upper),
    ))
}

/// `max{p_{x1·0}, p_{x1·1}} ≤ ψ_x ≤ min{1 − p_{x0·0}, 1 − p_{x0·1}}`.
pub fn single_level_terms(
    basis: &ObservableBasis,
    x: &str,
) -> Result<(SymbolicBoundSet, SymbolicBoundSet), BoundsError> {
    check_arity(basis)?;
    let idx = [basis.level_index(x)?];
    Ok((build(basis, &idx, &SINGLE_LOWER, Direction::Lower), build(basis, &idx, &SINGLE_UPPER, Direction::Upper)))
}

fn evaluate(
    dist: &ObservedDistribution,
    sets: (SymbolicBoundSet, SymbolicBoundSet),
    estimand: Estimand,
) -> Result<BoundResult, BoundsError> {
    Ok(BoundResult {
        lower: sets.0.evaluate(dist)?,
        upper: sets.1.evaluate(dist)?,
        lower_certificate: None,
        upper_certificate: None,
        method: Method::ClosedForm,
        levels: dist.exposure_levels().to_vec(),
        estimand,
        projection: None,
    })
}

pub fn closed_form_ternary(
    dist: &ObservedDistribution,
    x: &str,
    x_prime: &str,
    x_other: &str,
) -> Result<BoundResult, BoundsError> {
    let sets = ternary_terms(&ObservableBasis::of_distribution(dist), x, x_prime, x_other)?;
    evaluate(dist, sets, Estimand::difference(x_prime, x))
}

pub fn closed_form_classic(dist: &ObservedDistribution, x: &str, x_prime: &str) -> Result<BoundResult, BoundsError> {
    let sets = classic_terms(&ObservableBasis::of_distribution(dist), x, x_prime)?;
    evaluate(dist, sets, Estimand::difference(x_prime, x))
}

pub fn closed_form_single_level(dist: &ObservedDistribution, x: &str) -> Result<BoundResult, BoundsError> {
    let sets = single_level_terms(&ObservableBasis::of_distribution(dist), x)?;
    evaluate(dist, sets, Estimand::risk(x))
}

/// The closed form that is tight under `scenario`, if there is one: the ten
/// ternary terms for three clean levels, the eight classic terms for two clean
/// levels (plus at most one instrument-dependent level), and the two-term
/// risk bounds for one clean level beside one instrument-dependent level.
/// `dist` must be in scenario level order.
pub fn tight_closed_form(
    scenario: &Scenario,
    dist: &ObservedDistribution,
) -> Result<Option<(&'static str, BoundResult)>, BoundsError> {
    if scenario.instrument_arity != 2 {
        return Ok(None);
    }
    let clean: Vec<&str> = scenario.levels.iter().filter(|l| l.is_clean()).map(|l| l.label.as_str()).collect();
    let k = scenario.num_levels();
    match &scenario.estimand {
        Estimand::RiskDifference { treated, reference } => {
            if k == 3 && clean.len() == 3 {
                let other = clean.iter().find(|l| *l != treated && *l != reference).expect("three levels");
                Ok(Some(("ternary", closed_form_ternary(dist, reference, treated, other)?)))
            } else if clean.len() == 2 && k <= 3 {
                Ok(Some(("classic", closed_form_classic(dist, reference, treated)?)))
            } else {
                Ok(None)
            }
        }
        Estimand::CounterfactualRisk { level } => {
            if k == 2 && clean.len() == 1 {
                Ok(Some(("single-level", closed_form_single_level(dist, level)?)))
            } else {
                Ok(None)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn dist(counts: Vec<Vec<[u64; 2]>>, levels: &[&str]) -> ObservedDistribution {
        ObservedDistribution::new(
            (0..counts.len()).map(|z| z.to_string()).collect(),
            levels.iter().map(|s| s.to_string()).collect(),
            counts,
        )
        .unwrap()
    }

    #[test]
    fn identification_construction_collapses_ternary_bounds() {
        // all units take x'' under both arms, with Y=1 under z=0 and Y=0 under z=1
        let d = dist(vec![vec![[0, 0], [0, 0], [0, 1]], vec![[0, 0], [0, 0], [1, 0]]], &["x", "x'", "x''"]);
        let r = closed_form_ternary(&d, "x", "x'", "x''").unwrap();
        assert!(r.lower.is_zero() && r.upper.is_zero());
        let c = closed_form_classic(&d, "x", "x'").unwrap();
        assert_eq!(c.lower, -BigRational::one());
        assert_eq!(c.upper, BigRational::one());
    }

    #[test]
    fn unobserved_level_gives_vacuous_risk_bounds() {
        let d = dist(vec![vec![[0, 0], [3, 2]], vec![[0, 0], [1, 4]]], &["x", "m"]);
        let r = closed_form_single_level(&d, "x").unwrap();
        assert!(r.lower.is_zero());
        assert!(r.upper.is_one());
    }

    #[test]
    fn arity_and_levels_are_checked() {
        let d = dist(vec![vec![[1, 1], [1, 1]], vec![[1, 1], [1, 1]], vec![[1, 1], [1, 1]]], &["x", "x'"]);
        assert!(matches!(closed_form_classic(&d, "x", "x'"), Err(BoundsError::Arity { expected: 2, found: 3 })));
        let d = dist(vec![vec![[1, 1], [1, 1]], vec![[1, 1], [1, 1]]], &["x", "x'"]);
        assert!(matches!(closed_form_ternary(&d, "x", "x'", "x''"), Err(BoundsError::Mismatch(_))));
        assert!(matches!(closed_form_classic(&d, "x", "y"), Err(BoundsError::UnknownLevel(_))));
    }

    #[test]
    fn classic_is_a_subset_of_ternary_terms() {
        let b = ObservableBasis::new(2, vec!["x".into(), "x'".into(), "x''".into()]);
        let (tl, tu) = ternary_terms(&b, "x", "x'", "x''").unwrap();
        let (cl, cu) = classic_terms(&b, "x", "x'").unwrap();
        assert_eq!((tl.len(), tu.len(), cl.len(), cu.len()), (10, 10, 8, 8));
        assert!(cl.terms.iter().all(|t| tl.terms.contains(t)));
        assert!(cu.terms.iter().all(|t| tu.terms.contains(t)));
        assert!(!super::super::term_sets_equal(&cl, &tl).unwrap());
    }

    #[test]
    fn tight_form_follows_scenario_shape() {
        use crate::data::ExposureLevel;
        let c = ExposureLevel::clean;
        let d = dist(vec![vec![[2, 1], [1, 2], [3, 1]], vec![[1, 1], [2, 2], [1, 3]]], &["x", "x'", "x''"]);
        let contrast = Estimand::difference("x'", "x");
        let three = Scenario::new(2, vec![c("x"), c("x'"), c("x''")], contrast.clone()).unwrap();
        assert_eq!(tight_closed_form(&three, &d).unwrap().unwrap().0, "ternary");
        let xm = Scenario::new(2, vec![c("x"), c("x'"), ExposureLevel::contaminated("x''")], contrast.clone()).unwrap();
        assert_eq!(tight_closed_form(&xm, &d).unwrap().unwrap().0, "classic");
        let risk = Scenario::new(2, vec![c("x"), c("x'"), c("x''")], Estimand::risk("x")).unwrap();
        assert!(tight_closed_form(&risk, &d).unwrap().is_none());
        let wide = Scenario::new(3, vec![c("x"), c("x'")], contrast).unwrap();
        assert!(tight_closed_form(&wide, &d).unwrap().is_none());
    }
}
