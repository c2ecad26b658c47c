//! Embedded example data: a randomized peanut-consumption trial and a
//! Mendelian randomization study of homocysteine, stored as summary counts.

use crate::data::{
    CoarseningMap, Estimand, ExposureLevel, ExposureValue, LabelEntry, ObservedDistribution, RawRecord, Scenario,
};

pub const PEANUT_LOW: &str = "<0.2g";
pub const PEANUT_MID: &str = "0.2-6g";
pub const PEANUT_HIGH: &str = ">=6g";
pub const PEANUT_ANY: &str = ">=0.2g";

pub const HCY_LOW: &str = "<9";
pub const HCY_MID: &str = "9-20";
pub const HCY_MID_LOW: &str = "9-14.99";
pub const HCY_MID_HIGH: &str = "15-20";
pub const HCY_HIGH: &str = ">=20";

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Avoidance and consumption arms; weekly peanut intake in three groups; `y = 1` is allergic.
pub fn peanut() -> ObservedDistribution {
    ObservedDistribution::new(
        strings(&["avoidance", "consumption"]),
        strings(&[PEANUT_LOW, PEANUT_MID, PEANUT_HIGH]),
        vec![vec![[255, 48], [2, 0], [0, 0]], vec![[6, 6], [84, 3], [213, 0]]],
    )
    .expect("valid table")
}

/// One record per participant, with the intake group as the realized exposure.
pub fn peanut_records() -> Vec<RawRecord> {
    let d = peanut();
    let mut out = Vec::with_capacity(d.total() as usize);
    for (z, zl) in d.instrument_levels().iter().enumerate() {
        for (x, xl) in d.exposure_levels().iter().enumerate() {
            for y in 0..2u8 {
                for _ in 0..d.count(z, x, y) {
                    out.push(RawRecord { z: zl.clone(), x_star: ExposureValue::Label(xl.clone()), y });
                }
            }
        }
    }
    out
}

/// `<0.2g` against everything else.
pub fn peanut_binary_map() -> CoarseningMap {
    CoarseningMap::labels(vec![
        LabelEntry { from: PEANUT_LOW.into(), to: PEANUT_LOW.into() },
        LabelEntry { from: PEANUT_MID.into(), to: PEANUT_ANY.into() },
        LabelEntry { from: PEANUT_HIGH.into(), to: PEANUT_ANY.into() },
    ])
    .expect("valid map")
}

fn peanut_contrast() -> Estimand {
    Estimand::difference(PEANUT_LOW, PEANUT_HIGH)
}

pub fn peanut_ternary_clean() -> Scenario {
    Scenario::new(
        2,
        vec![ExposureLevel::clean(PEANUT_LOW), ExposureLevel::clean(PEANUT_MID), ExposureLevel::clean(PEANUT_HIGH)],
        peanut_contrast(),
    )
    .expect("valid scenario")
}

/// The middle group as `x^m`, either ill-defining or with a direct effect of assignment.
pub fn peanut_ternary_zdep(ill_defining: bool) -> Scenario {
    let mid =
        if ill_defining { ExposureLevel::ill_defining(PEANUT_MID) } else { ExposureLevel::contaminated(PEANUT_MID) };
    Scenario::new(2, vec![ExposureLevel::clean(PEANUT_LOW), mid, ExposureLevel::clean(PEANUT_HIGH)], peanut_contrast())
        .expect("valid scenario")
}

/// Risk under `<0.2g` with all other intake pooled into one level.
pub fn peanut_risk(pooled: ExposureLevel) -> Scenario {
    Scenario::new(2, vec![ExposureLevel::clean(PEANUT_LOW), pooled], Estimand::risk(PEANUT_LOW))
        .expect("valid scenario")
}

/// MTHFR 677CT genotype; homocysteine in five groups; `y = 1` is cardiovascular disease.
pub fn homocysteine() -> ObservedDistribution {
    ObservedDistribution::new(
        strings(&["CC", "CT", "TT"]),
        strings(&[HCY_LOW, HCY_MID_LOW, HCY_MID_HIGH, "20-30", ">30"]),
        vec![
            vec![[164, 92], [177, 180], [11, 29], [0, 12], [0, 0]],
            vec![[133, 87], [164, 182], [15, 23], [2, 11], [0, 4]],
            vec![[16, 17], [47, 39], [9, 12], [7, 14], [2, 9]],
        ],
    )
    .expect("valid table")
}

fn label_map(pairs: &[(&str, &str)]) -> CoarseningMap {
    CoarseningMap::labels(pairs.iter().map(|(f, t)| LabelEntry { from: f.to_string(), to: t.to_string() }).collect())
        .expect("valid map")
}

pub fn homocysteine_three_level_map() -> CoarseningMap {
    label_map(&[
        (HCY_LOW, HCY_LOW),
        (HCY_MID_LOW, HCY_MID),
        (HCY_MID_HIGH, HCY_MID),
        ("20-30", HCY_HIGH),
        (">30", HCY_HIGH),
    ])
}

pub fn homocysteine_four_level_map() -> CoarseningMap {
    label_map(&[
        (HCY_LOW, HCY_LOW),
        (HCY_MID_LOW, HCY_MID_LOW),
        (HCY_MID_HIGH, HCY_MID_HIGH),
        ("20-30", HCY_HIGH),
        (">30", HCY_HIGH),
    ])
}

fn hcy_contrast() -> Estimand {
    Estimand::difference(HCY_HIGH, HCY_LOW)
}

/// `<9`, `9-20`, `>=20`; the middle level as given.
pub fn homocysteine_three_level(mid: ExposureLevel) -> Scenario {
    Scenario::new(3, vec![ExposureLevel::clean(HCY_LOW), mid, ExposureLevel::clean(HCY_HIGH)], hcy_contrast())
        .expect("valid scenario")
}

pub fn homocysteine_four_level() -> Scenario {
    Scenario::new(
        3,
        vec![
            ExposureLevel::clean(HCY_LOW),
            ExposureLevel::clean(HCY_MID_LOW),
            ExposureLevel::clean(HCY_MID_HIGH),
            ExposureLevel::clean(HCY_HIGH),
        ],
        hcy_contrast(),
    )
    .expect("valid scenario")
}

/// A published interval, rounded to two decimals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportedInterval {
    pub analysis: &'static str,
    pub lower: f64,
    pub upper: f64,
}

pub const PEANUT_REPORTED: [ReportedInterval; 4] = [
    ReportedInterval { analysis: "risk difference bounds", lower: -0.16, upper: 0.16 },
    ReportedInterval { analysis: "risk difference percentile bootstrap CI", lower: -0.20, upper: 0.21 },
    ReportedInterval { analysis: "risk under <0.2g bounds", lower: 0.15, upper: 0.20 },
    ReportedInterval { analysis: "risk under <0.2g m-out-of-n bootstrap CI", lower: 0.05, upper: 0.29 },
];

pub const HOMOCYSTEINE_REPORTED: [ReportedInterval; 3] = [
    ReportedInterval { analysis: "three-level bounds", lower: -0.62, upper: 0.81 },
    ReportedInterval { analysis: "four-level bounds", lower: -0.62, upper: 0.81 },
    ReportedInterval { analysis: "three-level multinomial bootstrap CI", lower: -0.67, upper: 0.83 },
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{coarsen, tabulate, validate};

    #[test]
    fn peanut_margins() {
        let d = peanut();
        assert_eq!(d.n_per_z(), vec![305, 312]);
        assert_eq!(d.count(0, 0, 1), 48);
        let recs = peanut_records();
        assert_eq!(recs.len(), 617);
        let map = CoarseningMap::labels(
            [PEANUT_LOW, PEANUT_MID, PEANUT_HIGH]
                .iter()
                .map(|l| LabelEntry { from: l.to_string(), to: l.to_string() })
                .collect(),
        )
        .unwrap();
        let coarse = coarsen(&recs, &map).unwrap();
        let again = tabulate(&coarse, d.instrument_levels(), d.exposure_levels()).unwrap();
        assert_eq!(again, d);
    }

    #[test]
    fn homocysteine_margins_and_maps() {
        let d = homocysteine();
        assert_eq!(d.n_per_z(), vec![665, 621, 172]);
        assert_eq!(d.count(0, 4, 0), 0);
        let three = d.coarsened(&homocysteine_three_level_map()).unwrap();
        assert_eq!(three.exposure_levels(), &[HCY_LOW, HCY_MID, HCY_HIGH]);
        assert_eq!(three.n_per_z(), d.n_per_z());
        validate(&homocysteine_three_level(ExposureLevel::clean(HCY_MID)), &three).unwrap();
        let four = d.coarsened(&homocysteine_four_level_map()).unwrap();
        validate(&homocysteine_four_level(), &four).unwrap();
    }

    #[test]
    fn peanut_pooled() {
        let d = peanut().coarsened(&peanut_binary_map()).unwrap();
        assert_eq!(d.count(1, 1, 0), 297);
        validate(&peanut_risk(ExposureLevel::ill_defining(PEANUT_ANY)), &d).unwrap();
    }
}
