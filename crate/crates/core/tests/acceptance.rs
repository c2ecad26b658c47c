//! One line per criterion on stderr, written past the test harness capture so
//! it shows on every run.

use std::io::Write;
use std::time::{Duration, Instant};

use ivcoarse::bounds::{
    classic_terms, closed_form_classic, closed_form_single_level, closed_form_ternary, derive_symbolic, numeric_bounds,
    single_level_terms, term_sets_equal, ternary_terms, BoundResult, DeriveCaps, ObservableBasis,
};
use ivcoarse::data::{validate, Estimand, ExposureLevel, ObservedDistribution, Scenario};
use ivcoarse::datasets::{self, ReportedInterval, PEANUT_ANY, PEANUT_HIGH, PEANUT_LOW, PEANUT_MID};
use ivcoarse::inference::{interval_from_counts, BootstrapMethod, BootstrapSpec};
use ivcoarse::oracle::{
    check_closed_forms, check_equivalences, check_orderings, check_tightness, check_validity,
    identification_construction, OracleReport,
};
use ivcoarse::response::ConstraintSystem;

const SEED: u64 = 20240101;
const REPLICATES: usize = 2000;
const TRIALS: usize = 1000;

fn report(n: u32, ok: bool, detail: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {n}: {} | {detail}", if ok { "PASS" } else { "FAIL" });
}

fn bounds(scenario: &Scenario, dist: &ObservedDistribution) -> BoundResult {
    let v = validate(scenario, dist).unwrap();
    numeric_bounds(&ConstraintSystem::build(&v.scenario).unwrap(), &v.dist).unwrap()
}

fn near(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol + 1e-12
}

fn within(lower: f64, upper: f64, r: &ReportedInterval, tol: f64) -> bool {
    near(lower, r.lower, tol) && near(upper, r.upper, tol)
}

fn show(lower: f64, upper: f64) -> String {
    format!("({lower:.4}, {upper:.4})")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn summarize(reports: &[OracleReport]) -> (bool, String) {
    let checked: usize = reports.iter().flat_map(|r| &r.properties).map(|p| p.checked).sum();
    let failed: usize = reports.iter().flat_map(|r| &r.properties).map(|p| p.failures).sum();
    let first = reports
        .iter()
        .flat_map(|r| r.failures.iter().map(move |f| format!("{}: {} ({})", r.name, f.property, f.detail)))
        .next();
    (
        failed == 0,
        format!("{checked} checks, {failed} failures{}", first.map(|f| format!("; first: {f}")).unwrap_or_default()),
    )
}

#[test]
fn criterion_1_peanut_risk_difference_bounds() {
    let data = datasets::peanut();
    let target = datasets::PEANUT_REPORTED[0];
    let scenarios = [
        ("three clean levels", datasets::peanut_ternary_clean()),
        ("0.2-6g ill-defining", datasets::peanut_ternary_zdep(true)),
        ("0.2-6g contaminated", datasets::peanut_ternary_zdep(false)),
    ];
    let (results, elapsed) = timed(|| {
        let mut out: Vec<(String, BoundResult)> =
            scenarios.iter().map(|(name, s)| (format!("lp {name}"), bounds(s, &data))).collect();
        out.push((
            "ternary closed form".into(),
            closed_form_ternary(&data, PEANUT_HIGH, PEANUT_LOW, PEANUT_MID).unwrap(),
        ));
        out.push(("classic closed form".into(), closed_form_classic(&data, PEANUT_HIGH, PEANUT_LOW).unwrap()));
        out
    });
    let mut ok = elapsed < Duration::from_secs(1);
    let mut detail = Vec::new();
    for (name, b) in &results {
        ok &= within(b.lower_f64(), b.upper_f64(), &target, 0.005);
        ok &= b.same_interval(&results[0].1);
        detail.push(format!("{name} {}", show(b.lower_f64(), b.upper_f64())));
    }
    report(1, ok, &format!("target (-0.16, 0.16) +/-0.005; {}; {:.0?}", detail.join("; "), elapsed));
    assert!(ok);
}

#[test]
fn criterion_2_peanut_risk_bounds() {
    let pooled = datasets::peanut().coarsened(&datasets::peanut_binary_map()).unwrap();
    let target = datasets::PEANUT_REPORTED[2];
    let (results, elapsed) = timed(|| {
        [ExposureLevel::ill_defining(PEANUT_ANY), ExposureLevel::contaminated(PEANUT_ANY)]
            .into_iter()
            .map(|m| bounds(&datasets::peanut_risk(m), &pooled))
            .chain(std::iter::once(closed_form_single_level(&pooled, PEANUT_LOW).unwrap()))
            .collect::<Vec<_>>()
    });
    let mut ok = elapsed < Duration::from_secs(1);
    for b in &results {
        ok &= within(b.lower_f64(), b.upper_f64(), &target, 0.005);
    }
    let b = &results[0];
    report(
        2,
        ok,
        &format!(
            "target (0.15, 0.20) +/-0.005; lp {} = [{}, {}], closed form agrees: {}; {:.0?}",
            show(b.lower_f64(), b.upper_f64()),
            b.lower,
            b.upper,
            results.iter().all(|r| r.same_interval(b)),
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_3_peanut_bootstrap_intervals() {
    let data = datasets::peanut();
    let pooled = data.coarsened(&datasets::peanut_binary_map()).unwrap();
    let [_, pct_target, _, mn_target] = datasets::PEANUT_REPORTED;
    let ((pct_clean, pct_xm, mn), elapsed) = timed(|| {
        let pct = BootstrapSpec::new(BootstrapMethod::Percentile, REPLICATES, 0.95, SEED);
        let mn = BootstrapSpec::new(BootstrapMethod::MOutOfN, REPLICATES, 0.95, SEED);
        (
            interval_from_counts(&data, &datasets::peanut_ternary_clean(), &pct).unwrap(),
            interval_from_counts(&data, &datasets::peanut_ternary_zdep(true), &pct).unwrap(),
            interval_from_counts(&pooled, &datasets::peanut_risk(ExposureLevel::ill_defining(PEANUT_ANY)), &mn)
                .unwrap(),
        )
    });
    let pct_ok = [&pct_clean, &pct_xm].iter().all(|r| within(r.ci_lower, r.ci_upper, &pct_target, 0.02));
    let mn_ok = within(mn.ci_lower, mn.ci_upper, &mn_target, 0.03);
    let ok = pct_ok && mn_ok && elapsed < Duration::from_secs(120);
    report(
        3,
        ok,
        &format!(
            "percentile target (-0.20, 0.21) +/-0.02: clean {} x^m {} [{}]; m-out-of-n target (0.05, 0.29) +/-0.03: {} m={:?} [{}]; B={REPLICATES}, seed {SEED}; {:.1?}",
            show(pct_clean.ci_lower, pct_clean.ci_upper),
            show(pct_xm.ci_lower, pct_xm.ci_upper),
            if pct_ok { "ok" } else { "miss" },
            show(mn.ci_lower, mn.ci_upper),
            mn.chosen_m.clone().unwrap_or_default(),
            if mn_ok { "ok" } else { "miss" },
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_homocysteine() {
    let data = datasets::homocysteine();
    let d3 = data.coarsened(&datasets::homocysteine_three_level_map()).unwrap();
    let d4 = data.coarsened(&datasets::homocysteine_four_level_map()).unwrap();
    let [three_target, _, ci_target] = datasets::HOMOCYSTEINE_REPORTED;
    let s3 = datasets::homocysteine_three_level(ExposureLevel::clean(datasets::HCY_MID));
    let ((b3, b3_ill, b4, ci), elapsed) = timed(|| {
        let spec = BootstrapSpec::new(BootstrapMethod::Multinomial, REPLICATES, 0.95, SEED);
        (
            bounds(&s3, &d3),
            bounds(&datasets::homocysteine_three_level(ExposureLevel::ill_defining(datasets::HCY_MID)), &d3),
            bounds(&datasets::homocysteine_four_level(), &d4),
            interval_from_counts(&d3, &s3, &spec).unwrap(),
        )
    });
    let bounds_ok = within(b3.lower_f64(), b3.upper_f64(), &three_target, 0.005);
    let same = b4.same_interval(&b3) && b3_ill.same_interval(&b3);
    let ci_ok = within(ci.ci_lower, ci.ci_upper, &ci_target, 0.02);
    let ok = bounds_ok && same && ci_ok && elapsed < Duration::from_secs(120);
    report(
        4,
        ok,
        &format!(
            "three-level {} target (-0.62, 0.81) +/-0.005; four-level identical: {same}; multinomial CI {} target (-0.67, 0.83) +/-0.02; {:.1?}",
            show(b3.lower_f64(), b3.upper_f64()),
            show(ci.ci_lower, ci.ci_upper),
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_5_closed_forms_equal_lp() {
    let (reports, elapsed) = timed(|| check_closed_forms(TRIALS, SEED).unwrap());
    let (passed, detail) = summarize(&reports);
    let trials_ok = reports.iter().all(|r| r.properties.iter().all(|p| p.checked >= TRIALS));
    let ok = passed && trials_ok && elapsed < Duration::from_secs(300);
    report(5, ok, &format!("{} scenarios x {TRIALS} distributions, {detail}; {:.1?}", reports.len(), elapsed));
    assert!(ok);
}

fn contrast(levels: Vec<ExposureLevel>) -> Scenario {
    Scenario::new(2, levels, Estimand::difference("x'", "x")).unwrap()
}

#[test]
fn criterion_6_symbolic_rederivation() {
    let c = ExposureLevel::clean;
    let (checks, elapsed) = timed(|| {
        let mut checks: Vec<(&str, bool)> = Vec::new();
        let caps = DeriveCaps::default();
        let derive = |s: &Scenario| {
            let sys = ConstraintSystem::build(s).unwrap();
            (derive_symbolic(&sys, caps).unwrap(), ObservableBasis::of_system(&sys))
        };
        let (d, b) = derive(&contrast(vec![c("x"), c("x'")]));
        let (l, u) = classic_terms(&b, "x", "x'").unwrap();
        checks.push((
            "eight-term classic",
            term_sets_equal(&d.lower, &l).unwrap() && term_sets_equal(&d.upper, &u).unwrap(),
        ));
        let (d, b) = derive(&contrast(vec![c("x"), c("x'"), ExposureLevel::ill_defining("m")]));
        let (l, u) = classic_terms(&b, "x", "x'").unwrap();
        checks.push((
            "classic with x^m",
            term_sets_equal(&d.lower, &l).unwrap() && term_sets_equal(&d.upper, &u).unwrap(),
        ));
        let (d, b) = derive(&contrast(vec![c("x"), c("x'"), c("x''")]));
        let (l, u) = ternary_terms(&b, "x", "x'", "x''").unwrap();
        checks.push((
            "ten-term ternary",
            term_sets_equal(&d.lower, &l).unwrap() && term_sets_equal(&d.upper, &u).unwrap(),
        ));
        let (d, b) =
            derive(&Scenario::new(2, vec![c("x"), ExposureLevel::ill_defining("m")], Estimand::risk("x")).unwrap());
        let (l, u) = single_level_terms(&b, "x").unwrap();
        checks
            .push(("two-term risk", term_sets_equal(&d.lower, &l).unwrap() && term_sets_equal(&d.upper, &u).unwrap()));
        checks
    });
    let ok = checks.iter().all(|(_, ok)| *ok) && elapsed < Duration::from_secs(300);
    let detail: Vec<String> =
        checks.iter().map(|(n, ok)| format!("{n} {}", if *ok { "equal" } else { "DIFFERENT" })).collect();
    report(6, ok, &format!("{}; {:.1?}", detail.join(", "), elapsed));
    assert!(ok);
}

#[test]
fn criterion_7_equivalence_families() {
    let (reports, elapsed) = timed(|| check_equivalences(TRIALS, SEED).unwrap());
    let (passed, detail) = summarize(&reports);
    let identical = reports.iter().all(|r| r.property("constraint systems identical").is_some_and(|p| p.failures == 0));
    let ok = passed && identical && elapsed < Duration::from_secs(600);
    let notes: Vec<String> = reports.iter().flat_map(|r| r.notes.clone()).collect();
    report(
        7,
        ok,
        &format!(
            "{} families x {TRIALS} distributions, {detail}; {}; {:.1?}",
            reports.len(),
            notes.join("; "),
            elapsed
        ),
    );
    assert!(ok);
}

fn audit_scenarios() -> Vec<Scenario> {
    let c = ExposureLevel::clean;
    let m = || ExposureLevel::ill_defining("m");
    vec![
        contrast(vec![c("x"), c("x'")]),
        contrast(vec![c("x"), c("x'"), c("x''")]),
        contrast(vec![c("x"), c("x'"), m()]),
        Scenario::new(2, vec![c("x"), m()], Estimand::risk("x")).unwrap(),
        Scenario::new(3, vec![c("x"), c("x'"), c("x''")], Estimand::difference("x'", "x")).unwrap(),
        Scenario::new(3, vec![c("x"), c("x'"), m()], Estimand::difference("x'", "x")).unwrap(),
    ]
}

#[test]
fn criterion_8_validity_and_tightness() {
    let (reports, elapsed) = timed(|| {
        let mut out = Vec::new();
        for s in audit_scenarios() {
            out.push(check_validity(&s, TRIALS, SEED).unwrap());
            out.push(check_tightness(&s, TRIALS, SEED, 4).unwrap());
        }
        out.push(identification_construction(SEED).unwrap());
        out
    });
    let (passed, detail) = summarize(&reports);
    let construction = reports.last().unwrap();
    let collapse = construction.property("ternary bounds are [0, 0]").is_some_and(|p| p.failures == 0)
        && construction.property("classic bounds are nondegenerate").is_some_and(|p| p.failures == 0);
    let ok = passed && collapse && elapsed < Duration::from_secs(600);
    report(
        8,
        ok,
        &format!(
            "{} scenarios x {TRIALS} models, {detail}; ternary collapses to [0, 0] with classic nondegenerate: {collapse}; {:.1?}",
            audit_scenarios().len(),
            elapsed
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_9_interval_containment() {
    let (r, elapsed) = timed(|| check_orderings(TRIALS, SEED).unwrap());
    let (passed, detail) = summarize(std::slice::from_ref(&r));
    let ok = passed && elapsed < Duration::from_secs(600);
    report(9, ok, &format!("{TRIALS} trials, {detail}; {:.1?}", elapsed));
    assert!(ok);
}
