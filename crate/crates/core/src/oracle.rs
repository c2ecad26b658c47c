//! Brute-force audits. Random response-type distributions are pushed forward
//! to observables, so the true estimand is known exactly and every bound can
//! be checked against it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{
    certificate_verifies, classic_terms, closed_form_classic, closed_form_single_level, closed_form_ternary,
    derive_symbolic, numeric_bounds, restrict, single_level_terms, term_sets_equal, BoundResult, BoundsError,
    DeriveCaps, ObservableBasis,
};
use crate::data::{DataError, Estimand, ExposureLevel, ObservedDistribution, Scenario};
use crate::lp::LpVertex;
use crate::response::{ConstraintSystem, ResponseError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}

/// A response-type distribution with rational weights `weights / Σ weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomScm {
    pub weights: Vec<u64>,
    pub q: Vec<BigRational>,
    pub implied: ObservedDistribution,
    pub truth: BigRational,
}

const RESOLUTION: f64 = (1u64 << 20) as f64;

fn instrument_labels(kz: usize) -> Vec<String> {
    (0..kz).map(|z| z.to_string()).collect()
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Push-forward of integer weights; each stratum total is `Σ weights`.
pub fn scm_from_weights(system: &ConstraintSystem, weights: Vec<u64>) -> Result<RandomScm, OracleError> {
    let total: u64 = weights.iter().sum();
    let denom = BigInt::from(total);
    let q: Vec<BigRational> = weights.iter().map(|&k| BigRational::new(BigInt::from(k), denom.clone())).collect();
    let implied = ObservedDistribution::new(
        instrument_labels(system.instrument_arity),
        system.levels.clone(),
        system.predict_counts(&weights),
    )?;
    let truth = system.objective_value(&q);
    Ok(RandomScm { weights, q, implied, truth })
}

/// Uniform draw from the simplex of response-type distributions, discretized
/// to weights with 2^-20 resolution.
pub fn sample_from_system(system: &ConstraintSystem, rng: &mut ChaCha8Rng) -> Result<RandomScm, OracleError> {
    let mut weights: Vec<u64> = (0..system.num_vars())
        .map(|_| {
            let e: f64 = rng.sample(Exp1);
            (e * RESOLUTION).round() as u64
        })
        .collect();
    if weights.iter().all(|&w| w == 0) {
        weights[0] = 1;
    }
    scm_from_weights(system, weights)
}

pub fn sample_scm(scenario: &Scenario, seed: u64) -> Result<RandomScm, OracleError> {
    let system = ConstraintSystem::build(scenario)?;
    sample_from_system(&system, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// All mass on one response-type pair.
pub fn point_mass_scm(scenario: &Scenario, var: usize) -> Result<RandomScm, OracleError> {
    let system = ConstraintSystem::build(scenario)?;
    let mut w = vec![0u64; system.num_vars()];
    w[var] = 1;
    scm_from_weights(&system, w)
}

/// Copies of `scenario` with one clean level outside the estimand made instrument-dependent.
pub fn weaker_scenarios(scenario: &Scenario) -> Vec<Scenario> {
    let referenced = scenario.estimand.referenced_levels();
    scenario
        .levels
        .iter()
        .filter(|l| l.is_clean() && !referenced.contains(&l.label.as_str()))
        .filter_map(|l| scenario.with_level(ExposureLevel::ill_defining(&l.label)).ok())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCount {
    pub property: String,
    pub checked: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub property: String,
    pub trial: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub properties: Vec<PropertyCount>,
    /// first few failures, for diagnosis
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
}

const MAX_RECORDED_FAILURES: usize = 10;

impl OracleReport {
    fn new(name: impl Into<String>, seed: u64, trials: usize) -> Self {
        Self { name: name.into(), seed, trials, properties: Vec::new(), failures: Vec::new(), notes: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.failures == 0)
    }

    fn record(&mut self, property: &str, trial: usize, ok: bool, detail: impl FnOnce() -> String) {
        let idx = match self.properties.iter().position(|p| p.property == property) {
            Some(i) => i,
            None => {
                self.properties.push(PropertyCount { property: property.to_string(), checked: 0, failures: 0 });
                self.properties.len() - 1
            }
        };
        self.properties[idx].checked += 1;
        if !ok {
            self.properties[idx].failures += 1;
            if self.failures.len() < MAX_RECORDED_FAILURES {
                self.failures.push(Failure { property: property.to_string(), trial, detail: detail() });
            }
        }
    }

    pub fn property(&self, name: &str) -> Option<&PropertyCount> {
        self.properties.iter().find(|p| p.property == name)
    }
}

fn contains(b: &BoundResult, v: &BigRational) -> bool {
    b.lower <= *v && *v <= b.upper
}

fn weights_text(w: &[u64]) -> String {
    let nz: Vec<String> = w.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, k)| format!("{i}:{k}")).collect();
    format!("weights {{{}}}", nz.join(", "))
}

fn interval_text(b: &BoundResult) -> String {
    format!("[{}, {}]", b.lower, b.upper)
}

/// Closed forms that apply to the scenario's shape (two-level instrument only).
fn applicable_closed_forms(scenario: &Scenario) -> Vec<&'static str> {
    let mut out = Vec::new();
    if scenario.instrument_arity != 2 {
        return out;
    }
    match &scenario.estimand {
        Estimand::RiskDifference { .. } => {
            if scenario.num_levels() == 3 && scenario.levels.iter().all(|l| l.is_clean()) {
                out.push("ternary");
            }
            if (2..=3).contains(&scenario.num_levels()) {
                out.push("classic");
            }
        }
        Estimand::CounterfactualRisk { .. } => out.push("single-level"),
    }
    out
}

fn closed_form(scenario: &Scenario, name: &str, dist: &ObservedDistribution) -> Result<BoundResult, BoundsError> {
    match &scenario.estimand {
        Estimand::RiskDifference { treated, reference } => match name {
            "ternary" => {
                let other =
                    scenario.labels().into_iter().find(|l| l != treated && l != reference).expect("three levels");
                closed_form_ternary(dist, reference, treated, &other)
            }
            _ => closed_form_classic(dist, reference, treated),
        },
        Estimand::CounterfactualRisk { level } => closed_form_single_level(dist, level),
    }
}

/// Every bound that is valid under `scenario` must contain the true value of
/// every distribution the scenario allows, including the bounds for weaker
/// scenarios and the applicable closed forms.
pub fn check_validity(scenario: &Scenario, trials: usize, seed: u64) -> Result<OracleReport, OracleError> {
    let system = ConstraintSystem::build(scenario)?;
    let weaker: Vec<(String, ConstraintSystem)> = weaker_scenarios(scenario)
        .into_iter()
        .map(|s| {
            let tag = s.levels.iter().filter(|l| l.z_dependent).map(|l| l.label.clone()).collect::<Vec<_>>().join(",");
            ConstraintSystem::build(&s).map(|sys| (format!("lp weaker [{tag} instrument-dependent]"), sys))
        })
        .collect::<Result<_, _>>()?;
    let forms = applicable_closed_forms(scenario);
    let mut report = OracleReport::new(format!("validity: {}", describe(scenario)), seed, trials);
    for t in 0..trials {
        let scm = sample_from_system(&system, &mut trial_rng(seed, t as u64))?;
        let b = numeric_bounds(&system, &scm.implied)?;
        report.record("lp contains truth", t, contains(&b, &scm.truth), || {
            format!("truth {} outside {} for {}", scm.truth, interval_text(&b), weights_text(&scm.weights))
        });
        for (name, sys) in &weaker {
            let wb = numeric_bounds(sys, &scm.implied)?;
            report.record(name, t, contains(&wb, &scm.truth) && wb.contains(&b), || {
                format!("{} vs {} truth {}", interval_text(&wb), interval_text(&b), scm.truth)
            });
        }
        for name in &forms {
            let cf = closed_form(scenario, name, &scm.implied)?;
            report.record(&format!("closed form {name} contains truth"), t, contains(&cf, &scm.truth), || {
                format!("truth {} outside {}", scm.truth, interval_text(&cf))
            });
        }
    }
    Ok(report)
}

fn random_objective(system: &ConstraintSystem, rng: &mut ChaCha8Rng, weight: i64) -> Vec<i64> {
    let sign = if rng.random::<bool>() { 1 } else { -1 };
    system.objective.iter().map(|&c| sign * weight * c as i64 + rng.random_range(-8..=8)).collect()
}

/// Certificates must be feasible and attain their endpoints; feasible points
/// found by optimizing random directions must stay inside the LP interval.
pub fn check_tightness(
    scenario: &Scenario,
    trials: usize,
    seed: u64,
    restarts: usize,
) -> Result<OracleReport, OracleError> {
    let system = ConstraintSystem::build(scenario)?;
    let mut report = OracleReport::new(format!("tightness: {}", describe(scenario)), seed, trials);
    let checkpoints: Vec<usize> = (0..).map(|k| 1usize << k).take_while(|&k| k <= restarts.max(1)).collect();
    let mut coverage_sum = vec![0.0f64; checkpoints.len()];
    let mut reached = 0usize;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let scm = sample_from_system(&system, &mut rng)?;
        let b = numeric_bounds(&system, &scm.implied)?;
        for (name, cert, value) in [
            ("lower certificate verifies", &b.lower_certificate, &b.lower),
            ("upper certificate verifies", &b.upper_certificate, &b.upper),
        ] {
            let ok = cert.as_ref().is_some_and(|q| certificate_verifies(&system, &scm.implied, q, value));
            report.record(name, t, ok, || format!("certificate for {value} fails; {}", weights_text(&scm.weights)));
        }

        let lp = system.equality_lp(&scm.implied.probabilities());
        let mut lo = scm.truth.clone();
        let mut hi = scm.truth.clone();
        let width = &b.upper - &b.lower;
        let mut next = 0;
        for k in 1..=restarts {
            let c = random_objective(&system, &mut rng, k as i64);
            let v: LpVertex = lp.minimize(&c).map_err(|e| BoundsError::Internal(e.to_string()))?;
            let val = system.objective_value(&v.x);
            let feasible = lp.is_feasible(&v.x);
            report.record("inner point within lp interval", t, feasible && contains(&b, &val), || {
                format!("inner value {val} outside {}", interval_text(&b))
            });
            if val < lo {
                lo = val.clone();
            }
            if val > hi {
                hi = val;
            }
            if next < checkpoints.len() && k == checkpoints[next] {
                let cov = if width.is_zero() { BigRational::one() } else { (&hi - &lo) / &width };
                coverage_sum[next] += num_traits::ToPrimitive::to_f64(&cov).unwrap_or(0.0);
                next += 1;
            }
        }
        if lo == b.lower && hi == b.upper {
            reached += 1;
        }
    }
    if trials > 0 {
        let trace: Vec<String> =
            checkpoints.iter().zip(&coverage_sum).map(|(k, s)| format!("{k}:{:.3}", s / trials as f64)).collect();
        report.notes.push(format!("mean inner coverage of the lp interval by restarts: {}", trace.join(" ")));
        report.notes.push(format!("inner search reached both endpoints in {reached} of {trials} trials"));
    }
    Ok(report)
}

fn describe(s: &Scenario) -> String {
    let levels: Vec<String> =
        s.levels.iter().map(|l| if l.z_dependent { format!("{}*", l.label) } else { l.label.clone() }).collect();
    format!("{}-level instrument, levels [{}], {}", s.instrument_arity, levels.join(", "), s.estimand)
}

fn contrast_scenario(kz: usize, clean: &[&str], zdep: Option<ExposureLevel>) -> Scenario {
    let mut levels: Vec<ExposureLevel> = clean.iter().map(|l| ExposureLevel::clean(l)).collect();
    levels.extend(zdep);
    Scenario::new(kz, levels, Estimand::difference("x'", "x")).expect("valid scenario")
}

fn with_extra_level(dist: &ObservedDistribution, label: &str) -> Result<ObservedDistribution, OracleError> {
    let mut levels = dist.exposure_levels().to_vec();
    levels.push(label.to_string());
    let counts = dist
        .counts()
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.push([0, 0]);
            r
        })
        .collect();
    Ok(ObservedDistribution::new(dist.instrument_levels().to_vec(), levels, counts)?)
}

/// Redistributes the outcome split within the last exposure level at random.
fn resplit_last(dist: &ObservedDistribution, rng: &mut ChaCha8Rng) -> Result<ObservedDistribution, OracleError> {
    let kx = dist.num_exposures();
    let counts = dist
        .counts()
        .iter()
        .map(|row| {
            let mut r = row.clone();
            let total = r[kx - 1][0] + r[kx - 1][1];
            let zero = rng.random_range(0..=total);
            r[kx - 1] = [zero, total - zero];
            r
        })
        .collect();
    Ok(dist.with_counts(counts)?)
}

/// Equivalences for one family: `clean` levels plus an extra level `m` that
/// is either ill-defining or has a direct instrument effect.
fn family(
    name: &str,
    kz: usize,
    clean: &[&str],
    trials: usize,
    seed: u64,
    caps: DeriveCaps,
) -> Result<OracleReport, OracleError> {
    let mut report = OracleReport::new(name, seed, trials);
    let ill = contrast_scenario(kz, clean, Some(ExposureLevel::ill_defining("m")));
    let contaminated = contrast_scenario(kz, clean, Some(ExposureLevel::contaminated("m")));
    let base = contrast_scenario(kz, clean, None);
    let sys_ill = ConstraintSystem::build(&ill)?;
    let sys_con = ConstraintSystem::build(&contaminated)?;
    let sys_base = ConstraintSystem::build(&base)?;
    report.record("constraint systems identical", 0, sys_ill == sys_con, String::new);

    let two_level = kz == 2 && clean.len() == 2;
    let derived_ill = derive_symbolic(&sys_ill, caps);
    let derived_base = derive_symbolic(&sys_base, caps);
    match (&derived_ill, &derived_base) {
        (Ok(di), Ok(db)) => {
            let dc = derive_symbolic(&sys_con, caps)?;
            report.record("symbolic ill-defining equals contaminated", 0, di == &dc, String::new);
            let target = ObservableBasis::of_system(&sys_base);
            for (side, set, reference) in [("lower", &di.lower, &db.lower), ("upper", &di.upper, &db.upper)] {
                let ok = match restrict(set, &target) {
                    Ok(r) => term_sets_equal(&r, reference)?,
                    Err(BoundsError::NotRestrictable(_)) => false,
                    Err(e) => return Err(e.into()),
                };
                report.record(&format!("symbolic {side} terms equal without the extra level"), 0, ok, || {
                    format!("{} terms vs {} terms", set.len(), reference.len())
                });
            }
            if two_level {
                let (cl, cu) = classic_terms(&ObservableBasis::of_system(&sys_ill), "x", "x'")?;
                let ok = term_sets_equal(&di.lower, &cl)? && term_sets_equal(&di.upper, &cu)?;
                report.record("symbolic equals transcribed classic terms", 0, ok, String::new);
                let (cl, cu) = classic_terms(&target, "x", "x'")?;
                let ok = term_sets_equal(&db.lower, &cl)? && term_sets_equal(&db.upper, &cu)?;
                report.record("two-level derivation equals transcribed classic terms", 0, ok, String::new);
            }
            report.notes.push(format!(
                "derived {} lower and {} upper terms with the extra level",
                di.lower.len(),
                di.upper.len()
            ));
        }
        (Err(e), _) | (_, Err(e)) => report.notes.push(format!("symbolic comparison skipped: {e}")),
    }

    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let scm = sample_from_system(&sys_ill, &mut rng)?;
        let a = numeric_bounds(&sys_ill, &scm.implied)?;
        let c = numeric_bounds(&sys_con, &scm.implied)?;
        report.record("numeric ill-defining equals contaminated", t, a.same_interval(&c), || {
            format!("{} vs {}", interval_text(&a), interval_text(&c))
        });
        if two_level {
            let cf = closed_form_classic(&scm.implied, "x", "x'")?;
            report.record("numeric equals classic closed form", t, a.same_interval(&cf), || {
                format!("{} vs {}", interval_text(&a), interval_text(&cf))
            });
        }
        if let Ok(di) = &derived_ill {
            let lo = di.lower.evaluate(&scm.implied)?;
            let hi = di.upper.evaluate(&scm.implied)?;
            report.record("numeric equals derived terms", t, lo == a.lower && hi == a.upper, || {
                format!("{} vs [{lo}, {hi}]", interval_text(&a))
            });
        }
        let split = resplit_last(&scm.implied, &mut rng)?;
        let s = numeric_bounds(&sys_ill, &split)?;
        report.record("numeric invariant to outcome split within the extra level", t, s.same_interval(&a), || {
            format!("{} vs {}", interval_text(&s), interval_text(&a))
        });
        let clean_scm = sample_from_system(&sys_base, &mut rng)?;
        let b = numeric_bounds(&sys_base, &clean_scm.implied)?;
        let e = numeric_bounds(&sys_ill, &with_extra_level(&clean_scm.implied, "m")?)?;
        report.record("numeric equal when the extra level is unobserved", t, b.same_interval(&e), || {
            format!("{} vs {}", interval_text(&b), interval_text(&e))
        });
    }
    Ok(report)
}

fn result_two(trials: usize, seed: u64, caps: DeriveCaps) -> Result<OracleReport, OracleError> {
    let mut report = OracleReport::new("single clean level, risk", seed, trials);
    let mk =
        |m: ExposureLevel| Scenario::new(2, vec![ExposureLevel::clean("x"), m], Estimand::risk("x")).expect("valid");
    let sys_ill = ConstraintSystem::build(&mk(ExposureLevel::ill_defining("m")))?;
    let sys_con = ConstraintSystem::build(&mk(ExposureLevel::contaminated("m")))?;
    report.record("constraint systems identical", 0, sys_ill == sys_con, String::new);
    let d = derive_symbolic(&sys_ill, caps)?;
    let (l, u) = single_level_terms(&ObservableBasis::of_system(&sys_ill), "x")?;
    let ok = term_sets_equal(&d.lower, &l)? && term_sets_equal(&d.upper, &u)?;
    report.record("symbolic equals transcribed two-term bounds", 0, ok, String::new);
    for t in 0..trials {
        let scm = sample_from_system(&sys_ill, &mut trial_rng(seed, t as u64))?;
        let a = numeric_bounds(&sys_ill, &scm.implied)?;
        let cf = closed_form_single_level(&scm.implied, "x")?;
        report.record("numeric equals two-term closed form", t, a.same_interval(&cf), || {
            format!("{} vs {}", interval_text(&a), interval_text(&cf))
        });
    }
    Ok(report)
}

/// The four families: two-level instrument with two clean levels, two-level
/// instrument with one clean level (risk), three-level instrument with two
/// and with three clean levels; each against an extra instrument-dependent level.
pub fn check_equivalences(trials: usize, seed: u64) -> Result<Vec<OracleReport>, OracleError> {
    let caps = DeriveCaps::default();
    Ok(vec![
        family("two-level instrument, two clean levels", 2, &["x", "x'"], trials, seed, caps)?,
        result_two(trials, seed, caps)?,
        family("three-level instrument, two clean levels", 3, &["x", "x'"], trials, seed, caps)?,
        family("three-level instrument, three clean levels", 3, &["x", "x'", "x''"], trials, seed, caps)?,
    ])
}

/// Closed forms against the LP on distributions drawn from the scenarios they belong to.
pub fn check_closed_forms(trials: usize, seed: u64) -> Result<Vec<OracleReport>, OracleError> {
    let mut out = Vec::new();
    let scenarios = [
        contrast_scenario(2, &["x", "x'", "x''"], None),
        contrast_scenario(2, &["x", "x'"], None),
        contrast_scenario(2, &["x", "x'"], Some(ExposureLevel::ill_defining("m"))),
        contrast_scenario(2, &["x", "x'"], Some(ExposureLevel::contaminated("m"))),
        Scenario::new(2, vec![ExposureLevel::clean("x"), ExposureLevel::ill_defining("m")], Estimand::risk("x"))
            .expect("valid"),
        Scenario::new(2, vec![ExposureLevel::clean("x"), ExposureLevel::contaminated("m")], Estimand::risk("x"))
            .expect("valid"),
    ];
    for s in scenarios {
        let system = ConstraintSystem::build(&s)?;
        let forms = applicable_closed_forms(&s);
        // the tight closed form is the ternary one when it applies
        let form = if forms.contains(&"ternary") { "ternary" } else { forms[0] };
        let mut report = OracleReport::new(format!("closed form {form}: {}", describe(&s)), seed, trials);
        for t in 0..trials {
            let scm = sample_from_system(&system, &mut trial_rng(seed, t as u64))?;
            let lp = numeric_bounds(&system, &scm.implied)?;
            let cf = closed_form(&s, form, &scm.implied)?;
            report.record(&format!("{form} equals lp"), t, lp.same_interval(&cf), || {
                format!("{} vs {}", interval_text(&cf), interval_text(&lp))
            });
        }
        out.push(report);
    }
    Ok(out)
}

/// Weaker assumptions give wider bounds: classic ⊇ ternary for three clean
/// levels, and the single-level risk bounds ⊇ the LP risk bounds with a
/// second clean level.
pub fn check_orderings(trials: usize, seed: u64) -> Result<OracleReport, OracleError> {
    let mut report = OracleReport::new("interval containment", seed, trials);
    let ternary = ConstraintSystem::build(&contrast_scenario(2, &["x", "x'", "x''"], None))?;
    let risk = ConstraintSystem::build(
        &Scenario::new(2, vec![ExposureLevel::clean("x"), ExposureLevel::clean("x'")], Estimand::risk("x"))
            .expect("valid"),
    )?;
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let scm = sample_from_system(&ternary, &mut rng)?;
        let c = closed_form_classic(&scm.implied, "x", "x'")?;
        let tt = closed_form_ternary(&scm.implied, "x", "x'", "x''")?;
        report.record("classic contains ternary", t, c.contains(&tt), || {
            format!("{} vs {}", interval_text(&c), interval_text(&tt))
        });
        let scm = sample_from_system(&risk, &mut rng)?;
        let single = closed_form_single_level(&scm.implied, "x")?;
        let lp = numeric_bounds(&risk, &scm.implied)?;
        report.record("single-level risk bounds contain two-level risk bounds", t, single.contains(&lp), || {
            format!("{} vs {}", interval_text(&single), interval_text(&lp))
        });
    }
    Ok(report)
}

/// All units take `x''`, with `Y = 1` under the first instrument level and
/// `Y = 0` under the second. The ternary closed form collapses to `[0, 0]`;
/// when `x''` is instrument-dependent the truth can be anywhere in `[−1, 1]`.
pub fn identification_construction(seed: u64) -> Result<OracleReport, OracleError> {
    let mut report = OracleReport::new("identification construction", seed, 1);
    let weak = contrast_scenario(2, &["x", "x'"], Some(ExposureLevel::ill_defining("x''")));
    let strong = contrast_scenario(2, &["x", "x'", "x''"], None);
    let sys = ConstraintSystem::build(&weak)?;
    let xpp = 2;
    // response type: always x''; Y(x) = 0, Y(x') = 1; Y at x'' is 1 under z=0, 0 under z=1
    let var = (0..sys.num_vars())
        .find(|&v| {
            let (e, o) = sys.pair(v);
            e.assignment == vec![xpp, xpp]
                && o.responses[0] == vec![0]
                && o.responses[1] == vec![1]
                && o.responses[2] == vec![1, 0]
        })
        .expect("type exists");
    let mut w = vec![0u64; sys.num_vars()];
    w[var] = 1;
    let scm = scm_from_weights(&sys, w)?;
    let p = &scm.implied;
    let tern = closed_form_ternary(p, "x", "x'", "x''")?;
    let classic = closed_form_classic(p, "x", "x'")?;
    report
        .record("ternary bounds are [0, 0]", 0, tern.lower.is_zero() && tern.upper.is_zero(), || interval_text(&tern));
    report.record("classic bounds are nondegenerate", 0, classic.lower < classic.upper, || interval_text(&classic));
    report.record("ternary bounds exclude the truth", 0, !contains(&tern, &scm.truth), || scm.truth.to_string());
    let lp = numeric_bounds(&sys, p)?;
    report.record("instrument-dependent lp contains the truth", 0, contains(&lp, &scm.truth), || interval_text(&lp));
    let strong_sys = ConstraintSystem::build(&strong)?;
    let infeasible = matches!(numeric_bounds(&strong_sys, p), Err(BoundsError::Infeasible(_)));
    report.record("data incompatible with three clean levels", 0, infeasible, String::new);

    // approach the construction: mix with a random distribution of shrinking weight
    let mut rng = trial_rng(seed, 0);
    let noise = sample_from_system(&sys, &mut rng)?;
    let noise_total: u64 = noise.weights.iter().sum();
    let mut last_width: Option<BigRational> = None;
    for k in 1..=8u32 {
        let scale = 1u64 << k;
        let weights: Vec<u64> = noise
            .weights
            .iter()
            .enumerate()
            .map(|(i, &n)| n + if i == var { (scale - 1) * noise_total } else { 0 })
            .collect();
        let mixed = scm_from_weights(&sys, weights)?;
        let t = closed_form_ternary(&mixed.implied, "x", "x'", "x''")?;
        let width = &t.upper - &t.lower;
        let ok = last_width.as_ref().is_none_or(|w| width <= *w);
        report.record("ternary width shrinks towards the construction", k as usize, ok, || width.to_string());
        last_width = Some(width);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary() -> Scenario {
        contrast_scenario(2, &["x", "x'"], None)
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let a = sample_scm(&binary(), 9).unwrap();
        let b = sample_scm(&binary(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.q.iter().cloned().sum::<BigRational>(), BigRational::one());
        let n = a.implied.n_per_z();
        assert_eq!(n[0], n[1]);
        for z in 0..2 {
            let s: BigRational = (0..2).flat_map(|x| [0u8, 1].map(|y| a.implied.prob(z, x, y))).sum();
            assert!(s.is_one());
        }
    }

    #[test]
    fn point_mass_gives_zero_one_cells() {
        let s = binary();
        let scm = point_mass_scm(&s, 5).unwrap();
        for p in scm.implied.probabilities() {
            assert!(p.is_zero() || p.is_one());
        }
    }

    #[test]
    fn small_audits_pass() {
        let s = contrast_scenario(2, &["x", "x'", "x''"], None);
        assert!(check_validity(&s, 20, 1).unwrap().passed());
        let r = check_tightness(&s, 5, 2, 8).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(identification_construction(3).unwrap().passed());
    }

    #[test]
    fn weaker_scenarios_demote_unreferenced_levels() {
        let s = contrast_scenario(2, &["x", "x'", "x''"], None);
        let w = weaker_scenarios(&s);
        assert_eq!(w.len(), 1);
        assert!(w[0].levels[2].z_dependent);
    }
}
