use std::collections::BTreeSet;
use std::fmt::Write;

use ivcoarse::bounds::{
    certificate_verifies, derive_symbolic, format_fixed, numeric_bounds, numeric_bounds_with, symbol_names,
    rational_string, render_term, tight_closed_form, BoundResult, DeriveCaps, Direction, NumericOptions,
    ObservableBasis,
};
use ivcoarse::data::{
    coarsen, load_records, parse_coarsening, parse_scenario, parse_summary, tabulate, validate, CoarseningMap,
    Estimand, ExposureLevel, ExposureValue, LabelEntry, ObservedDistribution, Scenario,
};
use ivcoarse::datasets::{self, ReportedInterval};
use ivcoarse::inference::{interval_from_counts, BootstrapMethod, BootstrapSpec, GridDistance, IntervalResult};
use ivcoarse::oracle::{
    check_closed_forms, check_equivalences, check_orderings, check_tightness, check_validity,
    identification_construction, OracleReport,
};
use ivcoarse::response::ConstraintSystem;
use serde_json::{json, Value};

use crate::args::{
    BoundsArgs, CiArgs, DeriveArgs, DistanceArg, Example, Format, InputArgs, MethodArg, Preset, ReproduceArgs,
    ScenarioArgs, Suite, VerifyArgs,
};
use crate::output::{fixed, float_interval, interval, number, CliError, InputEcho, RunConfig};

pub const EMBEDDED_SEED: u64 = 20240101;

pub struct Outcome {
    pub config: RunConfig,
    pub results: Value,
    pub diagnostics: Value,
    pub human: String,
    /// false when an audit found a violation
    pub ok: bool,
}

fn config(subcommand: &str, format: Format) -> RunConfig {
    RunConfig {
        subcommand: subcommand.into(),
        format: match format {
            Format::Human => "human".into(),
            Format::Json => "json".into(),
        },
        ..Default::default()
    }
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::PeanutTernary => "peanut-ternary",
        Preset::PeanutIllDefining => "peanut-ill-defining",
        Preset::PeanutContaminated => "peanut-contaminated",
        Preset::PeanutRisk => "peanut-risk",
        Preset::HomocysteineThree => "homocysteine-three",
        Preset::HomocysteineFour => "homocysteine-four",
    }
}

fn preset(p: Preset) -> (Scenario, ObservedDistribution) {
    let coarsened = |d: ObservedDistribution, m: CoarseningMap| d.coarsened(&m).expect("embedded map");
    match p {
        Preset::PeanutTernary => (datasets::peanut_ternary_clean(), datasets::peanut()),
        Preset::PeanutIllDefining => (datasets::peanut_ternary_zdep(true), datasets::peanut()),
        Preset::PeanutContaminated => (datasets::peanut_ternary_zdep(false), datasets::peanut()),
        Preset::PeanutRisk => (
            datasets::peanut_risk(ExposureLevel::ill_defining(datasets::PEANUT_ANY)),
            coarsened(datasets::peanut(), datasets::peanut_binary_map()),
        ),
        Preset::HomocysteineThree => (
            datasets::homocysteine_three_level(ExposureLevel::clean(datasets::HCY_MID)),
            coarsened(datasets::homocysteine(), datasets::homocysteine_three_level_map()),
        ),
        Preset::HomocysteineFour => (
            datasets::homocysteine_four_level(),
            coarsened(datasets::homocysteine(), datasets::homocysteine_four_level_map()),
        ),
    }
}

fn text(bytes: Vec<u8>) -> Result<String, CliError> {
    String::from_utf8(bytes).map_err(|e| CliError::Input(format!("input is not UTF-8: {e}")))
}

fn load_scenario(
    args: &ScenarioArgs,
    cfg: &mut RunConfig,
) -> Result<Option<(Scenario, Option<ObservedDistribution>)>, CliError> {
    let loaded = if let Some(path) = &args.scenario {
        let (echo, bytes) = InputEcho::read("scenario", path)?;
        cfg.inputs.push(echo);
        Some((parse_scenario(&text(bytes)?)?, None))
    } else if let Some(p) = args.preset {
        cfg.preset = Some(preset_name(p).into());
        let (s, d) = preset(p);
        Some((s, Some(d)))
    } else {
        None
    };
    if let Some((s, _)) = &loaded {
        cfg.scenario = Some(s.clone());
        cfg.estimand = Some(s.estimand.clone());
    }
    Ok(loaded)
}

fn require_scenario(
    args: &ScenarioArgs,
    cfg: &mut RunConfig,
) -> Result<(Scenario, Option<ObservedDistribution>), CliError> {
    load_scenario(args, cfg)?.ok_or_else(|| CliError::Input("either --scenario or --preset is required".into()))
}

fn identity_map(records: &[ivcoarse::data::RawRecord]) -> Result<CoarseningMap, CliError> {
    let mut labels = BTreeSet::new();
    for r in records {
        match &r.x_star {
            ExposureValue::Label(l) => {
                labels.insert(l.clone());
            }
            ExposureValue::Numeric(v) => {
                return Err(CliError::Input(format!("numeric exposure {v} needs a coarsening map (--map)")));
            }
        }
    }
    Ok(CoarseningMap::labels(labels.into_iter().map(|l| LabelEntry { from: l.clone(), to: l }).collect())?)
}

/// Data in scenario level order.
fn load_data(args: &InputArgs, cfg: &mut RunConfig) -> Result<(Scenario, ObservedDistribution), CliError> {
    let (scenario, embedded) = require_scenario(&args.scenario, cfg)?;
    let dist = if let Some(path) = &args.summary {
        let (echo, bytes) = InputEcho::read("summary", path)?;
        cfg.inputs.push(echo);
        parse_summary(&text(bytes)?)?
    } else if let Some(path) = &args.records {
        let (echo, bytes) = InputEcho::read("records", path)?;
        cfg.inputs.push(echo);
        let records = load_records(bytes.as_slice(), None)?;
        let map = match &args.map {
            Some(mp) => {
                let (echo, bytes) = InputEcho::read("coarsening", mp)?;
                cfg.inputs.push(echo);
                parse_coarsening(&text(bytes)?)?
            }
            None => identity_map(&records)?,
        };
        let coarse = coarsen(&records, &map)?;
        let instruments: Vec<String> =
            coarse.iter().map(|r| r.z.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        tabulate(&coarse, &instruments, &scenario.labels())?
    } else if let Some(d) = embedded {
        d
    } else {
        return Err(CliError::Input("data are required: --summary or --records".into()));
    };
    let v = validate(&scenario, &dist)?;
    Ok((v.scenario, v.dist))
}

fn data_diagnostics(dist: &ObservedDistribution) -> Value {
    json!({
        "data_hash": dist.content_hash(),
        "instrument_levels": dist.instrument_levels(),
        "n_per_instrument_level": dist.n_per_z(),
    })
}

fn show(b: &BoundResult) -> String {
    format!(
        "[{}, {}]  exact [{}, {}]",
        format_fixed(&b.lower, 2),
        format_fixed(&b.upper, 2),
        rational_string(&b.lower),
        rational_string(&b.upper)
    )
}

pub fn bounds(args: &BoundsArgs, format: Format) -> Result<Outcome, CliError> {
    let mut cfg = config("bounds", format);
    cfg.slack = args.slack;
    let (scenario, dist) = load_data(&args.input, &mut cfg)?;
    let system = ConstraintSystem::build(&scenario)?;
    let lp = numeric_bounds_with(&system, &dist, NumericOptions { slack: args.slack })?;
    let closed = if lp.projection.is_some() { None } else { tight_closed_form(&scenario, &dist)? };
    let agreement = closed.as_ref().map(|(_, c)| c.same_interval(&lp));

    let mut diagnostics = data_diagnostics(&dist);
    diagnostics["response_types"] = json!(system.num_vars());
    let verified = |cert: &Option<Vec<_>>, value| {
        cert.as_ref().map(|q| match &lp.projection {
            None => certificate_verifies(&system, &dist, q, value),
            Some(p) => system.equality_lp(&p.projected).is_feasible(q) && system.objective_value(q) == *value,
        })
    };
    diagnostics["certificates_verify"] = json!({
        "lower": verified(&lp.lower_certificate, &lp.lower),
        "upper": verified(&lp.upper_certificate, &lp.upper),
    });
    let mut results = json!({
        "estimand": scenario.estimand,
        "levels": scenario.labels(),
        "lp": interval(&lp),
        "closed_form": closed.as_ref().map(|(name, c)| json!({ "name": name, "bounds": interval(c) })),
        "agreement": agreement,
    });
    if let Some(p) = &lp.projection {
        results["projection"] = json!({ "total_slack": number(&p.total_slack) });
        diagnostics["note"] = json!("data were projected onto the model; closed forms are not evaluated");
    }

    let mut human = String::new();
    let _ = writeln!(human, "estimand     {}", scenario.estimand);
    let _ = writeln!(human, "lp           {}", show(&lp));
    if let Some((name, c)) = &closed {
        let _ = writeln!(human, "closed form  {}  ({name})", show(c));
        let _ = writeln!(human, "agreement    {}", if agreement == Some(true) { "yes" } else { "no" });
    }
    if let Some(p) = &lp.projection {
        let _ = writeln!(human, "projected    total slack {}", rational_string(&p.total_slack));
    }
    Ok(Outcome { config: cfg, results, diagnostics, human, ok: true })
}

fn bootstrap_spec(args: &CiArgs) -> Result<BootstrapSpec, CliError> {
    let seed = args.seed.ok_or_else(|| CliError::Input("--seed is required for bootstrap intervals".into()))?;
    let method = match args.method {
        MethodArg::Percentile => BootstrapMethod::Percentile,
        MethodArg::Mn => BootstrapMethod::MOutOfN,
        MethodArg::Multinomial => BootstrapMethod::Multinomial,
    };
    let mut spec = BootstrapSpec::new(method, args.bootstrap, args.level, seed);
    spec.rho = args.rho;
    spec.grid = args.grid;
    spec.distance = match args.distance {
        DistanceArg::Rescaled => GridDistance::Rescaled,
        DistanceArg::Raw => GridDistance::Raw,
    };
    spec.max_infeasible_fraction = args.max_infeasible;
    Ok(spec)
}

fn interval_json(r: &IntervalResult) -> Value {
    json!({
        "point": interval(&r.point),
        "ci": float_interval(r.ci_lower, r.ci_upper),
        "chosen_m": r.chosen_m,
        "grid": r.grid,
    })
}

pub fn ci(args: &CiArgs, format: Format) -> Result<Outcome, CliError> {
    let mut cfg = config("ci", format);
    let spec = bootstrap_spec(args)?;
    cfg.seed = Some(spec.seed);
    cfg.bootstrap = Some(spec);
    let (scenario, dist) = load_data(&args.input, &mut cfg)?;
    let r = interval_from_counts(&dist, &scenario, &spec)?;
    let mut diagnostics = data_diagnostics(&dist);
    diagnostics["replicates"] = json!(spec.replicates);
    diagnostics["infeasible_replicates"] = json!(r.infeasible_replicates);
    diagnostics["warnings"] = json!(r.warnings);

    let mut human = String::new();
    let _ = writeln!(human, "estimand     {}", scenario.estimand);
    let _ = writeln!(human, "bounds       {}", show(&r.point));
    let _ = writeln!(
        human,
        "{:.0}% CI      [{}, {}]  ({:?}, B = {}, seed {})",
        spec.level * 100.0,
        fixed(r.ci_lower),
        fixed(r.ci_upper),
        spec.method,
        spec.replicates,
        spec.seed
    );
    if let Some(m) = &r.chosen_m {
        let _ = writeln!(human, "chosen m     {m:?}");
    }
    if r.infeasible_replicates > 0 {
        let _ = writeln!(human, "projected    {} replicates", r.infeasible_replicates);
    }
    for w in &r.warnings {
        let _ = writeln!(human, "warning      {w}");
    }
    Ok(Outcome { config: cfg, results: interval_json(&r), diagnostics, human, ok: true })
}

pub fn derive(args: &DeriveArgs, format: Format) -> Result<Outcome, CliError> {
    let mut cfg = config("derive", format);
    let (scenario, _) = require_scenario(&args.scenario, &mut cfg)?;
    cfg.options.insert("latex".into(), json!(args.latex));
    let caps = DeriveCaps { max_vars: args.max_vars, max_dual_dim: args.max_dual_dim, max_rays: args.max_rays };
    cfg.options.insert("caps".into(), json!([caps.max_vars, caps.max_dual_dim, caps.max_rays]));
    let system = ConstraintSystem::build(&scenario)?;
    let d = derive_symbolic(&system, caps)?;
    let names = if args.raw_labels { scenario.labels() } else { symbol_names(&scenario, args.latex) };
    let basis = ObservableBasis::of_system(&system);
    let terms = |set: &ivcoarse::bounds::SymbolicBoundSet| -> Vec<String> {
        set.terms.iter().map(|t| render_term(t, &basis, &names, set.direction, args.latex)).collect()
    };
    let constraints: Vec<String> = d
        .constraints
        .iter()
        .map(|t| format!("{} <= 0", render_term(t, &basis, &names, Direction::Upper, args.latex)))
        .collect();
    let results = json!({
        "estimand": scenario.estimand,
        "names": scenario.labels().iter().zip(&names).map(|(l, n)| json!({ "level": l, "symbol": n })).collect::<Vec<_>>(),
        "lower": terms(&d.lower),
        "upper": terms(&d.upper),
        "constraints": constraints,
    });
    let diagnostics = json!({
        "response_types": system.num_vars(),
        "lower_terms": d.lower.len(),
        "upper_terms": d.upper.len(),
    });
    let mut human = String::new();
    for (l, n) in scenario.labels().iter().zip(&names) {
        let _ = writeln!(human, "{n} = {l}");
    }
    let _ = writeln!(human, "\n{} >=", scenario.estimand);
    let _ = writeln!(human, "{}", d.lower.render(&names, args.latex));
    let _ = writeln!(human, "\n{} <=", scenario.estimand);
    let _ = writeln!(human, "{}", d.upper.render(&names, args.latex));
    if !constraints.is_empty() {
        let _ = writeln!(human, "\nconstraints on the data:");
        for c in &constraints {
            let _ = writeln!(human, "  {c}");
        }
    }
    Ok(Outcome { config: cfg, results, diagnostics, human, ok: true })
}

fn builtin_scenarios() -> Vec<Scenario> {
    let c = ExposureLevel::clean;
    let contrast = Estimand::difference("x'", "x");
    vec![
        Scenario::new(2, vec![c("x"), c("x'"), c("x''")], contrast.clone()),
        Scenario::new(2, vec![c("x"), c("x'"), ExposureLevel::ill_defining("m")], contrast.clone()),
        Scenario::new(2, vec![c("x"), ExposureLevel::ill_defining("m")], Estimand::risk("x")),
        Scenario::new(3, vec![c("x"), c("x'"), c("x''")], contrast),
    ]
    .into_iter()
    .map(|s| s.expect("valid scenario"))
    .collect()
}

pub fn verify(args: &VerifyArgs, format: Format) -> Result<Outcome, CliError> {
    let mut cfg = config("verify", format);
    let seed = args.seed.ok_or_else(|| CliError::Input("--seed is required for verification".into()))?;
    cfg.seed = Some(seed);
    cfg.options.insert("suite".into(), json!(format!("{:?}", args.suite).to_lowercase()));
    cfg.options.insert("trials".into(), json!(args.trials));
    cfg.options.insert("restarts".into(), json!(args.restarts));
    let given = load_scenario(&args.scenario, &mut cfg)?.map(|(s, _)| s);
    let run = |s: Suite| args.suite == Suite::All || args.suite == s;
    let mut reports: Vec<OracleReport> = Vec::new();
    if run(Suite::Scenario) {
        let scenarios = match (&given, args.suite) {
            (Some(s), _) => vec![s.clone()],
            (None, Suite::Scenario) => {
                return Err(CliError::Input("the scenario suite needs --scenario or --preset".into()))
            }
            (None, _) => builtin_scenarios(),
        };
        for s in &scenarios {
            reports.push(check_validity(s, args.trials, seed)?);
            reports.push(check_tightness(s, args.trials, seed, args.restarts)?);
        }
    }
    if run(Suite::Equivalences) {
        reports.extend(check_equivalences(args.trials, seed)?);
    }
    if run(Suite::ClosedForms) {
        reports.extend(check_closed_forms(args.trials, seed)?);
    }
    if run(Suite::Orderings) {
        reports.push(check_orderings(args.trials, seed)?);
    }
    if run(Suite::Construction) {
        reports.push(identification_construction(seed)?);
    }
    let ok = reports.iter().all(|r| r.passed());
    let mut human = String::new();
    for r in &reports {
        let _ = writeln!(human, "{} [{}]", r.name, if r.passed() { "pass" } else { "FAIL" });
        for p in &r.properties {
            let _ = writeln!(human, "  {:<60} {:>6} checked {:>4} failed", p.property, p.checked, p.failures);
        }
        for n in &r.notes {
            let _ = writeln!(human, "  note: {n}");
        }
        for f in &r.failures {
            let _ = writeln!(human, "  failure ({}, trial {}): {}", f.property, f.trial, f.detail);
        }
    }
    let results = json!({ "passed": ok, "reports": reports });
    let diagnostics = json!({ "reports": reports.len() });
    Ok(Outcome { config: cfg, results, diagnostics, human, ok })
}

struct Row {
    analysis: String,
    reported: ReportedInterval,
    lower: f64,
    upper: f64,
    exact: Option<BoundResult>,
    extra: Value,
}

impl Row {
    fn bounds(analysis: &str, reported: ReportedInterval, b: BoundResult) -> Self {
        Self {
            analysis: analysis.into(),
            reported,
            lower: b.lower_f64(),
            upper: b.upper_f64(),
            exact: Some(b),
            extra: Value::Null,
        }
    }

    fn interval(analysis: &str, reported: ReportedInterval, r: &IntervalResult) -> Self {
        Self {
            analysis: analysis.into(),
            reported,
            lower: r.ci_lower,
            upper: r.ci_upper,
            exact: None,
            extra: json!({ "spec": r.spec, "chosen_m": r.chosen_m, "infeasible_replicates": r.infeasible_replicates }),
        }
    }

    fn json(&self) -> Value {
        let rounded = match &self.exact {
            Some(b) => [format_fixed(&b.lower, 2), format_fixed(&b.upper, 2)],
            None => [fixed(self.lower), fixed(self.upper)],
        };
        let reported = [format!("{:.2}", self.reported.lower), format!("{:.2}", self.reported.upper)];
        json!({
            "analysis": self.analysis,
            "reported": [self.reported.lower, self.reported.upper],
            "computed": [self.lower, self.upper],
            "computed_rounded": rounded,
            "exact": self.exact.as_ref().map(interval),
            "agrees_to_two_decimals": rounded == reported,
            "details": self.extra,
        })
    }
}

fn bounds_for(scenario: &Scenario, dist: &ObservedDistribution) -> Result<BoundResult, CliError> {
    let v = validate(scenario, dist)?;
    Ok(numeric_bounds(&ConstraintSystem::build(&v.scenario)?, &v.dist)?)
}

fn peanut_rows(seed: u64, b: usize) -> Result<Vec<Row>, CliError> {
    let [rd, rd_ci, risk, risk_ci] = datasets::PEANUT_REPORTED;
    let data = datasets::peanut();
    let pooled = data.coarsened(&datasets::peanut_binary_map())?;
    let xm = datasets::peanut_ternary_zdep(true);
    let risk_scenario = datasets::peanut_risk(ExposureLevel::ill_defining(datasets::PEANUT_ANY));
    let pct = interval_from_counts(&data, &xm, &BootstrapSpec::new(BootstrapMethod::Percentile, b, 0.95, seed))?;
    let mn =
        interval_from_counts(&pooled, &risk_scenario, &BootstrapSpec::new(BootstrapMethod::MOutOfN, b, 0.95, seed))?;
    Ok(vec![
        Row::bounds(
            "risk difference bounds, three clean levels",
            rd,
            bounds_for(&datasets::peanut_ternary_clean(), &data)?,
        ),
        Row::bounds("risk difference bounds, 0.2-6g instrument-dependent", rd, bounds_for(&xm, &data)?),
        Row::interval("risk difference percentile bootstrap CI", rd_ci, &pct),
        Row::bounds("risk under <0.2g bounds, >=0.2g pooled", risk, bounds_for(&risk_scenario, &pooled)?),
        Row::interval("risk under <0.2g m-out-of-n bootstrap CI", risk_ci, &mn),
    ])
}

fn homocysteine_rows(seed: u64, b: usize) -> Result<Vec<Row>, CliError> {
    let [three, four, three_ci] = datasets::HOMOCYSTEINE_REPORTED;
    let data = datasets::homocysteine();
    let d3 = data.coarsened(&datasets::homocysteine_three_level_map())?;
    let d4 = data.coarsened(&datasets::homocysteine_four_level_map())?;
    let s3 = datasets::homocysteine_three_level(ExposureLevel::clean(datasets::HCY_MID));
    let ci = interval_from_counts(&d3, &s3, &BootstrapSpec::new(BootstrapMethod::Multinomial, b, 0.95, seed))?;
    Ok(vec![
        Row::bounds("three-level bounds", three, bounds_for(&s3, &d3)?),
        Row::bounds("four-level bounds", four, bounds_for(&datasets::homocysteine_four_level(), &d4)?),
        Row::interval("three-level multinomial bootstrap CI", three_ci, &ci),
    ])
}

pub fn reproduce(args: &ReproduceArgs, format: Format) -> Result<Outcome, CliError> {
    let mut cfg = config("reproduce", format);
    cfg.seed = Some(args.seed);
    cfg.options.insert("bootstrap_replicates".into(), json!(args.bootstrap));
    let (name, rows) = match args.example {
        Example::Peanut => ("peanut", peanut_rows(args.seed, args.bootstrap)?),
        Example::Homocysteine => ("homocysteine", homocysteine_rows(args.seed, args.bootstrap)?),
    };
    cfg.options.insert("example".into(), json!(name));
    let mut human = String::new();
    let _ = writeln!(human, "{:<56} {:>16} {:>16}", "analysis", "published", "computed");
    for r in &rows {
        let _ = writeln!(
            human,
            "{:<56} {:>16} {:>16}",
            r.analysis,
            format!("({:.2}, {:.2})", r.reported.lower, r.reported.upper),
            format!("({}, {})", fixed(r.lower), fixed(r.upper))
        );
    }
    let results = json!({ "example": name, "rows": rows.iter().map(Row::json).collect::<Vec<_>>() });
    let diagnostics = json!({ "rows": rows.len() });
    Ok(Outcome { config: cfg, results, diagnostics, human, ok: true })
}

pub fn dump_lp(args: &ScenarioArgs, format: Format) -> Result<Outcome, CliError> {
    let mut cfg = config("dump-lp", format);
    let (scenario, _) = require_scenario(args, &mut cfg)?;
    let system = ConstraintSystem::build(&scenario)?;
    let dump = system.dump();
    let mut human = String::new();
    let _ = writeln!(human, "{} response-type variables, {} cell rows", dump.variables.len(), dump.rows.len());
    for r in &dump.rows {
        let _ = writeln!(human, "p({}, y={} | z={}) = sum of q over {} variables", r.x, r.y, r.z, r.variables.len());
    }
    let plus: usize = dump.objective.iter().filter(|&&c| c > 0).count();
    let minus: usize = dump.objective.iter().filter(|&&c| c < 0).count();
    let _ = writeln!(human, "objective: {plus} variables at +1, {minus} at -1");
    let results = serde_json::to_value(&dump).map_err(|e| CliError::Internal(e.to_string()))?;
    let diagnostics = json!({ "response_types": dump.variables.len(), "rows": dump.rows.len() });
    Ok(Outcome { config: cfg, results, diagnostics, human, ok: true })
}
