//! Bootstrap intervals for bound endpoints.
//!
//! Every replicate recomputes the bounds with the same exact LP used for the
//! point estimate. Replicate `i` draws from its own ChaCha stream (`i`) under
//! the master seed, so results do not depend on scheduling.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{numeric_bounds_with, BoundResult, BoundsError, NumericOptions};
use crate::data::{tabulate, validate, CoarsenedRecord, DataError, ObservedDistribution, Scenario};
use crate::response::ConstraintSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapMethod {
    Percentile,
    MOutOfN,
    Multinomial,
}

/// How consecutive m-out-of-n intervals are compared when choosing `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridDistance {
    /// endpoint deviations from the point bounds scaled by `√m`
    Rescaled,
    /// raw endpoint differences
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub method: BootstrapMethod,
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub rho: f64,
    pub grid: usize,
    pub distance: GridDistance,
    /// Abort when more than this fraction of replicates needed projection.
    pub max_infeasible_fraction: f64,
}

impl BootstrapSpec {
    pub fn new(method: BootstrapMethod, replicates: usize, level: f64, seed: u64) -> Self {
        Self {
            method,
            replicates,
            level,
            seed,
            rho: 0.75,
            grid: 8,
            distance: GridDistance::Rescaled,
            max_infeasible_fraction: 0.1,
        }
    }

    fn check(&self) -> Result<(), InferenceError> {
        if self.replicates == 0 {
            return Err(InferenceError::InvalidSpec("at least one replicate is required".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(InferenceError::InvalidSpec(format!("confidence level {} is outside (0, 1)", self.level)));
        }
        if self.method == BootstrapMethod::MOutOfN {
            if !(self.rho > 0.0 && self.rho < 1.0) {
                return Err(InferenceError::InvalidSpec(format!("grid ratio {} is outside (0, 1)", self.rho)));
            }
            if self.grid < 2 {
                return Err(InferenceError::InvalidSpec("grid needs at least two points".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    /// resample size per instrument level
    pub m: Vec<u64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub point: BoundResult,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub spec: BootstrapSpec,
    pub chosen_m: Option<Vec<u64>>,
    pub grid: Vec<GridPoint>,
    /// replicates that were infeasible and bounded after projection
    pub infeasible_replicates: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid bootstrap settings: {0}")]
    InvalidSpec(String),
    #[error("{infeasible} of {replicates} replicates were incompatible with the model (limit {limit:.0}%)")]
    TooManyInfeasible { infeasible: usize, replicates: usize, limit: f64 },
}

/// Type-7 sample quantile of sorted data.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(α/2 quantile of lower endpoints, 1 − α/2 quantile of upper endpoints)`.
pub fn percentile_interval(lowers: &[f64], uppers: &[f64], level: f64) -> (f64, f64) {
    let alpha = 1.0 - level;
    let mut lo = lowers.to_vec();
    let mut hi = uppers.to_vec();
    lo.sort_by(f64::total_cmp);
    hi.sort_by(f64::total_cmp);
    (quantile(&lo, alpha / 2.0), quantile(&hi, 1.0 - alpha / 2.0))
}

struct Engine {
    system: ConstraintSystem,
    base: ObservedDistribution,
}

impl Engine {
    fn new(scenario: &Scenario, dist: &ObservedDistribution) -> Result<Self, InferenceError> {
        let v = validate(scenario, dist)?;
        let system = ConstraintSystem::build(&v.scenario).map_err(BoundsError::from)?;
        Ok(Self { system, base: v.dist })
    }

    fn point(&self) -> Result<BoundResult, InferenceError> {
        Ok(numeric_bounds_with(&self.system, &self.base, NumericOptions::default())?)
    }

    /// Bounds for replicate counts; infeasible data are projected and flagged.
    fn replicate(&self, counts: Vec<Vec<[u64; 2]>>) -> Result<(f64, f64, bool), InferenceError> {
        let d = self.base.with_counts(counts)?;
        let r = numeric_bounds_with(&self.system, &d, NumericOptions { slack: true })?;
        Ok((r.lower.to_f64().unwrap_or(f64::NAN), r.upper.to_f64().unwrap_or(f64::NAN), r.projection.is_some()))
    }

    /// Runs `replicates` draws and returns the endpoint samples and the infeasible count.
    fn run<F>(
        &self,
        spec: &BootstrapSpec,
        stream_offset: u64,
        draw: F,
    ) -> Result<(Vec<f64>, Vec<f64>, usize), InferenceError>
    where
        F: Fn(&mut ChaCha8Rng) -> Vec<Vec<[u64; 2]>> + Sync,
    {
        let results: Vec<Result<(f64, f64, bool), InferenceError>> = (0..spec.replicates)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(stream_offset + i as u64);
                self.replicate(draw(&mut rng))
            })
            .collect();
        let mut lowers = Vec::with_capacity(spec.replicates);
        let mut uppers = Vec::with_capacity(spec.replicates);
        let mut infeasible = 0;
        for r in results {
            let (l, u, projected) = r?;
            lowers.push(l);
            uppers.push(u);
            infeasible += projected as usize;
        }
        if infeasible as f64 > spec.max_infeasible_fraction * spec.replicates as f64 {
            return Err(InferenceError::TooManyInfeasible {
                infeasible,
                replicates: spec.replicates,
                limit: spec.max_infeasible_fraction * 100.0,
            });
        }
        Ok((lowers, uppers, infeasible))
    }
}

/// Stratum-wise record pools: for each instrument level, the `(x, y)` index of every unit.
fn pools(dist: &ObservedDistribution) -> Vec<Vec<(usize, usize)>> {
    dist.counts()
        .iter()
        .map(|row| {
            let mut units = Vec::new();
            for (x, c) in row.iter().enumerate() {
                for (y, &n) in c.iter().enumerate() {
                    units.extend(std::iter::repeat_n((x, y), n as usize));
                }
            }
            units
        })
        .collect()
}

fn resample(pools: &[Vec<(usize, usize)>], sizes: &[u64], kx: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<[u64; 2]>> {
    pools
        .iter()
        .zip(sizes)
        .map(|(pool, &m)| {
            let mut row = vec![[0u64; 2]; kx];
            for _ in 0..m {
                let (x, y) = pool[rng.random_range(0..pool.len())];
                row[x][y] += 1;
            }
            row
        })
        .collect()
}

fn records_to_dist(records: &[CoarsenedRecord], scenario: &Scenario) -> Result<ObservedDistribution, InferenceError> {
    let mut instruments: Vec<String> = Vec::new();
    for r in records {
        if !instruments.contains(&r.z) {
            instruments.push(r.z.clone());
        }
    }
    Ok(tabulate(records, &instruments, &scenario.labels())?)
}

/// Nonparametric percentile bootstrap, resampling units within each instrument level.
pub fn percentile_ci(
    records: &[CoarsenedRecord],
    scenario: &Scenario,
    spec: &BootstrapSpec,
) -> Result<IntervalResult, InferenceError> {
    spec.check()?;
    let dist = records_to_dist(records, scenario)?;
    percentile_from_counts(&dist, scenario, spec)
}

/// Same as [`percentile_ci`] for data held as counts.
pub fn percentile_from_counts(
    dist: &ObservedDistribution,
    scenario: &Scenario,
    spec: &BootstrapSpec,
) -> Result<IntervalResult, InferenceError> {
    spec.check()?;
    let engine = Engine::new(scenario, dist)?;
    let point = engine.point()?;
    let pools = pools(&engine.base);
    let sizes = engine.base.n_per_z();
    let kx = engine.base.num_exposures();
    let (lo, hi, infeasible) = engine.run(spec, 0, |rng| resample(&pools, &sizes, kx, rng))?;
    let (ci_lower, ci_upper) = percentile_interval(&lo, &hi, spec.level);
    Ok(IntervalResult {
        point,
        ci_lower,
        ci_upper,
        spec: *spec,
        chosen_m: None,
        grid: Vec::new(),
        infeasible_replicates: infeasible,
        warnings: Vec::new(),
    })
}

/// m-out-of-n bootstrap over the grid `m_j = ⌈ρ^j n_z⌉` per instrument level.
/// The chosen `j` minimizes the sup-norm distance between the intervals at
/// `j` and `j + 1`.
pub fn m_out_of_n_ci(
    records: &[CoarsenedRecord],
    scenario: &Scenario,
    spec: &BootstrapSpec,
) -> Result<IntervalResult, InferenceError> {
    spec.check()?;
    let dist = records_to_dist(records, scenario)?;
    m_out_of_n_from_counts(&dist, scenario, spec)
}

pub fn m_out_of_n_from_counts(
    dist: &ObservedDistribution,
    scenario: &Scenario,
    spec: &BootstrapSpec,
) -> Result<IntervalResult, InferenceError> {
    spec.check()?;
    let engine = Engine::new(scenario, dist)?;
    let point = engine.point()?;
    let n = engine.base.n_per_z();
    let mut sizes: Vec<Vec<u64>> = Vec::new();
    for j in 0..spec.grid {
        let f = spec.rho.powi(j as i32);
        let m: Vec<u64> = n.iter().map(|&nz| ((f * nz as f64).ceil() as u64).max(1)).collect();
        if sizes.last() != Some(&m) {
            sizes.push(m);
        }
    }
    if sizes.len() < 2 {
        let mut r = percentile_from_counts(dist, scenario, spec)?;
        r.warnings.push("m-out-of-n grid collapsed to a single size; reporting the percentile interval".into());
        return Ok(r);
    }

    let pools = pools(&engine.base);
    let kx = engine.base.num_exposures();
    let mut grid = Vec::with_capacity(sizes.len());
    let mut infeasible = 0;
    for (j, m) in sizes.iter().enumerate() {
        let offset = (j * spec.replicates) as u64;
        let (lo, hi, inf) = engine.run(spec, offset, |rng| resample(&pools, m, kx, rng))?;
        infeasible += inf;
        let (ci_lower, ci_upper) = percentile_interval(&lo, &hi, spec.level);
        grid.push(GridPoint { m: m.clone(), ci_lower, ci_upper });
    }

    let (pl, pu) = (point.lower_f64(), point.upper_f64());
    let scaled = |g: &GridPoint| -> (f64, f64) {
        match spec.distance {
            GridDistance::Raw => (g.ci_lower, g.ci_upper),
            GridDistance::Rescaled => {
                let s = (g.m.iter().sum::<u64>() as f64).sqrt();
                (s * (g.ci_lower - pl), s * (g.ci_upper - pu))
            }
        }
    };
    let best = (0..grid.len() - 1)
        .min_by(|&a, &b| {
            let d = |j: usize| {
                let (l0, u0) = scaled(&grid[j]);
                let (l1, u1) = scaled(&grid[j + 1]);
                (l0 - l1).abs().max((u0 - u1).abs())
            };
            d(a).total_cmp(&d(b))
        })
        .expect("grid has two points");

    Ok(IntervalResult {
        point,
        ci_lower: grid[best].ci_lower,
        ci_upper: grid[best].ci_upper,
        spec: *spec,
        chosen_m: Some(grid[best].m.clone()),
        grid,
        infeasible_replicates: infeasible,
        warnings: Vec::new(),
    })
}

fn multinomial(n: u64, probs: &[f64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out.push(left);
            break;
        }
        let share = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw =
            if left == 0 || share == 0.0 { 0 } else { Binomial::new(left, share).expect("valid binomial").sample(rng) };
        out.push(draw);
        left -= draw;
        mass -= p;
    }
    out
}

/// Parametric bootstrap: counts within each instrument level are redrawn from
/// the multinomial with the observed cell proportions.
pub fn parametric_multinomial_ci(
    dist: &ObservedDistribution,
    scenario: &Scenario,
    spec: &BootstrapSpec,
) -> Result<IntervalResult, InferenceError> {
    spec.check()?;
    let engine = Engine::new(scenario, dist)?;
    let point = engine.point()?;
    let base = &engine.base;
    let kx = base.num_exposures();
    let probs: Vec<Vec<f64>> = (0..base.num_instruments())
        .map(|z| (0..kx).flat_map(|x| (0..2u8).map(move |y| (x, y))).map(|(x, y)| base.prob_f64(z, x, y)).collect())
        .collect();
    let n = base.n_per_z();
    let (lo, hi, infeasible) = engine.run(spec, 0, |rng| {
        probs
            .iter()
            .zip(&n)
            .map(|(p, &nz)| {
                let flat = multinomial(nz, p, rng);
                flat.chunks(2).map(|c| [c[0], c[1]]).collect()
            })
            .collect()
    })?;
    let (ci_lower, ci_upper) = percentile_interval(&lo, &hi, spec.level);
    Ok(IntervalResult {
        point,
        ci_lower,
        ci_upper,
        spec: *spec,
        chosen_m: None,
        grid: Vec::new(),
        infeasible_replicates: infeasible,
        warnings: Vec::new(),
    })
}

/// Dispatches on `spec.method` for count data.
pub fn interval_from_counts(
    dist: &ObservedDistribution,
    scenario: &Scenario,
    spec: &BootstrapSpec,
) -> Result<IntervalResult, InferenceError> {
    match spec.method {
        BootstrapMethod::Percentile => percentile_from_counts(dist, scenario, spec),
        BootstrapMethod::MOutOfN => m_out_of_n_from_counts(dist, scenario, spec),
        BootstrapMethod::Multinomial => parametric_multinomial_ci(dist, scenario, spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Estimand, ExposureLevel};

    fn binary_scenario() -> Scenario {
        Scenario::new(2, vec![ExposureLevel::clean("a"), ExposureLevel::clean("b")], Estimand::difference("b", "a"))
            .unwrap()
    }

    fn dist(counts: Vec<Vec<[u64; 2]>>) -> ObservedDistribution {
        ObservedDistribution::new(vec!["0".into(), "1".into()], vec!["a".into(), "b".into()], counts).unwrap()
    }

    #[test]
    fn type_seven_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn constant_data_give_point_interval() {
        // every unit in z=0 is (a, y=1), every unit in z=1 is (b, y=0)
        let d = dist(vec![vec![[0, 5], [0, 0]], vec![[0, 0], [7, 0]]]);
        for method in [BootstrapMethod::Percentile, BootstrapMethod::Multinomial] {
            let spec = BootstrapSpec::new(method, 50, 0.95, 3);
            let r = interval_from_counts(&d, &binary_scenario(), &spec).unwrap();
            assert_eq!(r.ci_lower, r.point.lower_f64());
            assert_eq!(r.ci_upper, r.point.upper_f64());
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let d = dist(vec![vec![[20, 10], [5, 5]], vec![[4, 6], [15, 15]]]);
        let spec = BootstrapSpec::new(BootstrapMethod::Multinomial, 200, 0.9, 11);
        let a = interval_from_counts(&d, &binary_scenario(), &spec).unwrap();
        let b = interval_from_counts(&d, &binary_scenario(), &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_lower <= a.ci_upper);
    }

    #[test]
    fn wider_level_widens_interval() {
        let lo = [0.1, 0.3, 0.2, 0.05, 0.15];
        let hi = [0.6, 0.7, 0.65, 0.8, 0.5];
        let (l90, u90) = percentile_interval(&lo, &hi, 0.9);
        let (l99, u99) = percentile_interval(&lo, &hi, 0.99);
        assert!(l99 <= l90 && u90 <= u99);
    }

    #[test]
    fn tiny_samples_fall_back_to_percentile() {
        let d = dist(vec![vec![[1, 0], [0, 0]], vec![[0, 0], [0, 1]]]);
        let s =
            Scenario::new(2, vec![ExposureLevel::clean("a"), ExposureLevel::ill_defining("b")], Estimand::risk("a"))
                .unwrap();
        let mut spec = BootstrapSpec::new(BootstrapMethod::MOutOfN, 20, 0.95, 1);
        spec.rho = 0.9;
        spec.grid = 3;
        let r = m_out_of_n_from_counts(&d, &s, &spec).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.chosen_m.is_none());
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let d = dist(vec![vec![[1, 1], [1, 1]], vec![[1, 1], [1, 1]]]);
        let mut spec = BootstrapSpec::new(BootstrapMethod::Percentile, 0, 0.95, 1);
        assert!(matches!(interval_from_counts(&d, &binary_scenario(), &spec), Err(InferenceError::InvalidSpec(_))));
        spec.replicates = 10;
        spec.level = 1.0;
        assert!(matches!(interval_from_counts(&d, &binary_scenario(), &spec), Err(InferenceError::InvalidSpec(_))));
    }

    #[test]
    fn multinomial_draws_sum_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draw = multinomial(100, &[0.2, 0.0, 0.5, 0.3], &mut rng);
        assert_eq!(draw.iter().sum::<u64>(), 100);
        assert_eq!(draw[1], 0);
    }
}
