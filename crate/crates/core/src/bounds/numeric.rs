use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{rational_string, BoundResult, BoundsError, Method};
use crate::data::{Cell, ObservedDistribution};
use crate::lp::{EqualityLp, LpError, LpVertex};
use crate::response::ConstraintSystem;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NumericOptions {
    /// Project infeasible data onto the model (least total L1 slack) instead of failing.
    pub slack: bool,
}

/// Data were moved to `projected` (cell order) at total absolute change `total_slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub total_slack: BigRational,
    pub projected: Vec<BigRational>,
}

/// Proof that the data violate an inequality every compatible distribution
/// satisfies: `Σ weight·p(cell) + constant ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub levels: Vec<String>,
    pub weights: Vec<(Cell, BigRational)>,
    pub constant: BigRational,
    /// Left-hand side at the observed data; positive.
    pub observed: BigRational,
}

impl FarkasCertificate {
    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .weights
            .iter()
            .map(|(c, w)| format!("{} p({},{}|z={})", rational_string(w), self.levels[c.x], c.y, c.z))
            .collect();
        if !self.constant.is_zero() {
            parts.push(rational_string(&self.constant));
        }
        format!("the model requires {} <= 0 but the data give {}", parts.join(" + "), rational_string(&self.observed))
    }
}

/// Columns of the system with identical cell pattern are merged; for each
/// pattern only the variables with the smallest and largest objective
/// coefficient can matter.
struct Compressed {
    rows: Vec<Vec<i64>>,
    cost: Vec<i64>,
    origin: Vec<usize>,
}

fn compress(system: &ConstraintSystem) -> Compressed {
    let kz = system.instrument_arity;
    let mut groups: BTreeMap<Vec<usize>, (usize, usize)> = BTreeMap::new();
    for v in 0..system.num_vars() {
        let sig: Vec<usize> = (0..kz).map(|z| system.cell_index(system.cell_of(v, z))).collect();
        let c = system.objective[v];
        groups
            .entry(sig)
            .and_modify(|(lo, hi)| {
                if c < system.objective[*lo] {
                    *lo = v;
                }
                if c > system.objective[*hi] {
                    *hi = v;
                }
            })
            .or_insert((v, v));
    }
    let mut origin = Vec::new();
    let mut sigs = Vec::new();
    for (sig, (lo, hi)) in &groups {
        origin.push(*lo);
        sigs.push(sig);
        if system.objective[*hi] != system.objective[*lo] {
            origin.push(*hi);
            sigs.push(sig);
        }
    }
    let m = system.cells.len();
    let mut rows = vec![vec![0i64; origin.len()]; m + 1];
    for (j, sig) in sigs.iter().enumerate() {
        for &cell in sig.iter() {
            rows[cell][j] = 1;
        }
        rows[m][j] = 1;
    }
    let cost = origin.iter().map(|&v| system.objective[v] as i64).collect();
    Compressed { rows, cost, origin }
}

impl Compressed {
    fn lift(&self, x: &[BigRational], n: usize) -> Vec<BigRational> {
        let mut q = vec![BigRational::zero(); n];
        for (j, v) in x.iter().enumerate() {
            if !v.is_zero() {
                q[self.origin[j]] += v;
            }
        }
        q
    }
}

pub fn numeric_bounds(system: &ConstraintSystem, dist: &ObservedDistribution) -> Result<BoundResult, BoundsError> {
    numeric_bounds_with(system, dist, NumericOptions::default())
}

/// Minimum and maximum of the estimand over all response-type distributions
/// reproducing `dist`, by exact simplex.
pub fn numeric_bounds_with(
    system: &ConstraintSystem,
    dist: &ObservedDistribution,
    options: NumericOptions,
) -> Result<BoundResult, BoundsError> {
    if !system.matches(dist) {
        return Err(BoundsError::Mismatch(format!(
            "system levels [{}] with {} instrument levels do not match data levels [{}] with {}",
            system.levels.join(", "),
            system.instrument_arity,
            dist.exposure_levels().join(", "),
            dist.num_instruments()
        )));
    }
    let comp = compress(system);
    let mut b = dist.probabilities();
    b.push(BigRational::one());
    let lp = EqualityLp::new(comp.rows.clone(), b.clone());

    let (extremes, projection) = match lp.extremes(&comp.cost) {
        Ok(r) => (r, None),
        Err(LpError::Infeasible { .. }) if options.slack => {
            let projection = project(&comp, &b)?;
            let mut pb = projection.projected.clone();
            pb.push(BigRational::one());
            let r = EqualityLp::new(comp.rows.clone(), pb).extremes(&comp.cost).map_err(internal)?;
            (r, Some(projection))
        }
        Err(LpError::Infeasible { farkas }) => return Err(infeasible(system, &b, farkas)),
        Err(e) => return Err(internal(e)),
    };
    let (min, max): (LpVertex, LpVertex) = extremes;
    let n = system.num_vars();
    Ok(BoundResult {
        lower: min.value,
        upper: max.value,
        lower_certificate: Some(comp.lift(&min.x, n)),
        upper_certificate: Some(comp.lift(&max.x, n)),
        method: Method::Lp,
        levels: system.levels.clone(),
        estimand: system.estimand.clone(),
        projection,
    })
}

fn internal(e: LpError) -> BoundsError {
    BoundsError::Internal(e.to_string())
}

fn infeasible(system: &ConstraintSystem, b: &[BigRational], farkas: Vec<BigRational>) -> BoundsError {
    let m = system.cells.len();
    let observed: BigRational = farkas.iter().zip(b).map(|(y, v)| y * v).sum();
    let weights =
        system.cells.iter().zip(&farkas[..m]).filter(|(_, y)| !y.is_zero()).map(|(c, y)| (*c, y.clone())).collect();
    BoundsError::Infeasible(Box::new(FarkasCertificate {
        levels: system.levels.clone(),
        weights,
        constant: farkas[m].clone(),
        observed,
    }))
}

/// Least-L1 change to the cell probabilities that makes them reproducible.
fn project(comp: &Compressed, b: &[BigRational]) -> Result<Projection, BoundsError> {
    let m = b.len() - 1;
    let k = comp.cost.len();
    let width = k + 2 * m;
    let rows: Vec<Vec<i64>> = comp
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.resize(width, 0);
            if i < m {
                row[k + i] = 1;
                row[k + m + i] = -1;
            }
            row
        })
        .collect();
    let mut cost = vec![0i64; k];
    cost.resize(width, 1);
    let sol = EqualityLp::new(rows, b.to_vec()).minimize(&cost).map_err(internal)?;
    let projected = (0..m).map(|i| &b[i] - &sol.x[k + i] + &sol.x[k + m + i]).collect();
    Ok(Projection { total_slack: sol.value, projected })
}

/// True when `q` is a distribution reproducing `dist` and has estimand value `value`.
pub fn certificate_verifies(
    system: &ConstraintSystem,
    dist: &ObservedDistribution,
    q: &[BigRational],
    value: &BigRational,
) -> bool {
    system.equality_lp(&dist.probabilities()).is_feasible(q) && system.objective_value(q) == *value
}
