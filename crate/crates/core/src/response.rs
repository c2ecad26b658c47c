//! Canonical response-function types and the linear system that links their
//! joint distribution to the observable cell probabilities.
//!
//! An exposure type maps each instrument level to an exposure level. An
//! outcome type fixes `Y` for every clean level, and for every
//! instrument-dependent level fixes `Y` separately under each instrument
//! level. A pair of types deterministically produces one observable cell per
//! instrument level, so `p(x, y | z)` is the total mass of pairs landing in
//! `(z, x, y)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Cell, Estimand, ObservedDistribution, Scenario};
use crate::lp::EqualityLp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResponseError {
    #[error("estimand references `{0}`, whose outcome depends on the instrument; the target is not linear in the response-type distribution")]
    NonlinearTarget(String),
    #[error("estimand references unknown level `{0}`")]
    UnknownLevel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExposureType {
    /// exposure level index under each instrument level
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeType {
    /// Per exposure level: one entry for a clean level, one per instrument
    /// level for an instrument-dependent level.
    pub responses: Vec<Vec<u8>>,
}

impl OutcomeType {
    pub fn outcome(&self, x: usize, z: usize) -> u8 {
        let r = &self.responses[x];
        if r.len() == 1 {
            r[0]
        } else {
            r[z]
        }
    }
}

/// All `K_x^{K_z}` exposure types, lexicographic with the first instrument
/// level most significant.
pub fn enumerate_exposure_types(scenario: &Scenario) -> Vec<ExposureType> {
    let kz = scenario.instrument_arity;
    let kx = scenario.num_levels();
    let total = kx.pow(kz as u32);
    (0..total)
        .map(|mut code| {
            let mut assignment = vec![0; kz];
            for slot in assignment.iter_mut().rev() {
                *slot = code % kx;
                code /= kx;
            }
            ExposureType { assignment }
        })
        .collect()
}

/// All outcome types, lexicographic over levels in scenario order.
pub fn enumerate_outcome_types(scenario: &Scenario) -> Vec<OutcomeType> {
    let kz = scenario.instrument_arity;
    let widths: Vec<usize> = scenario.levels.iter().map(|l| if l.z_dependent { kz } else { 1 }).collect();
    let bits: usize = widths.iter().sum();
    (0..1usize << bits)
        .map(|code| {
            let mut pos = bits;
            let responses = widths
                .iter()
                .map(|&w| {
                    (0..w)
                        .map(|_| {
                            pos -= 1;
                            ((code >> pos) & 1) as u8
                        })
                        .collect()
                })
                .collect();
            OutcomeType { responses }
        })
        .collect()
}

/// Equality constraints `A q = p`, `Σq = 1` over response-type pairs, plus the
/// estimand as a linear objective.
///
/// Only the structural parts of the scenario are recorded (labels, which
/// levels are instrument-dependent, the estimand), so ill-defining and
/// contaminated variants of a scenario produce identical systems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub instrument_arity: usize,
    pub levels: Vec<String>,
    pub z_dependent: Vec<bool>,
    pub estimand: Estimand,
    pub exposure_types: Vec<ExposureType>,
    pub outcome_types: Vec<OutcomeType>,
    /// observable cells, one equality row each
    pub cells: Vec<Cell>,
    /// for each cell, the variables with coefficient 1 in its row
    pub rows: Vec<Vec<usize>>,
    pub objective: Vec<i8>,
}

impl ConstraintSystem {
    pub fn build(scenario: &Scenario) -> Result<Self, ResponseError> {
        let exposure_types = enumerate_exposure_types(scenario);
        let outcome_types = enumerate_outcome_types(scenario);
        let kz = scenario.instrument_arity;
        let kx = scenario.num_levels();

        let index = |label: &String| -> Result<usize, ResponseError> {
            let i = scenario.level_index(label).ok_or_else(|| ResponseError::UnknownLevel(label.clone()))?;
            if scenario.levels[i].z_dependent {
                return Err(ResponseError::NonlinearTarget(label.clone()));
            }
            Ok(i)
        };
        let (plus, minus) = match &scenario.estimand {
            Estimand::CounterfactualRisk { level } => (index(level)?, None),
            Estimand::RiskDifference { treated, reference } => (index(treated)?, Some(index(reference)?)),
        };

        let n_out = outcome_types.len();
        let n = exposure_types.len() * n_out;
        let cells = crate::data::distribution_cells(kz, kx);
        let mut rows = vec![Vec::new(); cells.len()];
        let mut objective = Vec::with_capacity(n);
        for (e, et) in exposure_types.iter().enumerate() {
            for (o, ot) in outcome_types.iter().enumerate() {
                let var = e * n_out + o;
                for (z, &x) in et.assignment.iter().enumerate() {
                    let y = ot.outcome(x, z);
                    rows[(z * kx + x) * 2 + y as usize].push(var);
                }
                let mut c = ot.responses[plus][0] as i8;
                if let Some(m) = minus {
                    c -= ot.responses[m][0] as i8;
                }
                objective.push(c);
            }
        }

        Ok(Self {
            instrument_arity: kz,
            levels: scenario.labels(),
            z_dependent: scenario.levels.iter().map(|l| l.z_dependent).collect(),
            estimand: scenario.estimand.clone(),
            exposure_types,
            outcome_types,
            cells,
            rows,
            objective,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.exposure_types.len() * self.outcome_types.len()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// The pair of types behind variable `var`.
    pub fn pair(&self, var: usize) -> (&ExposureType, &OutcomeType) {
        let n_out = self.outcome_types.len();
        (&self.exposure_types[var / n_out], &self.outcome_types[var % n_out])
    }

    /// The cell that variable `var` lands in under instrument level `z`.
    pub fn cell_of(&self, var: usize, z: usize) -> Cell {
        let (e, o) = self.pair(var);
        let x = e.assignment[z];
        Cell { z, x, y: o.outcome(x, z) }
    }

    pub fn cell_index(&self, cell: Cell) -> usize {
        (cell.z * self.num_levels() + cell.x) * 2 + cell.y as usize
    }

    /// Dense cell rows followed by the normalization row.
    pub fn dense_rows(&self) -> Vec<Vec<i64>> {
        let n = self.num_vars();
        let mut out: Vec<Vec<i64>> = self
            .rows
            .iter()
            .map(|vars| {
                let mut r = vec![0i64; n];
                for &v in vars {
                    r[v] = 1;
                }
                r
            })
            .collect();
        out.push(vec![1; n]);
        out
    }

    pub fn objective_i64(&self) -> Vec<i64> {
        self.objective.iter().map(|&c| c as i64).collect()
    }

    /// The equality program for observed probabilities `p` (cell order).
    pub fn equality_lp(&self, p: &[BigRational]) -> EqualityLp {
        let mut b = p.to_vec();
        b.push(BigRational::from_integer(BigInt::from(1)));
        EqualityLp::new(self.dense_rows(), b)
    }

    /// Predicted cell probabilities `A q`.
    pub fn predict(&self, q: &[BigRational]) -> Vec<BigRational> {
        self.rows.iter().map(|vars| vars.iter().map(|&v| &q[v]).fold(BigRational::zero(), |a, b| a + b)).collect()
    }

    /// Predicted distribution for integer weights `k` (q = k / Σk), as counts.
    pub fn predict_counts(&self, k: &[u64]) -> Vec<Vec<[u64; 2]>> {
        let kx = self.num_levels();
        let mut counts = vec![vec![[0u64; 2]; kx]; self.instrument_arity];
        for (ci, vars) in self.rows.iter().enumerate() {
            let c = self.cells[ci];
            counts[c.z][c.x][c.y as usize] = vars.iter().map(|&v| k[v]).sum();
        }
        counts
    }

    pub fn objective_value(&self, q: &[BigRational]) -> BigRational {
        crate::lp::objective_value(&self.objective_i64(), q)
    }

    /// True when the data have the same instrument arity and exposure labels in the same order.
    pub fn matches(&self, dist: &ObservedDistribution) -> bool {
        dist.num_instruments() == self.instrument_arity && dist.exposure_levels() == self.levels.as_slice()
    }

    /// Row-major dump for debugging (`dump-lp`).
    pub fn dump(&self) -> LpDump {
        LpDump {
            levels: self.levels.clone(),
            z_dependent: self.z_dependent.clone(),
            estimand: self.estimand.clone(),
            variables: (0..self.num_vars())
                .map(|v| {
                    let (e, o) = self.pair(v);
                    VariableDump { exposure: e.assignment.clone(), outcome: o.responses.clone() }
                })
                .collect(),
            rows: self
                .cells
                .iter()
                .zip(&self.rows)
                .map(|(c, vars)| RowDump { z: c.z, x: self.levels[c.x].clone(), y: c.y, variables: vars.clone() })
                .collect(),
            objective: self.objective.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariableDump {
    pub exposure: Vec<usize>,
    pub outcome: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RowDump {
    pub z: usize,
    pub x: String,
    pub y: u8,
    pub variables: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LpDump {
    pub levels: Vec<String>,
    pub z_dependent: Vec<bool>,
    pub estimand: Estimand,
    pub variables: Vec<VariableDump>,
    pub rows: Vec<RowDump>,
    pub objective: Vec<i8>,
}
