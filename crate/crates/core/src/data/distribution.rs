use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CoarsenedRecord, CoarseningMap, DataError, ExposureValue};

/// Observable cell `(Z=z, X=x, Y=y)` by level index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub z: usize,
    pub x: usize,
    pub y: u8,
}

/// Counts of `(X, Y)` within each instrument level, with exact conditional
/// probabilities `p(X=x, Y=y | Z=z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedDistribution {
    instrument_levels: Vec<String>,
    exposure_levels: Vec<String>,
    /// `counts[z][x] = [count(y=0), count(y=1)]`
    counts: Vec<Vec<[u64; 2]>>,
}

impl ObservedDistribution {
    pub fn new(
        instrument_levels: Vec<String>,
        exposure_levels: Vec<String>,
        counts: Vec<Vec<[u64; 2]>>,
    ) -> Result<Self, DataError> {
        if instrument_levels.is_empty() || exposure_levels.is_empty() {
            return Err(DataError::Mismatch("need at least one instrument and one exposure level".into()));
        }
        for (name, labels) in [("instrument", &instrument_levels), ("exposure", &exposure_levels)] {
            for (i, l) in labels.iter().enumerate() {
                if labels[..i].contains(l) {
                    return Err(DataError::Mismatch(format!("duplicate {name} level `{l}`")));
                }
            }
        }
        if counts.len() != instrument_levels.len() || counts.iter().any(|r| r.len() != exposure_levels.len()) {
            return Err(DataError::Mismatch("count tensor shape does not match level lists".into()));
        }
        for (z, row) in counts.iter().enumerate() {
            if row.iter().all(|c| c[0] == 0 && c[1] == 0) {
                return Err(DataError::EmptyStratum(instrument_levels[z].clone()));
            }
        }
        Ok(Self { instrument_levels, exposure_levels, counts })
    }

    pub fn instrument_levels(&self) -> &[String] {
        &self.instrument_levels
    }

    pub fn exposure_levels(&self) -> &[String] {
        &self.exposure_levels
    }

    pub fn num_instruments(&self) -> usize {
        self.instrument_levels.len()
    }

    pub fn num_exposures(&self) -> usize {
        self.exposure_levels.len()
    }

    pub fn count(&self, z: usize, x: usize, y: u8) -> u64 {
        self.counts[z][x][y as usize]
    }

    pub fn counts(&self) -> &[Vec<[u64; 2]>] {
        &self.counts
    }

    pub fn n(&self, z: usize) -> u64 {
        self.counts[z].iter().map(|c| c[0] + c[1]).sum()
    }

    pub fn n_per_z(&self) -> Vec<u64> {
        (0..self.num_instruments()).map(|z| self.n(z)).collect()
    }

    pub fn total(&self) -> u64 {
        self.n_per_z().iter().sum()
    }

    pub fn prob(&self, z: usize, x: usize, y: u8) -> BigRational {
        BigRational::new(BigInt::from(self.count(z, x, y)), BigInt::from(self.n(z)))
    }

    pub fn prob_f64(&self, z: usize, x: usize, y: u8) -> f64 {
        self.count(z, x, y) as f64 / self.n(z) as f64
    }

    /// Cells in canonical order: instrument-major, then exposure, then outcome.
    pub fn cells(&self) -> Vec<Cell> {
        cells(self.num_instruments(), self.num_exposures())
    }

    /// Probabilities in [`cells`](Self::cells) order.
    pub fn probabilities(&self) -> Vec<BigRational> {
        self.cells().into_iter().map(|c| self.prob(c.z, c.x, c.y)).collect()
    }

    pub fn exposure_index(&self, label: &str) -> Option<usize> {
        self.exposure_levels.iter().position(|l| l == label)
    }

    pub fn instrument_index(&self, label: &str) -> Option<usize> {
        self.instrument_levels.iter().position(|l| l == label)
    }

    /// Expands counts into one record per unit (instrument-major order).
    pub fn expand(&self) -> Vec<CoarsenedRecord> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for cell in self.cells() {
            for _ in 0..self.count(cell.z, cell.x, cell.y) {
                out.push(CoarsenedRecord {
                    z: self.instrument_levels[cell.z].clone(),
                    x: self.exposure_levels[cell.x].clone(),
                    y: cell.y,
                });
            }
        }
        out
    }

    /// Same data with exposure levels listed in `order`.
    pub fn reordered(&self, order: &[String]) -> Result<Self, DataError> {
        let idx: Vec<usize> = order
            .iter()
            .map(|l| self.exposure_index(l).ok_or_else(|| DataError::UnknownLabel(l.clone())))
            .collect::<Result<_, _>>()?;
        if idx.len() != self.num_exposures() {
            return Err(DataError::Mismatch("reordering must list every exposure level once".into()));
        }
        let counts = self.counts.iter().map(|row| idx.iter().map(|&i| row[i]).collect()).collect();
        Self::new(self.instrument_levels.clone(), order.to_vec(), counts)
    }

    /// Merges exposure levels through a label map (e.g. pooling levels into one).
    pub fn coarsened(&self, map: &CoarseningMap) -> Result<Self, DataError> {
        let targets = map.coarse_labels();
        let mut counts = vec![vec![[0u64; 2]; targets.len()]; self.num_instruments()];
        for (x, label) in self.exposure_levels.iter().enumerate() {
            let to = map
                .apply(&ExposureValue::Label(label.clone()))
                .ok_or_else(|| DataError::Uncovered(vec![label.clone()]))?;
            let t = targets.iter().position(|l| l == to).expect("target listed");
            for (row, src) in counts.iter_mut().zip(&self.counts) {
                row[t][0] += src[x][0];
                row[t][1] += src[x][1];
            }
        }
        Self::new(self.instrument_levels.clone(), targets, counts)
    }

    /// Replaces the counts, keeping labels. Used by resampling.
    pub fn with_counts(&self, counts: Vec<Vec<[u64; 2]>>) -> Result<Self, DataError> {
        Self::new(self.instrument_levels.clone(), self.exposure_levels.clone(), counts)
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        hex_digest(&bytes)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn cells(kz: usize, kx: usize) -> Vec<Cell> {
    let mut out = Vec::with_capacity(kz * kx * 2);
    for z in 0..kz {
        for x in 0..kx {
            for y in 0..2u8 {
                out.push(Cell { z, x, y });
            }
        }
    }
    out
}

/// Counts coarsened records into a distribution with the given level orders.
pub fn tabulate(
    records: &[CoarsenedRecord],
    instrument_levels: &[String],
    exposure_levels: &[String],
) -> Result<ObservedDistribution, DataError> {
    if records.is_empty() {
        return Err(DataError::NoRecords);
    }
    let mut counts = vec![vec![[0u64; 2]; exposure_levels.len()]; instrument_levels.len()];
    for r in records {
        let z = instrument_levels.iter().position(|l| *l == r.z).ok_or_else(|| DataError::UnknownLabel(r.z.clone()))?;
        let x = exposure_levels.iter().position(|l| *l == r.x).ok_or_else(|| DataError::UnknownLabel(r.x.clone()))?;
        if r.y > 1 {
            return Err(DataError::BadOutcome { line: 0, value: r.y.to_string() });
        }
        counts[z][x][r.y as usize] += 1;
    }
    ObservedDistribution::new(instrument_levels.to_vec(), exposure_levels.to_vec(), counts)
}
