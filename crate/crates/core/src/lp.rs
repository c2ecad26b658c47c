//! Exact two-phase simplex over integer data.
//!
//! The tableau is kept fraction-free (integer-preserving pivoting): every
//! stored entry is the true tableau value multiplied by the current basis
//! determinant, and each pivot divides exactly by the previous determinant.
//! Arithmetic runs in `i128` with overflow checks and is replayed in `BigInt`
//! when a checked operation fails, so results are always exact.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! basic variable among tied ratios), which cannot cycle on degenerate
//! vertices. Redundant equality rows are detected when an artificial variable
//! cannot be driven out of the basis at the end of phase one.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// `minimize cᵀx  s.t.  A x = b, x ≥ 0` for each cost vector in `objectives`.
#[derive(Debug, Clone)]
pub struct EqualityLp {
    pub a: Vec<Vec<i64>>,
    pub b: Vec<BigRational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpVertex {
    pub value: BigRational,
    pub x: Vec<BigRational>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LpError {
    /// No `x ≥ 0` solves `A x = b`. `farkas` satisfies `yᵀA ≤ 0` and `yᵀb > 0`.
    #[error("equality system has no nonnegative solution")]
    Infeasible { farkas: Vec<BigRational> },
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

impl EqualityLp {
    pub fn new(a: Vec<Vec<i64>>, b: Vec<BigRational>) -> Self {
        Self { a, b }
    }

    pub fn num_vars(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    /// Minimizes every objective over the same feasible set, sharing phase one.
    pub fn minimize_all(&self, objectives: &[Vec<i64>]) -> Result<Vec<LpVertex>, LpError> {
        self.check_shape(objectives)?;
        match solve::<i128>(self, objectives) {
            Ok(res) => res,
            Err(Overflow) => match solve::<BigInt>(self, objectives) {
                Ok(res) => res,
                Err(Overflow) => unreachable!("big integers do not overflow"),
            },
        }
    }

    pub fn minimize(&self, c: &[i64]) -> Result<LpVertex, LpError> {
        Ok(self.minimize_all(&[c.to_vec()])?.remove(0))
    }

    /// Minimum and maximum of `cᵀx` over the feasible set.
    pub fn extremes(&self, c: &[i64]) -> Result<(LpVertex, LpVertex), LpError> {
        let neg: Vec<i64> = c.iter().map(|v| -v).collect();
        let mut res = self.minimize_all(&[c.to_vec(), neg])?;
        let mut max = res.pop().expect("two objectives");
        max.value = -max.value;
        let min = res.pop().expect("two objectives");
        Ok((min, max))
    }

    /// True when `x ≥ 0` and `A x = b` hold exactly.
    pub fn is_feasible(&self, x: &[BigRational]) -> bool {
        if x.len() != self.num_vars() || x.iter().any(|v| v.is_negative()) {
            return false;
        }
        self.a.iter().zip(&self.b).all(|(row, bi)| {
            let lhs: BigRational = row
                .iter()
                .zip(x)
                .filter(|(a, _)| **a != 0)
                .map(|(a, v)| v * BigRational::from_integer(BigInt::from(*a)))
                .sum();
            &lhs == bi
        })
    }

    /// Checks `yᵀA ≤ 0` and `yᵀb > 0`.
    pub fn verifies_farkas(&self, y: &[BigRational]) -> bool {
        if y.len() != self.a.len() {
            return false;
        }
        let n = self.num_vars();
        let cols_ok = (0..n).all(|j| {
            let s: BigRational =
                self.a.iter().zip(y).map(|(row, yi)| yi * BigRational::from_integer(BigInt::from(row[j]))).sum();
            !s.is_positive()
        });
        let yb: BigRational = y.iter().zip(&self.b).map(|(yi, bi)| yi * bi).sum();
        cols_ok && yb.is_positive()
    }

    fn check_shape(&self, objectives: &[Vec<i64>]) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.a.len() != self.b.len() {
            return Err(LpError::Malformed(format!("{} rows but {} right-hand sides", self.a.len(), self.b.len())));
        }
        if self.a.iter().any(|r| r.len() != n) {
            return Err(LpError::Malformed("ragged constraint matrix".into()));
        }
        if objectives.iter().any(|c| c.len() != n) {
            return Err(LpError::Malformed("objective length differs from column count".into()));
        }
        Ok(())
    }
}

pub fn objective_value(c: &[i64], x: &[BigRational]) -> BigRational {
    c.iter().zip(x).filter(|(ci, _)| **ci != 0).map(|(ci, xi)| xi * BigRational::from_integer(BigInt::from(*ci))).sum()
}

#[derive(Debug)]
struct Overflow;

/// Integer ring used by the fraction-free tableau.
trait Ring: Clone + Sized {
    fn from_big(v: &BigInt) -> Option<Self>;
    fn from_i64(v: i64) -> Self;
    fn to_big(&self) -> BigInt;
    fn sign(&self) -> i32;
    fn eq_val(&self, other: &Self) -> bool;
    /// `(p·a − f·r) / d`, exact.
    fn cross_div(p: &Self, a: &Self, f: &Self, r: &Self, d: &Self) -> Option<Self>;
    /// `a·p / d`, exact.
    fn scale_div(a: &Self, p: &Self, d: &Self) -> Option<Self>;
    /// Compares `a·b` with `c·d`.
    fn cmp_products(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Ordering>;
}

impl Ring for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn sign(&self) -> i32 {
        self.signum() as i32
    }
    fn eq_val(&self, other: &Self) -> bool {
        self == other
    }
    fn cross_div(p: &Self, a: &Self, f: &Self, r: &Self, d: &Self) -> Option<Self> {
        let lhs = p.checked_mul(*a)?;
        let rhs = f.checked_mul(*r)?;
        Some(lhs.checked_sub(rhs)? / d)
    }
    fn scale_div(a: &Self, p: &Self, d: &Self) -> Option<Self> {
        Some(a.checked_mul(*p)? / d)
    }
    fn cmp_products(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Ordering> {
        Some(a.checked_mul(*b)?.cmp(&c.checked_mul(*d)?))
    }
}

impl Ring for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn sign(&self) -> i32 {
        if self.is_positive() {
            1
        } else if self.is_negative() {
            -1
        } else {
            0
        }
    }
    fn eq_val(&self, other: &Self) -> bool {
        self == other
    }
    fn cross_div(p: &Self, a: &Self, f: &Self, r: &Self, d: &Self) -> Option<Self> {
        Some((p * a - f * r) / d)
    }
    fn scale_div(a: &Self, p: &Self, d: &Self) -> Option<Self> {
        Some(a * p / d)
    }
    fn cmp_products(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Ordering> {
        Some((a * b).cmp(&(c * d)))
    }
}

struct Tableau<T> {
    /// constraint rows
    m: usize,
    /// structural columns
    n: usize,
    /// number of user objective rows (rows m..m+k); phase-one row is m+k
    k: usize,
    width: usize,
    data: Vec<T>,
    det: T,
    basis: Vec<usize>,
    redundant: Vec<bool>,
    signs: Vec<i32>,
}

impl<T: Ring> Tableau<T> {
    fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.width + j]
    }

    fn rhs_col(&self) -> usize {
        self.n + self.m
    }

    fn phase_one_row(&self) -> usize {
        self.m + self.k
    }

    /// Sign of the true (determinant-divided) entry.
    fn true_sign(&self, i: usize, j: usize) -> i32 {
        self.at(i, j).sign() * self.det.sign()
    }

    fn build(lp: &EqualityLp, objectives: &[Vec<i64>]) -> Result<(Self, BigInt), Overflow> {
        let m = lp.a.len();
        let n = lp.num_vars();
        let k = objectives.len();
        let width = n + m + 1;
        let rows = m + k + 1;

        let scale = lp.b.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let mut data = Vec::with_capacity(rows * width);
        let mut signs = Vec::with_capacity(m);
        let mut rhs_int = Vec::with_capacity(m);
        for bi in &lp.b {
            let scaled = bi.numer() * (&scale / bi.denom());
            let s = if scaled.is_negative() { -1 } else { 1 };
            signs.push(s);
            rhs_int.push(if s < 0 { -scaled } else { scaled });
        }
        for (i, row) in lp.a.iter().enumerate() {
            for &a in row {
                data.push(T::from_i64(a * signs[i] as i64));
            }
            for j in 0..m {
                data.push(T::from_i64(i64::from(i == j)));
            }
            data.push(T::from_big(&rhs_int[i]).ok_or(Overflow)?);
        }
        for c in objectives {
            for &cj in c {
                data.push(T::from_i64(cj));
            }
            for _ in 0..=m {
                data.push(T::from_i64(0));
            }
        }
        // phase one: minimize the sum of artificials
        for j in 0..n {
            let s: i64 = (0..m).map(|i| lp.a[i][j] * signs[i] as i64).sum();
            data.push(T::from_i64(-s));
        }
        for _ in 0..m {
            data.push(T::from_i64(0));
        }
        let total: BigInt = rhs_int.iter().sum();
        data.push(T::from_big(&(-total)).ok_or(Overflow)?);

        Ok((
            Self {
                m,
                n,
                k,
                width,
                data,
                det: T::from_i64(1),
                basis: (n..n + m).collect(),
                redundant: vec![false; m],
                signs,
            },
            scale,
        ))
    }

    fn pivot(&mut self, r: usize, c: usize) -> Result<(), Overflow> {
        let rows = self.m + self.k + 1;
        let w = self.width;
        let p = self.at(r, c).clone();
        let d = self.det.clone();
        let trivial_scale = p.eq_val(&d);
        let (head, tail) = self.data.split_at_mut(r * w);
        let (prow, rest) = tail.split_at_mut(w);
        let pivot_row: &[T] = prow;
        let update = |row: &mut [T]| -> Result<(), Overflow> {
            let f = row[c].clone();
            if f.sign() == 0 {
                if !trivial_scale {
                    for v in row.iter_mut() {
                        if v.sign() != 0 {
                            *v = T::scale_div(v, &p, &d).ok_or(Overflow)?;
                        }
                    }
                }
            } else {
                for (v, pr) in row.iter_mut().zip(pivot_row) {
                    *v = if pr.sign() == 0 {
                        if trivial_scale || v.sign() == 0 {
                            continue;
                        }
                        T::scale_div(v, &p, &d).ok_or(Overflow)?
                    } else {
                        T::cross_div(&p, v, &f, pr, &d).ok_or(Overflow)?
                    };
                }
            }
            Ok(())
        };
        for row in head.chunks_mut(w) {
            update(row)?;
        }
        for row in rest.chunks_mut(w).take(rows - r - 1) {
            update(row)?;
        }
        self.det = p;
        self.basis[r] = c;
        Ok(())
    }

    /// Bland ratio test on column `c`; `None` means unbounded.
    fn leaving_row(&self, c: usize) -> Result<Option<usize>, Overflow> {
        let rhs = self.rhs_col();
        let mut best: Option<usize> = None;
        for i in 0..self.m {
            if self.redundant[i] || self.true_sign(i, c) <= 0 {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    // rhs_i / a_ic  vs  rhs_b / a_bc ; a_ic and a_bc share a sign
                    let ord = T::cmp_products(self.at(i, rhs), self.at(b, c), self.at(b, rhs), self.at(i, c))
                        .ok_or(Overflow)?;
                    let ord = if self.at(i, c).sign() * self.at(b, c).sign() < 0 { ord.reverse() } else { ord };
                    match ord {
                        Ordering::Less => Some(i),
                        Ordering::Equal if self.basis[i] < self.basis[b] => Some(i),
                        _ => Some(b),
                    }
                }
            };
        }
        Ok(best)
    }

    /// Runs simplex iterations on objective row `obj` over structural columns.
    fn optimize(&mut self, obj: usize, allow_artificial: bool) -> Result<bool, Overflow> {
        let limit = if allow_artificial { self.n + self.m } else { self.n };
        loop {
            let entering = (0..limit).find(|&j| self.true_sign(obj, j) < 0);
            let Some(c) = entering else { return Ok(true) };
            match self.leaving_row(c)? {
                Some(r) => self.pivot(r, c)?,
                None => return Ok(false),
            }
        }
    }

    fn true_value(&self, i: usize, j: usize) -> BigRational {
        BigRational::new(self.at(i, j).to_big(), self.det.to_big())
    }

    fn solution(&self, scale: &BigInt) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.n];
        let denom = self.det.to_big() * scale;
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n && !self.redundant[i] {
                x[b] = BigRational::new(self.at(i, self.rhs_col()).to_big(), denom.clone());
            }
        }
        x
    }
}

fn solve<T: Ring>(lp: &EqualityLp, objectives: &[Vec<i64>]) -> Result<Result<Vec<LpVertex>, LpError>, Overflow> {
    let (mut tab, scale) = Tableau::<T>::build(lp, objectives)?;
    let p1 = tab.phase_one_row();
    tab.optimize(p1, false)?;

    let infeasibility = tab.true_value(p1, tab.rhs_col());
    if infeasibility.is_negative() {
        // phase-one objective value is the negated right-hand side
        let farkas = (0..tab.m)
            .map(|i| {
                let reduced = tab.true_value(p1, tab.n + i);
                (BigRational::one() - reduced) * BigRational::from_integer(BigInt::from(tab.signs[i]))
            })
            .collect();
        return Ok(Err(LpError::Infeasible { farkas }));
    }

    for i in 0..tab.m {
        if tab.basis[i] < tab.n {
            continue;
        }
        match (0..tab.n).find(|&j| tab.at(i, j).sign() != 0) {
            Some(j) => tab.pivot(i, j)?,
            None => tab.redundant[i] = true,
        }
    }

    let mut out = Vec::with_capacity(objectives.len());
    for (k, c) in objectives.iter().enumerate() {
        let mut t = Tableau {
            m: tab.m,
            n: tab.n,
            k: tab.k,
            width: tab.width,
            data: tab.data.clone(),
            det: tab.det.clone(),
            basis: tab.basis.clone(),
            redundant: tab.redundant.clone(),
            signs: tab.signs.clone(),
        };
        if !t.optimize(tab.m + k, false)? {
            return Ok(Err(LpError::Unbounded));
        }
        let x = t.solution(&scale);
        out.push(LpVertex { value: objective_value(c, &x), x });
    }
    Ok(Ok(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn simple_box() {
        // x0 + x1 = 1, minimize x0 - x1
        let lp = EqualityLp::new(vec![vec![1, 1]], vec![r(1, 1)]);
        let (min, max) = lp.extremes(&[1, -1]).unwrap();
        assert_eq!(min.value, r(-1, 1));
        assert_eq!(max.value, r(1, 1));
        assert!(lp.is_feasible(&min.x));
        assert!(lp.is_feasible(&max.x));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let lp = EqualityLp::new(vec![vec![1, 1, 0], vec![0, 0, 1], vec![1, 1, 1]], vec![r(1, 3), r(2, 3), r(1, 1)]);
        let v = lp.minimize(&[-1, 0, 0]).unwrap();
        assert_eq!(v.value, r(-1, 3));
        assert!(lp.is_feasible(&v.x));
    }

    #[test]
    fn infeasible_gives_farkas_certificate() {
        let lp = EqualityLp::new(vec![vec![1, 1], vec![1, 0]], vec![r(1, 2), r(3, 4)]);
        match lp.minimize(&[0, 0]) {
            Err(LpError::Infeasible { farkas }) => assert!(lp.verifies_farkas(&farkas)),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        let lp = EqualityLp::new(vec![vec![-1, 1]], vec![r(-1, 2)]);
        let v = lp.minimize(&[0, 1]).unwrap();
        assert_eq!(v.x, vec![r(1, 2), r(0, 1)]);
        let lp = EqualityLp::new(vec![vec![1, 1]], vec![r(-1, 2)]);
        match lp.minimize(&[0, 0]) {
            Err(LpError::Infeasible { farkas }) => assert!(lp.verifies_farkas(&farkas)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_is_reported() {
        let lp = EqualityLp::new(vec![vec![1, -1]], vec![r(0, 1)]);
        assert_eq!(lp.minimize(&[-1, 0]), Err(LpError::Unbounded));
    }

    #[test]
    fn big_integer_fallback_matches() {
        // huge denominators push i128 past its range
        let big: BigInt = num_traits::pow(BigInt::from(10), 30) + 7;
        let lp = EqualityLp::new(
            vec![vec![1, 1, 0], vec![0, 1, 1]],
            vec![BigRational::new(BigInt::one(), big.clone()), BigRational::new(BigInt::from(2), big.clone() + 2)],
        );
        let v = lp.minimize(&[1, 2, 3]).unwrap();
        assert!(lp.is_feasible(&v.x));
        let b = solve::<BigInt>(&lp, &[vec![1, 2, 3]]).unwrap().unwrap();
        assert_eq!(v, b[0]);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's cycling instance, rows scaled to integers, slacks first.
        let a = vec![vec![4, 0, 0, 1, -32, -4, 36], vec![0, 2, 0, 1, -24, -1, 6], vec![0, 0, 1, 0, 0, 1, 0]];
        let lp = EqualityLp::new(a, vec![r(0, 1), r(0, 1), r(1, 1)]);
        // scaled by 4 to keep integer costs: -3/4 x4 + 20 x5 - 1/2 x6 + 6 x7
        let v = lp.minimize(&[0, 0, 0, -3, 80, -2, 24]).unwrap();
        assert!(lp.is_feasible(&v.x));
        assert_eq!(v.value, r(-5, 1));
    }
}
