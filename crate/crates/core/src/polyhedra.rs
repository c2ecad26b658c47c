//! Vertex and extreme-ray enumeration for `{y : A y ≤ b}` by the double
//! description method, in exact integer arithmetic.
//!
//! The polyhedron is homogenized to the cone `{(y, t) : A y − b t ≤ 0, t ≥ 0}`.
//! Starting from a simplicial cone cut out by `D` linearly independent rows,
//! the remaining rows are added one at a time; rays on the infeasible side are
//! replaced by combinations of adjacent pairs straddling the new hyperplane.
//! Adjacency uses the combinatorial test on zero sets.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("inequality system has rank {rank} but dimension {dim}; the polyhedron has a lineality space")]
    NotPointed { rank: usize, dim: usize },
    #[error("ray count exceeded the cap of {0}")]
    TooManyRays(usize),
    #[error("rows have inconsistent lengths")]
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generators {
    pub vertices: Vec<Vec<BigRational>>,
    /// recession directions, primitive integer vectors
    pub rays: Vec<Vec<BigInt>>,
}

#[derive(Clone)]
struct Ray {
    coords: Vec<BigInt>,
    zeros: Vec<u64>,
}

fn bit_set(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).filter(|(x, _)| !x.is_zero()).map(|(x, y)| x * y).sum()
}

fn primitive(mut v: Vec<BigInt>) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in v.iter_mut() {
            *x /= &g;
        }
    }
    v
}

/// Indices of a maximal linearly independent subset of `rows`, greedily in order.
fn independent_rows(rows: &[Vec<BigInt>], dim: usize) -> Vec<usize> {
    let mut basis: Vec<(usize, Vec<BigRational>)> = Vec::new(); // (pivot column, reduced row)
    let mut picked = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut r: Vec<BigRational> = row.iter().map(|v| BigRational::from_integer(v.clone())).collect();
        for (pc, b) in &basis {
            if !r[*pc].is_zero() {
                let f = r[*pc].clone() / &b[*pc];
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= &f * y;
                }
            }
        }
        if let Some(pc) = r.iter().position(|x| !x.is_zero()) {
            basis.push((pc, r));
            picked.push(i);
            if picked.len() == dim {
                break;
            }
        }
    }
    picked
}

/// Inverse of a square integer matrix over the rationals.
fn inverse(m: &[Vec<BigInt>]) -> Vec<Vec<BigRational>> {
    let n = m.len();
    let mut a: Vec<Vec<BigRational>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r: Vec<BigRational> = row.iter().map(|v| BigRational::from_integer(v.clone())).collect();
            r.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero()).expect("nonsingular");
        a.swap(c, p);
        let inv = BigRational::one() / &a[c][c];
        for x in a[c].iter_mut() {
            *x *= &inv;
        }
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot) {
                    *x -= &f * y;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n..].to_vec()).collect()
}

/// Enumerates vertices and extreme rays of `{y : a·y ≤ b}`.
pub fn enumerate(a: &[Vec<BigInt>], b: &[BigInt], max_rays: usize) -> Result<Generators, PolyError> {
    let d = a.first().map_or(0, Vec::len);
    if a.len() != b.len() || a.iter().any(|r| r.len() != d) {
        return Err(PolyError::Malformed);
    }
    let dim = d + 1;
    let mut h: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(-bi);
            r
        })
        .collect();
    let mut t_row = vec![BigInt::zero(); dim];
    t_row[d] = -BigInt::one();
    h.push(t_row);
    let m = h.len();
    let words = m.div_ceil(64);

    let init = independent_rows(&h, dim);
    if init.len() < dim {
        return Err(PolyError::NotPointed { rank: init.len(), dim });
    }
    let h0: Vec<Vec<BigInt>> = init.iter().map(|&i| h[i].clone()).collect();
    let inv = inverse(&h0);

    let mut processed = vec![false; m];
    for &i in &init {
        processed[i] = true;
    }
    let mut rays: Vec<Ray> = (0..dim)
        .map(|col| {
            // −H0⁻¹ e_col, scaled to a primitive integer vector
            let v: Vec<BigRational> = (0..dim).map(|r| -inv[r][col].clone()).collect();
            let l = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
            let coords = primitive(v.iter().map(|x| (x * BigRational::from_integer(l.clone())).to_integer()).collect());
            let mut zeros = vec![0u64; words];
            for (k, &row) in init.iter().enumerate() {
                if k != col {
                    bit_set(&mut zeros, row);
                }
            }
            Ray { coords, zeros }
        })
        .collect();

    for k in 0..m {
        if processed[k] {
            continue;
        }
        let row = &h[k];
        let vals: Vec<BigInt> = rays.iter().map(|r| dot(row, &r.coords)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_positive()).collect();
        if pos.is_empty() {
            for (r, v) in rays.iter_mut().zip(&vals) {
                if v.is_zero() {
                    bit_set(&mut r.zeros, k);
                }
            }
            processed[k] = true;
            continue;
        }
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_negative()).collect();

        let mut fresh: Vec<Ray> = Vec::new();
        for &ip in &pos {
            for &ineg in &neg {
                let common: Vec<u64> = rays[ip].zeros.iter().zip(&rays[ineg].zeros).map(|(x, y)| x & y).collect();
                let support: u32 = common.iter().map(|w| w.count_ones()).sum();
                if (support as usize) + 2 < dim {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(i, r)| i == ip || i == ineg || common.iter().zip(&r.zeros).any(|(c, z)| c & !z != 0));
                if !adjacent {
                    continue;
                }
                let coords: Vec<BigInt> = rays[ineg]
                    .coords
                    .iter()
                    .zip(&rays[ip].coords)
                    .map(|(rn, rp)| &vals[ip] * rn - &vals[ineg] * rp)
                    .collect();
                let mut zeros = common;
                bit_set(&mut zeros, k);
                fresh.push(Ray { coords: primitive(coords), zeros });
            }
        }

        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() - pos.len() + fresh.len());
        for (i, mut r) in rays.into_iter().enumerate() {
            if vals[i].is_positive() {
                continue;
            }
            if vals[i].is_zero() {
                bit_set(&mut r.zeros, k);
            }
            next.push(r);
        }
        next.extend(fresh);
        if next.len() > max_rays {
            return Err(PolyError::TooManyRays(max_rays));
        }
        rays = next;
        processed[k] = true;
    }

    let mut vertices = Vec::new();
    let mut recession = Vec::new();
    for r in rays {
        let t = r.coords[d].clone();
        if t.is_zero() {
            recession.push(r.coords[..d].to_vec());
        } else {
            vertices.push(r.coords[..d].iter().map(|c| BigRational::new(c.clone(), t.clone())).collect());
        }
    }
    Ok(Generators { vertices, rays: recession })
}
