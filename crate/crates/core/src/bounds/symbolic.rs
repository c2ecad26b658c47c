use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::{rational_string, BoundsError};
use crate::data::{Cell, Estimand, ObservedDistribution, Scenario};
use crate::polyhedra::{self, PolyError};
use crate::response::ConstraintSystem;

/// Cell coordinates for symbolic terms. Within each instrument level the cell
/// `(last exposure level, y=1)` is eliminated through `Σ_{x,y} p_{xy·z} = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservableBasis {
    pub instrument_arity: usize,
    pub levels: Vec<String>,
}

impl ObservableBasis {
    pub fn new(instrument_arity: usize, levels: Vec<String>) -> Self {
        Self { instrument_arity, levels }
    }

    pub fn of_system(system: &ConstraintSystem) -> Self {
        Self::new(system.instrument_arity, system.levels.clone())
    }

    pub fn of_distribution(dist: &ObservedDistribution) -> Self {
        Self::new(dist.num_instruments(), dist.exposure_levels().to_vec())
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn full_len(&self) -> usize {
        self.instrument_arity * self.num_levels() * 2
    }

    pub fn full_index(&self, z: usize, x: usize, y: u8) -> usize {
        (z * self.num_levels() + x) * 2 + y as usize
    }

    pub fn full_cell(&self, i: usize) -> Cell {
        let kx = self.num_levels();
        Cell { z: i / (2 * kx), x: (i / 2) % kx, y: (i % 2) as u8 }
    }

    fn is_dropped(&self, i: usize) -> bool {
        let c = self.full_cell(i);
        c.x + 1 == self.num_levels() && c.y == 1
    }

    pub fn reduced_len(&self) -> usize {
        self.instrument_arity * (2 * self.num_levels() - 1)
    }

    /// Full index of each reduced coordinate.
    pub fn reduced_cells(&self) -> Vec<usize> {
        (0..self.full_len()).filter(|&i| !self.is_dropped(i)).collect()
    }

    pub fn level_index(&self, label: &str) -> Result<usize, BoundsError> {
        self.levels.iter().position(|l| l == label).ok_or_else(|| BoundsError::UnknownLevel(label.to_string()))
    }

    /// Rewrites `constant + Σ full[i] p_i` in reduced coordinates.
    pub fn canonical(&self, mut constant: BigRational, mut full: Vec<BigRational>) -> AffineTerm {
        let kx = self.num_levels();
        for z in 0..self.instrument_arity {
            let d = self.full_index(z, kx - 1, 1);
            let c = std::mem::replace(&mut full[d], BigRational::zero());
            if !c.is_zero() {
                constant += &c;
                let start = self.full_index(z, 0, 0);
                for (i, v) in full.iter_mut().enumerate().skip(start).take(2 * kx) {
                    if i != d {
                        *v -= &c;
                    }
                }
            }
        }
        let coeffs = self.reduced_cells().into_iter().map(|i| full[i].clone()).collect();
        AffineTerm { constant, coeffs }
    }

    /// Full-cell coefficients of `term` with the eliminated cells at zero.
    pub fn expand(&self, term: &AffineTerm) -> Vec<BigRational> {
        let mut full = vec![BigRational::zero(); self.full_len()];
        for (i, c) in self.reduced_cells().into_iter().zip(&term.coeffs) {
            full[i] = c.clone();
        }
        full
    }

    pub fn reduced_probabilities(&self, dist: &ObservedDistribution) -> Result<Vec<BigRational>, BoundsError> {
        if dist.num_instruments() != self.instrument_arity || dist.exposure_levels() != self.levels.as_slice() {
            return Err(BoundsError::Mismatch(format!(
                "term basis [{}] does not match data levels [{}]",
                self.levels.join(", "),
                dist.exposure_levels().join(", ")
            )));
        }
        let p = dist.probabilities();
        Ok(self.reduced_cells().into_iter().map(|i| p[i].clone()).collect())
    }
}

/// `constant + Σ coeffs[i] p_i` over the reduced basis.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AffineTerm {
    pub constant: BigRational,
    pub coeffs: Vec<BigRational>,
}

impl AffineTerm {
    pub fn evaluate(&self, p: &[BigRational]) -> BigRational {
        self.coeffs
            .iter()
            .zip(p)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, v)| c * v)
            .fold(self.constant.clone(), |a, b| a + b)
    }

    fn negated(&self) -> Self {
        Self { constant: -&self.constant, coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// maximum of the terms
    Lower,
    /// minimum of the terms
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Derived,
    Transcribed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicBoundSet {
    pub direction: Direction,
    pub basis: ObservableBasis,
    /// sorted, duplicate-free
    pub terms: Vec<AffineTerm>,
    pub provenance: Provenance,
}

impl SymbolicBoundSet {
    pub fn new(
        direction: Direction,
        basis: ObservableBasis,
        mut terms: Vec<AffineTerm>,
        provenance: Provenance,
    ) -> Self {
        terms.sort();
        terms.dedup();
        Self { direction, basis, terms, provenance }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, dist: &ObservedDistribution) -> Result<BigRational, BoundsError> {
        let p = self.basis.reduced_probabilities(dist)?;
        self.evaluate_reduced(&p)
    }

    pub fn evaluate_reduced(&self, p: &[BigRational]) -> Result<BigRational, BoundsError> {
        let values = self.terms.iter().map(|t| t.evaluate(p));
        match self.direction {
            Direction::Lower => values.max(),
            Direction::Upper => values.min(),
        }
        .ok_or_else(|| BoundsError::Internal("empty term set".into()))
    }

    /// One line per term, in `p_{xy·z}` notation with `names` standing in for
    /// the level labels.
    pub fn render(&self, names: &[String], latex: bool) -> String {
        let mut out = String::new();
        let head = match (self.direction, latex) {
            (Direction::Lower, false) => "max {",
            (Direction::Upper, false) => "min {",
            (Direction::Lower, true) => "\\max \\left\\{ \\begin{array}{l}",
            (Direction::Upper, true) => "\\min \\left\\{ \\begin{array}{l}",
        };
        out.push_str(head);
        out.push('\n');
        let n = self.terms.len();
        for (i, t) in self.terms.iter().enumerate() {
            let sep = if i + 1 == n {
                ""
            } else if latex {
                ", \\\\"
            } else {
                ","
            };
            let _ = writeln!(out, "  {}{sep}", render_term(t, &self.basis, names, self.direction, latex));
        }
        out.push_str(if latex { "\\end{array} \\right\\}" } else { "}" });
        out
    }
}

/// Display form: per instrument level, the representation with the fewest
/// nonzero coefficients.
pub fn render_term(
    term: &AffineTerm,
    basis: &ObservableBasis,
    names: &[String],
    direction: Direction,
    latex: bool,
) -> String {
    let kx = basis.num_levels();
    let mut full = basis.expand(term);
    let mut constant = term.constant.clone();
    let unwanted = |c: &BigRational| match direction {
        Direction::Lower => c.is_negative(),
        Direction::Upper => c.is_positive(),
    };
    for z in 0..basis.instrument_arity {
        let range = basis.full_index(z, 0, 0)..basis.full_index(z, 0, 0) + 2 * kx;
        let block: Vec<BigRational> = full[range.clone()].to_vec();
        let mut shifts: Vec<BigRational> = vec![BigRational::zero()];
        shifts.extend(block.iter().map(|c| -c));
        let best = shifts
            .into_iter()
            .min_by_key(|s| {
                let shifted: Vec<BigRational> = block.iter().map(|c| c + s).collect();
                let nonzero = shifted.iter().filter(|c| !c.is_zero()).count();
                let bad = shifted.iter().filter(|c| unwanted(c)).count();
                (nonzero, bad, s.abs())
            })
            .expect("nonempty");
        for i in range {
            full[i] += &best;
        }
        constant -= &best;
    }
    let mut parts: Vec<(bool, String)> = Vec::new();
    if !constant.is_zero() {
        parts.push((constant.is_negative(), rational_string(&constant.abs())));
    }
    for (i, c) in full.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let cell = basis.full_cell(i);
        let name = &names[cell.x];
        let sym = if latex {
            format!("p_{{{name}{}\\cdot {}}}", cell.y, cell.z)
        } else {
            format!("p_{{{name}{}·{}}}", cell.y, cell.z)
        };
        let mag = c.abs();
        let text = if mag.is_one() { sym } else { format!("{}{sym}", rational_string(&mag)) };
        parts.push((c.is_negative(), text));
    }
    if parts.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (k, (neg, text)) in parts.into_iter().enumerate() {
        match (k, neg) {
            (0, true) => s.push('-'),
            (0, false) => {}
            (_, true) => s.push_str(" - "),
            (_, false) => s.push_str(" + "),
        }
        s.push_str(&text);
    }
    s
}

/// Conventional level symbols: the reference level is `x`, the treated level
/// `x'`, other clean levels `x''`, `x'''`, …, instrument-dependent levels `x^m`.
pub fn symbol_names(scenario: &Scenario, latex: bool) -> Vec<String> {
    let (first, second) = match &scenario.estimand {
        Estimand::CounterfactualRisk { level } => (level.clone(), None),
        Estimand::RiskDifference { treated, reference } => (reference.clone(), Some(treated.clone())),
    };
    let mut primes = if second.is_some() { 2 } else { 1 };
    let zdep = scenario.levels.iter().filter(|l| l.z_dependent).count();
    let mut m_seen = 0;
    scenario
        .levels
        .iter()
        .map(|l| {
            if l.label == first {
                "x".to_string()
            } else if Some(&l.label) == second.as_ref() {
                "x'".to_string()
            } else if l.z_dependent {
                m_seen += 1;
                let tag = if zdep > 1 { format!("m{m_seen}") } else { "m".into() };
                if latex {
                    format!("x^{{{tag}}}")
                } else {
                    format!("x^{tag}")
                }
            } else {
                let s = format!("x{}", "'".repeat(primes));
                primes += 1;
                s
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeriveCaps {
    pub max_vars: usize,
    pub max_dual_dim: usize,
    pub max_rays: usize,
}

impl Default for DeriveCaps {
    fn default() -> Self {
        Self { max_vars: 4096, max_dual_dim: 30, max_rays: 2_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicBounds {
    pub lower: SymbolicBoundSet,
    pub upper: SymbolicBoundSet,
    /// Terms that are `≤ 0` at every distribution the model can produce.
    pub constraints: Vec<AffineTerm>,
}

/// Tight symbolic bounds from the vertices of the dual polyhedron
/// `{(λ, μ) : Aᵀλ + μ ≤ c}` in the reduced basis. Each vertex gives the term
/// `λ·p + μ`; the upper bound uses the dual for `−c`. Extreme rays of the
/// same polyhedron are the inequalities the data must satisfy.
pub fn derive_symbolic(system: &ConstraintSystem, caps: DeriveCaps) -> Result<SymbolicBounds, BoundsError> {
    let basis = ObservableBasis::of_system(system);
    let d = basis.reduced_len() + 1;
    if system.num_vars() > caps.max_vars {
        return Err(BoundsError::CapExceeded(format!(
            "{} response-type variables exceed the cap of {}",
            system.num_vars(),
            caps.max_vars
        )));
    }
    if d > caps.max_dual_dim {
        return Err(BoundsError::CapExceeded(format!("dual dimension {d} exceeds the cap of {}", caps.max_dual_dim)));
    }
    let mut reduced_pos = vec![None; basis.full_len()];
    for (k, i) in basis.reduced_cells().into_iter().enumerate() {
        reduced_pos[i] = Some(k);
    }

    // cell pattern → (min cost, max cost)
    let mut patterns: BTreeMap<Vec<usize>, (i64, i64)> = BTreeMap::new();
    for v in 0..system.num_vars() {
        let sig: Vec<usize> = (0..system.instrument_arity).map(|z| system.cell_index(system.cell_of(v, z))).collect();
        let c = system.objective[v] as i64;
        patterns
            .entry(sig)
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(c);
                *hi = (*hi).max(c);
            })
            .or_insert((c, c));
    }
    let rows: Vec<Vec<BigInt>> = patterns
        .keys()
        .map(|sig| {
            let mut a = vec![BigInt::zero(); d];
            for &cell in sig {
                if let Some(k) = reduced_pos[cell] {
                    a[k] = BigInt::one();
                }
            }
            a[d - 1] = BigInt::one();
            a
        })
        .collect();
    let lower_rhs: Vec<BigInt> = patterns.values().map(|(lo, _)| BigInt::from(*lo)).collect();
    let upper_rhs: Vec<BigInt> = patterns.values().map(|(_, hi)| BigInt::from(-*hi)).collect();

    let run = |rhs: &[BigInt]| {
        polyhedra::enumerate(&rows, rhs, caps.max_rays).map_err(|e| match e {
            PolyError::TooManyRays(n) => BoundsError::CapExceeded(format!("more than {n} intermediate rays")),
            other => BoundsError::Internal(other.to_string()),
        })
    };
    let split = |v: &[BigRational]| AffineTerm { constant: v[d - 1].clone(), coeffs: v[..d - 1].to_vec() };

    let lo = run(&lower_rhs)?;
    let hi = run(&upper_rhs)?;
    let lower = lo.vertices.iter().map(|v| split(v)).collect();
    let upper = hi.vertices.iter().map(|v| split(v).negated()).collect();
    let mut constraints: Vec<AffineTerm> = lo
        .rays
        .iter()
        .map(|r| {
            let v: Vec<BigRational> = r.iter().map(|x| BigRational::from_integer(x.clone())).collect();
            split(&v)
        })
        .collect();
    constraints.sort();
    Ok(SymbolicBounds {
        lower: SymbolicBoundSet::new(Direction::Lower, basis.clone(), lower, Provenance::Derived),
        upper: SymbolicBoundSet::new(Direction::Upper, basis, upper, Provenance::Derived),
        constraints,
    })
}

/// True iff both sets hold the same canonical terms.
pub fn term_sets_equal(a: &SymbolicBoundSet, b: &SymbolicBoundSet) -> Result<bool, BoundsError> {
    if a.basis != b.basis {
        return Err(BoundsError::Mismatch(format!(
            "term sets are over different bases: [{}] vs [{}]",
            a.basis.levels.join(", "),
            b.basis.levels.join(", ")
        )));
    }
    if a.direction != b.direction {
        return Err(BoundsError::Mismatch("term sets bound from different sides".into()));
    }
    Ok(a.terms == b.terms)
}

/// Re-expresses every term over a basis with fewer exposure levels. A level
/// can be dropped from a term when, within each instrument level, both of its
/// cells carry the same coefficient; that coefficient is then absorbed through
/// `Σ_{x,y} p_{xy·z} = 1`.
pub fn restrict(set: &SymbolicBoundSet, target: &ObservableBasis) -> Result<SymbolicBoundSet, BoundsError> {
    let src = &set.basis;
    if src.instrument_arity != target.instrument_arity {
        return Err(BoundsError::Mismatch("instrument arity differs".into()));
    }
    let keep: Vec<usize> = target.levels.iter().map(|l| src.level_index(l)).collect::<Result<_, _>>()?;
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BoundsError::Mismatch("target levels must keep the source order".into()));
    }
    let removed: Vec<usize> = (0..src.num_levels()).filter(|x| !keep.contains(x)).collect();
    let mut terms = Vec::with_capacity(set.terms.len());
    for term in &set.terms {
        let mut full = src.expand(term);
        let mut constant = term.constant.clone();
        for z in 0..src.instrument_arity {
            let Some(&first) = removed.first() else { break };
            let c = full[src.full_index(z, first, 0)].clone();
            for &x in &removed {
                for y in 0..2u8 {
                    if full[src.full_index(z, x, y)] != c {
                        return Err(BoundsError::NotRestrictable(src.levels[x].clone()));
                    }
                }
            }
            if !c.is_zero() {
                constant += &c;
                for x in 0..src.num_levels() {
                    for y in 0..2u8 {
                        full[src.full_index(z, x, y)] -= &c;
                    }
                }
            }
        }
        let mut tfull = vec![BigRational::zero(); target.full_len()];
        for z in 0..src.instrument_arity {
            for (tx, &sx) in keep.iter().enumerate() {
                for y in 0..2u8 {
                    tfull[target.full_index(z, tx, y)] = full[src.full_index(z, sx, y)].clone();
                }
            }
        }
        terms.push(target.canonical(constant, tfull));
    }
    Ok(SymbolicBoundSet::new(set.direction, target.clone(), terms, set.provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ExposureLevel;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn basis2() -> ObservableBasis {
        ObservableBasis::new(2, vec!["x".into(), "x'".into()])
    }

    #[test]
    fn canonical_form_eliminates_last_cell() {
        let b = basis2();
        // 1 - p_{x'0·0} - p_{x'1·0} - p_{x0·0}  ==  p_{x1·0}
        let mut full = vec![q(0); 8];
        full[b.full_index(0, 1, 0)] = q(-1);
        full[b.full_index(0, 1, 1)] = q(-1);
        full[b.full_index(0, 0, 0)] = q(-1);
        let t = b.canonical(q(1), full);
        let mut want = vec![q(0); 8];
        want[b.full_index(0, 0, 1)] = q(1);
        assert_eq!(t, b.canonical(q(0), want));
        assert_eq!(t.constant, q(0));
        assert_eq!(t.coeffs.len(), b.reduced_len());
    }

    #[test]
    fn binary_classic_derivation_has_eight_terms_each() {
        let s = Scenario::new(
            2,
            vec![ExposureLevel::clean("x"), ExposureLevel::clean("x'")],
            Estimand::difference("x'", "x"),
        )
        .unwrap();
        let sys = ConstraintSystem::build(&s).unwrap();
        let r = derive_symbolic(&sys, DeriveCaps::default()).unwrap();
        assert_eq!(r.lower.len(), 8);
        assert_eq!(r.upper.len(), 8);
        let names = symbol_names(&s, false);
        let text = r.lower.render(&names, false);
        assert!(text.contains("p_{x0·1} + p_{x'1·1}"), "{text}");
    }

    #[test]
    fn caps_are_enforced() {
        let s = Scenario::new(
            3,
            vec![ExposureLevel::clean("a"), ExposureLevel::clean("b"), ExposureLevel::clean("c")],
            Estimand::difference("a", "b"),
        )
        .unwrap();
        let sys = ConstraintSystem::build(&s).unwrap();
        let caps = DeriveCaps { max_dual_dim: 10, ..DeriveCaps::default() };
        assert!(matches!(derive_symbolic(&sys, caps), Err(BoundsError::CapExceeded(_))));
        let caps = DeriveCaps { max_vars: 10, ..DeriveCaps::default() };
        assert!(matches!(derive_symbolic(&sys, caps), Err(BoundsError::CapExceeded(_))));
    }

    #[test]
    fn restriction_drops_uniform_levels() {
        let big = ObservableBasis::new(2, vec!["x".into(), "x'".into(), "m".into()]);
        // -1 + p_{x0·1} + p_{x'1·1}: m cells carry 0 in this form
        let mut full = vec![q(0); big.full_len()];
        full[big.full_index(1, 0, 0)] = q(1);
        full[big.full_index(1, 1, 1)] = q(1);
        let t = big.canonical(q(-1), full.clone());
        let set = SymbolicBoundSet::new(Direction::Lower, big.clone(), vec![t], Provenance::Transcribed);
        let small = restrict(&set, &basis2()).unwrap();
        let mut sfull = vec![q(0); 8];
        sfull[basis2().full_index(1, 0, 0)] = q(1);
        sfull[basis2().full_index(1, 1, 1)] = q(1);
        assert_eq!(small.terms, vec![basis2().canonical(q(-1), sfull)]);

        full[big.full_index(0, 2, 0)] = q(1);
        let t = big.canonical(q(-1), full);
        let set = SymbolicBoundSet::new(Direction::Lower, big, vec![t], Provenance::Transcribed);
        assert!(matches!(restrict(&set, &basis2()), Err(BoundsError::NotRestrictable(_))));
    }

    #[test]
    fn comparing_across_bases_is_an_error() {
        let a = SymbolicBoundSet::new(Direction::Lower, basis2(), vec![], Provenance::Derived);
        let b = SymbolicBoundSet::new(
            Direction::Lower,
            ObservableBasis::new(2, vec!["x'".into(), "x".into()]),
            vec![],
            Provenance::Derived,
        );
        assert!(term_sets_equal(&a, &b).is_err());
        assert!(term_sets_equal(&a, &a).unwrap());
    }

    #[test]
    fn symbol_style_names() {
        let s = Scenario::new(
            2,
            vec![
                ExposureLevel::clean("lo"),
                ExposureLevel::ill_defining("mid"),
                ExposureLevel::clean("hi"),
                ExposureLevel::clean("top"),
            ],
            Estimand::difference("hi", "lo"),
        )
        .unwrap();
        assert_eq!(symbol_names(&s, false), vec!["x", "x^m", "x'", "x''"]);
        assert_eq!(symbol_names(&s, true)[1], "x^{m}");
    }
}
