//! Sparse multivariate polynomials with exact rational coefficients.
//!
//! A [`MultiPoly`] is a map from exponent vectors to nonzero [`Rat`]
//! coefficients over a fixed, ordered variable universe. Zero coefficients
//! are never stored, so equality and zero tests are exact structural checks.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::rational::{fmt_short, Rat};

/// Ordered variable universe, shared between polynomials.
pub type Vars = Arc<Vec<String>>;

/// Build a variable universe from names.
pub fn vars<S: Into<String>, I: IntoIterator<Item = S>>(names: I) -> Vars {
    Arc::new(names.into_iter().map(Into::into).collect())
}

/// Sparse exact multivariate polynomial.
#[derive(Clone, PartialEq, Eq)]
pub struct MultiPoly {
    vars: Vars,
    terms: BTreeMap<Vec<u16>, Rat>,
}

impl MultiPoly {
    pub fn zero(vars: &Vars) -> Self {
        MultiPoly {
            vars: vars.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &Vars, c: Rat) -> Self {
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(vec![0; vars.len()], c);
        }
        p
    }

    pub fn one(vars: &Vars) -> Self {
        Self::constant(vars, Rat::one())
    }

    /// The variable `name` as a polynomial. Panics when the name is unknown.
    pub fn var(vars: &Vars, name: &str) -> Self {
        let idx = vars
            .iter()
            .position(|v| v == name)
            .unwrap_or_else(|| panic!("unknown variable {name}"));
        let mut exps = vec![0u16; vars.len()];
        exps[idx] = 1;
        let mut p = Self::zero(vars);
        p.terms.insert(exps, Rat::one());
        p
    }

    /// Single term `c * prod vars[i]^exps[i]`.
    pub fn monomial(vars: &Vars, exps: Vec<u16>, c: Rat) -> Self {
        assert_eq!(exps.len(), vars.len(), "exponent vector length mismatch");
        let mut p = Self::zero(vars);
        if !c.is_zero() {
            p.terms.insert(exps, c);
        }
        p
    }

    pub fn vars(&self) -> &Vars {
        &self.vars
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Vec<u16>, &Rat)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when the polynomial is a constant (possibly zero).
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (e, c) = self.terms.iter().next().unwrap();
                e.iter().all(|&x| x == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    fn same_universe(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars,
            "polynomials over different variable universes"
        );
    }

    fn insert_add(&mut self, exps: Vec<u16>, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_universe(other);
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.insert_add(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::zero(&self.vars);
        }
        MultiPoly {
            vars: self.vars.clone(),
            terms: self.terms.iter().map(|(e, k)| (e.clone(), k * c)).collect(),
        }
    }

    /// Exact product.
    pub fn mul(&self, other: &Self) -> Self {
        self.same_universe(other);
        let mut out = Self::zero(&self.vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u16> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.insert_add(exps, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one(&self.vars);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Total degree, or `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&x| x as u32).sum())
            .max()
    }

    /// Degree in one variable, or `None` for the zero polynomial.
    pub fn degree_in(&self, name: &str) -> Option<u32> {
        let idx = self.vars.iter().position(|v| v == name)?;
        self.terms.keys().map(|e| e[idx] as u32).max()
    }

    /// True when every term has total degree `deg`. The zero polynomial is
    /// homogeneous of every degree.
    pub fn is_homogeneous(&self, deg: u32) -> bool {
        self.terms
            .keys()
            .all(|e| e.iter().map(|&x| x as u32).sum::<u32>() == deg)
    }

    /// Coefficient of a full exponent vector.
    pub fn coeff(&self, exps: &[u16]) -> Rat {
        self.terms.get(exps).cloned().unwrap_or_else(Rat::zero)
    }

    /// Keep only the terms for which `pred(exponents)` holds.
    pub fn filter_terms<F: Fn(&[u16]) -> bool>(&self, pred: F) -> Self {
        MultiPoly {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| pred(e))
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Sum of exponents over the variables at positions `idxs`.
    pub fn degree_at(exps: &[u16], idxs: &[usize]) -> u32 {
        idxs.iter().map(|&i| exps[i] as u32).sum()
    }

    /// Variable positions by name; panics if a name is missing.
    pub fn var_indices(&self, names: &[&str]) -> Vec<usize> {
        names
            .iter()
            .map(|n| {
                self.vars
                    .iter()
                    .position(|v| v == n)
                    .unwrap_or_else(|| panic!("unknown variable {n}"))
            })
            .collect()
    }

    /// Exact division: `Some(q)` with `self = q * div` or `None` when the
    /// division does not come out exact. `div` must be nonzero.
    pub fn exact_div(&self, div: &Self) -> Option<Self> {
        self.same_universe(div);
        assert!(!div.is_zero(), "division by zero polynomial");
        let mut rem = self.clone();
        let mut quot = Self::zero(&self.vars);
        let (dlead_e, dlead_c) = div.terms.iter().next_back().unwrap();
        while !rem.is_zero() {
            let (rlead_e, rlead_c) = rem.terms.iter().next_back().unwrap();
            let mut qe = Vec::with_capacity(rlead_e.len());
            for (r, d) in rlead_e.iter().zip(dlead_e) {
                if r < d {
                    return None;
                }
                qe.push(r - d);
            }
            let qc = rlead_c / dlead_c;
            let qt = Self::monomial(&self.vars, qe, qc);
            rem = rem.sub(&qt.mul(div));
            quot = quot.add(&qt);
        }
        Some(quot)
    }
}

impl fmt::Display for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        // Highest terms first reads better for homogeneous output.
        for (exps, c) in self.terms.iter().rev() {
            let mono: Vec<String> = exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        self.vars[i].clone()
                    } else {
                        format!("{}^{}", self.vars[i], e)
                    }
                })
                .collect();
            let cs = fmt_short(c);
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if mono.is_empty() {
                write!(f, "{cs}")?;
            } else if c.is_one() {
                write!(f, "{}", mono.join("*"))?;
            } else {
                write!(f, "({cs})*{}", mono.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Exact polynomial product (same contract as [`MultiPoly::mul`]).
pub fn poly_mul(a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
    a.mul(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_frac};
    use proptest::prelude::*;

    fn xyz() -> Vars {
        vars(["x", "y", "z1"])
    }

    #[test]
    fn monomial_product() {
        let vs = xyz();
        let x = MultiPoly::var(&vs, "x");
        let y = MultiPoly::var(&vs, "y");
        let xy = poly_mul(&x, &y);
        assert_eq!(xy.coeff(&[1, 1, 0]), rat(1));
        assert_eq!(xy.num_terms(), 1);
    }

    #[test]
    fn multiplicative_identity() {
        let vs = xyz();
        // (x+y)/2 + z1
        let p = MultiPoly::var(&vs, "x")
            .add(&MultiPoly::var(&vs, "y"))
            .scale(&rat_frac(1, 2))
            .add(&MultiPoly::var(&vs, "z1"));
        assert_eq!(poly_mul(&p, &MultiPoly::one(&vs)), p);
    }

    #[test]
    fn binomial_square() {
        let vs = xyz();
        let s = MultiPoly::var(&vs, "x").add(&MultiPoly::var(&vs, "y"));
        let sq = poly_mul(&s, &s);
        assert_eq!(sq.coeff(&[2, 0, 0]), rat(1));
        assert_eq!(sq.coeff(&[1, 1, 0]), rat(2));
        assert_eq!(sq.coeff(&[0, 2, 0]), rat(1));
        assert_eq!(sq.num_terms(), 3);
    }

    #[test]
    fn exact_division() {
        let vs = xyz();
        let x = MultiPoly::var(&vs, "x");
        let y = MultiPoly::var(&vs, "y");
        let p = x.add(&y);
        let q = x.sub(&y);
        let prod = p.mul(&q);
        assert_eq!(prod.exact_div(&p).unwrap(), q);
        // x^2 + y^2 is not divisible by x + y
        let sq = x.mul(&x).add(&y.mul(&y));
        assert!(sq.exact_div(&p).is_none());
    }

    fn arb_poly(vs: Vars) -> impl Strategy<Value = MultiPoly> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0u16..3, vs.len()),
                -20i64..20,
                1i64..6,
            ),
            0..6,
        )
        .prop_map(move |terms| {
            let mut p = MultiPoly::zero(&vs);
            for (e, num, den) in terms {
                p = p.add(&MultiPoly::monomial(&vs, e, rat_frac(num, den)));
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mul_distributes(a in arb_poly(xyz()), b in arb_poly(xyz()), c in arb_poly(xyz())) {
            prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        }

        // Homogeneous inputs give homogeneous output of summed degree.
        #[test]
        fn homogeneous_products(a in arb_poly(xyz()), b in arb_poly(xyz())) {
            let da = a.total_degree().unwrap_or(0);
            let db = b.total_degree().unwrap_or(0);
            let ha = a.filter_terms(|e| e.iter().map(|&x| x as u32).sum::<u32>() == da);
            let hb = b.filter_terms(|e| e.iter().map(|&x| x as u32).sum::<u32>() == db);
            prop_assert!(ha.mul(&hb).is_homogeneous(da + db));
        }

        #[test]
        fn exact_div_round_trip(a in arb_poly(xyz()), b in arb_poly(xyz())) {
            if !b.is_zero() {
                let prod = a.mul(&b);
                prop_assert_eq!(prod.exact_div(&b).unwrap(), a);
            }
        }
    }
}
