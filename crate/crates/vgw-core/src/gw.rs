//! Virtual Gromov-Witten invariants by exact WDVV reconstruction.
//!
//! The correlators `v(O_{e^{a_1}} .. O_{e^{a_n}})_d` are pinned down by
//! five conditions: degree-zero initial values `k * delta_{a+b+c, N-2}`,
//! the flat-metric condition (an `O_{e^0}` insertion kills every positive
//! degree), the topological selection rule, the Kähler (divisor) equation
//! `v(O_e X)_d = d v(X)_d`, and the associativity (WDVV) system. The
//! degree-`d` two-point values are seeded from the virtual structure
//! constants; everything else is reconstructed by exact linear elimination
//! over the WDVV instances.
//!
//! The fast path solves one instance per query: for a target with smallest
//! exponent `a`, the instance with corners `(1, a-1, a', a'')` (the two
//! largest exponents as the far corners) exposes the target with
//! coefficient `k` and otherwise references only keys that are strictly
//! smaller in the well-founded order (degree, then insertion count, then
//! largest exponent moving up until it leaves the range). A cycle in that
//! order would indicate a bug; if one is ever detected the solver falls
//! back to full Gaussian elimination over the offending class
//! ([`CorrelatorStore::solve_class`]), which also serves as an independent
//! cross-check in the tests.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_traits::{One, Zero};

use crate::rational::{rat, Rat};
use crate::recursion::{
    virtual_constants_default, ConstantsTable, HypersurfaceParams, TableKind,
};
use crate::{Error, Result};

/// Canonical correlator key: degree plus the sorted (non-increasing)
/// multiset of insertion exponents, so permutation-equal correlators share
/// one entry.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct CorrelatorKey {
    pub degree: i64,
    pub exps: Vec<i64>,
}

impl CorrelatorKey {
    pub fn new(degree: i64, mut exps: Vec<i64>) -> Self {
        exps.sort_unstable_by(|a, b| b.cmp(a));
        CorrelatorKey { degree, exps }
    }

    fn arity(&self) -> usize {
        self.exps.len()
    }
}

impl fmt::Display for CorrelatorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e: Vec<String> = self.exps.iter().map(|x| x.to_string()).collect();
        write!(f, "v(e^[{}])_{}", e.join(","), self.degree)
    }
}

/// How a stored value was obtained.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KeyStatus {
    Seeded,
    Reconstructed,
    Pending,
}

/// Outcome of [`CorrelatorStore::normalize`].
#[derive(Clone, Debug)]
pub enum Normalized {
    /// The value is zero outright (range, flat metric, or selection rule).
    Zero,
    /// Degree-zero correlator with its closed value.
    DegreeZero(Rat),
    /// `value(original) = factor * value(base)` with `base` free of
    /// exponent-0/1 insertions.
    Base { factor: Rat, base: CorrelatorKey },
}

/// Memoized correlator store for one `(N, k)`.
pub struct CorrelatorStore {
    params: HypersurfaceParams,
    d_max: i64,
    table: ConstantsTable,
    values: HashMap<CorrelatorKey, (Rat, KeyStatus)>,
    pending: HashSet<CorrelatorKey>,
}

impl CorrelatorStore {
    /// Build the store and seed every degree up to `d_max` from a fresh
    /// virtual table.
    pub fn new(params: HypersurfaceParams, d_max: i64) -> Result<Self> {
        let table = virtual_constants_default(params, d_max.max(1))?;
        Self::with_table(table, d_max)
    }

    /// Build over an existing virtual table (it must cover `d_max`).
    pub fn with_table(table: ConstantsTable, d_max: i64) -> Result<Self> {
        if table.kind() != TableKind::Virtual {
            return Err(Error::InvalidParams(
                "correlator store must be seeded from a virtual table".into(),
            ));
        }
        if table.d_max() < d_max {
            return Err(Error::InvalidParams(format!(
                "seed table holds degrees up to {}, need {d_max}",
                table.d_max()
            )));
        }
        let mut store = CorrelatorStore {
            params: table.params(),
            d_max,
            table,
            values: HashMap::new(),
            pending: HashSet::new(),
        };
        for d in 1..=d_max {
            store.seed(d)?;
        }
        Ok(store)
    }

    pub fn params(&self) -> HypersurfaceParams {
        self.params
    }

    pub fn d_max(&self) -> i64 {
        self.d_max
    }

    /// The seed table of virtual structure constants.
    pub fn table(&self) -> &ConstantsTable {
        &self.table
    }

    pub fn status(&self, key: &CorrelatorKey) -> Option<KeyStatus> {
        if self.pending.contains(key) {
            return Some(KeyStatus::Pending);
        }
        self.values.get(key).map(|(_, s)| *s)
    }

    /// Stored `(key, value, status)` triples in canonical order.
    pub fn entries(&self) -> Vec<(CorrelatorKey, Rat, KeyStatus)> {
        let mut out: Vec<_> = self
            .values
            .iter()
            .map(|(k, (v, s))| (k.clone(), v.clone(), *s))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Load a previously computed value (e.g. from a cache file). The key
    /// is validated against the selection rule and exponent range before
    /// being accepted.
    pub fn insert_cached(&mut self, key: CorrelatorKey, value: Rat) -> Result<()> {
        let (n, k) = (self.params.n, self.params.k);
        if key.degree < 1 || key.degree > self.d_max {
            return Err(Error::InvalidParams(format!(
                "cached key {key} has degree outside 1..={}",
                self.d_max
            )));
        }
        if key.exps.iter().any(|&e| !(2..=n - 2).contains(&e)) {
            return Err(Error::InvalidParams(format!(
                "cached key {key} has insertions outside 2..{}",
                n - 2
            )));
        }
        let mass: i64 = key.exps.iter().map(|e| e - 1).sum();
        if mass != (n - 5) + (n - k) * key.degree {
            return Err(Error::InvalidParams(format!(
                "cached key {key} violates the selection rule"
            )));
        }
        if let Some((old, _)) = self.values.get(&key) {
            if *old != value {
                return Err(Error::Inconsistent(key.to_string()));
            }
            return Ok(());
        }
        self.values.insert(key, (value, KeyStatus::Reconstructed));
        Ok(())
    }

    /// Selection rule (axiom iii): a nonzero correlator needs
    /// `(N-5) + (N-k) d = sum (a_j - 1)`.
    pub fn selection_ok(&self, degree: i64, exps: &[i64]) -> bool {
        let (n, k) = (self.params.n, self.params.k);
        let mass: i64 = exps.iter().map(|e| e - 1).sum();
        mass == (n - 5) + (n - k) * degree
    }

    /// Reduce a key by the flat-metric and Kähler conditions.
    pub fn normalize(&self, degree: i64, exps: &[i64]) -> Normalized {
        let n = self.params.n;
        if degree == 0 {
            // Degree zero is closed-form: k on balanced 3-point keys with
            // in-range insertions, zero otherwise.
            let ok = exps.len() == 3
                && exps.iter().all(|&e| (0..=n - 2).contains(&e))
                && exps.iter().sum::<i64>() == n - 2;
            return Normalized::DegreeZero(if ok { rat(self.params.k) } else { Rat::zero() });
        }
        if exps.iter().any(|&e| !(0..=n - 2).contains(&e)) {
            return Normalized::Zero; // out-of-basis class
        }
        if exps.contains(&0) {
            return Normalized::Zero; // flat metric at positive degree
        }
        if !self.selection_ok(degree, exps) {
            return Normalized::Zero;
        }
        // Strip divisor insertions: each contributes a factor `degree`.
        let strips = exps.iter().filter(|&&e| e == 1).count();
        let base: Vec<i64> = exps.iter().copied().filter(|&e| e != 1).collect();
        let factor = rat(degree).pow(strips as i32);
        Normalized::Base {
            factor,
            base: CorrelatorKey::new(degree, base),
        }
    }

    /// Seed the degree-`d` two-point sector (and its Kähler descendants)
    /// from the structure-constant table:
    /// `v(O_{e^{N-2-n}} O_{e^{n-1-(k-N)d}} O_e)_d = k (L~_n - L~_{1+(k-N)d})`.
    pub fn seed(&mut self, d: i64) -> Result<()> {
        let (n_dim, k) = (self.params.n, self.params.k);
        let refidx = 1 + (k - n_dim) * d;
        let lref = self.table.get(d, refidx)?.clone();
        let lo = 0.max(refidx);
        let hi = (n_dim - 2).min(n_dim - 1 + (k - n_dim) * d);
        for n in lo..=hi {
            let val3 = rat(k) * (self.table.get(d, n)? - &lref);
            let e1 = n_dim - 2 - n;
            let e2 = n - 1 - (k - n_dim) * d;
            match self.normalize(d, &[e1, e2]) {
                Normalized::Zero => {
                    // An exponent-0 insertion (n at the window edge) forces
                    // value zero; the table must agree or the axioms clash.
                    if !val3.is_zero() {
                        return Err(Error::Inconsistent(format!(
                            "flat-metric seed v(e^{e1}, e^{e2})_{d} should vanish, got {val3}"
                        )));
                    }
                }
                Normalized::Base { factor, base } => {
                    let value = val3 / (&factor * rat(d));
                    if let Some((old, _)) = self.values.get(&base) {
                        if *old != value {
                            // The same canonical key is seeded from n and
                            // from its symmetric partner; disagreement
                            // means the table broke the key symmetry.
                            return Err(Error::Inconsistent(format!(
                                "seed mismatch at {base}: {old} vs {value}"
                            )));
                        }
                    } else {
                        self.values.insert(base, (value, KeyStatus::Seeded));
                    }
                }
                Normalized::DegreeZero(_) => unreachable!("d >= 1"),
            }
        }
        Ok(())
    }

    /// Evaluate a correlator, reconstructing through WDVV as needed.
    /// Insertion exponents may be arbitrary integers; out-of-basis classes
    /// give zero.
    pub fn correlator(&mut self, degree: i64, exps: &[i64]) -> Result<Rat> {
        if degree < 0 {
            return Ok(Rat::zero());
        }
        if degree > self.d_max {
            return Err(Error::InvalidParams(format!(
                "correlator degree {degree} above store limit {}",
                self.d_max
            )));
        }
        match self.normalize(degree, exps) {
            Normalized::Zero => Ok(Rat::zero()),
            Normalized::DegreeZero(v) => Ok(v),
            Normalized::Base { factor, base } => Ok(factor * self.eval_base(base)?),
        }
    }

    fn eval_base(&mut self, key: CorrelatorKey) -> Result<Rat> {
        if let Some((v, _)) = self.values.get(&key) {
            return Ok(v.clone());
        }
        if key.arity() <= 2 {
            // All selection-valid keys with at most two insertions are
            // seeded; a miss here is a provisioning bug, not math.
            return Err(Error::Underdetermined(format!("{key} (missing seed)")));
        }
        self.reconstruct(key)
    }

    /// Reconstruct one base key (all exponents in `2..=N-2`, at least three
    /// insertions, selection-valid) from a single WDVV instance.
    fn reconstruct(&mut self, key: CorrelatorKey) -> Result<Rat> {
        if self.pending.contains(&key) {
            // The fast path is provably acyclic; reaching this means a bug
            // somewhere, so switch to the exhaustive solver for the class.
            let class: Vec<CorrelatorKey> = self
                .pending
                .iter()
                .filter(|p| p.degree == key.degree && p.arity() == key.arity())
                .cloned()
                .chain(std::iter::once(key.clone()))
                .collect();
            let solved = self.solve_class(&class)?;
            return solved
                .get(&key)
                .cloned()
                .ok_or_else(|| Error::Underdetermined(key.to_string()));
        }
        self.pending.insert(key.clone());
        let result = self.tier1(&key);
        self.pending.remove(&key);
        let value = result?;
        self.values
            .insert(key, (value.clone(), KeyStatus::Reconstructed));
        Ok(value)
    }

    /// Fast-path WDVV instance: corners `(1, a_min - 1, a', a'')` with
    /// extras the remaining insertions.
    fn tier1(&mut self, key: &CorrelatorKey) -> Result<Rat> {
        let d = key.degree;
        let exps = &key.exps; // sorted non-increasing, arity >= 3
        let a_min = *exps.last().unwrap();
        let (c, dd) = (exps[0], exps[1]);
        let b = a_min - 1;
        let extras: Vec<i64> = exps[2..exps.len() - 1].to_vec();

        // Boundary terms of the degree split. The forced internal index is
        // out of range exactly when the partner key is out of basis, so the
        // zero conventions agree automatically.
        let with = |list: &[i64], extra: &[i64]| {
            let mut v = list.to_vec();
            v.extend_from_slice(extra);
            v
        };
        let s1 = self.correlator(d, &with(&[b, c + dd], &extras))?;
        let s2 = self.correlator(d, &with(&[b, c + 1, dd], &extras))?;
        let s3 = self.correlator(d, &with(&[c, b + dd], &extras))?;

        let (m_l, m_r) = self.middle_sums(d, b, c, dd, &extras)?;
        let kk = rat(self.params.k);
        Ok(s2 + rat(d) * s3 - rat(d) * s1 + (m_r - m_l) / kk)
    }

    /// The `0 < d_1 < d` part of the WDVV instance with corners
    /// `(1, b, c, dd)`: both factors have strictly lower degree.
    fn middle_sums(
        &mut self,
        d: i64,
        b: i64,
        c: i64,
        dd: i64,
        extras: &[i64],
    ) -> Result<(Rat, Rat)> {
        let n_dim = self.params.n;
        let mut m_l = Rat::zero();
        let mut m_r = Rat::zero();
        let ne = extras.len();
        for d1 in 1..d {
            let d2 = d - d1;
            for mask in 0u32..(1 << ne) {
                let mut alpha = Vec::new();
                let mut beta = Vec::new();
                for (idx, &e) in extras.iter().enumerate() {
                    if mask & (1 << idx) != 0 {
                        alpha.push(e);
                    } else {
                        beta.push(e);
                    }
                }
                // LHS: v(1, b, alpha, i)_{d1} v(N-2-i, beta, c, dd)_{d2};
                // the selection rule pins i, and both factors pass or fail
                // together because the masses add up.
                for (x, y, is_lhs) in [(b, (c, dd), true), (c, (b, dd), false)] {
                    let alpha_mass: i64 = alpha.iter().map(|e| e - 1).sum();
                    let i = (n_dim - 4) + (n_dim - self.params.k) * d1 - (x - 1) - alpha_mass;
                    if !(0..=n_dim - 2).contains(&i) {
                        continue;
                    }
                    let mut f1: Vec<i64> = vec![1, x, i];
                    f1.extend_from_slice(&alpha);
                    let v1 = self.correlator(d1, &f1)?;
                    if v1.is_zero() {
                        continue;
                    }
                    let mut f2: Vec<i64> = vec![n_dim - 2 - i, y.0, y.1];
                    f2.extend_from_slice(&beta);
                    let v2 = self.correlator(d2, &f2)?;
                    if !v2.is_zero() {
                        let term = v1 * v2;
                        if is_lhs {
                            m_l += term;
                        } else {
                            m_r += term;
                        }
                    }
                }
            }
        }
        Ok((m_l, m_r))
    }

    /// Full WDVV residual (LHS minus RHS) with every factor evaluated
    /// recursively; zero on a consistent system. Needs the corner
    /// constraint `a + b + c + dd + sum (n_j - 1) = N - 2 + (N - k) d`.
    pub fn wdvv_residual(
        &mut self,
        corners: [i64; 4],
        extras: &[i64],
        d: i64,
    ) -> Result<Rat> {
        let [a, b, c, dd] = corners;
        let n_dim = self.params.n;
        let mut acc = Rat::zero();
        let ne = extras.len();
        for d1 in 0..=d {
            for mask in 0u32..(1 << ne) {
                let mut alpha = Vec::new();
                let mut beta = Vec::new();
                for (idx, &e) in extras.iter().enumerate() {
                    if mask & (1 << idx) != 0 {
                        alpha.push(e);
                    } else {
                        beta.push(e);
                    }
                }
                for i in 0..=n_dim - 2 {
                    // LHS pairing (a b | c dd) minus RHS pairing (a c | b dd)
                    let mut f1: Vec<i64> = vec![a, b, i];
                    f1.extend_from_slice(&alpha);
                    let v1 = self.correlator(d1, &f1)?;
                    if !v1.is_zero() {
                        let mut f2: Vec<i64> = vec![n_dim - 2 - i, c, dd];
                        f2.extend_from_slice(&beta);
                        let v2 = self.correlator(d - d1, &f2)?;
                        acc += v1 * v2;
                    }
                    let mut g1: Vec<i64> = vec![a, c, i];
                    g1.extend_from_slice(&alpha);
                    let w1 = self.correlator(d1, &g1)?;
                    if !w1.is_zero() {
                        let mut g2: Vec<i64> = vec![n_dim - 2 - i, b, dd];
                        g2.extend_from_slice(&beta);
                        let w2 = self.correlator(d - d1, &g2)?;
                        acc -= w1 * w2;
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Resolve a key without recursion: known when closed-form or already
    /// stored, otherwise symbolic.
    fn resolve_stored(&self, degree: i64, exps: &[i64]) -> ResolvedFactor {
        match self.normalize(degree, exps) {
            Normalized::Zero => ResolvedFactor::Known(Rat::zero()),
            Normalized::DegreeZero(v) => ResolvedFactor::Known(v),
            Normalized::Base { factor, base } => match self.values.get(&base) {
                Some((v, _)) => ResolvedFactor::Known(factor * v),
                None => ResolvedFactor::Symbolic { factor, base },
            },
        }
    }

    /// Exhaustive solver for one same-shape class of unknowns: harvest
    /// WDVV instances whose symbolic keys stay inside `class`, then run
    /// exact Gaussian elimination. Redundant equations must agree; a
    /// contradiction is reported, never averaged away.
    pub fn solve_class(
        &mut self,
        class: &[CorrelatorKey],
    ) -> Result<HashMap<CorrelatorKey, Rat>> {
        let class_set: HashSet<CorrelatorKey> = class.iter().cloned().collect();
        let mut rows: Vec<(BTreeMap<CorrelatorKey, Rat>, Rat)> = Vec::new();
        for key in class {
            let d = key.degree;
            let exps = &key.exps;
            let n = exps.len();
            // One instance per (decremented corner, far-corner pair).
            for s in 0..n {
                for p in 0..n {
                    for q in (p + 1)..n {
                        if p == s || q == s {
                            continue;
                        }
                        let mut extras = Vec::new();
                        for (idx, &e) in exps.iter().enumerate() {
                            if idx != s && idx != p && idx != q {
                                extras.push(e);
                            }
                        }
                        let corners = [1, exps[s] - 1, exps[p], exps[q]];
                        let eq =
                            self.linear_form(corners, &extras, d, |k| class_set.contains(k))?;
                        if !eq.0.is_empty() {
                            rows.push(eq);
                        }
                    }
                }
            }
        }
        gaussian_solve(class, rows)
    }

    /// Assemble one WDVV instance as a linear form over the keys selected
    /// by `symbolic`, evaluating everything else recursively.
    fn linear_form<F: Fn(&CorrelatorKey) -> bool>(
        &mut self,
        corners: [i64; 4],
        extras: &[i64],
        d: i64,
        symbolic: F,
    ) -> Result<(BTreeMap<CorrelatorKey, Rat>, Rat)> {
        let [a, b, c, dd] = corners;
        let n_dim = self.params.n;
        let mut coeffs: BTreeMap<CorrelatorKey, Rat> = BTreeMap::new();
        let mut constant = Rat::zero();
        let ne = extras.len();
        for d1 in 0..=d {
            for mask in 0u32..(1 << ne) {
                let mut alpha = Vec::new();
                let mut beta = Vec::new();
                for (idx, &e) in extras.iter().enumerate() {
                    if mask & (1 << idx) != 0 {
                        alpha.push(e);
                    } else {
                        beta.push(e);
                    }
                }
                for i in 0..=n_dim - 2 {
                    for (sign, x, y) in [(1i64, b, (c, dd)), (-1, c, (b, dd))] {
                        let mut f1: Vec<i64> = vec![a, x, i];
                        f1.extend_from_slice(&alpha);
                        let mut f2: Vec<i64> = vec![n_dim - 2 - i, y.0, y.1];
                        f2.extend_from_slice(&beta);
                        let r1 = self.resolve_or_eval(d1, &f1, &symbolic)?;
                        let r2 = self.resolve_or_eval(d - d1, &f2, &symbolic)?;
                        let sgn = rat(sign);
                        match (r1, r2) {
                            (ResolvedFactor::Known(v1), ResolvedFactor::Known(v2)) => {
                                constant += sgn * v1 * v2;
                            }
                            (
                                ResolvedFactor::Known(v),
                                ResolvedFactor::Symbolic { factor, base },
                            )
                            | (
                                ResolvedFactor::Symbolic { factor, base },
                                ResolvedFactor::Known(v),
                            ) => {
                                if !v.is_zero() {
                                    *coeffs.entry(base).or_insert_with(Rat::zero) +=
                                        sgn * v * factor;
                                }
                            }
                            _ => {
                                return Err(Error::Underdetermined(format!(
                                    "nonlinear WDVV instance at corners {corners:?}, d = {d}"
                                )))
                            }
                        }
                    }
                }
            }
        }
        coeffs.retain(|_, v| !v.is_zero());
        Ok((coeffs, constant))
    }

    fn resolve_or_eval<F: Fn(&CorrelatorKey) -> bool>(
        &mut self,
        degree: i64,
        exps: &[i64],
        symbolic: &F,
    ) -> Result<ResolvedFactor> {
        match self.normalize(degree, exps) {
            Normalized::Zero => Ok(ResolvedFactor::Known(Rat::zero())),
            Normalized::DegreeZero(v) => Ok(ResolvedFactor::Known(v)),
            Normalized::Base { factor, base } => {
                if symbolic(&base) {
                    Ok(ResolvedFactor::Symbolic { factor, base })
                } else {
                    let v = self.eval_base(base)?;
                    Ok(ResolvedFactor::Known(factor * v))
                }
            }
        }
    }
}

enum ResolvedFactor {
    Known(Rat),
    Symbolic { factor: Rat, base: CorrelatorKey },
}

/// One WDVV instance as a linear form: coefficients over unknown keys plus
/// a constant accumulated from known values. `LHS - RHS = 0` reads
/// `sum coeff * v(key) + constant = 0`.
#[derive(Clone, Debug)]
pub struct WdvvEquation {
    pub corners: [i64; 4],
    pub extras: Vec<i64>,
    pub degree: i64,
    pub coefficients: BTreeMap<CorrelatorKey, Rat>,
    pub constant: Rat,
}

/// Assemble the WDVV instance with the given corners, extra insertions and
/// total degree. Values already present in the store (or closed-form) go
/// into the constant term; everything else stays symbolic. The corner
/// dimension constraint `a+b+c+dd + sum(n_j - 1) = N-2 + (N-k) d` is
/// enforced.
pub fn wdvv_equation(
    store: &CorrelatorStore,
    corners: [i64; 4],
    extras: &[i64],
    d: i64,
) -> Result<WdvvEquation> {
    let p = store.params();
    let corner_mass: i64 =
        corners.iter().sum::<i64>() + extras.iter().map(|e| e - 1).sum::<i64>();
    if corner_mass != p.n - 2 + (p.n - p.k) * d {
        return Err(Error::InvalidParams(format!(
            "corner constraint violated: {corners:?} extras {extras:?} at degree {d}"
        )));
    }
    let [a, b, c, dd] = corners;
    let mut coeffs: BTreeMap<CorrelatorKey, Rat> = BTreeMap::new();
    let mut constant = Rat::zero();
    let ne = extras.len();
    for d1 in 0..=d {
        for mask in 0u32..(1 << ne) {
            let mut alpha = Vec::new();
            let mut beta = Vec::new();
            for (idx, &e) in extras.iter().enumerate() {
                if mask & (1 << idx) != 0 {
                    alpha.push(e);
                } else {
                    beta.push(e);
                }
            }
            for i in 0..=p.n - 2 {
                for (sign, x, y) in [(1i64, b, (c, dd)), (-1, c, (b, dd))] {
                    let mut f1: Vec<i64> = vec![a, x, i];
                    f1.extend_from_slice(&alpha);
                    let mut f2: Vec<i64> = vec![p.n - 2 - i, y.0, y.1];
                    f2.extend_from_slice(&beta);
                    let r1 = store.resolve_stored(d1, &f1);
                    let r2 = store.resolve_stored(d - d1, &f2);
                    let sgn = rat(sign);
                    match (r1, r2) {
                        (ResolvedFactor::Known(v1), ResolvedFactor::Known(v2)) => {
                            constant += sgn * v1 * v2;
                        }
                        (ResolvedFactor::Known(v), ResolvedFactor::Symbolic { factor, base })
                        | (ResolvedFactor::Symbolic { factor, base }, ResolvedFactor::Known(v)) => {
                            if !v.is_zero() {
                                *coeffs.entry(base).or_insert_with(Rat::zero) += sgn * v * factor;
                            }
                        }
                        _ => {
                            return Err(Error::Underdetermined(format!(
                                "nonlinear WDVV instance at corners {corners:?}, d = {d}"
                            )))
                        }
                    }
                }
            }
        }
    }
    coeffs.retain(|_, v| !v.is_zero());
    Ok(WdvvEquation {
        corners,
        extras: extras.to_vec(),
        degree: d,
        coefficients: coeffs,
        constant,
    })
}

/// Solve the gathered linear system by exact Gaussian elimination. Every
/// requested key must be pinned; redundant rows must be consistent.
fn gaussian_solve(
    class: &[CorrelatorKey],
    rows: Vec<(BTreeMap<CorrelatorKey, Rat>, Rat)>,
) -> Result<HashMap<CorrelatorKey, Rat>> {
    let unknowns: Vec<CorrelatorKey> = class.to_vec();
    let index: HashMap<&CorrelatorKey, usize> =
        unknowns.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let w = unknowns.len();
    let mut mat: Vec<Vec<Rat>> = Vec::new();
    for (coeffs, constant) in rows {
        let mut row = vec![Rat::zero(); w + 1];
        for (k, v) in coeffs {
            match index.get(&k) {
                Some(&i) => row[i] = v,
                None => {
                    return Err(Error::Underdetermined(format!(
                        "instance leaks unknown {k} outside the class"
                    )))
                }
            }
        }
        row[w] = constant;
        mat.push(row);
    }
    let mut pivot_row = 0usize;
    let mut pivots: Vec<Option<usize>> = vec![None; w];
    for col in 0..w {
        let Some(r) = (pivot_row..mat.len()).find(|&r| !mat[r][col].is_zero()) else {
            continue;
        };
        mat.swap(pivot_row, r);
        let inv = Rat::one() / mat[pivot_row][col].clone();
        for v in mat[pivot_row].iter_mut() {
            *v *= &inv;
        }
        for r2 in 0..mat.len() {
            if r2 != pivot_row && !mat[r2][col].is_zero() {
                let f = mat[r2][col].clone();
                for cc in 0..=w {
                    let delta = &f * &mat[pivot_row][cc];
                    mat[r2][cc] -= delta;
                }
            }
        }
        pivots[col] = Some(pivot_row);
        pivot_row += 1;
    }
    // Leftover rows must be 0 = 0.
    for row in mat.iter().skip(pivot_row) {
        if !row[w].is_zero() {
            return Err(Error::Inconsistent(format!("residual constant {}", row[w])));
        }
    }
    let mut out = HashMap::new();
    for (col, key) in unknowns.iter().enumerate() {
        match pivots[col] {
            Some(r) => {
                // the reduced row reads x_col + constant = 0
                out.insert(key.clone(), -mat[r][w].clone());
            }
            None => return Err(Error::Underdetermined(key.to_string())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat_frac;
    use crate::recursion::HypersurfaceParams;

    fn store(n: i64, k: i64, d_max: i64) -> CorrelatorStore {
        CorrelatorStore::new(HypersurfaceParams::new(n, k).unwrap(), d_max).unwrap()
    }

    #[test]
    fn degree_zero_initial_condition() {
        let mut s = store(8, 9, 2);
        // a + b + c = N - 2 gives k, anything else 0
        assert_eq!(s.correlator(0, &[2, 3, 1]).unwrap(), rat(9));
        assert_eq!(s.correlator(0, &[2, 3, 2]).unwrap(), rat(0));
        assert_eq!(s.correlator(0, &[2, 3, 1, 0]).unwrap(), rat(0));
        assert_eq!(s.correlator(0, &[0, 4, 2]).unwrap(), rat(9));
    }

    #[test]
    fn flat_metric_kills_positive_degree() {
        let mut s = store(8, 9, 2);
        assert_eq!(s.correlator(2, &[0, 5, 4, 2]).unwrap(), rat(0));
    }

    #[test]
    fn out_of_basis_class_is_zero() {
        let mut s = store(8, 9, 2);
        assert_eq!(s.correlator(1, &[7, 2, 2]).unwrap(), rat(0));
        assert_eq!(s.correlator(1, &[-1, 5, 4]).unwrap(), rat(0));
    }

    #[test]
    fn seeded_three_point_matches_table() {
        let mut s = store(8, 9, 3);
        let t = s.table().clone();
        let (n_dim, k, d) = (8i64, 9i64, 2i64);
        let refidx = 1 + (k - n_dim) * d;
        for n in refidx.max(0)..=n_dim - 2 {
            let expect = rat(k) * (t.get(d, n).unwrap() - t.get(d, refidx).unwrap());
            let got = s
                .correlator(d, &[n_dim - 2 - n, n - 1 - (k - n_dim) * d, 1])
                .unwrap();
            assert_eq!(got, expect, "n = {n}");
        }
        // n = 1 + (k-N)d has coinciding terms: seeded value 0
        assert_eq!(
            s.correlator(d, &[n_dim - 2 - refidx, refidx - 1 - (k - n_dim) * d, 1])
                .unwrap(),
            rat(0)
        );
    }

    #[test]
    fn divisor_insertion_multiplies_by_degree() {
        let mut s = store(9, 10, 3);
        let base = [4, 3, 3];
        let v = s.correlator(2, &base).unwrap();
        let with_divisor = s.correlator(2, &[4, 3, 3, 1]).unwrap();
        assert_eq!(with_divisor, rat(2) * v);
    }

    #[test]
    fn permutation_invariance() {
        let mut s = store(9, 10, 2);
        let a = s.correlator(2, &[4, 3, 3]).unwrap();
        let b = s.correlator(2, &[3, 4, 3]).unwrap();
        let c = s.correlator(2, &[3, 3, 4]).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c);
    }

    #[test]
    fn classical_associativity_is_identically_zero() {
        let s = store(9, 10, 1);
        // all extras empty, d = 0: cup-product associativity of the
        // k*delta pairing
        for corners in [[2, 3, 1, 1], [4, 1, 1, 1], [2, 2, 2, 1]] {
            let eq = wdvv_equation(&s, corners, &[], 0).unwrap();
            assert!(eq.coefficients.is_empty());
            assert!(eq.constant.is_zero(), "corners {corners:?}");
        }
    }

    #[test]
    fn target_coefficient_is_k() {
        // corners (1, a-1, b, c): the d_1 = 0 full-split LHS term carries
        // coefficient k on the target v(e^a e^b e^c)_d.
        let s = store(9, 10, 1);
        // target (4,3,3) at d = 1: mass (N-5)+(N-k)d = 3; corners
        // (1, 3, 4, 3) hit it.
        let eq = wdvv_equation(&s, [1, 3, 4, 3], &[], 1).unwrap();
        let target = CorrelatorKey::new(1, vec![4, 3, 3]);
        assert_eq!(eq.coefficients.get(&target), Some(&rat(10)));
    }

    #[test]
    fn middle_degree_splits_use_lower_degrees_only() {
        // 0 < d_1 < d produce only products of strictly-lower-degree
        // correlators: at d = 1 there are no splits at all.
        let mut s = store(9, 10, 2);
        let (ml, mr) = s.middle_sums(1, 2, 4, 3, &[]).unwrap();
        assert!(ml.is_zero() && mr.is_zero());
    }

    #[test]
    fn conic_telescoping_identity() {
        // The associativity consequence used to pin the two-extra degree-2
        // correlators, checked entry-by-entry.
        for (n_dim, k) in [(11i64, 12i64), (9, 11)] {
            let mut s = store(n_dim, k, 2);
            let t = s.table().clone();
            let c = k - n_dim;
            let lt = |d: i64, m: i64| t.get(d, m).unwrap().clone();
            for n in (2 + 2 * c)..=(n_dim - 3) {
                for m in 0..=c {
                    let lhs1 = s
                        .correlator(2, &[n_dim - 2 - n, n - 1 - 2 * c - m, 1 + m])
                        .unwrap();
                    let lhs2 = s.correlator(2, &[n_dim - 2 - n, n - 2 * c - m, m]).unwrap();
                    let lhs = (lhs1 - lhs2) / rat(k);
                    let mut rhs = lt(2, n - m) - lt(2, 1 + m + 2 * c);
                    let factor_a = lt(1, n - m - c) - lt(1, 1 + c);
                    for j in 0..m {
                        rhs += (lt(1, n - j) - lt(1, 1 + c + j)) * &factor_a;
                    }
                    let factor_b = lt(1, 1 + m + c) - lt(1, 1 + c);
                    for j in 0..=(m + c) {
                        rhs -= (lt(1, n - j) - lt(1, 1 + c + j)) * &factor_b;
                    }
                    assert_eq!(lhs, rhs, "N={n_dim} k={k} n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn wdvv_residuals_vanish_after_reconstruction() {
        let mut s = store(10, 11, 3);
        let (n_dim, k) = (10i64, 11i64);
        for d in 1..=3i64 {
            let target = n_dim - 2 + (n_dim - k) * d;
            for (corners, extras) in [
                ([1i64, 2, 2, target - 5], vec![]),
                ([2, 2, 2, target - 6 - 2], vec![3i64]),
                ([1, 3, 2, target - 6 - 3], vec![2, 3]),
            ] {
                if corners.iter().any(|&x| !(0..=n_dim - 2).contains(&x)) {
                    continue;
                }
                let r = s.wdvv_residual(corners, &extras, d).unwrap();
                assert!(
                    r.is_zero(),
                    "d={d} corners={corners:?} extras={extras:?}: {r}"
                );
            }
        }
    }

    #[test]
    fn elimination_agrees_with_fast_path() {
        let mut s = store(11, 12, 2);
        // class: arity-3 degree-2 base keys of the right selection mass
        let mass = (11 - 5) + (11 - 12) * 2;
        let mut class = Vec::new();
        for a in 2..=9i64 {
            for b in 2..=a {
                for c in 2..=b {
                    if (a - 1) + (b - 1) + (c - 1) == mass {
                        class.push(CorrelatorKey::new(2, vec![a, b, c]));
                    }
                }
            }
        }
        assert!(!class.is_empty());
        let fast: Vec<Rat> = class
            .iter()
            .map(|key| s.correlator(2, &key.exps).unwrap())
            .collect();
        let mut fresh = store(11, 12, 2);
        let solved = fresh.solve_class(&class).unwrap();
        for (key, expect) in class.iter().zip(fast) {
            assert_eq!(solved[key], expect, "{key}");
        }
    }

    #[test]
    fn cached_insert_validates_selection() {
        let mut s = store(9, 10, 2);
        let bad = CorrelatorKey::new(1, vec![4, 4, 4]);
        assert!(s.insert_cached(bad, rat_frac(1, 2)).is_err());
        let good_key = CorrelatorKey::new(2, vec![4, 3, 3]);
        let v = s.correlator(2, &[4, 3, 3]).unwrap();
        let mut warm = store(9, 10, 2);
        warm.insert_cached(good_key.clone(), v.clone()).unwrap();
        assert_eq!(warm.correlator(2, &[4, 3, 3]).unwrap(), v);
    }
}
