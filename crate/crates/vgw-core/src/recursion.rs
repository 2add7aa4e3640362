//! Virtual structure constants of degree-`k` hypersurfaces in `CP^{N-1}`.
//!
//! The quantum Kähler sub-ring of `M_N^k` has additive basis
//! `O_{e^0} .. O_{e^{N-2}}` and its multiplication by `O_e` is encoded in
//! structure constants `L_n^{N,k,d}`. In the stable range `N >= 2k` only
//! the degree-one constants survive and they are given by a closed product
//! formula ([`beauville_init`]). Descending in `N` one step at a time, each
//! level is a fixed weighted-homogeneous polynomial expression
//! ([`phi`]) in the level above, with coefficients read off a residue
//! polynomial [`poly_d`]. Running the same recursion outside its range of
//! validity defines the *virtual* structure constants
//! ([`virtual_constants`]), which agree with the true ones for `N - k >= 2`
//! and otherwise feed the mirror transformation.
//!
//! Index windows are explicit everywhere: every table knows which `n` it
//! stores, and out-of-window access is a hard error instead of a silent
//! zero.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::multipoly::{vars, MultiPoly, Vars};
use crate::rational::{factorial, rat, rat_frac, Rat};
use crate::residue::{iterated_residue, ResidueFactor};
use crate::{Error, Result};

/// The pair `(N, k)`: degree-`k` hypersurface in `CP^{N-1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct HypersurfaceParams {
    /// Ambient projective dimension plus one.
    pub n: i64,
    /// Hypersurface degree.
    pub k: i64,
}

impl HypersurfaceParams {
    pub fn new(n: i64, k: i64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParams(format!(
                "N = {n} too small: the sub-ring needs classes e^0..e^{{N-2}} with N >= 4"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidParams(format!("k = {k} must be at least 2")));
        }
        Ok(HypersurfaceParams { n, k })
    }

    /// Coefficient of the first Chern class, `N - k`.
    pub fn chern(&self) -> i64 {
        self.n - self.k
    }

    /// Dimension of the additive basis, `N - 1`.
    pub fn basis_len(&self) -> usize {
        (self.n - 1) as usize
    }
}

/// Which constants a table holds.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TableKind {
    Virtual,
    True,
}

impl TableKind {
    fn label(self) -> &'static str {
        match self {
            TableKind::Virtual => "virtual",
            TableKind::True => "true",
        }
    }
}

#[derive(Clone, Debug)]
struct Row {
    lo: i64,
    vals: Vec<Rat>,
}

impl Row {
    fn hi(&self) -> i64 {
        self.lo + self.vals.len() as i64 - 1
    }

    fn get(&self, m: i64) -> Option<&Rat> {
        if m < self.lo || m > self.hi() {
            None
        } else {
            Some(&self.vals[(m - self.lo) as usize])
        }
    }
}

/// Structure constants `(d, n) -> Rat` for one `(N, k)`, with an explicit
/// valid index window per degree.
#[derive(Clone, Debug)]
pub struct ConstantsTable {
    kind: TableKind,
    params: HypersurfaceParams,
    rows: Vec<Row>,
}

impl ConstantsTable {
    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn params(&self) -> HypersurfaceParams {
        self.params
    }

    pub fn d_max(&self) -> i64 {
        self.rows.len() as i64
    }

    /// Valid index window `(lo, hi)` for degree `d`.
    pub fn window(&self, d: i64) -> Result<(i64, i64)> {
        let row = self.row(d)?;
        Ok((row.lo, row.hi()))
    }

    fn row(&self, d: i64) -> Result<&Row> {
        if d < 1 || d > self.rows.len() as i64 {
            return Err(Error::WindowMiss {
                kind: self.kind.label(),
                n_dim: self.params.n,
                k: self.params.k,
                d,
                index: i64::MIN,
            });
        }
        Ok(&self.rows[(d - 1) as usize])
    }

    /// `L_n^{N,k,d}`; out-of-window access is a hard error.
    pub fn get(&self, d: i64, n: i64) -> Result<&Rat> {
        let row = self.row(d)?;
        row.get(n).ok_or(Error::WindowMiss {
            kind: self.kind.label(),
            n_dim: self.params.n,
            k: self.params.k,
            d,
            index: n,
        })
    }

    /// All stored entries of one degree, in index order.
    pub fn row_entries(&self, d: i64) -> Result<impl Iterator<Item = (i64, &Rat)>> {
        let row = self.row(d)?;
        Ok(row.vals.iter().enumerate().map(move |(i, v)| (row.lo + i as i64, v)))
    }
}

/// Index window of Eq.-type selection: where a *true* structure constant of
/// degree `d` may be nonzero. `None` when the window is empty.
pub fn selection_window(params: HypersurfaceParams, d: i64) -> Option<(i64, i64)> {
    let (n, k) = (params.n, params.k);
    let c = n - k;
    let (lo, hi) = if c >= 2 {
        (0, n - 1 - c * d)
    } else if c == 1 && d == 1 {
        (1, n - 3)
    } else if c == 1 {
        (0, n - 1 - d)
    } else {
        (2 + (k - n) * d, n - 3)
    };
    (lo <= hi).then_some((lo, hi))
}

/// Degree-one structure constants in the stable range `N >= 2k`:
/// coefficients of `k * prod_{j=1}^{k-1} (j w + (k - j))`, indexed by
/// `n = 0..k-1`. All higher degrees vanish there.
pub fn beauville_init(k: i64) -> Vec<Rat> {
    assert!(k >= 2);
    let mut coeffs = vec![rat(k)];
    for j in 1..k {
        // multiply by (j w + (k - j))
        let mut next = vec![Rat::zero(); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] += c * rat(k - j);
            next[i + 1] += c * rat(j);
        }
        coeffs = next;
    }
    coeffs
}

// ---------------------------------------------------------------------------
// The residue polynomial Poly_d
// ---------------------------------------------------------------------------

/// Variable universe of `Poly_d`: `x, y, z_1 .. z_{d-1}`.
pub fn poly_vars(d: i64) -> Vars {
    let mut names = vec!["x".to_string(), "y".to_string()];
    for j in 1..d {
        names.push(format!("z{j}"));
    }
    vars(names)
}

fn compute_poly_d(d: i64) -> Result<MultiPoly> {
    assert!(d >= 1);
    if d == 1 {
        // Empty product, no integration.
        return Ok(MultiPoly::one(&poly_vars(1)));
    }
    // Work over x, y, z_1..z_{d-1}, t_1..t_{d-1}; the t's are integrated
    // out and the result lives in the z-universe.
    let mut names = vec!["x".to_string(), "y".to_string()];
    for j in 1..d {
        names.push(format!("z{j}"));
    }
    for i in 1..d {
        names.push(format!("t{i}"));
    }
    let work = vars(names);

    // A_j = ((d-j)x + jy)/d + sum_i c_{ij} t_i with c_{ij} = (d-j)/(d-i)
    // for i <= j and j/i for i > j.
    let factors: Vec<ResidueFactor> = (1..d)
        .map(|j| {
            let mut a = MultiPoly::var(&work, "x")
                .scale(&rat_frac(d - j, d))
                .add(&MultiPoly::var(&work, "y").scale(&rat_frac(j, d)));
            for i in 1..d {
                let c = if i <= j {
                    rat_frac(d - j, d - i)
                } else {
                    rat_frac(j, i)
                };
                a = a.add(&MultiPoly::var(&work, &format!("t{i}")).scale(&c));
            }
            ResidueFactor {
                affine: a,
                z: MultiPoly::var(&work, &format!("z{j}")),
            }
        })
        .collect();

    // Innermost integral first: t_{d-1} down to t_1.
    let order: Vec<String> = (1..d).rev().map(|i| format!("t{i}")).collect();
    let order_refs: Vec<&str> = order.iter().map(String::as_str).collect();
    let raw = iterated_residue(&factors, &order_refs)?;

    // Re-express in the z-universe and run the diagnostics: a wrong
    // contour prescription shows up as leftover t-dependence,
    // inhomogeneity, or excess z-degree, and is never silent.
    let cvars = poly_vars(d);
    let mut result = MultiPoly::zero(&cvars);
    for (exps, coef) in raw.terms() {
        if exps[(1 + d) as usize..].iter().any(|&e| e > 0) {
            return Err(Error::ResidueDiagnostic(format!(
                "Poly_{d} retained an integration variable: {raw}"
            )));
        }
        result = result.add(&MultiPoly::monomial(
            &cvars,
            exps[..(1 + d) as usize].to_vec(),
            coef.clone(),
        ));
    }
    let deg = (d - 1) as u32;
    if !result.is_homogeneous(deg) || result.is_zero() {
        return Err(Error::ResidueDiagnostic(format!(
            "Poly_{d} is not homogeneous of degree {deg}: {result}"
        )));
    }
    for j in 1..d {
        if result.degree_in(&format!("z{j}")).unwrap_or(0) > deg {
            return Err(Error::ResidueDiagnostic(format!(
                "Poly_{d} has z{j}-degree above {deg}"
            )));
        }
    }
    Ok(result)
}

/// The homogeneous degree-`(d-1)` polynomial in `x, y, z_1..z_{d-1}` whose
/// image under [`phi`] is the one-step descent rule for degree-`d`
/// constants. Independent of `N` and `k`; memoized per `d`.
///
/// `d <= 5` is the validated range; larger `d` is computed on request but
/// carries no cross-check.
pub fn poly_d(d: i64) -> Result<MultiPoly> {
    if d < 1 {
        return Err(Error::InvalidParams(format!("Poly_d needs d >= 1, got {d}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<i64, MultiPoly>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(p) = guard.get(&d) {
        return Ok(p.clone());
    }
    let p = compute_poly_d(d)?;
    guard.insert(d, p.clone());
    Ok(p)
}

// ---------------------------------------------------------------------------
// Ordered-partition monomials and the linear map phi
// ---------------------------------------------------------------------------

/// A monomial `x^{d_{i_0}} z_{i_1}^{d_{i_1}} .. z_{i_m}^{d_{i_m}}
/// y^{d_{i_{m+1}}}` of `Poly_d`, carrying the ordered partition
/// `0 = i_0 < i_1 < .. < i_m < i_{m+1} = d` of its split points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedPartitionMonomial {
    d: i64,
    x_exp: i64,
    y_exp: i64,
    /// `(i_j, d_{i_j})` for the z-variables present, ascending in `i_j`.
    z: Vec<(i64, i64)>,
}

impl OrderedPartitionMonomial {
    /// Classify one exponent vector of `Poly_d` (variable order `x, y,
    /// z_1..z_{d-1}`).
    pub fn from_exponents(d: i64, exps: &[u16]) -> Self {
        assert_eq!(exps.len() as i64, 1 + d);
        let x_exp = exps[0] as i64;
        let y_exp = exps[1] as i64;
        let z: Vec<(i64, i64)> = exps[2..]
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(idx, &e)| (idx as i64 + 1, e as i64))
            .collect();
        let mon = OrderedPartitionMonomial { d, x_exp, y_exp, z };
        debug_assert_eq!(mon.weight(), d - 1, "exponent sum must be d-1");
        mon
    }

    /// Total exponent `sum d_{i_j}`; always `d - 1` for Poly_d monomials.
    pub fn weight(&self) -> i64 {
        self.x_exp + self.y_exp + self.z.iter().map(|&(_, e)| e).sum::<i64>()
    }

    /// Split points `i_0 = 0, i_1, .., i_m, i_{m+1} = d`.
    fn splits(&self) -> Vec<i64> {
        let mut s = vec![0];
        s.extend(self.z.iter().map(|&(i, _)| i));
        s.push(self.d);
        s
    }

    /// Degrees `i_j - i_{j-1}` of the `m + 1` factors of the phi image.
    pub fn factor_degrees(&self) -> Vec<i64> {
        let s = self.splits();
        s.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The shift vector `delta` of length `m + 1` for target level `N`:
    /// `alpha + beta + gamma + sum_j (d_{i_j} - 1) eps_j +
    /// d_{i_{m+1}} eps_{m+1}` componentwise.
    pub fn delta(&self, n_level: i64, k: i64) -> Vec<i64> {
        let m = self.z.len();
        let alpha = m as i64 + 1 - self.d;
        let mut out = Vec::with_capacity(m + 1);
        for j in 1..=m + 1 {
            let (beta, gamma) = if j == 1 {
                (0, 0)
            } else {
                let i_prev = self.z[j - 2].0;
                (i_prev - (j as i64 - 1), i_prev * (n_level - k))
            };
            // eps_p has ones in the first p coordinates, so coordinate j
            // picks up (d_{i_p} - 1) for every p >= j, plus d_{i_{m+1}}
            // from the all-ones eps_{m+1}.
            let eps: i64 = self.z[(j - 1).min(m)..].iter().map(|&(_, e)| e - 1).sum();
            out.push(alpha + beta + gamma + eps + self.y_exp);
        }
        out
    }
}

/// Decompose `Poly_d` into `(coefficient, monomial)` pairs.
pub fn poly_d_monomials(d: i64) -> Result<Vec<(Rat, OrderedPartitionMonomial)>> {
    let p = poly_d(d)?;
    Ok(p.terms()
        .map(|(e, c)| (c.clone(), OrderedPartitionMonomial::from_exponents(d, e)))
        .collect())
}

/// One level of the descent: rows indexed by degree.
struct LevelRows {
    n_level: i64,
    rows: Vec<Option<Row>>,
}

impl LevelRows {
    fn get(&self, d: i64, n: i64, params: HypersurfaceParams) -> Result<&Rat> {
        self.rows
            .get((d - 1) as usize)
            .and_then(|r| r.as_ref())
            .and_then(|r| r.get(n))
            .ok_or(Error::WindowMiss {
                kind: "virtual(level)",
                n_dim: self.n_level,
                k: params.k,
                d,
                index: n,
            })
    }
}

/// The Q-linear map from `Poly_d` monomials to products of level-`(N+1)`
/// constants: `prod_{j=1}^{m+1} L_{n + delta_j}^{N+1, k, i_j - i_{j-1}}`.
pub fn phi(
    mon: &OrderedPartitionMonomial,
    n: i64,
    n_level: i64,
    k: i64,
    upper: &ConstantsTable,
) -> Result<Rat> {
    let delta = mon.delta(n_level, k);
    let degs = mon.factor_degrees();
    let mut acc = Rat::one();
    for (dj, sh) in degs.iter().zip(&delta) {
        acc *= upper.get(*dj, n + sh)?;
    }
    Ok(acc)
}

fn phi_level(
    mon: &OrderedPartitionMonomial,
    n: i64,
    n_level: i64,
    params: HypersurfaceParams,
    upper: &LevelRows,
) -> Result<Rat> {
    let delta = mon.delta(n_level, params.k);
    let degs = mon.factor_degrees();
    let mut acc = Rat::one();
    for (dj, sh) in degs.iter().zip(&delta) {
        let v = upper.get(*dj, n + sh, params)?;
        if v.is_zero() {
            return Ok(Rat::zero());
        }
        acc *= v;
    }
    Ok(acc)
}

fn union(w: &mut Option<(i64, i64)>, lo: i64, hi: i64) {
    *w = Some(match *w {
        None => (lo, hi),
        Some((a, b)) => (a.min(lo), b.max(hi)),
    });
}

/// Default stored window for `(params, d_max)` tables: the selection window
/// plus every index the seeded correlators and mirror formulas look at.
pub fn default_window(params: HypersurfaceParams, d_max: i64) -> (i64, i64) {
    let (n, k) = (params.n, params.k);
    let c = k - n;
    let margin = 4 * c.abs().max(1) + 8;
    let lo = 0.min(1 + c * d_max).min(1 + c) - margin;
    let hi = (n - 2).max(n - 1 + c * d_max).max(k - 1) + margin;
    (lo, hi)
}

/// Virtual structure constants on the requested index window, by descent
/// from `N0 = max(N, 2k)`.
pub fn virtual_constants(
    params: HypersurfaceParams,
    d_max: i64,
    lo: i64,
    hi: i64,
) -> Result<ConstantsTable> {
    let start = params.n.max(2 * params.k);
    virtual_constants_from(params, d_max, lo, hi, start)
}

/// Same as [`virtual_constants`] with an explicit descent start `n0 >=
/// max(N, 2k)`. Any admissible start gives the same table; the default
/// picks the cheapest. Exposed so the stable-range fixed point is testable.
pub fn virtual_constants_from(
    params: HypersurfaceParams,
    d_max: i64,
    lo: i64,
    hi: i64,
    n0: i64,
) -> Result<ConstantsTable> {
    if d_max < 1 {
        return Err(Error::InvalidParams(format!("d_max = {d_max} must be >= 1")));
    }
    if lo > hi {
        return Err(Error::InvalidParams(format!("empty window [{lo}, {hi}]")));
    }
    if n0 < params.n.max(2 * params.k) {
        return Err(Error::InvalidParams(format!(
            "descent start N0 = {n0} below max(N, 2k)"
        )));
    }
    let monomials: Vec<Vec<(Rat, OrderedPartitionMonomial)>> = (1..=d_max)
        .map(poly_d_monomials)
        .collect::<Result<_>>()?;

    // Requirement propagation: level N' = params.n + lvl needs the windows
    // of level N' + 1 shifted by every delta component.
    let steps = (n0 - params.n) as usize;
    let mut need: Vec<Vec<Option<(i64, i64)>>> = vec![vec![None; d_max as usize]; steps + 1];
    for d in 1..=d_max {
        need[0][(d - 1) as usize] = Some((lo, hi));
    }
    for lvl in 0..steps {
        let n_level = params.n + lvl as i64;
        for d in 1..=d_max {
            let Some((wlo, whi)) = need[lvl][(d - 1) as usize] else {
                continue;
            };
            for (_, mon) in &monomials[(d - 1) as usize] {
                let delta = mon.delta(n_level, params.k);
                for (fd, sh) in mon.factor_degrees().iter().zip(&delta) {
                    union(&mut need[lvl + 1][(*fd - 1) as usize], wlo + sh, whi + sh);
                }
            }
        }
    }

    // Top level: Beauville in degree one (zero outside 0..k-1), zero above.
    let beau = beauville_init(params.k);
    let top = |d: i64, w: Option<(i64, i64)>| -> Option<Row> {
        let (wlo, whi) = w?;
        let vals = (wlo..=whi)
            .map(|m| {
                if d == 1 && (0..params.k).contains(&m) {
                    beau[m as usize].clone()
                } else {
                    Rat::zero()
                }
            })
            .collect();
        Some(Row { lo: wlo, vals })
    };
    let mut upper = LevelRows {
        n_level: n0,
        rows: (1..=d_max).map(|d| top(d, need[steps][(d - 1) as usize])).collect(),
    };

    // Descend.
    for lvl in (0..steps).rev() {
        let n_level = params.n + lvl as i64;
        let mut rows: Vec<Option<Row>> = Vec::with_capacity(d_max as usize);
        for d in 1..=d_max {
            let Some((wlo, whi)) = need[lvl][(d - 1) as usize] else {
                rows.push(None);
                continue;
            };
            let mons = &monomials[(d - 1) as usize];
            let mut vals = Vec::with_capacity((whi - wlo + 1) as usize);
            for n in wlo..=whi {
                let mut acc = Rat::zero();
                for (coef, mon) in mons {
                    let term = phi_level(mon, n, n_level, params, &upper)?;
                    if !term.is_zero() {
                        acc += coef * term;
                    }
                }
                vals.push(acc);
            }
            rows.push(Some(Row { lo: wlo, vals }));
        }
        upper = LevelRows { n_level, rows };
    }

    let rows = upper
        .rows
        .into_iter()
        .map(|r| r.expect("target-level windows are always requested"))
        .collect();
    Ok(ConstantsTable {
        kind: TableKind::Virtual,
        params,
        rows,
    })
}

/// Virtual table on the default window.
pub fn virtual_constants_default(params: HypersurfaceParams, d_max: i64) -> Result<ConstantsTable> {
    let (lo, hi) = default_window(params, d_max);
    virtual_constants(params, d_max, lo, hi)
}

// ---------------------------------------------------------------------------
// Closed forms for N = k (hypergeometric data)
// ---------------------------------------------------------------------------

/// Closed forms for the first two rows at `N = k`:
/// `L~_0^{k,k,d} = (kd)!/(d!)^k`, and `L~_1^{k,k,d}` as the degree-`d`
/// coefficient of `dt/dx` for the mirror map
/// `t(x) = x + (sum_d (kd)!/(d!)^k (sum_{i<=d} sum_{m<k} m/(i(ki-m))) q^d)
/// / (sum_d (kd)!/(d!)^k q^d)` with `q = e^x`.
pub fn cy_hypergeom_oracle(k: i64, d: i64) -> (Rat, Rat) {
    assert!(k >= 3 && d >= 1);
    let w0: Vec<Rat> = (0..=d)
        .map(|dd| Rat::new(factorial(k * dd), factorial(dd).pow(k as u32)))
        .collect();
    let f: Vec<Rat> = (0..=d)
        .map(|dd| {
            let mut inner = Rat::zero();
            for i in 1..=dd {
                for m in 1..k {
                    inner += rat_frac(m, i * (k * i - m));
                }
            }
            &w0[dd as usize] * inner
        })
        .collect();
    // s = f / w0 as a power series in q; L~_1^{k,k,d} = d * s_d.
    let mut s = vec![Rat::zero(); (d + 1) as usize];
    for dd in 0..=d as usize {
        let mut acc = f[dd].clone();
        for j in 1..=dd {
            acc -= &w0[j] * &s[dd - j];
        }
        s[dd] = acc;
    }
    (w0[d as usize].clone(), rat(d) * &s[d as usize])
}

// ---------------------------------------------------------------------------
// True constants in the Fano and near-Fano range
// ---------------------------------------------------------------------------

/// True structure constants for `N - k >= 1`.
///
/// For `N - k >= 2` the virtual table already is the true one. For
/// `N - k = 1` only the degree-one part changes: `L_m^{k+1,k,1} =
/// L_m^{k+2,k,1} - k!` inside the selection window, zero outside. Either
/// way the result is checked to vanish outside the selection windows.
pub fn true_constants_near_fano(
    params: HypersurfaceParams,
    d_max: i64,
    lo: i64,
    hi: i64,
) -> Result<ConstantsTable> {
    let c = params.chern();
    if c < 1 {
        return Err(Error::InvalidParams(format!(
            "true_constants_near_fano needs N - k >= 1, got {c}"
        )));
    }
    let mut table = virtual_constants(params, d_max, lo, hi)?;
    table.kind = TableKind::True;
    if c == 1 {
        let beau = beauville_init(params.k);
        let kfac = Rat::from_integer(factorial(params.k));
        let row = &mut table.rows[0];
        for (i, v) in row.vals.iter_mut().enumerate() {
            let m = row.lo + i as i64;
            *v = if (1..=params.k - 2).contains(&m) {
                &beau[m as usize] - &kfac
            } else {
                Rat::zero()
            };
        }
    }
    // Selection support check: a nonzero true constant outside its window
    // signals a recursion breakdown, not something to zero silently.
    for d in 1..=d_max {
        let win = selection_window(params, d);
        let row = &table.rows[(d - 1) as usize];
        for (i, v) in row.vals.iter().enumerate() {
            let m = row.lo + i as i64;
            let inside = win.map_or(false, |(a, b)| (a..=b).contains(&m));
            if !inside && !v.is_zero() {
                return Err(Error::Invariant(format!(
                    "true constant L_{m}^{{{},{},{d}}} = {v} nonzero outside selection window",
                    params.n, params.k
                )));
            }
        }
    }
    Ok(table)
}

/// True table on the default window.
pub fn true_constants_near_fano_default(
    params: HypersurfaceParams,
    d_max: i64,
) -> Result<ConstantsTable> {
    let (lo, hi) = default_window(params, d_max);
    true_constants_near_fano(params, d_max, lo, hi)
}

// ---------------------------------------------------------------------------
// Quantum ring relation check
// ---------------------------------------------------------------------------

/// Outcome of [`quantum_relation_check`].
#[derive(Clone, Debug)]
pub struct RelationReport {
    pub holds: bool,
    /// Offending matrix entries as `(row, col, q-power, value)` strings.
    pub violations: Vec<String>,
}

type QPoly = Vec<Rat>; // coefficients of q^0..q^{d_max}

fn qp_zero(d_max: usize) -> QPoly {
    vec![Rat::zero(); d_max + 1]
}

fn qp_mul(a: &QPoly, b: &QPoly) -> QPoly {
    let n = a.len();
    let mut out = vec![Rat::zero(); n];
    for i in 0..n {
        if a[i].is_zero() {
            continue;
        }
        for j in 0..n - i {
            if !b[j].is_zero() {
                out[i + j] += &a[i] * &b[j];
            }
        }
    }
    out
}

type QMatrix = Vec<Vec<QPoly>>;

fn qm_mul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let n = a.len();
    let d = a[0][0].len() - 1;
    let mut out = vec![vec![qp_zero(d); n]; n];
    for i in 0..n {
        for l in 0..n {
            if a[i][l].iter().all(Rat::is_zero) {
                continue;
            }
            for j in 0..n {
                let prod = qp_mul(&a[i][l], &b[l][j]);
                for (t, v) in out[i][j].iter_mut().zip(prod) {
                    *t += v;
                }
            }
        }
    }
    out
}

fn qm_pow(m: &QMatrix, e: i64) -> QMatrix {
    let n = m.len();
    let d = m[0][0].len() - 1;
    let mut out: QMatrix = vec![vec![qp_zero(d); n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        row[i][0] = Rat::one();
    }
    for _ in 0..e {
        out = qm_mul(&out, m);
    }
    out
}

/// Multiplication matrix of `O_e` on the basis `O_{e^0}..O_{e^{N-2}}`,
/// truncated at `q^{d_max}`.
fn quantum_matrix(table: &ConstantsTable, d_max: i64) -> Result<QMatrix> {
    let params = table.params();
    let b = params.basis_len();
    let mut mat = vec![vec![qp_zero(d_max as usize); b]; b];
    for j in 0..b as i64 {
        if j + 1 < b as i64 {
            mat[(j + 1) as usize][j as usize][0] = Rat::one();
        }
        let m = params.n - 2 - j;
        for d in 1..=d_max {
            let r = j + 1 + (params.k - params.n) * d;
            if (0..b as i64).contains(&r) {
                let v = table.get(d, m)?;
                if !v.is_zero() {
                    mat[r as usize][j as usize][d as usize] = v.clone();
                }
            }
        }
    }
    Ok(mat)
}

/// Check the quantum ring relation truncated at `q^{d_max}`:
/// `(O_e)^{N-1} - k^k (O_e)^{k-1} q = 0` for `N - k >= 2`, and
/// `(O_e + k! q)^{N-1} - k^k (O_e + k! q)^{k-1} q = 0` for `N - k = 1`.
pub fn quantum_relation_check(
    params: HypersurfaceParams,
    d_max: i64,
) -> Result<RelationReport> {
    if params.chern() < 1 {
        return Err(Error::InvalidParams(
            "relation check needs N - k >= 1".into(),
        ));
    }
    let table = true_constants_near_fano_default(params, d_max)?;
    let mut mat = quantum_matrix(&table, d_max)?;
    if params.chern() == 1 {
        let kfac = Rat::from_integer(factorial(params.k));
        for (i, row) in mat.iter_mut().enumerate() {
            row[i][1] += &kfac;
        }
    }
    let pn = qm_pow(&mat, params.n - 1);
    let pk = qm_pow(&mat, params.k - 1);
    let kk = pow_int(params.k, params.k);
    let mut violations = Vec::new();
    for i in 0..mat.len() {
        for j in 0..mat.len() {
            for t in 0..=d_max as usize {
                // subtract k^k * q * (O_e)^{k-1}
                let sub = if t >= 1 { &pk[i][j][t - 1] * &kk } else { Rat::zero() };
                let val = &pn[i][j][t] - sub;
                if !val.is_zero() {
                    violations.push(format!("entry ({i},{j}) at q^{t}: {val}"));
                }
            }
        }
    }
    Ok(RelationReport {
        holds: violations.is_empty(),
        violations,
    })
}

fn pow_int(base: i64, e: i64) -> Rat {
    let mut acc = Rat::one();
    for _ in 0..e {
        acc *= rat(base);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: i64, k: i64) -> HypersurfaceParams {
        HypersurfaceParams::new(n, k).unwrap()
    }

    #[test]
    fn beauville_small() {
        // expand 2(w+1) and 3(w+2)(2w+1)
        assert_eq!(beauville_init(2), vec![rat(2), rat(2)]);
        assert_eq!(beauville_init(3), vec![rat(6), rat(15), rat(6)]);
    }

    #[test]
    fn beauville_palindromic() {
        // the product is palindromic under j <-> k-j
        for k in 2..=12 {
            let b = beauville_init(k);
            for i in 0..b.len() {
                assert_eq!(b[i], b[b.len() - 1 - i], "k={k}, n={i}");
            }
        }
    }

    #[test]
    fn poly_1_is_one() {
        let p1 = poly_d(1).unwrap();
        assert_eq!(p1, MultiPoly::one(&poly_vars(1)));
    }

    #[test]
    fn poly_2_matches_hand_residue() {
        let vs = poly_vars(2);
        let expect = MultiPoly::var(&vs, "x")
            .add(&MultiPoly::var(&vs, "y"))
            .scale(&rat_frac(1, 2))
            .add(&MultiPoly::var(&vs, "z1"));
        assert_eq!(poly_d(2).unwrap(), expect);
    }

    #[test]
    fn poly_3_support_and_homogeneity() {
        let p3 = poly_d(3).unwrap();
        assert!(p3.is_homogeneous(2));
        let idx = |name: &str| p3.var_indices(&[name])[0];
        let (x, y, z1, z2) = (idx("x"), idx("y"), idx("z1"), idx("z2"));
        let has = |pairs: &[(usize, u16)]| {
            let mut e = vec![0u16; 4];
            for &(i, v) in pairs {
                e[i] = v;
            }
            !p3.coeff(&e).is_zero()
        };
        // monomial support includes x^2, xy, y^2, x z_*, y z_*, z_* z_*
        assert!(has(&[(x, 2)]));
        assert!(has(&[(x, 1), (y, 1)]));
        assert!(has(&[(y, 2)]));
        assert!(has(&[(x, 1), (z1, 1)]));
        assert!(has(&[(y, 1), (z2, 1)]));
        assert!(has(&[(z1, 1), (z2, 1)]));
        assert!(has(&[(z1, 2)]));
        assert!(has(&[(z2, 2)]));
    }

    #[test]
    fn poly_d_is_polynomial_up_to_5() {
        // No negative powers survive and z-degrees stay below d.
        for d in 1..=5 {
            let pd = poly_d(d).unwrap();
            assert!(pd.is_homogeneous((d - 1) as u32), "d={d}");
            for j in 1..d {
                assert!(pd.degree_in(&format!("z{j}")).unwrap_or(0) <= (d - 1) as u32);
            }
        }
    }

    #[test]
    fn delta_examples_degree_two() {
        let x = OrderedPartitionMonomial::from_exponents(2, &[1, 0, 0]);
        assert_eq!(x.delta(9, 3), vec![-1]);
        assert_eq!(x.factor_degrees(), vec![2]);

        let y = OrderedPartitionMonomial::from_exponents(2, &[0, 1, 0]);
        assert_eq!(y.delta(9, 3), vec![0]);

        let z1 = OrderedPartitionMonomial::from_exponents(2, &[0, 0, 1]);
        assert_eq!(z1.delta(9, 3), vec![0, 9 - 3]);
        assert_eq!(z1.factor_degrees(), vec![1, 1]);
    }

    #[test]
    fn phi_examples() {
        // Build a small level-(N+1) table by hand: window -2..8.
        let params = p(8, 3);
        let upper = virtual_constants(p(9, 3), 2, -4, 10).unwrap();
        let y = OrderedPartitionMonomial::from_exponents(2, &[0, 1, 0]);
        let z1 = OrderedPartitionMonomial::from_exponents(2, &[0, 0, 1]);
        let one = OrderedPartitionMonomial::from_exponents(1, &[0, 0]);
        let n = 1;
        // phi(y) at degree 2 -> L_n^{N+1,k,2}
        assert_eq!(
            phi(&y, n, params.n, params.k, &upper).unwrap(),
            *upper.get(2, n).unwrap()
        );
        // phi(z_1) -> L_n^{N+1,k,1} * L_{n+N-k}^{N+1,k,1}
        assert_eq!(
            phi(&z1, n, params.n, params.k, &upper).unwrap(),
            upper.get(1, n).unwrap() * upper.get(1, n + params.n - params.k).unwrap()
        );
        // phi(1) at degree 1 -> L_n^{N+1,k,1}: d = 1 constants level-independent
        assert_eq!(
            phi(&one, n, params.n, params.k, &upper).unwrap(),
            *upper.get(1, n).unwrap()
        );
    }

    #[test]
    fn degree_one_row_is_beauville_everywhere() {
        for (n, k) in [(5, 5), (7, 4), (11, 12), (6, 7)] {
            let t = virtual_constants_default(p(n, k), 2).unwrap();
            let b = beauville_init(k);
            let (lo, hi) = t.window(1).unwrap();
            for m in lo..=hi {
                let expect = if (0..k).contains(&m) {
                    b[m as usize].clone()
                } else {
                    Rat::zero()
                };
                assert_eq!(*t.get(1, m).unwrap(), expect, "n={n} k={k} m={m}");
            }
        }
    }

    #[test]
    fn quintic_degree_two_number() {
        let t = virtual_constants_default(p(5, 5), 2).unwrap();
        assert_eq!(*t.get(2, 0).unwrap(), rat(113400));
        // hand-propagated value for n = 1 (also the po oracle)
        assert_eq!(*t.get(2, 1).unwrap(), rat(1435650));
    }

    #[test]
    fn stable_range_all_zero_for_d_at_least_two() {
        let t = virtual_constants_default(p(30, 3), 3).unwrap();
        for d in 2..=3 {
            let (lo, hi) = t.window(d).unwrap();
            for m in lo..=hi {
                assert!(t.get(d, m).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn stable_range_fixed_point() {
        // One descent step inside N >= 2k maps (Beauville, 0, 0, ..) to
        // itself for every d <= 5.
        let params = p(8, 4);
        let direct = virtual_constants_default(params, 5).unwrap();
        let (lo, hi) = default_window(params, 5);
        let stepped = virtual_constants_from(params, 5, lo, hi, 11).unwrap();
        for d in 1..=5 {
            let (a, b) = direct.window(d).unwrap();
            for m in a..=b {
                assert_eq!(direct.get(d, m).unwrap(), stepped.get(d, m).unwrap());
            }
        }
    }

    #[test]
    fn cy_oracle_values() {
        let (a, b) = cy_hypergeom_oracle(5, 1);
        assert_eq!(a, rat(120));
        assert_eq!(b, rat(770));
        let (a2, b2) = cy_hypergeom_oracle(5, 2);
        assert_eq!(a2, rat(113400));
        assert_eq!(b2, rat(1435650));
    }

    #[test]
    fn virtual_table_symmetry_at_cy() {
        // L~_n = L~_{N-1+(k-N)d-n} on the natural window
        let t = virtual_constants_default(p(5, 5), 3).unwrap();
        for d in 1..=3 {
            for n in 0..=4 {
                assert_eq!(t.get(d, n).unwrap(), t.get(d, 4 - n).unwrap());
            }
        }
    }

    #[test]
    fn near_fano_degree_one_modification() {
        // k = 3: L_1^{4,3,1} = 15 - 3! = 9
        let t = true_constants_near_fano_default(p(4, 3), 2).unwrap();
        assert_eq!(*t.get(1, 1).unwrap(), rat(9));
        assert_eq!(*t.get(1, 0).unwrap(), rat(0));
        assert_eq!(*t.get(1, 2).unwrap(), rat(0));
    }

    #[test]
    fn fano_true_equals_virtual_entrywise() {
        let params = p(7, 5);
        let tv = virtual_constants_default(params, 3).unwrap();
        let tt = true_constants_near_fano_default(params, 3).unwrap();
        for d in 1..=3 {
            let (lo, hi) = tv.window(d).unwrap();
            for m in lo..=hi {
                assert_eq!(tv.get(d, m).unwrap(), tt.get(d, m).unwrap());
            }
        }
    }

    #[test]
    fn relation_checks_pass() {
        assert!(quantum_relation_check(p(10, 3), 3).unwrap().holds);
        assert!(quantum_relation_check(p(6, 5), 2).unwrap().holds);
    }

    #[test]
    fn classical_part_is_nilpotent() {
        // q^0 part alone: (O_e)^{N-1} = 0 for the companion shift matrix.
        let params = p(7, 4);
        let table = true_constants_near_fano_default(params, 2).unwrap();
        let mat = quantum_matrix(&table, 2).unwrap();
        let classical: QMatrix = mat
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| {
                        let mut q = qp_zero(2);
                        q[0] = e[0].clone();
                        q
                    })
                    .collect()
            })
            .collect();
        let pn = qm_pow(&classical, params.n - 1);
        for row in &pn {
            for e in row {
                assert!(e[0].is_zero());
            }
        }
    }
}
