//! Exact iterated residues of products of factors `A^2/(A - z)`.
//!
//! The integrand is a rational function whose denominators are affine
//! forms in the integration variables, and that class is closed under
//! single-variable residues: a residue at a simple pole substitutes an
//! affine expression and divides by the pole's linear coefficient. The
//! result of the full iteration is a homogeneous polynomial in the
//! non-integrated variables.
//!
//! Contour prescription: the `t_i` integral encloses the origin together
//! with the pole of the *i-th factor* `A_i = z_i`, and separates it from
//! the poles of the other factors and from every pole created by earlier
//! substitutions. Each denominator carries its provenance so the choice is
//! mechanical.
//!
//! Implementation: the residue tree is evaluated at exact rational sample
//! points (pure affine scalar arithmetic), and the polynomial is
//! reconstructed by exact linear solving over the homogeneous monomial
//! basis. Reconstruction is verified on held-out points; a mismatch means
//! the sum of residues is not the expected polynomial (a wrong contour
//! prescription), and is reported as a fatal diagnostic, never truncated
//! away.

use num_traits::{One, Zero};

use crate::multipoly::MultiPoly;
use crate::rational::{rat, Rat};
use crate::{Error, Result};

/// One factor `A^2/(A - z)` of the integrand: the affine form `A` (in the
/// integration and coefficient variables) and the class `z` it is coupled
/// to (a single variable in practice).
#[derive(Clone, Debug)]
pub struct ResidueFactor {
    pub affine: MultiPoly,
    pub z: MultiPoly,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Provenance {
    /// The `1/(A_j - z_j)` of factor `j` (1-based).
    Factor(usize),
    /// Created by substituting a pole location into a measure factor or an
    /// already-derived denominator; never enclosed again.
    Derived,
}

/// Affine form in the integration variables with exact scalar data:
/// `const + sum_i coeffs[i] t_{i+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct AffineQ {
    coeffs: Vec<Rat>,
    constant: Rat,
}

impl AffineQ {
    fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.coeffs.iter().all(Rat::is_zero)
    }

    /// Substitute `t_{var} := replacement` (an affine form without `t_{var}`).
    fn subst(&self, var: usize, replacement: &AffineQ) -> AffineQ {
        let g = self.coeffs[var].clone();
        let mut out = self.clone();
        out.coeffs[var] = Rat::zero();
        if g.is_zero() {
            return out;
        }
        out.constant += &g * &replacement.constant;
        for (o, r) in out.coeffs.iter_mut().zip(&replacement.coeffs) {
            *o += &g * r;
        }
        out
    }
}

#[derive(Clone, Debug)]
struct FracQ {
    scalar: Rat,
    /// Numerator: product of affine forms (all eventually constant).
    nums: Vec<AffineQ>,
    dens: Vec<(AffineQ, Provenance)>,
}

/// Signals a sample point that ran into a degeneracy (vanishing
/// denominator or pole collision); the caller resamples.
struct BadPoint;

fn eval_at_point(
    factors: &[(AffineQ, Rat)], // (A_j at the point, z_j value)
    m: usize,
) -> std::result::Result<Rat, BadPoint> {
    let mut fracs = vec![FracQ {
        scalar: Rat::one(),
        nums: factors
            .iter()
            .flat_map(|(a, _)| [a.clone(), a.clone()])
            .collect(),
        dens: factors
            .iter()
            .enumerate()
            .map(|(j, (a, zv))| {
                let mut den = a.clone();
                den.constant -= zv;
                (den, Provenance::Factor(j + 1))
            })
            .collect(),
    }];

    // Innermost integral first: t_m down to t_1. Variable index var = step-1.
    for step in (1..=m).rev() {
        let var = step - 1;
        let mut next: Vec<FracQ> = Vec::new();
        for frac in &fracs {
            // Candidate poles: the measure 1/t_step, plus enclosed
            // denominators (provenance = this step's factor).
            let measure = {
                let mut a = AffineQ {
                    coeffs: vec![Rat::zero(); m],
                    constant: Rat::zero(),
                };
                a.coeffs[var] = Rat::one();
                a
            };
            let mut poles: Vec<(AffineQ, Option<usize>)> = vec![(measure.clone(), None)];
            for (pos, (den, prov)) in frac.dens.iter().enumerate() {
                if *prov == Provenance::Factor(step) && !den.coeffs[var].is_zero() {
                    poles.push((den.clone(), Some(pos)));
                }
            }
            for (pole, taken) in poles {
                let gamma = pole.coeffs[var].clone();
                if gamma.is_zero() {
                    continue; // measure handled below; factor poles filtered
                }
                // location: t_var = -(pole with t_var struck)/gamma
                let mut loc = pole.clone();
                loc.coeffs[var] = Rat::zero();
                let neg_inv = -Rat::one() / &gamma;
                loc.constant *= &neg_inv;
                for c in loc.coeffs.iter_mut() {
                    *c *= &neg_inv;
                }
                let mut out = FracQ {
                    scalar: &frac.scalar / &gamma,
                    nums: frac.nums.iter().map(|a| a.subst(var, &loc)).collect(),
                    dens: Vec::with_capacity(frac.dens.len()),
                };
                for (pos, (den, prov)) in frac.dens.iter().enumerate() {
                    if Some(pos) == taken {
                        continue;
                    }
                    let sub = den.subst(var, &loc);
                    if sub.is_zero() {
                        return Err(BadPoint); // pole collision at this point
                    }
                    let p = match (taken, prov) {
                        // Substituting around keeps factor provenance;
                        // everything else becomes derived.
                        (_, Provenance::Factor(j)) => Provenance::Factor(*j),
                        _ => Provenance::Derived,
                    };
                    out.dens.push((sub, p));
                }
                if taken.is_some() {
                    // The measure factor 1/t_step evaluated at the pole
                    // becomes a derived denominator.
                    let sub = measure.subst(var, &loc);
                    if sub.is_zero() {
                        return Err(BadPoint);
                    }
                    out.dens.push((sub, Provenance::Derived));
                }
                next.push(out);
            }
        }
        fracs = next;
    }

    // All variables are gone: everything is constant.
    let mut total = Rat::zero();
    for frac in fracs {
        let mut v = frac.scalar;
        for n in &frac.nums {
            debug_assert!(n.coeffs.iter().all(Rat::is_zero));
            v *= &n.constant;
        }
        for (d, _) in &frac.dens {
            debug_assert!(d.coeffs.iter().all(Rat::is_zero));
            if d.constant.is_zero() {
                return Err(BadPoint);
            }
            v /= &d.constant;
        }
        total += v;
    }
    Ok(total)
}

/// Homogeneous monomial exponent vectors of total degree `deg` over
/// `nvars` variables, lexicographic.
fn homogeneous_monomials(nvars: usize, deg: u32) -> Vec<Vec<u16>> {
    fn rec(nvars: usize, deg: u32, prefix: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if nvars == 1 {
            let mut v = prefix.clone();
            v.push(deg as u16);
            out.push(v);
            return;
        }
        for e in 0..=deg {
            prefix.push(e as u16);
            rec(nvars - 1, deg - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(nvars, deg, &mut Vec::new(), &mut out);
    out
}

/// Small deterministic generator for sample coordinates; reproducibility
/// matters more than statistical quality here.
struct Lcg(u64);

impl Lcg {
    fn next_coord(&mut self) -> Rat {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        // odd values in a wide range keep accidental degeneracies rare
        rat(((self.0 >> 16) % 2_000_003) as i64 * 2 + 1)
    }
}

/// Iterated contour extraction
/// `(1/2 pi i)^m \oint dt_1/t_1 .. \oint dt_m/t_m prod_j A_j^2/(A_j - z_j)`
/// with the innermost integral first (`t_m, .., t_1`); `factors[j-1]` is
/// the factor paired with `t_j`. Every factor must be homogeneous of
/// degree one, so the result is homogeneous of degree `m` in the
/// non-integrated variables.
pub fn iterated_residue(factors: &[ResidueFactor], t_order: &[&str]) -> Result<MultiPoly> {
    if factors.is_empty() {
        return Err(Error::InvalidParams(
            "iterated_residue needs at least one factor; the empty product is the caller's case"
                .into(),
        ));
    }
    let m = factors.len();
    assert_eq!(m, t_order.len(), "one integration variable per factor");
    let vars = factors[0].affine.vars().clone();
    for f in factors {
        assert!(
            f.affine.is_homogeneous(1) && f.z.is_homogeneous(1),
            "residue factors must be homogeneous affine forms"
        );
    }

    // Verify the order is t_m .. t_1 and locate variable positions.
    let mut t_idx = Vec::with_capacity(m);
    for (pos, name) in t_order.iter().enumerate() {
        let step: usize = name
            .trim_start_matches(|c: char| !c.is_ascii_digit())
            .parse()
            .map_err(|_| Error::InvalidParams(format!("bad integration variable {name}")))?;
        if step != m - pos {
            return Err(Error::InvalidParams(
                "integration order must run t_m down to t_1".into(),
            ));
        }
        let idx = vars
            .iter()
            .position(|v| v == *name)
            .ok_or_else(|| Error::InvalidParams(format!("unknown variable {name}")))?;
        t_idx.push(idx);
    }
    t_idx.reverse(); // t_idx[i] = universe position of t_{i+1}

    let cvar_idx: Vec<usize> = (0..vars.len()).filter(|i| !t_idx.contains(i)).collect();
    let ncv = cvar_idx.len();
    let deg = m as u32;
    let monomials = homogeneous_monomials(ncv, deg);
    let unknowns = monomials.len();
    let extra = 8;

    let mut rng = Lcg(0x5eed_1234_abcd_0001);
    let mut rows: Vec<(Vec<Rat>, Rat)> = Vec::new();
    let mut attempts = 0;
    while rows.len() < unknowns + extra {
        attempts += 1;
        if attempts > 16 * (unknowns + extra) {
            return Err(Error::ResidueDiagnostic(
                "could not find enough nondegenerate sample points".into(),
            ));
        }
        let point: Vec<Rat> = (0..ncv).map(|_| rng.next_coord()).collect();
        // Evaluate the coefficient variables, keeping the t's symbolic.
        let at_point = |p: &MultiPoly| -> Option<(AffineQ, Rat)> {
            // returns affine-in-t part and constant from cvars
            let mut aff = AffineQ {
                coeffs: vec![Rat::zero(); m],
                constant: Rat::zero(),
            };
            for (exps, coef) in p.terms() {
                if let Some(ti) = t_idx.iter().position(|&i| exps[i] == 1) {
                    aff.coeffs[ti] += coef;
                } else {
                    // pure cvar monomial of degree one
                    let mut v = coef.clone();
                    for (ci, &u) in cvar_idx.iter().enumerate() {
                        for _ in 0..exps[u] {
                            v *= &point[ci];
                        }
                    }
                    aff.constant += v;
                }
            }
            Some((aff, Rat::zero()))
        };
        let mut fs = Vec::with_capacity(m);
        for f in factors {
            let (a, _) = at_point(&f.affine).unwrap();
            let (zv, _) = at_point(&f.z).unwrap();
            debug_assert!(zv.coeffs.iter().all(Rat::is_zero), "z involves a t-variable");
            fs.push((a, zv.constant));
        }
        match eval_at_point(&fs, m) {
            Ok(value) => {
                let row: Vec<Rat> = monomials
                    .iter()
                    .map(|mono| {
                        let mut v = Rat::one();
                        for (ci, &e) in mono.iter().enumerate() {
                            for _ in 0..e {
                                v *= &point[ci];
                            }
                        }
                        v
                    })
                    .collect();
                rows.push((row, value));
            }
            Err(BadPoint) => continue,
        }
    }

    let coeffs = solve_square(&rows[..unknowns], unknowns).ok_or_else(|| {
        Error::ResidueDiagnostic("singular interpolation system for the residue".into())
    })?;
    // Held-out verification: if the residue sum were not a homogeneous
    // polynomial of this degree, these would not fit.
    for (row, value) in &rows[unknowns..] {
        let mut got = Rat::zero();
        for (c, r) in coeffs.iter().zip(row) {
            got += c * r;
        }
        if got != *value {
            return Err(Error::ResidueDiagnostic(
                "iterated residue is not a homogeneous polynomial of the expected degree \
                 (wrong contour prescription for this integrand)"
                    .into(),
            ));
        }
    }

    let mut out = MultiPoly::zero(&vars);
    for (mono, c) in monomials.iter().zip(coeffs) {
        if c.is_zero() {
            continue;
        }
        let mut exps = vec![0u16; vars.len()];
        for (ci, &e) in mono.iter().enumerate() {
            exps[cvar_idx[ci]] = e;
        }
        out = out.add(&MultiPoly::monomial(&vars, exps, c));
    }
    Ok(out)
}

/// Exact Gaussian elimination for a square system; `None` when singular.
fn solve_square(rows: &[(Vec<Rat>, Rat)], n: usize) -> Option<Vec<Rat>> {
    let mut mat: Vec<Vec<Rat>> = rows
        .iter()
        .map(|(r, v)| {
            let mut row = r.clone();
            row.push(v.clone());
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !mat[r][col].is_zero())?;
        mat.swap(col, piv);
        let inv = Rat::one() / mat[col][col].clone();
        for v in mat[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..n {
            if r != col && !mat[r][col].is_zero() {
                let f = mat[r][col].clone();
                for c in col..=n {
                    let delta = &f * &mat[col][c];
                    mat[r][c] -= delta;
                }
            }
        }
    }
    Some(mat.into_iter().map(|row| row[n].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipoly::vars;
    use crate::rational::rat_frac;

    #[test]
    fn degree_two_matches_partial_fraction_oracle() {
        // Single factor A^2/(A - z1) with A = (x+y)/2 + t1. The oracle sums
        // the two finite residues by hand: c^2/(c - z1) at t1 = 0 plus
        // z1^2/(z1 - c) at A = z1, which is (c^2 - z1^2)/(c - z1) = c + z1.
        let vs = vars(["x", "y", "z1", "t1"]);
        let c = MultiPoly::var(&vs, "x")
            .add(&MultiPoly::var(&vs, "y"))
            .scale(&rat_frac(1, 2));
        let a = c.add(&MultiPoly::var(&vs, "t1"));
        let z1 = MultiPoly::var(&vs, "z1");
        let got = iterated_residue(
            &[ResidueFactor {
                affine: a,
                z: z1.clone(),
            }],
            &["t1"],
        )
        .unwrap();

        let oracle_num = c.mul(&c).sub(&z1.mul(&z1));
        let oracle_den = c.sub(&z1);
        let oracle = oracle_num.exact_div(&oracle_den).unwrap();
        assert_eq!(got, oracle);
        assert_eq!(got, c.add(&z1));
    }

    #[test]
    fn non_polynomial_residual_is_fatal() {
        // A factor whose affine form does not involve its own variable
        // leaves only the origin residue x^2/(x - z1): not polynomial.
        let vs = vars(["x", "z1", "t1"]);
        let a = MultiPoly::var(&vs, "x");
        let z1 = MultiPoly::var(&vs, "z1");
        let r = iterated_residue(&[ResidueFactor { affine: a, z: z1 }], &["t1"]);
        assert!(matches!(r, Err(Error::ResidueDiagnostic(_))));
    }
}
