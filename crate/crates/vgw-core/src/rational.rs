//! Exact rational scalars.
//!
//! Every numeric value in this crate is a [`Rat`]: an arbitrary-precision
//! signed rational kept in lowest terms with a positive denominator. Those
//! invariants are maintained by `num-rational`'s reduction on construction
//! and on every arithmetic operation, so arithmetic never rounds.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Arbitrary-precision exact rational.
pub type Rat = BigRational;

/// Rational from a machine integer.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational `p/q`. Panics if `q == 0`.
pub fn rat_frac(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// `n!` as a big integer; `n < 0` is a caller bug.
pub fn factorial(n: i64) -> BigInt {
    assert!(n >= 0, "factorial of negative argument");
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

/// Integer power with signed exponent. `base` must be nonzero when `e < 0`.
pub fn pow_i(base: &Rat, e: i64) -> Rat {
    if e >= 0 {
        base.pow(e as u32 as i32)
    } else {
        assert!(!base.is_zero(), "negative power of zero");
        base.pow(e as i32)
    }
}

/// Render as `p/q` with the denominator always present (`5` prints `5/1`).
pub fn fmt_exact(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Render as `p` when integral, `p/q` otherwise.
pub fn fmt_short(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse `p` or `p/q`. `q` must be nonzero.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().ok()?;
            let q: BigInt = q.trim().parse().ok()?;
            if q.is_zero() {
                return None;
            }
            Some(Rat::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().ok()?;
            Some(Rat::from_integer(p))
        }
    }
}

/// True if `r` is a (possibly negative) integer.
pub fn is_integral(r: &Rat) -> bool {
    r.is_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_rat() -> impl Strategy<Value = Rat> {
        (-2000i64..2000, 1i64..200).prop_map(|(p, q)| rat_frac(p, q))
    }

    #[test]
    fn lowest_terms_and_positive_denominator() {
        let r = rat_frac(6, -4);
        assert_eq!(r.numer(), &BigInt::from(-3));
        assert_eq!(r.denom(), &BigInt::from(2));
    }

    #[test]
    fn parse_round_trip() {
        for s in ["0/1", "-3/2", "113400/1", "7"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(parse_rat(&fmt_exact(&r)).unwrap(), r);
        }
        assert!(parse_rat("1/0").is_none());
        assert!(parse_rat("x").is_none());
    }

    proptest! {
        // Field axioms on randomized inputs: exactness means these hold
        // on the nose, not up to epsilon.
        #[test]
        fn field_axioms(a in arb_rat(), b in arb_rat(), c in arb_rat()) {
            prop_assert_eq!((&a + &b) + &c, &a + (&b + &c));
            prop_assert_eq!((&a * &b) * &c, &a * (&b * &c));
            prop_assert_eq!(&a * (&b + &c), &a * &b + &a * &c);
            prop_assert_eq!(&a + (-&a), rat(0));
            if !a.is_zero() {
                prop_assert_eq!(&a * &(Rat::one() / &a), Rat::one());
            }
        }

        #[test]
        fn pow_i_inverts(a in arb_rat()) {
            if !a.is_zero() {
                prop_assert_eq!(pow_i(&a, -3) * pow_i(&a, 3), Rat::one());
            }
        }
    }
}
