//! Exact scalars, the (q, mu) parameter context and q-combinatorial numbers.
//!
//! The ground field is the rationals at a fixed specialization q = s^2.
//! Working with s rather than q keeps the half-integer powers that appear in
//! the odd orthogonal R-matrix rational.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Scalar = BigRational;

pub fn int(v: i64) -> Scalar {
    Scalar::from_integer(BigInt::from(v))
}

pub fn frac(p: i64, q: i64) -> Scalar {
    Scalar::new(BigInt::from(p), BigInt::from(q))
}

/// Canonical "p/q" rendering used by reports and goldens (integers as "p/1").
pub fn fmt_scalar(x: &Scalar) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn parse_scalar(text: &str) -> Result<Scalar> {
    let t = text.trim();
    let bad = || Error::Parse(format!("not a rational: {t:?}"));
    match t.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Scalar::new(p, q))
        }
        None => Ok(Scalar::from_integer(BigInt::from_str(t).map_err(|_| bad())?)),
    }
}

/// x^e for any integer e (x must be nonzero when e < 0).
pub fn pow(x: &Scalar, e: i64) -> Scalar {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Series {
    Sp,
    O,
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Series::Sp => write!(f, "sp"),
            Series::O => write!(f, "so"),
        }
    }
}

impl FromStr for Series {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Ok(Series::Sp),
            "so" | "o" => Ok(Series::O),
            other => Err(Error::Config(format!("unknown series {other:?}"))),
        }
    }
}

/// Parameters of one orthogonal or symplectic specialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QContext {
    pub s: Scalar,
    pub q: Scalar,
    pub series: Series,
    pub k: usize,
    pub mu: Scalar,
    pub eta: Scalar,
    pub n: usize,
}

impl QContext {
    /// Sp(2k): N = 2k, mu = -q^(-1-2k). O(k): N = k, mu = q^(1-k).
    pub fn new(series: Series, k: usize, s: Scalar) -> Result<Self> {
        if s.is_zero() || s.abs().is_one() {
            return Err(Error::Config(format!("s = {} is excluded (need s not in {{0, 1, -1}})", fmt_scalar(&s))));
        }
        if k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        let q = &s * &s;
        let (n, mu) = match series {
            Series::Sp => (2 * k, -pow(&q, -1 - 2 * k as i64)),
            Series::O => (k, pow(&q, 1 - k as i64)),
        };
        let ctx = Self::with_mu(series, k, n, s, mu)?;
        for i in 2..=k as i64 {
            if ctx.qnum(i).is_zero() {
                return Err(Error::Config(format!("{i}_q vanishes")));
            }
        }
        Ok(ctx)
    }

    /// Context with an explicit mu (used when certifying user-supplied R).
    pub fn with_mu(series: Series, k: usize, n: usize, s: Scalar, mu: Scalar) -> Result<Self> {
        let q = &s * &s;
        let qi = q.recip();
        if q == qi {
            return Err(Error::Config("q = 1/q".into()));
        }
        if mu.is_zero() {
            return Err(Error::Pole("mu = 0".into()));
        }
        let eta = (&q - &mu) * (&qi + &mu) / (&mu * (&q - &qi));
        Ok(Self { s, q, series, k, mu, eta, n })
    }

    pub fn qinv(&self) -> Scalar {
        self.q.recip()
    }

    /// q - q^-1
    pub fn lambda(&self) -> Scalar {
        &self.q - self.qinv()
    }

    pub fn qpow(&self, e: i64) -> Scalar {
        pow(&self.q, e)
    }

    /// s^e = q^(e/2).
    pub fn spow(&self, e: i64) -> Scalar {
        pow(&self.s, e)
    }

    pub fn mupow(&self, e: i64) -> Scalar {
        pow(&self.mu, e)
    }

    pub fn qnum(&self, i: i64) -> Scalar {
        qnum(i, self)
    }

    pub fn qfact(&self, i: usize) -> Scalar {
        (1..=i as i64).fold(Scalar::one(), |acc, j| acc * self.qnum(j))
    }

    /// Tr_R I = mu * eta.
    pub fn trace_identity(&self) -> Scalar {
        &self.mu * &self.eta
    }
}

/// i_q = (q^i - q^-i)/(q - q^-1).
pub fn qnum(i: i64, ctx: &QContext) -> Scalar {
    (ctx.qpow(i) - ctx.qpow(-i)) / ctx.lambda()
}

/// delta_i(q, mu): ratio of consecutive R-traces of antisymmetrizers.
pub fn delta_i(i: i64, ctx: &QContext) -> Result<Scalar> {
    let mu = &ctx.mu;
    let den_mu = mu + ctx.qpow(3 - 2 * i);
    let iq = ctx.qnum(i);
    if den_mu.is_zero() {
        return Err(Error::Pole(format!("mu = -q^(3-2i) at i = {i}")));
    }
    if iq.is_zero() {
        return Err(Error::Pole(format!("{i}_q = 0")));
    }
    let num = -ctx.qpow(i - 1) * (mu + ctx.qpow(1 - 2 * i)) * (mu * mu - ctx.qpow(4 - 2 * i));
    Ok(num / (den_mu * ctx.lambda() * iq))
}

/// Closed form of the orthogonal q-dimension Delta^(i) at mu = q^(1-k).
pub fn qdim_orthogonal(i: usize, ctx: &QContext) -> Scalar {
    let k = ctx.k;
    assert!(i <= k);
    let (i64i, k64) = (i as i64, k as i64);
    ctx.qpow(i64i * (1 - k64)) * (ctx.qpow(i64i) + ctx.qpow(k64 - i64i)) / (ctx.qpow(k64) + Scalar::one())
        * ctx.qfact(k)
        / (ctx.qfact(i) * ctx.qfact(k - i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_o3() -> QContext {
        QContext::new(Series::O, 3, frac(3, 2)).unwrap()
    }

    #[test]
    fn qnum_basics() {
        let c = ctx_o3();
        assert_eq!(c.qnum(1), int(1));
        assert_eq!(c.qnum(2), &c.q + c.qinv());
        assert_eq!(c.qnum(-3), -c.qnum(3));
        let c4 = QContext::new(Series::O, 3, int(2)).unwrap();
        assert_eq!(c4.qnum(3), frac(273, 16));
    }

    #[test]
    fn scalar_round_trip() {
        for t in ["3/2", "-7/3", "5/1", "0/1"] {
            assert_eq!(fmt_scalar(&parse_scalar(t).unwrap()), t);
        }
        assert_eq!(parse_scalar("4").unwrap(), int(4));
        assert!(parse_scalar("1/0").is_err());
        assert!(parse_scalar("x").is_err());
    }

    #[test]
    fn context_parameters() {
        let c = ctx_o3();
        assert_eq!(c.mu, c.qpow(-2));
        assert_eq!(c.n, 3);
        let sp = QContext::new(Series::Sp, 2, frac(3, 2)).unwrap();
        assert_eq!(sp.mu, -sp.qpow(-5));
        assert_eq!(sp.n, 4);
        assert!(QContext::new(Series::O, 3, int(1)).is_err());
        assert!(QContext::new(Series::O, 3, int(0)).is_err());
    }

    #[test]
    fn delta_vanishes_past_rank() {
        for (series, k) in [(Series::O, 3), (Series::O, 4), (Series::Sp, 2), (Series::Sp, 3)] {
            let c = QContext::new(series, k, frac(5, 2)).unwrap();
            assert!(delta_i(k as i64 + 1, &c).unwrap().is_zero(), "{series} {k}");
        }
    }

    #[test]
    fn delta_one_is_trace_of_identity() {
        let c = QContext::new(Series::Sp, 2, frac(7, 3)).unwrap();
        assert_eq!(delta_i(1, &c).unwrap(), c.trace_identity());
    }
}
