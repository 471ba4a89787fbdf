//! Exact rationals, closed rational intervals and interval streams.
//!
//! A total real of the extensional domain is an ideal of rational intervals
//! whose intersection is a single point. It is presented here as an
//! [`IntervalStream`]: a producer answering, for every precision `p`, a
//! closed interval of width at most `2^-p` that contains the real. Answers
//! are intersected as they are produced, so the observable chain is always
//! nested.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use parking_lot::Mutex;

use crate::{Error, Result};

/// Arbitrary precision rational, always in lowest terms with a positive
/// denominator.
pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn nat(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `n / d`; panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// `2^-p`.
pub fn pow2_neg(p: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << p)
}

/// Largest integer `<= x`.
pub fn floor(x: &Rational) -> BigInt {
    x.numer().div_floor(x.denom())
}

/// Nearest integer, rounding halves upward.
pub fn round_half_up(x: &Rational) -> BigInt {
    floor(&(x + rat(1, 2)))
}

/// Smallest `e` with `|x| <= 2^e` (0 for `|x| <= 1`).
pub fn log2_ceil(x: &Rational) -> u32 {
    let mut e = 0;
    let mut bound = Rational::one();
    let a = x.abs();
    while bound < a {
        bound *= int(2);
        e += 1;
    }
    e
}

pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::MalformedRational(s.to_string());
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
    }
}

/// Closed interval `[lo, hi]` with rational endpoints, `lo <= hi`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatInterval {
    lo: Rational,
    hi: Rational,
}

impl RatInterval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidInterval {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        Ok(RatInterval { lo, hi })
    }

    /// Builds the interval spanned by two endpoints given in either order.
    pub fn spanning(a: Rational, b: Rational) -> Self {
        if a <= b {
            RatInterval { lo: a, hi: b }
        } else {
            RatInterval { lo: b, hi: a }
        }
    }

    pub fn point(x: Rational) -> Self {
        RatInterval { lo: x.clone(), hi: x }
    }

    /// `[c - r, c + r]` for `r >= 0`.
    pub fn centered(c: &Rational, r: &Rational) -> Self {
        debug_assert!(!r.is_negative());
        RatInterval { lo: c - r, hi: c + r }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn midpoint(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &RatInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// `self ⊆ (lo, hi)` for an open interval.
    pub fn inside_open(&self, lo: &Rational, hi: &Rational) -> bool {
        lo < &self.lo && &self.hi < hi
    }

    pub fn intersects(&self, other: &RatInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Intersection, or `None` when the intervals are disjoint.
    pub fn meet(&self, other: &RatInterval) -> Option<RatInterval> {
        if !self.intersects(other) {
            return None;
        }
        Some(RatInterval {
            lo: (&self.lo).max(&other.lo).clone(),
            hi: (&self.hi).min(&other.hi).clone(),
        })
    }

    /// Smallest interval containing both.
    pub fn join(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    pub fn add(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn sub(&self, other: &RatInterval) -> RatInterval {
        RatInterval {
            lo: &self.lo - &other.hi,
            hi: &self.hi - &other.lo,
        }
    }

    pub fn shift(&self, c: &Rational) -> RatInterval {
        RatInterval {
            lo: &self.lo + c,
            hi: &self.hi + c,
        }
    }

    pub fn scale(&self, c: &Rational) -> RatInterval {
        RatInterval::spanning(&self.lo * c, &self.hi * c)
    }

    pub fn mul(&self, other: &RatInterval) -> RatInterval {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().cloned().unwrap_or_default();
        let hi = products.iter().max().cloned().unwrap_or_default();
        RatInterval { lo, hi }
    }

    /// Pointwise `min(c, x)`.
    pub fn min_scalar(&self, c: &Rational) -> RatInterval {
        RatInterval {
            lo: (&self.lo).min(c).clone(),
            hi: (&self.hi).min(c).clone(),
        }
    }

    /// Distance from the interval to a point (0 if it contains the point).
    pub fn distance_to(&self, x: &Rational) -> Rational {
        if x < &self.lo {
            &self.lo - x
        } else if x > &self.hi {
            x - &self.hi
        } else {
            Rational::zero()
        }
    }

    /// Largest distance from a point of the interval to `x`.
    pub fn max_distance_to(&self, x: &Rational) -> Rational {
        let a = (&self.lo - x).abs();
        let b = (&self.hi - x).abs();
        a.max(b)
    }
}

impl fmt::Display for RatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl FromStr for RatInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::MalformedRational(t.to_string()))?;
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::MalformedRational(t.to_string()))?;
        RatInterval::new(parse_rational(a)?, parse_rational(b)?)
    }
}

/// Intersection of two closed intervals; `None` when disjoint.
pub fn iv_meet(a: &RatInterval, b: &RatInterval) -> Option<RatInterval> {
    a.meet(b)
}

type Producer = dyn Fn(u32) -> RatInterval + Send + Sync;

struct StreamInner {
    producer: Box<Producer>,
    chain: Mutex<Vec<RatInterval>>,
}

/// A total real presented by precision-indexed rational intervals.
///
/// The producer must return, for each `p`, an interval of width at most
/// `2^-p` containing the represented real. Queries return the intersection
/// of all answers up to `p`, memoized behind a lock so the stream can be
/// shared between threads.
#[derive(Clone)]
pub struct IntervalStream {
    inner: Arc<StreamInner>,
}

impl IntervalStream {
    pub fn from_fn<F>(producer: F) -> Self
    where
        F: Fn(u32) -> RatInterval + Send + Sync + 'static,
    {
        IntervalStream {
            inner: Arc::new(StreamInner {
                producer: Box::new(producer),
                chain: Mutex::new(Vec::new()),
            }),
        }
    }

    /// The stream whose every answer is the point `x`.
    pub fn constant(x: Rational) -> Self {
        IntervalStream::from_fn(move |_| RatInterval::point(x.clone()))
    }

    /// Interval of width at most `2^-p` containing the represented real.
    ///
    /// Panics if the producer violates its contract by answering an
    /// interval disjoint from an earlier answer.
    pub fn query(&self, p: u32) -> RatInterval {
        let p = p as usize;
        {
            let chain = self.inner.chain.lock();
            if let Some(iv) = chain.get(p) {
                return iv.clone();
            }
        }
        // Producers may query other streams, so they run without the lock.
        loop {
            let next = self.inner.chain.lock().len();
            if next > p {
                break;
            }
            let fresh = (self.inner.producer)(next as u32);
            debug_assert!(
                fresh.width() <= pow2_neg(next as u32),
                "interval stream producer violated the width contract at p={next}"
            );
            let mut chain = self.inner.chain.lock();
            if chain.len() != next {
                continue;
            }
            let narrowed = match chain.last() {
                Some(prev) => prev
                    .meet(&fresh)
                    .unwrap_or_else(|| panic!("interval stream answers {prev} and {fresh} are disjoint")),
                None => fresh,
            };
            chain.push(narrowed);
        }
        self.inner.chain.lock()[p].clone()
    }

    /// Prefix table `p=0:[..] p=1:[..] ...` for precisions `0..=upto`.
    pub fn prefix_table(&self, upto: u32) -> String {
        (0..=upto)
            .map(|p| format!("p={}:{}", p, self.query(p)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Debug for IntervalStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntervalStream")
            .field("computed", &self.inner.chain.lock().len())
            .finish()
    }
}

/// The representative of the natural number `n`.
pub fn embed_nat(n: u64) -> IntervalStream {
    IntervalStream::constant(nat(n))
}

pub fn stream_query(x: &IntervalStream, p: u32) -> RatInterval {
    x.query(p)
}
