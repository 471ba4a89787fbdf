//! Embeddings of type-1 and type-2 functionals into the real hierarchies.
//!
//! `pi1` interpolates a function on the naturals linearly. `pi2` sends a
//! type-2 functional `F` to a functional on real functions `g`. When every
//! `g(b)` sits within `1/3` of a natural `f_g(b)` the value is `F(f_g)`.
//! Otherwise `g` is scored by the distances `d(g, n)` from `g(η_n)` to the
//! naturals, and the value is the weighted sum
//!
//! ```text
//! Σ_n  w_n · E_n,    E_n = Σ_{a ∈ X^1_n} F(a) · μ_{n,g}(a)
//! ```
//!
//! where `μ_{n,g}` is the product of the point distributions
//! `μ_{min(n, g(b))}` over `b ≤ n`.
//!
//! In partition mode the weights sum to 1 whenever some `d(g, n)` is
//! positive, and `E_n = F(f_g)` for all `n` past the part of `f_g` that `F`
//! inspects. Both cases are therefore covered by
//! `F(f_g) + Σ_{n < n0} w_n · (E_n - F(f_g))`, which needs no decision
//! between them. Literal mode keeps the original `z_n` clauses, whose
//! weights need not sum to 1; there a first case can only be recognised
//! heuristically.
//!
//! Only `k <= 2` is instantiated. At higher types the same recursion runs
//! over `X^{k-1}_n`, with `η_n` enumerating a dense subset of type `k-2`.

use std::cell::{Cell, RefCell};
use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::digits::{extract_prefix, from_intervals, normalize, Digit, DigitSeq, DigitStream};
use crate::exact::{floor, int, nat, pow2_neg, rat, round_half_up, IntervalStream, RatInterval, Rational};
use crate::kk::{clip, enum_x, Nat, TotalFn1, TotalFn2, ENUM_CAP};
use crate::{Error, Result};

type IntervalFn = dyn Fn(&RatInterval, u32) -> Option<RatInterval> + Send + Sync;

/// A total element of `E(1)`, given by interval evaluation.
///
/// `apply(x, p)` returns an enclosure of the image of `x` (or `None`, the
/// bottom answer). Answers must be monotone in `x`, and on point inputs
/// they must reach width `2^-p`.
#[derive(Clone)]
pub struct RealFn1 {
    f: Arc<IntervalFn>,
}

impl RealFn1 {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&RatInterval, u32) -> Option<RatInterval> + Send + Sync + 'static,
    {
        RealFn1 { f: Arc::new(f) }
    }

    pub fn apply(&self, x: &RatInterval, p: u32) -> Option<RatInterval> {
        (self.f)(x, p)
    }

    /// Enclosure of `g(b)` for a natural `b`.
    pub fn at_nat(&self, b: Nat, p: u32) -> Option<RatInterval> {
        self.apply(&RatInterval::point(nat(b)), p)
    }

    /// `x ↦ a·x + c`.
    pub fn affine(a: Rational, c: Rational) -> Self {
        RealFn1::new(move |x, _| Some(x.scale(&a).shift(&c)))
    }

    pub fn identity() -> Self {
        RealFn1::affine(Rational::one(), Rational::zero())
    }

    /// `x ↦ g(x) + t`.
    pub fn shifted(&self, t: Rational) -> Self {
        let g = self.clone();
        RealFn1::new(move |x, p| g.apply(x, p).map(|y| y.shift(&t)))
    }

    /// Interval evaluation of a digit function: the input is widened to a
    /// signed-digit prefix whose hull covers it, and the output prefix is
    /// read back as its hull.
    pub fn from_digit_fn(g: DigitRealFn1) -> Self {
        RealFn1::new(move |x, p| {
            let s = covering_prefix(x, p + 4)?;
            g.apply(&s, p as usize + 1).hull().ok()
        })
    }
}

impl fmt::Debug for RealFn1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RealFn1(..)")
    }
}

/// A binary prefix `a:b1..bL`, `L <= max_len`, whose hull contains `x`.
fn covering_prefix(x: &RatInterval, max_len: u32) -> Option<DigitSeq> {
    let w = x.width();
    if w > Rational::one() {
        return None;
    }
    let mut len = 0;
    while len < max_len && w <= pow2_neg(len + 1) {
        len += 1;
    }
    let scale = Rational::from_integer(BigInt::one() << len);
    let k = round_half_up(&(x.midpoint() * &scale));
    let (head, frac) = k.div_mod_floor(&(BigInt::one() << len));
    let digits = (0..len)
        .rev()
        .map(|bit| if frac.bit(bit as u64) { Digit::Plus } else { Digit::Zero })
        .collect();
    Some(DigitSeq::with_head(head.to_i64()?, digits))
}

/// `Π_1(f)`: `f(0)` for `x <= 0`, linear between consecutive naturals.
/// Intervals are mapped to the exact range, which is spanned by the
/// endpoints and the naturals in between.
pub fn pi1(f: &TotalFn1) -> RealFn1 {
    let f = f.clone();
    RealFn1::new(move |x, _| {
        let first = floor(x.lo()).max(BigInt::zero()) + BigInt::one();
        let last = floor(x.hi());
        let mut range = RatInterval::point(interpolate(&f, x.lo()));
        range = range.join(&RatInterval::point(interpolate(&f, x.hi())));
        if first <= last {
            let first = first.to_u64()?;
            let last = last.to_u64()?;
            if last - first > 1 << 16 {
                return None;
            }
            for k in first..=last {
                range = range.join(&RatInterval::point(nat(f.eval(k))));
            }
        }
        Some(range)
    })
}

fn interpolate(f: &TotalFn1, x: &Rational) -> Rational {
    if !x.is_positive() {
        return nat(f.eval(0));
    }
    let n = floor(x);
    let y = x - Rational::from_integer(n.clone());
    let n = n.to_u64().expect("interpolation point out of range");
    (Rational::one() - &y) * nat(f.eval(n)) + y * nat(f.eval(n + 1))
}

/// A distribution on the naturals with at most two atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightRow {
    entries: BTreeMap<Nat, Rational>,
}

impl WeightRow {
    pub fn get(&self, m: Nat) -> Rational {
        self.entries.get(&m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Nat, &Rational)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> Rational {
        self.entries.values().sum()
    }
}

impl fmt::Display for WeightRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.entries().map(|(k, v)| format!("{k}:{v}")).collect();
        write!(f, "{{{}}}", body.join(", "))
    }
}

/// `μ_x`: all mass on 0 for `x <= 0`, on `n` within `1/3` of `n`, and split
/// `1-y : y` between `n` and `n+1` at `x = n + (1+y)/3`.
pub fn mu_point(x: &Rational) -> WeightRow {
    let mut entries = BTreeMap::new();
    let n = round_half_up(x);
    if !x.is_positive() || (x - Rational::from_integer(n.clone())).abs() <= rat(1, 3) {
        let n = if x.is_positive() {
            n.to_u64().expect("weight index out of range")
        } else {
            0
        };
        entries.insert(n, Rational::one());
    } else {
        let n_lo = floor(x);
        let y = (x - Rational::from_integer(n_lo.clone())) * int(3) - int(1);
        let n_lo = n_lo.to_u64().expect("weight index out of range");
        entries.insert(n_lo, Rational::one() - &y);
        entries.insert(n_lo + 1, y);
    }
    WeightRow { entries }
}

/// `μ_x(m)` as a function of `x`: a tent with plateau `[m-1/3, m+1/3]`
/// (`(-∞, 1/3]` for `m = 0`) and slopes of width `1/3`.
fn tent(m: Nat, x: &Rational) -> Rational {
    let m = nat(m);
    let rise = if m.is_zero() {
        Rational::one()
    } else {
        ((x - &m) * int(3) + int(2)).clamp(Rational::zero(), Rational::one())
    };
    let fall = (int(2) - (x - &m) * int(3)).clamp(Rational::zero(), Rational::one());
    rise.min(fall)
}

/// Enclosure of `{μ_x(m) : x ∈ xs}`. The tent is unimodal, so its minimum
/// is at an endpoint and its maximum is 1 on the plateau.
fn tent_interval(m: Nat, xs: &RatInterval) -> RatInterval {
    let a = tent(m, xs.lo());
    let b = tent(m, xs.hi());
    let plateau_lo = if m == 0 { None } else { Some(nat(m) - rat(1, 3)) };
    let plateau_hi = nat(m) + rat(1, 3);
    let meets_plateau = xs.lo() <= &plateau_hi && plateau_lo.is_none_or(|lo| xs.hi() >= &lo);
    let hi = if meets_plateau {
        Rational::one()
    } else {
        a.clone().max(b.clone())
    };
    RatInterval::spanning(a.min(b), hi)
}

/// `μ_x` for all `x` in an enclosure: candidate atoms with their weight
/// enclosures, dropping atoms that certainly have weight 0.
fn mu_interval(xs: &RatInterval) -> Vec<(Nat, RatInterval)> {
    let lo = (floor(xs.lo()) - BigInt::one()).max(BigInt::zero());
    let hi = (floor(xs.hi()) + BigInt::from(2)).max(BigInt::zero());
    let lo = lo.to_u64().expect("weight index out of range");
    let hi = hi.to_u64().expect("weight index out of range");
    (lo..=hi)
        .map(|m| (m, tent_interval(m, xs)))
        .filter(|(_, w)| w.hi().is_positive())
        .collect()
}

/// `η_n`: `0, 0, 1, 0, 1, 2, ...`, so that every natural recurs infinitely
/// often.
pub fn eta(n: Nat) -> Nat {
    let mut m = 0;
    let mut start = 0;
    while start + m < n {
        start += m + 1;
        m += 1;
    }
    n - start
}

/// Distance to the naturals, capped at `1/2`, over an enclosure.
pub fn dist_interval(xs: &RatInterval) -> RatInterval {
    let half = rat(1, 2);
    let d = |x: &Rational| -> Rational {
        if !x.is_positive() {
            (-x).min(half.clone())
        } else {
            let r = x - Rational::from_integer(floor(x));
            r.clone().min(Rational::one() - r)
        }
    };
    let (a, b) = (d(xs.lo()), d(xs.hi()));
    let first_nat = floor(xs.lo()).max(BigInt::zero())
        + if xs.lo().is_integer() || xs.lo().is_negative() {
            0
        } else {
            1
        };
    let holds_nat = Rational::from_integer(first_nat) <= *xs.hi();
    let first_half = floor(&(xs.lo() - &half)).max(BigInt::from(-1)) + 1;
    let holds_half = xs.lo() <= &-&half || Rational::from_integer(first_half) + &half <= *xs.hi();
    let lo = if holds_nat {
        Rational::zero()
    } else {
        a.clone().min(b.clone())
    };
    let hi = if holds_half { half } else { a.max(b) };
    RatInterval::spanning(lo, hi)
}

fn g_enclosure(g: &RealFn1, b: Nat, p: u32) -> Result<RatInterval> {
    g.at_nat(b, p)
        .ok_or_else(|| Error::Budget(format!("g gave no enclosure at {b} for precision {p}")))
}

/// Enclosure of `d(g, n)`, the capped distance from `g(η_n)` to the
/// naturals, of width at most `2^-p`.
pub fn dist_to_nat(g: &RealFn1, n: Nat, p: u32) -> Result<RatInterval> {
    Ok(dist_interval(&g_enclosure(g, eta(n), p)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightMode {
    /// `w_n = min(d_n, max(0, 1 - Σ_{i<n} d_i))`: an exact partition of 1.
    #[default]
    Partition,
    /// `w_n = d_n · z_n` with the three `z_n` clauses taken literally.
    Literal,
}

fn iv_min(a: &RatInterval, b: &RatInterval) -> RatInterval {
    RatInterval::spanning(a.lo().min(b.lo()).clone(), a.hi().min(b.hi()).clone())
}

fn iv_max0(a: &RatInterval) -> RatInterval {
    let z = Rational::zero();
    RatInterval::spanning(a.lo().max(&z).clone(), a.hi().max(&z).clone())
}

/// Enclosure of `z_n` given enclosures of `Σ_{i<n} d_i` and `Σ_{i≤n} d_i`:
/// the hull of every clause that may apply.
fn z_interval(before: &RatInterval, through: &RatInterval) -> RatInterval {
    let one = Rational::one();
    let mut hull: Option<RatInterval> = None;
    let mut add = |v: RatInterval| {
        hull = Some(match hull.take() {
            None => v,
            Some(h) => h.join(&v),
        })
    };
    if through.lo() <= &one {
        add(RatInterval::point(one.clone()));
    }
    if before.hi() > &one {
        add(RatInterval::point(Rational::zero()));
    }
    if before.lo() <= &one && through.hi() > &one {
        let y = RatInterval::point(one.clone()).sub(before);
        let y = iv_max0(&y);
        add(iv_min(&y, &RatInterval::point(one)));
    }
    hull.expect("some z clause always applies")
}

/// Term weights from enclosures of `d(g, 0..m)`.
pub fn effective_weights(ds: &[RatInterval], mode: WeightMode) -> Vec<RatInterval> {
    let one = RatInterval::point(Rational::one());
    let mut before = RatInterval::point(Rational::zero());
    let mut out = Vec::with_capacity(ds.len());
    for d in ds {
        let through = before.add(d);
        let w = match mode {
            WeightMode::Partition => iv_min(d, &iv_max0(&one.sub(&before))),
            WeightMode::Literal => d.mul(&z_interval(&before, &through)),
        };
        out.push(w);
        before = through;
    }
    out
}

/// `μ_{n,g}` on `X^1_n`, indexed like `enum_x(1, n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightTable {
    bound: Nat,
    entries: Vec<RatInterval>,
}

impl WeightTable {
    pub fn bound(&self) -> Nat {
        self.bound
    }

    pub fn entries(&self) -> &[RatInterval] {
        &self.entries
    }

    pub fn sum(&self) -> RatInterval {
        self.entries
            .iter()
            .fold(RatInterval::point(Rational::zero()), |acc, w| acc.add(w))
    }
}

/// Weight enclosures of `Π_{b ≤ n} μ_{min(n, g(b))}(a(b))` for every table
/// `a` in `X^1_n`, each of width at most `2^-p`.
pub fn mu_table(n: Nat, g: &RealFn1, p: u32) -> Result<WeightTable> {
    let tables = enum_x(1, n, ENUM_CAP)?;
    let q = p + 8 + 2 * (64 - (n + 1).leading_zeros());
    let rows = (0..=n)
        .map(|b| {
            let xs = g_enclosure(g, b, q)?.min_scalar(&nat(n));
            Ok(mu_interval(&xs).into_iter().collect::<HashMap<_, _>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let zero = RatInterval::point(Rational::zero());
    let entries = tables
        .iter()
        .map(|a| {
            a.table()
                .iter()
                .zip(&rows)
                .fold(RatInterval::point(Rational::one()), |acc, (v, row)| {
                    acc.mul(row.get(v).unwrap_or(&zero))
                })
        })
        .collect();
    Ok(WeightTable { bound: n, entries })
}

/// Work limits for [`pi2_with`].
#[derive(Clone, Debug)]
pub struct Pi2Config {
    pub mode: WeightMode,
    /// Refinement rounds; round `r` queries `g` at precision `p + 2 + 4r`.
    pub rounds: u32,
    /// Most terms of the weighted sum examined.
    pub horizon: usize,
    /// Most queries a single evaluation of `F` may make.
    pub query_budget: usize,
    /// Most branches explored when averaging `F` over one `μ_{n,g}`.
    pub branch_budget: usize,
}

impl Default for Pi2Config {
    fn default() -> Self {
        Pi2Config {
            mode: WeightMode::Partition,
            rounds: 8,
            horizon: 1 << 12,
            query_budget: 10_000,
            branch_budget: 200_000,
        }
    }
}

/// How a `pi2` enclosure was certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pi2Path {
    /// Every weight is exactly 0: the value is `F(f_g)`.
    Case1,
    /// `F(f_g)` corrected by finitely many weighted terms.
    Blended,
    /// The weighted sum alone, after the cumulative distance reached 1.
    Case2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pi2Result {
    pub enclosure: RatInterval,
    pub path: Pi2Path,
    /// Precision at which `g` was queried.
    pub precision: u32,
    /// Number of weighted terms that were summed.
    pub terms: usize,
}

/// Enclosure of `Π_2(F)(g)` of width at most `2^-p`, partition mode.
pub fn pi2(big: &TotalFn2, g: &RealFn1, p: u32) -> Result<RatInterval> {
    pi2_with(big, g, p, &Pi2Config::default()).map(|r| r.enclosure)
}

pub fn pi2_with(big: &TotalFn2, g: &RealFn1, p: u32, cfg: &Pi2Config) -> Result<Pi2Result> {
    let target = pow2_neg(p);
    let mut notes = Vec::new();
    for r in 0..cfg.rounds {
        let run = Pi2Run {
            big,
            g,
            q: p + 2 + 4 * r,
            cfg,
            cache: RefCell::new(HashMap::new()),
        };
        let horizon = cfg.horizon.min(64 << r);
        let window = run.window(horizon);
        match &window {
            Ok(res) if res.enclosure.width() <= target => return window,
            Ok(res) => notes.push(format!("window path width {} at q={}", res.enclosure.width(), run.q)),
            Err(e) => notes.push(format!("window path at q={}: {e}", run.q)),
        }
        match run.weighted(horizon) {
            Ok(res) if res.enclosure.width() <= target => return Ok(res),
            Ok(res) => notes.push(format!("weighted sum width {} at q={}", res.enclosure.width(), run.q)),
            Err(e) => notes.push(format!("weighted sum at q={}: {e}", run.q)),
        }
    }
    Err(Error::Budget(format!(
        "pi2 found no enclosure of width 2^-{p}; last attempts: {}",
        notes[notes.len().saturating_sub(2)..].join("; ")
    )))
}

struct Pi2Run<'a> {
    big: &'a TotalFn2,
    g: &'a RealFn1,
    q: u32,
    cfg: &'a Pi2Config,
    cache: RefCell<HashMap<Nat, RatInterval>>,
}

/// The `c` with `μ_x = {c: 1}` for every `x` in the enclosure.
fn point_mass(xs: &RatInterval) -> Option<Nat> {
    if xs.hi() <= &rat(1, 3) {
        return Some(0);
    }
    let c = round_half_up(&xs.midpoint());
    let cq = Rational::from_integer(c.clone());
    let inside = xs.lo() >= &(&cq - rat(1, 3)) && xs.hi() <= &(&cq + rat(1, 3));
    inside.then(|| c.to_u64()).flatten()
}

impl Pi2Run<'_> {
    fn g_at(&self, b: Nat) -> Result<RatInterval> {
        if let Some(v) = self.cache.borrow().get(&b) {
            return Ok(v.clone());
        }
        let v = g_enclosure(self.g, b, self.q)?;
        self.cache.borrow_mut().insert(b, v.clone());
        Ok(v)
    }

    fn distances(&self, count: usize) -> Result<Vec<RatInterval>> {
        (0..count as Nat)
            .map(|n| Ok(dist_interval(&self.g_at(eta(n))?)))
            .collect()
    }

    /// `F(f_g)` with `f_g(b)` read off point-mass enclosures, plus the
    /// correction terms below the largest number that evaluation touched.
    fn window(&self, horizon: usize) -> Result<Pi2Result> {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let f_g = |x: Nat| -> Nat {
            let found = self.g_at(x).and_then(|xs| {
                point_mass(&xs).ok_or_else(|| Error::Budget(format!("g({x}) ∈ {xs} is not within 1/3 of a natural")))
            });
            found.unwrap_or_else(|e| {
                failure.borrow_mut().get_or_insert(e);
                0
            })
        };
        let ev = self.big.eval_recorded(&f_g, self.cfg.query_budget)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let value = RatInterval::point(nat(ev.value));
        let n0 = ev
            .queries
            .iter()
            .map(|&b| Ok(b.max(point_mass(&self.g_at(b)?).unwrap_or(0))))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .map_or(0, |m| m as usize + 1);

        if self.cfg.mode == WeightMode::Literal {
            let ds = self.distances(horizon.max(n0))?;
            let tiny = pow2_neg(self.q.saturating_sub(1));
            if ds.iter().all(|d| d.hi() <= &tiny) {
                return Ok(Pi2Result {
                    enclosure: value,
                    path: Pi2Path::Case1,
                    precision: self.q,
                    terms: 0,
                });
            }
            return Err(Error::Budget("literal weights show mass outside the first case".into()));
        }

        let ds = self.distances(n0)?;
        let ws = effective_weights(&ds, WeightMode::Partition);
        let mut total = value.clone();
        let mut blended = false;
        for (n, w) in ws.iter().enumerate() {
            if w.hi().is_zero() {
                continue;
            }
            blended = true;
            let e = self.expectation(n as Nat)?;
            total = total.add(&w.mul(&e.sub(&value)));
        }
        Ok(Pi2Result {
            enclosure: total,
            path: if blended { Pi2Path::Blended } else { Pi2Path::Case1 },
            precision: self.q,
            terms: n0,
        })
    }

    /// `Σ_{n ≤ m} w_n · E_n` once the weights beyond `m` are certainly 0.
    fn weighted(&self, horizon: usize) -> Result<Pi2Result> {
        let one = Rational::one();
        let mut ds = Vec::new();
        let mut sum = RatInterval::point(Rational::zero());
        let stop = loop {
            if ds.len() >= horizon {
                return Err(Error::Budget(format!(
                    "cumulative distance only reached {sum} after {horizon} terms"
                )));
            }
            let d = dist_interval(&self.g_at(eta(ds.len() as Nat))?);
            sum = sum.add(&d);
            ds.push(d);
            let done = match self.cfg.mode {
                WeightMode::Partition => sum.lo() >= &one,
                WeightMode::Literal => sum.lo() > &one,
            };
            if done {
                break ds.len();
            }
        };
        let ws = effective_weights(&ds, self.cfg.mode);
        let mut total = RatInterval::point(Rational::zero());
        for (n, w) in ws.iter().enumerate() {
            if w.hi().is_zero() {
                continue;
            }
            total = total.add(&w.mul(&self.expectation(n as Nat)?));
        }
        Ok(Pi2Result {
            enclosure: total,
            path: Pi2Path::Case2,
            precision: self.q,
            terms: stop,
        })
    }

    /// `E_n`: the mean of `F` when each `a(b)`, `b ≤ n`, is drawn from
    /// `μ_{min(n, g(b))}` and arguments are clipped to `n`. Only the
    /// coordinates `F` actually reads are branched on.
    fn expectation(&self, n: Nat) -> Result<RatInterval> {
        let mut rows: HashMap<Nat, Vec<(Nat, RatInterval)>> = HashMap::new();
        let mut total = RatInterval::point(Rational::zero());
        let mut stack = vec![(BTreeMap::<Nat, Nat>::new(), RatInterval::point(Rational::one()))];
        let mut branches = 0usize;
        while let Some((assigned, weight)) = stack.pop() {
            branches += 1;
            if branches > self.cfg.branch_budget {
                return Err(Error::Budget(format!(
                    "averaging F over μ_{{{n},g}} needed more than {} branches",
                    self.cfg.branch_budget
                )));
            }
            let missing: RefCell<Option<Nat>> = RefCell::new(None);
            let a = |x: Nat| -> Nat {
                let b = clip(x, n);
                match assigned.get(&b) {
                    Some(v) => *v,
                    None => {
                        missing.borrow_mut().get_or_insert(b);
                        0
                    }
                }
            };
            let ev = self.big.eval_recorded(&a, self.cfg.query_budget)?;
            match missing.into_inner() {
                None => total = total.add(&weight.mul(&RatInterval::point(nat(ev.value)))),
                Some(b) => {
                    if let Entry::Vacant(slot) = rows.entry(b) {
                        let xs = self.g_at(b)?.min_scalar(&nat(n));
                        slot.insert(mu_interval(&xs));
                    }
                    for (m, w) in &rows[&b] {
                        let mut next = assigned.clone();
                        next.insert(b, *m);
                        stack.push((next, weight.mul(w)));
                    }
                }
            }
        }
        Ok(total)
    }
}

/// `π_0^{-1}`: the natural `n` with `v ⊆ (n - 1/3, n + 1/3)`, if any.
pub fn pi_inv0(v: &RatInterval) -> Option<Nat> {
    let c = round_half_up(&v.midpoint());
    if c.is_negative() {
        return None;
    }
    let cq = Rational::from_integer(c.clone());
    v.inside_open(&(&cq - rat(1, 3)), &(&cq + rat(1, 3)))
        .then(|| c.to_u64())
        .flatten()
}

/// Answer of the partial inverse at one argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvResult {
    Value(Nat),
    /// The value lies in no window `(n - 1/3, n + 1/3)`.
    ProvablyOutside,
    /// The budget ran out before either certificate appeared.
    Unknown,
}

/// `π_1^{-1}(g)`, evaluated on demand.
#[derive(Clone, Debug)]
pub struct PartialFn1 {
    g: RealFn1,
    budget: u32,
}

impl PartialFn1 {
    pub fn eval(&self, a: Nat) -> InvResult {
        for p in 2..self.budget + 2 {
            let Some(v) = self.g.at_nat(a, p) else {
                continue;
            };
            if let Some(n) = pi_inv0(&v) {
                return InvResult::Value(n);
            }
            if outside_windows(&v) {
                return InvResult::ProvablyOutside;
            }
        }
        InvResult::Unknown
    }
}

/// `v` is disjoint from every window: it lies in `(-∞, -1/3]` or in some
/// gap `[n + 1/3, n + 2/3]`.
fn outside_windows(v: &RatInterval) -> bool {
    if v.hi() <= &rat(-1, 3) {
        return true;
    }
    let n = Rational::from_integer(floor(&(v.lo() - rat(1, 3))));
    v.lo() >= &(&n + rat(1, 3)) && v.hi() <= &(&n + rat(2, 3))
}

/// `a ↦ π_0^{-1}(g(π_0(a)))`, refining enclosures of `g(a)` up to
/// precision `budget + 1`.
pub fn pi_inv1(g: &RealFn1, budget: u32) -> PartialFn1 {
    PartialFn1 { g: g.clone(), budget }
}

type PrefixFn = dyn Fn(&DigitSeq, usize) -> DigitSeq + Send + Sync;

/// A total element of `S(1)`: maps an input prefix to the output prefix of
/// at most `depth` digits that it already determines. Extending the input
/// may only extend the output.
#[derive(Clone)]
pub struct DigitRealFn1 {
    f: Arc<PrefixFn>,
}

impl DigitRealFn1 {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&DigitSeq, usize) -> DigitSeq + Send + Sync + 'static,
    {
        DigitRealFn1 { f: Arc::new(f) }
    }

    pub fn apply(&self, x: &DigitSeq, depth: usize) -> DigitSeq {
        (self.f)(x, depth)
    }

    /// Digit version of an interval function. Each output digit is chosen
    /// from the enclosure over the shortest input prefix that is precise
    /// enough, so the choice cannot change when the input grows.
    pub fn from_real_fn(g: RealFn1) -> Self {
        DigitRealFn1::new(move |x, depth| {
            if x.is_empty() {
                return DigitSeq::empty();
            }
            // Precisions are requested in increasing order, and a prefix too
            // coarse for one precision is too coarse for the next.
            let start = Cell::new(0);
            let query = |r: u32| -> Option<RatInterval> {
                (start.get()..=x.digits().len()).find_map(|len| {
                    let h = x.truncated(len).hull().ok()?;
                    let y = g.apply(&h, r).filter(|y| y.width() <= pow2_neg(r))?;
                    start.set(len);
                    Some(y)
                })
            };
            extract_prefix(&query, depth)
        })
    }

    /// The output stream on a total input; reads as much input as each
    /// output digit needs.
    pub fn apply_stream(&self, x: &DigitStream) -> DigitStream {
        let mut len = 0;
        let head = loop {
            if let Some(h) = self.apply(&x.prefix(len), 0).head() {
                break h;
            }
            len += 1;
        };
        let f = self.clone();
        let x = x.clone();
        let mut known = DigitSeq::with_head(head, Vec::new());
        let mut next = 0;
        DigitStream::new(head, move || {
            while known.digits().len() <= next {
                len += 1;
                known = f.apply(&x.prefix(len), next + 8);
            }
            next += 1;
            known.digits()[next - 1]
        })
    }
}

impl fmt::Debug for DigitRealFn1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DigitRealFn1(..)")
    }
}

/// `π^S_1(f)`.
pub fn pi1_s(f: &TotalFn1) -> DigitRealFn1 {
    DigitRealFn1::from_real_fn(pi1(f))
}

/// `π^S_2(F)(g)`. When every weight is exactly 0 the stream is literally
/// `F(f_g):000...`; otherwise it is the normalized stream of the weighted
/// sum. Digits are computed lazily, and a later refinement that exhausts
/// the budget panics.
pub fn pi2_s(big: &TotalFn2, g: &DigitRealFn1, cfg: &Pi2Config) -> Result<DigitStream> {
    let real = RealFn1::from_digit_fn(g.clone());
    let first = pi2_with(big, &real, 0, cfg)?;
    if first.path == Pi2Path::Case1 {
        let v = round_half_up(first.enclosure.lo())
            .to_i64()
            .ok_or_else(|| Error::Budget("value does not fit a stream head".into()))?;
        return Ok(DigitStream::zeros(v));
    }
    let big = big.clone();
    let cfg = cfg.clone();
    let stream = IntervalStream::from_fn(move |p| match pi2_with(&big, &real, p, &cfg) {
        Ok(r) => r.enclosure,
        Err(e) => panic!("pi2 refinement failed: {e}"),
    });
    Ok(normalize(&from_intervals(&stream)))
}
