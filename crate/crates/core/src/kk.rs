//! Kleene-Kreisel functionals up to type level 2.
//!
//! Naturals are `u64`. Type-1 functionals are total functions on naturals;
//! type-2 functionals receive their argument through an [`Oracle`] that
//! records every query, which makes their continuity observable and lets a
//! work budget turn divergence into a diagnostic.
//!
//! The `n`-th approximation clips numbers above `n` to 0 and is applied
//! hereditarily: `a_n(x) = (a(x_n))_n`. Its images form the finite sets
//! `X^k_n`, stored as canonical tables (see [`ApproxElem`]).

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::{Error, Result};

pub type Nat = u64;

/// Default limit on the number of elements an enumeration may produce.
pub const ENUM_CAP: u64 = 1_000_000;

/// `a_n` at type 0: `a` if `a <= n`, else 0.
pub fn clip(a: Nat, n: Nat) -> Nat {
    if a <= n {
        a
    } else {
        0
    }
}

/// A total function from naturals to naturals.
#[derive(Clone)]
pub struct TotalFn1 {
    f: Arc<dyn Fn(Nat) -> Nat + Send + Sync>,
}

impl TotalFn1 {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(Nat) -> Nat + Send + Sync + 'static,
    {
        TotalFn1 { f: Arc::new(f) }
    }

    pub fn eval(&self, x: Nat) -> Nat {
        (self.f)(x)
    }

    pub fn identity() -> Self {
        TotalFn1::new(|x| x)
    }

    pub fn successor() -> Self {
        TotalFn1::new(|x| x.saturating_add(1))
    }

    pub fn constant(c: Nat) -> Self {
        TotalFn1::new(move |_| c)
    }

    /// `i ↦ table[i]` on the table, 0 beyond it.
    pub fn from_table(table: Vec<Nat>) -> Self {
        TotalFn1::new(move |x| usize::try_from(x).ok().and_then(|i| table.get(i).copied()).unwrap_or(0))
    }

    /// The `n`-th approximation as a total function: `x ↦ (f(x_n))_n`.
    pub fn approx_fn(&self, n: Nat) -> TotalFn1 {
        let f = self.clone();
        TotalFn1::new(move |x| clip(f.eval(clip(x, n)), n))
    }

    pub fn as_dyn(&self) -> &(dyn Fn(Nat) -> Nat + Send + Sync) {
        &*self.f
    }
}

impl fmt::Debug for TotalFn1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<Nat> = (0..5).map(|i| self.eval(i)).collect();
        write!(f, "TotalFn1({head:?}..)")
    }
}

/// Argument wrapper handed to type-2 functionals. Records queries in order
/// and stops answering (returning 0) once the query budget is spent.
pub struct Oracle<'a> {
    f: &'a dyn Fn(Nat) -> Nat,
    queries: RefCell<Vec<Nat>>,
    budget: usize,
    exhausted: Cell<bool>,
}

impl<'a> Oracle<'a> {
    pub fn new(f: &'a dyn Fn(Nat) -> Nat, budget: usize) -> Self {
        Oracle {
            f,
            queries: RefCell::new(Vec::new()),
            budget,
            exhausted: Cell::new(false),
        }
    }

    pub fn query(&self, x: Nat) -> Nat {
        if self.queries.borrow().len() >= self.budget {
            self.exhausted.set(true);
            return 0;
        }
        self.queries.borrow_mut().push(x);
        (self.f)(x)
    }

    pub fn queries(&self) -> Vec<Nat> {
        self.queries.borrow().clone()
    }

    pub fn exhausted(&self) -> bool {
        self.exhausted.get()
    }
}

/// Result of a recorded type-2 evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub value: Nat,
    /// Arguments queried, in order, with repetitions.
    pub queries: Vec<Nat>,
}

type Functional = dyn Fn(&Oracle<'_>) -> Nat + Send + Sync;

/// A total continuous functional from type-1 functions to naturals.
#[derive(Clone)]
pub struct TotalFn2 {
    f: Arc<Functional>,
}

impl TotalFn2 {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&Oracle<'_>) -> Nat + Send + Sync + 'static,
    {
        TotalFn2 { f: Arc::new(f) }
    }

    /// Evaluates with an unbounded query budget.
    pub fn eval(&self, f: &dyn Fn(Nat) -> Nat) -> Nat {
        let oracle = Oracle::new(f, usize::MAX);
        (self.f)(&oracle)
    }

    pub fn eval_fn(&self, f: &TotalFn1) -> Nat {
        self.eval(&|x| f.eval(x))
    }

    /// Evaluates while recording queries; fails once more than `budget`
    /// queries are made.
    pub fn eval_recorded(&self, f: &dyn Fn(Nat) -> Nat, budget: usize) -> Result<Evaluation> {
        let oracle = Oracle::new(f, budget);
        let value = (self.f)(&oracle);
        if oracle.exhausted() {
            return Err(Error::Budget(format!(
                "functional made more than {budget} queries to its argument"
            )));
        }
        Ok(Evaluation {
            value,
            queries: oracle.queries(),
        })
    }

    pub fn constant(c: Nat) -> Self {
        TotalFn2::new(move |_| c)
    }

    /// `λf. f(k)`.
    pub fn apply_at(k: Nat) -> Self {
        TotalFn2::new(move |o| o.query(k))
    }

    /// `λf. f(i) + f(j)`.
    pub fn sum_at(i: Nat, j: Nat) -> Self {
        TotalFn2::new(move |o| o.query(i).saturating_add(o.query(j)))
    }

    /// `λf. f(f(k))`.
    pub fn self_apply(k: Nat) -> Self {
        TotalFn2::new(move |o| {
            let inner = o.query(k);
            o.query(inner)
        })
    }
}

impl fmt::Debug for TotalFn2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TotalFn2(..)")
    }
}

/// A value of type level 0, 1 or 2.
#[derive(Clone, Debug)]
pub enum KkValue {
    Nat(Nat),
    Fn1(TotalFn1),
    Fn2(TotalFn2),
}

/// An element of `X^k_n`.
///
/// * level 0: `table = [a]` with `a <= n`;
/// * level 1: `table[i] = a(i)` for `i <= n`;
/// * level 2: `table[j] = a(x)` where `j` is the canonical index of `x` in
///   `X^1_n`.
///
/// Every stored value is at most `n`; an argument is clipped to its `n`-th
/// approximation before the table lookup.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApproxElem {
    level: u8,
    bound: Nat,
    table: Vec<Nat>,
}

/// Argument of an approximation one level below it.
#[derive(Clone, Copy)]
pub enum Arg<'a> {
    Nat(Nat),
    Fn(&'a dyn Fn(Nat) -> Nat),
}

impl ApproxElem {
    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn bound(&self) -> Nat {
        self.bound
    }

    pub fn table(&self) -> &[Nat] {
        &self.table
    }

    /// Value of a level-0 element.
    pub fn value(&self) -> Option<Nat> {
        (self.level == 0).then(|| self.table[0])
    }

    /// `a(x) = table[x_n]` for a level-1 element.
    pub fn eval_nat(&self, x: Nat) -> Nat {
        assert_eq!(self.level, 1, "eval_nat needs a level-1 approximation");
        self.table[clip(x, self.bound) as usize]
    }

    /// `a(f) = table[index of f_n]` for a level-2 element.
    pub fn eval_fn(&self, f: &dyn Fn(Nat) -> Nat) -> Nat {
        assert_eq!(self.level, 2, "eval_fn needs a level-2 approximation");
        let n = self.bound;
        let clipped: Vec<Nat> = (0..=n).map(|i| clip(f(i), n)).collect();
        self.table[fn1_index(&clipped, n)]
    }

    /// Canonical index of a level-1 element within `X^1_n`.
    pub fn index(&self) -> usize {
        assert_eq!(self.level, 1, "only level-1 elements are indexed");
        fn1_index(&self.table, self.bound)
    }

    /// A level-1 element viewed as a total function.
    pub fn as_fn1(&self) -> TotalFn1 {
        assert_eq!(self.level, 1, "as_fn1 needs a level-1 approximation");
        let a = self.clone();
        TotalFn1::new(move |x| a.eval_nat(x))
    }
}

impl fmt::Display for ApproxElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            return write!(f, "{}", self.table[0]);
        }
        let body: Vec<String> = self.table.iter().enumerate().map(|(i, v)| format!("{i}:{v}")).collect();
        write!(f, "{{{}}}", body.join(", "))
    }
}

/// Index of the table `[a(0), .., a(n)]` in lexicographic order: the table
/// read as a base-`(n+1)` numeral, most significant digit first.
fn fn1_index(table: &[Nat], n: Nat) -> usize {
    let base = n as usize + 1;
    table.iter().fold(0usize, |acc, &v| acc * base + v as usize)
}

/// Number of elements of `X^k_n`.
pub fn cardinality(level: u8, n: Nat) -> Result<BigUint> {
    let base = BigUint::from(n) + BigUint::one();
    match level {
        0 => Ok(base),
        1 => Ok(base.pow(n as u32 + 1)),
        2 => {
            let len = base.pow(n as u32 + 1);
            let exp = len
                .to_u32()
                .ok_or_else(|| Error::LevelMismatch(format!("|X^1_{n}| is too large to exponentiate")))?;
            Ok(base.pow(exp))
        }
        other => Err(Error::LevelMismatch(format!("level {other} is above 2"))),
    }
}

fn check_cap(level: u8, n: Nat, cap: u64) -> Result<usize> {
    let card = cardinality(level, n).map_err(|_| Error::CapExceeded {
        level,
        bound: n,
        cardinality: "astronomically many".into(),
        cap,
    })?;
    match card.to_u64() {
        Some(c) if c <= cap => Ok(c as usize),
        _ => Err(Error::CapExceeded {
            level,
            bound: n,
            cardinality: card.to_string(),
            cap,
        }),
    }
}

/// All tables of length `len` over `{0..=n}` in lexicographic order.
fn all_tables(len: usize, n: Nat, count: usize) -> Vec<Vec<Nat>> {
    let mut out = Vec::with_capacity(count);
    let mut cur = vec![0; len];
    loop {
        out.push(cur.clone());
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if cur[pos] < n {
                cur[pos] += 1;
                break;
            }
            cur[pos] = 0;
        }
    }
}

/// Exhaustive list of `X^k_n` in lexicographic table order; fails when the
/// set has more than `cap` elements.
pub fn enum_x(level: u8, n: Nat, cap: u64) -> Result<Vec<ApproxElem>> {
    let count = check_cap(level, n, cap)?;
    let len = match level {
        0 => {
            return Ok((0..=n)
                .map(|a| ApproxElem {
                    level: 0,
                    bound: n,
                    table: vec![a],
                })
                .collect())
        }
        1 => n as usize + 1,
        _ => check_cap(1, n, cap)?,
    };
    Ok(all_tables(len, n, count)
        .into_iter()
        .map(|table| ApproxElem { level, bound: n, table })
        .collect())
}

/// The canonical table of `a_n`.
pub fn approx(a: &KkValue, n: Nat) -> Result<ApproxElem> {
    approx_capped(a, n, ENUM_CAP)
}

pub fn approx_capped(a: &KkValue, n: Nat, cap: u64) -> Result<ApproxElem> {
    let (level, table) = match a {
        KkValue::Nat(v) => (0, vec![clip(*v, n)]),
        KkValue::Fn1(f) => (1, (0..=n).map(|i| clip(f.eval(i), n)).collect()),
        KkValue::Fn2(big) => {
            let args = enum_x(1, n, cap)?;
            let table = args.iter().map(|x| clip(big.eval(&|i| x.eval_nat(i)), n)).collect();
            (2, table)
        }
    };
    Ok(ApproxElem { level, bound: n, table })
}

/// `a(x)` for an approximation `a` and an argument one level below.
pub fn eval_approx(a: &ApproxElem, x: Arg<'_>) -> Result<Nat> {
    match (a.level, x) {
        (1, Arg::Nat(v)) => Ok(a.eval_nat(v)),
        (2, Arg::Fn(f)) => Ok(a.eval_fn(f)),
        (level, _) => Err(Error::LevelMismatch(format!(
            "argument does not match a level-{level} approximation"
        ))),
    }
}

/// Grilliot modulus at type 1: `f_m(i) = f(i)` for all `m >= max(i, f(i))`.
pub fn modulus1(i: Nat, f: &TotalFn1) -> Nat {
    i.max(f.eval(i))
}

/// Grilliot modulus at type 2: returns `G(f) = max(F(f), μn. F(h_n) = F(f))`,
/// after which `F(f_m) = F(f)` and `F_m(f) = F(f)`.
///
/// `h_n` agrees with the first approximation `f_m`, `m >= n`, on which `F`
/// still differs from `F(f)`, up to the type-1 modulus of `f`. The search
/// over `n` gives up after `budget` candidates.
pub fn modulus2(big: &TotalFn2, f: &TotalFn1, budget: usize) -> Result<Nat> {
    let target = big.eval_fn(f);
    let at_approx: RefCell<HashMap<Nat, Nat>> = RefCell::new(HashMap::new());
    let differs_at = |m: Nat| -> bool {
        if let Some(v) = at_approx.borrow().get(&m) {
            return *v != target;
        }
        let v = big.eval_fn(&f.approx_fn(m));
        at_approx.borrow_mut().insert(m, v);
        v != target
    };
    for n in 0..budget as Nat {
        let h = |xi: Nat| -> Nat {
            let g = modulus1(xi, f);
            match (n..g).find(|&m| differs_at(m)) {
                Some(m) => clip(f.eval(clip(xi, m)), m),
                None => clip(f.eval(clip(xi, g)), g),
            }
        };
        if big.eval(&h) == target {
            return Ok(target.max(n));
        }
    }
    Err(Error::Budget(format!(
        "type-2 modulus search tried {budget} candidates without F(h_n) = F(f)"
    )))
}

/// A compact of `N(1)`: a finite partial function on naturals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NatCompact1 {
    table: BTreeMap<Nat, Nat>,
}

impl NatCompact1 {
    pub fn new() -> Self {
        NatCompact1::default()
    }

    /// Fails if a key is given two different values.
    pub fn from_pairs<I: IntoIterator<Item = (Nat, Nat)>>(pairs: I) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (k, v) in pairs {
            if let Some(old) = table.insert(k, v) {
                if old != v {
                    return Err(Error::MalformedTable(format!("key {k} mapped to both {old} and {v}")));
                }
            }
        }
        Ok(NatCompact1 { table })
    }

    pub fn get(&self, k: Nat) -> Option<Nat> {
        self.table.get(&k).copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Nat, Nat)> + '_ {
        self.table.iter().map(|(k, v)| (*k, *v))
    }

    pub fn keys(&self) -> impl Iterator<Item = Nat> + '_ {
        self.table.keys().copied()
    }

    /// `self ⊑ x` for a total `x`.
    pub fn is_below(&self, x: &dyn Fn(Nat) -> Nat) -> bool {
        self.entries().all(|(k, v)| x(k) == v)
    }

    /// `self ⊑ other` as partial functions.
    pub fn is_below_compact(&self, other: &NatCompact1) -> bool {
        self.entries().all(|(k, v)| other.get(k) == Some(v))
    }

    pub fn consistent_with(&self, other: &NatCompact1) -> bool {
        self.entries().all(|(k, v)| other.get(k).is_none_or(|w| w == v))
    }

    /// Least upper bound, if consistent.
    pub fn union(&self, other: &NatCompact1) -> Option<NatCompact1> {
        if !self.consistent_with(other) {
            return None;
        }
        let mut table = self.table.clone();
        table.extend(other.table.iter().map(|(k, v)| (*k, *v)));
        Some(NatCompact1 { table })
    }

    /// `p_n(k) = (p(k_n))_n`, undefined where `p(k_n)` is.
    pub fn approx_at(&self, n: Nat, k: Nat) -> Option<Nat> {
        self.get(clip(k, n)).map(|v| clip(v, n))
    }

    /// `Σ (1 + key + value)`; finitely many compacts share each size.
    pub fn size(&self) -> u64 {
        self.entries().map(|(k, v)| 1 + k + v).sum()
    }
}

impl fmt::Display for NatCompact1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.entries().map(|(k, v)| format!("{k}:{v}")).collect();
        write!(f, "{{{}}}", body.join(", "))
    }
}

impl FromStr for NatCompact1 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::MalformedTable(t.to_string());
        let inner = t.strip_prefix('{').and_then(|r| r.strip_suffix('}')).ok_or_else(bad)?;
        if inner.trim().is_empty() {
            return Ok(NatCompact1::new());
        }
        let pairs = inner
            .split(',')
            .map(|entry| {
                let (k, v) = entry.split_once(':').ok_or_else(bad)?;
                let k: Nat = k.trim().parse().map_err(|_| bad())?;
                let v: Nat = v.trim().parse().map_err(|_| bad())?;
                Ok((k, v))
            })
            .collect::<Result<Vec<_>>>()?;
        NatCompact1::from_pairs(pairs)
    }
}

/// A compact of `N(2)`: the least functional sending each `p_i` (and
/// everything above it) to `m_i`. Consistent arguments must share values.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NatCompact2 {
    entries: Vec<(NatCompact1, Nat)>,
}

impl NatCompact2 {
    pub fn new(entries: Vec<(NatCompact1, Nat)>) -> Result<Self> {
        for (i, (p, a)) in entries.iter().enumerate() {
            for (q, b) in &entries[..i] {
                if a != b && p.consistent_with(q) {
                    return Err(Error::MalformedTable(format!(
                        "consistent arguments {p} and {q} have values {a} and {b}"
                    )));
                }
            }
        }
        Ok(NatCompact2 { entries })
    }

    pub fn entries(&self) -> &[(NatCompact1, Nat)] {
        &self.entries
    }

    /// Value on a compact argument, if determined.
    pub fn eval_compact(&self, q: &NatCompact1) -> Option<Nat> {
        self.entries
            .iter()
            .find(|(p, _)| p.is_below_compact(q))
            .map(|(_, m)| *m)
    }

    /// `c_n(q) = (c(q_n))_n` where `q_n` is the approximated compact.
    pub fn approx_eval_compact(&self, n: Nat, q: &NatCompact1) -> Option<Nat> {
        self.entries
            .iter()
            .find(|(p, _)| p.entries().all(|(k, v)| q.approx_at(n, k) == Some(v)))
            .map(|(_, m)| clip(*m, n))
    }
}

/// `n_c`: the largest number occurring in a type-1 compact.
pub fn n_a(c: &NatCompact1) -> Nat {
    c.entries().map(|(k, v)| k.max(v)).max().unwrap_or(0)
}

/// `n_c` for a type-2 compact, taken hereditarily over its arguments.
pub fn n_a2(c: &NatCompact2) -> Nat {
    c.entries().iter().map(|(p, m)| n_a(p).max(*m)).max().unwrap_or(0)
}

/// Total extension of a compact mapping every other argument to 0.
pub fn pad_total(c: &NatCompact1) -> TotalFn1 {
    let c = c.clone();
    TotalFn1::new(move |x| c.get(x).unwrap_or(0))
}

pub fn consistent(c: &NatCompact1, d: &NatCompact1) -> bool {
    c.consistent_with(d)
}
