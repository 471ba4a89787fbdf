//! Signed binary digit representations of the reals.
//!
//! A total element is an integer head `a` followed by infinitely many digits
//! `b_i ∈ {-1, 0, 1}` and denotes `a + Σ b_i 2^-i`. Finite sequences are the
//! compact approximations, ordered by end-extension. The representation is
//! redundant, which is what makes every operation here computable from
//! finite prefixes.
//!
//! Text format: `a:d1 d2 d3` with digits written `+`, `0` and `-`; the empty
//! sequence is written `e`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use parking_lot::Mutex;

use crate::exact::{int, log2_ceil, pow2_neg, round_half_up, IntervalStream, RatInterval, Rational};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Digit {
    Minus,
    Zero,
    Plus,
}

impl Digit {
    pub const ALL: [Digit; 3] = [Digit::Minus, Digit::Zero, Digit::Plus];

    pub fn value(self) -> i64 {
        match self {
            Digit::Minus => -1,
            Digit::Zero => 0,
            Digit::Plus => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Digit::Minus => '-',
            Digit::Zero => '0',
            Digit::Plus => '+',
        }
    }

    pub fn from_symbol(c: char) -> Option<Digit> {
        match c {
            '-' | '\u{2212}' => Some(Digit::Minus),
            '0' => Some(Digit::Zero),
            '+' => Some(Digit::Plus),
            _ => None,
        }
    }
}

impl TryFrom<i64> for Digit {
    type Error = Error;

    fn try_from(v: i64) -> Result<Digit> {
        match v {
            -1 => Ok(Digit::Minus),
            0 => Ok(Digit::Zero),
            1 => Ok(Digit::Plus),
            other => Err(Error::MalformedDigits(format!("{other} is not a signed binary digit"))),
        }
    }
}

/// Value of `head` followed by `digits`, as `numerator / 2^len`.
fn partial_numerator(head: i64, digits: impl Iterator<Item = Digit>) -> (BigInt, u32) {
    let mut num = BigInt::from(head);
    let mut len = 0u32;
    for d in digits {
        num = (num << 1u32) + d.value();
        len += 1;
    }
    (num, len)
}

fn dyadic(num: BigInt, len: u32) -> Rational {
    Rational::new(num, BigInt::from(1) << len)
}

/// Interval of values reachable by infinite extensions of a prefix with
/// partial value `num / 2^len`.
fn prefix_hull(num: BigInt, len: u32) -> RatInterval {
    let den = BigInt::from(1) << len;
    RatInterval::new(Rational::new(&num - 1, den.clone()), Rational::new(num + 1, den))
        .expect("prefix hull endpoints are ordered")
}

/// A compact of the digit domain: the empty sequence, or a head followed by
/// finitely many digits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct DigitSeq {
    head: Option<i64>,
    digits: Vec<Digit>,
}

impl DigitSeq {
    pub fn new(head: Option<i64>, digits: Vec<Digit>) -> Result<Self> {
        if head.is_none() && !digits.is_empty() {
            return Err(Error::MalformedDigits(
                "digits without a head are not an end-extension of the empty sequence".into(),
            ));
        }
        Ok(DigitSeq { head, digits })
    }

    pub fn empty() -> Self {
        DigitSeq::default()
    }

    pub fn with_head(head: i64, digits: Vec<Digit>) -> Self {
        DigitSeq {
            head: Some(head),
            digits,
        }
    }

    pub fn head(&self) -> Option<i64> {
        self.head
    }

    pub fn digits(&self) -> &[Digit] {
        &self.digits
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_none()
    }

    /// `a + Σ_{i≤n} b_i 2^-i`, absent for the empty sequence.
    pub fn value(&self) -> Option<Rational> {
        let head = self.head?;
        let (num, len) = partial_numerator(head, self.digits.iter().copied());
        Some(dyadic(num, len))
    }

    /// The closed interval of values of all maximal extensions.
    pub fn hull(&self) -> Result<RatInterval> {
        let head = self.head.ok_or(Error::EmptyCompact)?;
        let (num, len) = partial_numerator(head, self.digits.iter().copied());
        Ok(prefix_hull(num, len))
    }

    /// End-extension order: `self ⊑ other`.
    pub fn is_prefix_of(&self, other: &DigitSeq) -> bool {
        match self.head {
            None => true,
            Some(h) => other.head == Some(h) && other.digits.starts_with(&self.digits),
        }
    }

    pub fn push(&mut self, d: Digit) {
        assert!(self.head.is_some(), "cannot extend the empty sequence with a digit");
        self.digits.push(d);
    }

    pub fn truncated(&self, len: usize) -> DigitSeq {
        DigitSeq {
            head: self.head,
            digits: self.digits[..len.min(self.digits.len())].to_vec(),
        }
    }
}

fn render_digits(head: i64, digits: impl Iterator<Item = Digit>) -> String {
    let body: Vec<String> = digits.map(|d| d.symbol().to_string()).collect();
    format!("{}:{}", head, body.join(" "))
}

impl fmt::Display for DigitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.head {
            None => write!(f, "e"),
            Some(h) => write!(f, "{}", render_digits(h, self.digits.iter().copied())),
        }
    }
}

fn parse_digit_run(s: &str) -> Result<Vec<Digit>> {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| Digit::from_symbol(c).ok_or_else(|| Error::MalformedDigits(format!("unexpected character {c:?}"))))
        .collect()
}

fn parse_head(s: &str) -> Result<i64> {
    s.trim()
        .parse()
        .map_err(|_| Error::MalformedDigits(format!("bad head {:?}", s.trim())))
}

impl FromStr for DigitSeq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "e" || t.is_empty() {
            return Ok(DigitSeq::empty());
        }
        let (head, rest) = t.split_once(':').unwrap_or((t, ""));
        Ok(DigitSeq::with_head(parse_head(head)?, parse_digit_run(rest)?))
    }
}

type Generator = Box<dyn FnMut() -> Digit + Send>;

struct Source {
    state: Mutex<SourceState>,
}

struct SourceState {
    produced: Vec<Digit>,
    generator: Generator,
}

/// A total element: a head and a lazily produced, memoized digit sequence.
///
/// Digits are produced in order by a generator and cached behind a lock, so
/// clones of a stream share work and may be read from several threads.
#[derive(Clone)]
pub struct DigitStream {
    head: i64,
    source: Arc<Source>,
}

impl DigitStream {
    /// Stream whose digits are produced in order by `generator`.
    pub fn new<G>(head: i64, generator: G) -> Self
    where
        G: FnMut() -> Digit + Send + 'static,
    {
        DigitStream {
            head,
            source: Arc::new(Source {
                state: Mutex::new(SourceState {
                    produced: Vec::new(),
                    generator: Box::new(generator),
                }),
            }),
        }
    }

    /// Stream with digit `i` (1-based) given by `digit(i)`.
    pub fn from_fn<F>(head: i64, digit: F) -> Self
    where
        F: Fn(usize) -> Digit + Send + 'static,
    {
        let mut i = 0;
        DigitStream::new(head, move || {
            i += 1;
            digit(i)
        })
    }

    pub fn zeros(head: i64) -> Self {
        DigitStream::new(head, || Digit::Zero)
    }

    /// `head`, then `prefix`, then `cycle` repeated forever (zeros if the
    /// cycle is empty).
    pub fn periodic(head: i64, prefix: Vec<Digit>, cycle: Vec<Digit>) -> Self {
        let cycle = if cycle.is_empty() { vec![Digit::Zero] } else { cycle };
        DigitStream::from_fn(head, move |i| {
            if i <= prefix.len() {
                prefix[i - 1]
            } else {
                cycle[(i - prefix.len() - 1) % cycle.len()]
            }
        })
    }

    pub fn head(&self) -> i64 {
        self.head
    }

    /// Digit at 1-based position `i`.
    pub fn digit(&self, i: usize) -> Digit {
        assert!(i >= 1, "digit positions start at 1");
        let mut state = self.source.state.lock();
        while state.produced.len() < i {
            let d = (state.generator)();
            state.produced.push(d);
        }
        state.produced[i - 1]
    }

    pub fn digits(&self, n: usize) -> Vec<Digit> {
        if n == 0 {
            return Vec::new();
        }
        self.digit(n);
        self.source.state.lock().produced[..n].to_vec()
    }

    /// The compact made of the head and the first `n` digits.
    pub fn prefix(&self, n: usize) -> DigitSeq {
        DigitSeq::with_head(self.head, self.digits(n))
    }

    /// Hull of the prefix with `n` digits: width `2^(1-n)`.
    pub fn hull_at(&self, n: usize) -> RatInterval {
        let (num, len) = partial_numerator(self.head, self.digits(n).into_iter());
        prefix_hull(num, len)
    }

    pub fn partial_value(&self, n: usize) -> Rational {
        let (num, len) = partial_numerator(self.head, self.digits(n).into_iter());
        dyadic(num, len)
    }

    /// Interval of width `2^-p` containing the denoted real.
    pub fn decode(&self, p: u32) -> RatInterval {
        self.hull_at(p as usize + 1)
    }

    /// `a:d1 d2 ... dn`.
    pub fn render(&self, n: usize) -> String {
        render_digits(self.head, self.digits(n).into_iter())
    }
}

impl fmt::Debug for DigitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let produced = self.source.state.lock().produced.len();
        f.debug_struct("DigitStream")
            .field("head", &self.head)
            .field("produced", &produced)
            .finish()
    }
}

/// How a finite textual digit sequence continues when read as a stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TailPolicy {
    /// Repeat the last written digit (zeros if none was written).
    #[default]
    RepeatLast,
    /// Pad with zeros.
    Zeros,
}

/// Parses `a:d1 d2 ... (c1 c2)` as a total stream. A parenthesized group at
/// the end repeats forever; otherwise `tail` decides the continuation.
pub fn parse_stream(s: &str, tail: TailPolicy) -> Result<DigitStream> {
    let t = s.trim();
    let (head, rest) = t
        .split_once(':')
        .ok_or_else(|| Error::MalformedDigits(format!("expected `head:digits`, got {t:?}")))?;
    let head = parse_head(head)?;
    let (prefix, cycle) = match rest.find('(') {
        Some(open) => {
            let close = rest
                .rfind(')')
                .filter(|&c| c > open && rest[c + 1..].trim().is_empty())
                .ok_or_else(|| Error::MalformedDigits("unbalanced repeat group".into()))?;
            let cycle = parse_digit_run(&rest[open + 1..close])?;
            if cycle.is_empty() {
                return Err(Error::MalformedDigits("empty repeat group".into()));
            }
            (parse_digit_run(&rest[..open])?, cycle)
        }
        None => {
            let prefix = parse_digit_run(rest)?;
            let cycle = match (tail, prefix.last()) {
                (TailPolicy::RepeatLast, Some(&d)) => vec![d],
                _ => vec![Digit::Zero],
            };
            (prefix, cycle)
        }
    };
    Ok(DigitStream::periodic(head, prefix, cycle))
}

/// Closed interval of values of the maximal extensions of `s`.
pub fn hull(s: &DigitSeq) -> Result<RatInterval> {
    s.hull()
}

pub fn decode(x: &DigitStream, p: u32) -> RatInterval {
    x.decode(p)
}

/// Consistency of compacts: some maximal extensions denote the same real.
/// The empty sequence is consistent with everything.
pub fn sim0(s: &DigitSeq, t: &DigitSeq) -> bool {
    match (s.hull(), t.hull()) {
        (Ok(a), Ok(b)) => a.intersects(&b),
        _ => true,
    }
}

/// Total extension of a compact by zero padding; the empty compact becomes
/// `0:000...`.
pub fn extend_total(s: &DigitSeq) -> DigitStream {
    match s.head() {
        None => DigitStream::zeros(0),
        Some(h) => DigitStream::periodic(h, s.digits().to_vec(), vec![Digit::Zero]),
    }
}

/// Produces digits of a real `v` known through enclosures, maintaining
/// `|v - value| <= 2^-len` for the digits emitted so far.
struct Extractor {
    value: Rational,
    len: u32,
    source: Box<dyn Fn(u32) -> RatInterval + Send>,
}

impl Extractor {
    fn new(value: Rational, len: u32, source: Box<dyn Fn(u32) -> RatInterval + Send>) -> Self {
        Extractor { value, len, source }
    }

    fn next_digit(&mut self) -> Digit {
        let j = self.len;
        let d = choose_digit(&(self.source)(j + 4), &self.value, j);
        self.value += int(d.value()) * pow2_neg(j + 1);
        self.len += 1;
        d
    }
}

/// Digit `j+1` given the partial value after `j` digits and an enclosure
/// of width at most `2^-(j+4)`.
fn choose_digit(enc: &RatInterval, value: &Rational, j: u32) -> Digit {
    let offset = enc.midpoint() - value;
    let threshold = pow2_neg(j + 2);
    if offset > threshold {
        Digit::Plus
    } else if offset < -threshold {
        Digit::Minus
    } else {
        Digit::Zero
    }
}

fn head_from(enclosure: &RatInterval) -> i64 {
    round_half_up(&enclosure.midpoint())
        .to_i64()
        .expect("head of a signed digit stream must fit in i64")
}

/// Signed digit stream for the real presented by `x`.
///
/// Digit `j+1` is chosen from the answer at precision `j+4`, so
/// `decode(result, p)` always meets `x.query(p + 2)`.
pub fn from_intervals(x: &IntervalStream) -> DigitStream {
    let head = head_from(&x.query(2));
    let src = x.clone();
    let mut ex = Extractor::new(int(head), 0, Box::new(move |q| src.query(q)));
    DigitStream::new(head, move || ex.next_digit())
}

/// Finite counterpart of [`from_intervals`]: at most `depth` digits of the
/// real presented by `query`, stopping early where `query` has no answer.
/// Answers must have width at most `2^-p` and contain a common real.
pub(crate) fn extract_prefix(query: &dyn Fn(u32) -> Option<RatInterval>, depth: usize) -> DigitSeq {
    let Some(first) = query(2) else {
        return DigitSeq::empty();
    };
    let head = head_from(&first);
    let mut out = DigitSeq::with_head(head, Vec::new());
    let mut value = int(head);
    for j in 0..depth as u32 {
        let Some(enc) = query(j + 4) else {
            break;
        };
        let d = choose_digit(&enc, &value, j);
        value += int(d.value()) * pow2_neg(j + 1);
        out.push(d);
    }
    out
}

/// The prefix hulls of `x`, which shrink to its value.
pub fn to_intervals(x: &DigitStream) -> IntervalStream {
    let x = x.clone();
    IntervalStream::from_fn(move |p| x.decode(p))
}

/// Stream of `c + Σ coeff_i · value(x_i)`.
pub fn affine(c: Rational, terms: Vec<(Rational, DigitStream)>) -> DigitStream {
    let total: Rational = terms.iter().map(|(k, _)| k.abs()).sum();
    let extra = log2_ceil(&total);
    let enclosure = IntervalStream::from_fn(move |q| {
        terms.iter().fold(RatInterval::point(c.clone()), |acc, (k, x)| {
            acc.add(&x.decode(q + extra).scale(k))
        })
    });
    from_intervals(&enclosure)
}

fn near_integer(h: &RatInterval) -> Option<i64> {
    let n = round_half_up(&h.midpoint());
    let half = Rational::new(BigInt::from(1), BigInt::from(2));
    let nq = Rational::from_integer(n.clone());
    let inside = h.inside_open(&(&nq - &half), &(&nq + &half));
    inside.then(|| n.to_i64().expect("normalizer head must fit in i64"))
}

fn near_third(h: &RatInterval) -> bool {
    let n = Rational::from_integer(crate::exact::floor(&h.midpoint()));
    let third = Rational::new(BigInt::from(1), BigInt::from(3));
    h.inside_open(&(&n + &third), &(&n + &third + &third))
}

enum NormState {
    /// `n` and `k - 1` zeros emitted; the input lies within `2^-k` of `n`.
    Zeros {
        k: u32,
        depth: usize,
    },
    Extract(Extractor),
}

/// The normalizer: an equivalent stream that is literally `n:000...`
/// whenever the input denotes the integer `n`.
///
/// Two overlapping cases are semi-decided on prefixes of increasing length:
/// a value in `(n - 1/2, n + 1/2)` or in `(n + 1/3, n + 2/3)`; the second is
/// preferred when both become certain at the same depth and returns the
/// input unchanged. In the first case zeros are emitted while the input
/// stays within `2^-(k+1)` of `n`; once it is certainly left or right of
/// `n ± 2^-(k+2)` the remaining digits are extracted from the input's
/// value.
pub fn normalize(x: &DigitStream) -> DigitStream {
    let mut depth = 0usize;
    let n = loop {
        let h = x.hull_at(depth);
        if near_third(&h) {
            return x.clone();
        }
        if let Some(n) = near_integer(&h) {
            break n;
        }
        depth += 1;
    };
    let src = x.clone();
    let target = int(n);
    let mut state = NormState::Zeros { k: 1, depth };
    DigitStream::new(n, move || loop {
        match &mut state {
            NormState::Zeros { k, depth } => {
                let h = src.hull_at(*depth);
                let inner = pow2_neg(*k + 1);
                let outer = pow2_neg(*k);
                let quarter = pow2_neg(*k + 2);
                if h.inside_open(&(&target - &inner), &(&target + &inner)) {
                    *k += 1;
                    return Digit::Zero;
                }
                let left = h.inside_open(&(&target - &outer), &(&target - &quarter));
                let right = h.inside_open(&(&target + &quarter), &(&target + &outer));
                if left || right {
                    let tail_src = src.clone();
                    state = NormState::Extract(Extractor::new(
                        target.clone(),
                        *k - 1,
                        Box::new(move |q| tail_src.decode(q)),
                    ));
                    continue;
                }
                *depth += 1;
            }
            NormState::Extract(ex) => return ex.next_digit(),
        }
    })
}

/// True when `x` is literally `head` followed by zeros for `n` digits.
pub fn has_zero_tail(x: &DigitStream, n: usize) -> bool {
    x.digits(n).iter().all(|d| *d == Digit::Zero)
}
