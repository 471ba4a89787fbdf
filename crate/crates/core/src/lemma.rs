//! The approximation lemma at type 1.
//!
//! Given a functional `f` on total type-1 functions, observations `(p_i,
//! a_i)` (a compact and a value) are enumerated in a fixed order. Stage `n`
//! keeps the observations `X_n` that no joint witness `z_{i,j}`, `j <= n`,
//! has refuted, and the subset `Y_n` of observations backed by a member of
//! `X_n` that no earlier conflicting member of `X_n` can reach. The stage
//! approximant `f_n` answers `a_j` for the first `j ∈ Y_n` with `p_j ⊑ x`.
//! For every total `x` and `x_n → x`, `f_n(x_n)` is eventually `f(x)`.
//!
//! The ambient set defaults to all total functions. A restricted set is
//! described by a caller-supplied witness function, which must decide
//! whether two compacts have a joint extension inside the set; that
//! existential cannot be decided here.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::kk::{pad_total, Nat, NatCompact1, TotalFn1, TotalFn2};
use crate::{Error, Result};

/// A pair `(p, a)`: on extensions of `p` the functional is claimed to be `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    pub compact: NatCompact1,
    pub value: Nat,
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.compact, self.value)
    }
}

/// `pad_total(p ∪ q)` when `p` and `q` are consistent.
pub fn joint_witness(p: &NatCompact1, q: &NatCompact1) -> Option<TotalFn1> {
    p.union(q).map(|u| pad_total(&u))
}

type WitnessFn = dyn Fn(&NatCompact1, &NatCompact1) -> Option<TotalFn1> + Send + Sync;

/// The set `A` the functional is defined on, seen through joint witnesses.
#[derive(Clone)]
pub struct Ambient {
    witness: Arc<WitnessFn>,
}

impl Ambient {
    /// All total type-1 functions, with zero-padded unions as witnesses.
    pub fn everything() -> Self {
        Ambient {
            witness: Arc::new(joint_witness),
        }
    }

    /// `witness(p, q)` must return a total function in `A` extending both,
    /// or `None` when no such function exists.
    pub fn with_witness<W>(witness: W) -> Self
    where
        W: Fn(&NatCompact1, &NatCompact1) -> Option<TotalFn1> + Send + Sync + 'static,
    {
        Ambient {
            witness: Arc::new(witness),
        }
    }

    pub fn witness(&self, p: &NatCompact1, q: &NatCompact1) -> Option<TotalFn1> {
        (self.witness)(p, q)
    }
}

impl Default for Ambient {
    fn default() -> Self {
        Ambient::everything()
    }
}

impl fmt::Debug for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Ambient(..)")
    }
}

/// All compacts of the given size (`Σ (1 + key + value)`), in lexicographic
/// order of their entry lists.
fn compacts_of_size(size: u64) -> Vec<NatCompact1> {
    fn go(min_key: u64, budget: u64, acc: &mut Vec<(Nat, Nat)>, out: &mut Vec<Vec<(Nat, Nat)>>) {
        if budget == 0 {
            out.push(acc.clone());
            return;
        }
        for k in min_key..budget {
            for v in 0..budget - k {
                acc.push((k, v));
                go(k + 1, budget - 1 - k - v, acc, out);
                acc.pop();
            }
        }
    }
    let mut tables = Vec::new();
    go(0, size, &mut Vec::new(), &mut tables);
    tables.sort();
    tables
        .into_iter()
        .map(|t| NatCompact1::from_pairs(t).expect("keys are distinct"))
        .collect()
}

/// The first `count` observations whose compact has an extension in `A`.
///
/// Pairs are ordered by `size(p) + a`, then by `size(p)`, then
/// lexicographically in `p`; the size is `Σ (1 + key + value)`.
pub fn observations(count: usize, ambient: &Ambient) -> Vec<Observation> {
    let mut out = Vec::with_capacity(count);
    let mut by_size: Vec<Vec<NatCompact1>> = Vec::new();
    let mut weight = 0u64;
    while out.len() < count {
        for size in 0..=weight {
            if by_size.len() <= size as usize {
                let admissible = compacts_of_size(size)
                    .into_iter()
                    .filter(|p| ambient.witness(p, p).is_some())
                    .collect();
                by_size.push(admissible);
            }
            for p in &by_size[size as usize] {
                if out.len() == count {
                    return out;
                }
                out.push(Observation {
                    compact: p.clone(),
                    value: weight - size,
                });
            }
        }
        weight += 1;
    }
    out
}

/// The stage-`n` sets, as observation indices in increasing order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub n: usize,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    members: Vec<Observation>,
}

impl Stage {
    /// The observations indexed by `y`.
    pub fn members(&self) -> &[Observation] {
        &self.members
    }

    /// Members of `Y_n` with consistent compacts carry equal values.
    pub fn agreement_holds(&self) -> bool {
        self.members.iter().enumerate().all(|(i, a)| {
            self.members[..i]
                .iter()
                .all(|b| a.value == b.value || !a.compact.consistent_with(&b.compact))
        })
    }
}

/// The functional `f_n` realized from a stage.
#[derive(Clone, Debug)]
pub struct Approximant {
    members: Vec<Observation>,
}

impl Approximant {
    /// `a_j` for the first member with `p_j ⊑ x`, else 0.
    pub fn eval(&self, x: &dyn Fn(Nat) -> Nat) -> Nat {
        self.members
            .iter()
            .find(|o| o.compact.is_below(x))
            .map_or(0, |o| o.value)
    }

    pub fn eval_fn(&self, x: &TotalFn1) -> Nat {
        self.eval(&|k| x.eval(k))
    }

    /// Arguments whose values can influence the result.
    pub fn key_set(&self) -> BTreeSet<Nat> {
        self.members.iter().flat_map(|o| o.compact.keys()).collect()
    }

    pub fn to_functional(&self) -> TotalFn2 {
        let members = self.members.clone();
        TotalFn2::new(move |o| {
            members
                .iter()
                .find(|m| m.compact.entries().all(|(k, v)| o.query(k) == v))
                .map_or(0, |m| m.value)
        })
    }
}

pub fn realize_stage(stage: &Stage) -> Approximant {
    Approximant {
        members: stage.members.clone(),
    }
}

/// Observations `0..=horizon` of a functional together with the first
/// refuting witness of each.
#[derive(Clone, Debug)]
pub struct ApproxScheme {
    f: TotalFn2,
    ambient: Ambient,
    observations: Vec<Observation>,
    /// `killer[i]`: least `j` with `f(z_{i,j}) ≠ a_i`, if any.
    killer: Vec<Option<usize>>,
}

impl ApproxScheme {
    /// Scheme over the default enumeration, for stages up to `horizon`.
    pub fn new(f: &TotalFn2, ambient: Ambient, horizon: usize) -> Self {
        let obs = observations(horizon + 1, &ambient);
        ApproxScheme::from_observations(f, ambient, obs)
    }

    pub fn from_observations(f: &TotalFn2, ambient: Ambient, observations: Vec<Observation>) -> Self {
        let killer = observations
            .iter()
            .map(|oi| {
                observations.iter().position(|oj| {
                    ambient
                        .witness(&oi.compact, &oj.compact)
                        .is_some_and(|z| f.eval_fn(&z) != oi.value)
                })
            })
            .collect();
        ApproxScheme {
            f: f.clone(),
            ambient,
            observations,
            killer,
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn horizon(&self) -> usize {
        self.observations.len() - 1
    }

    /// `z_{i,j}`, if the two compacts have a joint extension in `A`.
    pub fn witness(&self, i: usize, j: usize) -> Option<TotalFn1> {
        self.ambient
            .witness(&self.observations[i].compact, &self.observations[j].compact)
    }

    pub fn in_x(&self, i: usize, n: usize) -> bool {
        i <= n && self.killer[i].is_none_or(|k| k > n)
    }

    /// `X_n` and `Y_n`; `n` must not exceed the horizon.
    pub fn stage(&self, n: usize) -> Stage {
        assert!(
            n <= self.horizon(),
            "stage {n} is beyond the horizon {}",
            self.horizon()
        );
        let obs = &self.observations;
        let x: Vec<usize> = (0..=n).filter(|&i| self.in_x(i, n)).collect();
        let y: Vec<usize> = (0..=n)
            .filter(|&j| {
                x.iter().any(|&r| {
                    obs[j].value == obs[r].value
                        && obs[r].compact.is_below_compact(&obs[j].compact)
                        && x.iter()
                            .take_while(|&&i| i < r)
                            .all(|&i| obs[i].value == obs[r].value || !obs[i].compact.consistent_with(&obs[j].compact))
                })
            })
            .collect();
        let members = y.iter().map(|&j| obs[j].clone()).collect();
        Stage { n, x, y, members }
    }

    pub fn approximant(&self, n: usize) -> Approximant {
        realize_stage(&self.stage(n))
    }

    pub fn functional(&self) -> &TotalFn2 {
        &self.f
    }
}

/// Stage-`n` sets over an explicit observation list on all total functions.
/// The list must contain the observations `0..=n`.
pub fn build_stage(f: &TotalFn2, observations: &[Observation], n: usize) -> Stage {
    assert!(
        n < observations.len(),
        "stage {n} needs {} observations, got {}",
        n + 1,
        observations.len()
    );
    ApproxScheme::from_observations(f, Ambient::everything(), observations[..=n].to_vec()).stage(n)
}

/// `f_n(x_n)` for one test point along its Grilliot sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilization {
    /// `f(x)`.
    pub value: Nat,
    /// First stage from which `f_n(x_n) = f(x)` up to the horizon.
    pub settled_at: usize,
    /// `f_n(x_n)` for `n = 0..=horizon`.
    pub trace: Vec<Nat>,
}

/// Runs every stage up to the scheme's horizon on the approximations
/// `x_n` of each test point. Fails, naming the points, if some trace has
/// not settled on `f(x)` by the horizon or if a stage breaks Y-agreement.
pub fn approximants(scheme: &ApproxScheme, points: &[TotalFn1]) -> Result<Vec<Stabilization>> {
    let horizon = scheme.horizon();
    let mut traces = vec![Vec::with_capacity(horizon + 1); points.len()];
    for n in 0..=horizon {
        let stage = scheme.stage(n);
        if !stage.agreement_holds() {
            return Err(Error::Budget(format!(
                "stage {n} has consistent Y members with different values"
            )));
        }
        let fa = realize_stage(&stage);
        for (x, trace) in points.iter().zip(&mut traces) {
            trace.push(fa.eval_fn(&x.approx_fn(n as Nat)));
        }
    }
    let mut out = Vec::with_capacity(points.len());
    let mut unsettled = Vec::new();
    for (idx, (x, trace)) in points.iter().zip(traces).enumerate() {
        let value = scheme.functional().eval_fn(x);
        let tail = trace.iter().rev().take_while(|&&v| v == value).count();
        if tail == 0 {
            unsettled.push(format!("#{idx} (f(x) = {value}, f_N(x_N) = {})", trace[horizon]));
            continue;
        }
        out.push(Stabilization {
            value,
            settled_at: trace.len() - tail,
            trace,
        });
    }
    if !unsettled.is_empty() {
        return Err(Error::Budget(format!(
            "not settled by stage {horizon}: {}",
            unsettled.join(", ")
        )));
    }
    Ok(out)
}

/// Decides membership of a total function in a clopen set `A_m`.
pub type Membership = Arc<dyn Fn(&dyn Fn(Nat) -> Nat) -> bool + Send + Sync>;

/// Total extension of `f` from `A = ∩ A_m`: `f_m(z)` for the least `m`
/// with `z ∉ A_m`, and `f(z)` on `A`.
#[derive(Clone)]
pub struct Extension {
    f: TotalFn2,
    memberships: Vec<Membership>,
    approximants: Vec<Approximant>,
}

/// Needs one approximant per membership test.
pub fn extend_from_closed(
    f: &TotalFn2,
    memberships: Vec<Membership>,
    approximants: Vec<Approximant>,
) -> Result<Extension> {
    if approximants.len() < memberships.len() {
        return Err(Error::LevelMismatch(format!(
            "{} membership tests but only {} approximants",
            memberships.len(),
            approximants.len()
        )));
    }
    Ok(Extension {
        f: f.clone(),
        memberships,
        approximants,
    })
}

impl Extension {
    pub fn eval(&self, z: &dyn Fn(Nat) -> Nat) -> Nat {
        match self.memberships.iter().position(|inside| !inside(z)) {
            Some(m) => self.approximants[m].eval(z),
            None => self.f.eval(z),
        }
    }

    pub fn eval_fn(&self, z: &TotalFn1) -> Nat {
        self.eval(&|k| z.eval(k))
    }
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Extension({} tests)", self.memberships.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> NatCompact1 {
        s.parse().unwrap()
    }

    fn obs(p: &str, a: Nat) -> Observation {
        Observation {
            compact: c(p),
            value: a,
        }
    }

    #[test]
    fn joint_witness_examples() {
        let z = joint_witness(&c("{0:1}"), &c("{1:2}")).unwrap();
        assert_eq!((z.eval(0), z.eval(1), z.eval(2), z.eval(40)), (1, 2, 0, 0));
        assert!(joint_witness(&c("{0:1}"), &c("{0:2}")).is_none());
        let p = c("{3:4}");
        let z = joint_witness(&p, &p).unwrap();
        assert!((0..10).all(|k| z.eval(k) == pad_total(&p).eval(k)));
    }

    #[test]
    fn enumeration_prefix() {
        let got: Vec<String> = observations(8, &Ambient::everything())
            .iter()
            .map(|o| o.to_string())
            .collect();
        assert_eq!(
            got,
            [
                "({}, 0)",
                "({}, 1)",
                "({0:0}, 0)",
                "({}, 2)",
                "({0:0}, 1)",
                "({0:1}, 0)",
                "({1:0}, 0)",
                "({}, 3)"
            ]
        );
    }

    #[test]
    fn compacts_by_size_are_complete() {
        // all tables with keys and values below 4, grouped by size
        let cells: Vec<(Nat, Nat)> = (0..4).flat_map(|k| (0..4).map(move |v| (k, v))).collect();
        let mut brute: Vec<BTreeSet<NatCompact1>> = vec![BTreeSet::new(); 5];
        for mask in 0u32..1 << cells.len() {
            let pick: Vec<(Nat, Nat)> = (0..cells.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| cells[b])
                .collect();
            if let Ok(p) = NatCompact1::from_pairs(pick.iter().copied()) {
                if p.len() == pick.len() && p.size() <= 4 {
                    brute[p.size() as usize].insert(p);
                }
            }
        }
        for size in 0..=4u64 {
            let listed = compacts_of_size(size);
            assert!(listed.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(
                listed.into_iter().collect::<BTreeSet<_>>(),
                brute[size as usize],
                "size {size}"
            );
        }
        assert!(compacts_of_size(9).iter().all(|p| p.size() == 9));
    }

    #[test]
    fn sum_settles_on_successor() {
        let scheme = ApproxScheme::new(&TotalFn2::sum_at(0, 1), Ambient::everything(), 400);
        let s = approximants(&scheme, &[TotalFn1::successor()]).unwrap();
        assert_eq!(s[0].value, 3);
        assert!(approximants(
            &ApproxScheme::new(&TotalFn2::sum_at(0, 1), Ambient::everything(), 100),
            &[TotalFn1::successor()]
        )
        .is_err());
    }

    #[test]
    fn self_application_settles_on_identity() {
        let scheme = ApproxScheme::new(&TotalFn2::self_apply(0), Ambient::everything(), 100);
        assert_eq!(approximants(&scheme, &[TotalFn1::identity()]).unwrap()[0].value, 0);
    }

    #[test]
    fn stage_examples() {
        let f = TotalFn2::apply_at(0);
        let s = build_stage(&f, &[obs("{}", 0)], 0);
        assert_eq!((s.x.clone(), s.y.clone()), (vec![0], vec![0]));

        let nested = [obs("{0:2}", 2), obs("{0:2, 1:5}", 2)];
        let s = build_stage(&f, &nested, 1);
        assert_eq!(s.y, vec![0, 1]);

        let wrong = [obs("{0:3}", 4)];
        let s = build_stage(&f, &wrong, 0);
        assert!(s.x.is_empty());
        assert_eq!(f.eval_fn(&joint_witness(&c("{0:3}"), &c("{0:3}")).unwrap()), 3);
    }

    #[test]
    fn realize_examples() {
        let f = TotalFn2::apply_at(0);
        let s = build_stage(&f, &[obs("{0:2}", 2), obs("{0:3}", 3), obs("{0:2, 1:1}", 2)], 2);
        let fa = realize_stage(&s);
        assert_eq!(fa.eval(&|k| if k == 0 { 3 } else { 9 }), 3);
        assert_eq!(fa.eval(&|_| 7), 0);
        assert_eq!(fa.eval(&|k| if k == 0 { 2 } else { 1 }), 2);
        assert_eq!(fa.to_functional().eval(&|k| k + 2), 2);
    }

    #[test]
    fn stages_agree_and_depend_on_finitely_many_keys() {
        for f in [TotalFn2::sum_at(0, 1), TotalFn2::self_apply(0), TotalFn2::constant(5)] {
            let scheme = ApproxScheme::new(&f, Ambient::everything(), 60);
            for n in 0..=60 {
                let stage = scheme.stage(n);
                assert!(stage.agreement_holds(), "stage {n}");
                let fa = realize_stage(&stage);
                let keys = fa.key_set();
                let x = |k: Nat| (k * 5 + 1) % 4;
                let y = |k: Nat| if keys.contains(&k) { x(k) } else { 9 };
                assert_eq!(fa.eval(&x), fa.eval(&y));
            }
        }
    }

    #[test]
    fn constant_functional_settles() {
        let scheme = ApproxScheme::new(&TotalFn2::constant(5), Ambient::everything(), 60);
        let pts = [TotalFn1::identity(), TotalFn1::constant(2), TotalFn1::successor()];
        for s in approximants(&scheme, &pts).unwrap() {
            assert_eq!(s.value, 5);
        }
    }

    #[test]
    fn extension_examples() {
        let f = TotalFn2::apply_at(1);
        let scheme = ApproxScheme::new(&f, Ambient::everything(), 10);
        let all: Membership = Arc::new(|_| true);
        let g = extend_from_closed(&f, vec![all], vec![scheme.approximant(0)]).unwrap();
        assert_eq!(g.eval(&|k| k + 3), 4);

        let zero_at_0: Membership = Arc::new(|z| z(0) == 0);
        let f0 = scheme.approximant(0);
        let g = extend_from_closed(&f, vec![zero_at_0], vec![f0.clone()]).unwrap();
        let z = |k: Nat| if k == 0 { 1 } else { 6 };
        assert_eq!(g.eval(&z), f0.eval(&z));
        assert_eq!(g.eval(&|k| k * 2), 2);
        assert!(extend_from_closed(&f, vec![Arc::new(|_| true)], vec![]).is_err());
    }
}
