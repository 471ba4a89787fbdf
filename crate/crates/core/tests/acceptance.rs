//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ctreal::digits::{decode, from_intervals, has_zero_tail, normalize, Digit, DigitStream};
use ctreal::embed::{
    mu_point, mu_table, pi1, pi2, pi2_with, pi_inv1, InvResult, Pi2Config, Pi2Path, RealFn1, WeightMode,
};
use ctreal::exact::{embed_nat, int, nat, pow2_neg, rat, IntervalStream, RatInterval, Rational};
use ctreal::kk::{approx, clip, enum_x, modulus1, modulus2, KkValue, Nat, TotalFn1, TotalFn2, ENUM_CAP};
use ctreal::lemma::{approximants, build_stage, Ambient, ApproxScheme};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn random_rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rational {
    let den = rng.gen_range(1..=1000i64);
    let num = rng.gen_range(lo * den..=hi * den);
    rat(num, den)
}

fn random_table_fn(rng: &mut ChaCha8Rng, len: usize, max: Nat) -> (Vec<Nat>, TotalFn1) {
    let table: Vec<Nat> = (0..len).map(|_| rng.gen_range(0..=max)).collect();
    (table.clone(), TotalFn1::from_table(table))
}

// ---------------------------------------------------------------- 1

fn digit_decoding() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = Rational::zero();
    for _ in 0..1000 {
        let r = random_rational(&mut rng, -8, 8);
        let x = from_intervals(&IntervalStream::constant(r.clone()));
        for p in [10, 20, 40] {
            let err = (decode(&x, p).midpoint() - &r).abs();
            check(err <= pow2_neg(p), || format!("r = {r}, p = {p}: error {err}"))?;
            worst = worst.max(err * Rational::from_integer(num_bigint::BigInt::one() << p));
        }
    }
    let took = within_time(start, Duration::from_secs(10))?;
    Ok(format!("1000 rationals, worst error {worst} x 2^-p, {took:.2?}"))
}

// ---------------------------------------------------------------- 2

/// A random signed-digit encoding of the integer `n`: head in
/// `{n-1, n, n+1}`, free digits while the remainder is 0, forced ones once
/// it is ±1, and a constant tail paying off what is left.
fn redundant_integer(rng: &mut ChaCha8Rng, n: i64) -> (String, DigitStream) {
    let head = n + rng.gen_range(-1..=1);
    let mut digits = Vec::new();
    let mut rem = n - head;
    let len = rng.gen_range(0..12);
    for _ in 0..len {
        let d = if rem == 0 { rng.gen_range(-1..=1) } else { rem };
        rem = 2 * rem - d;
        digits.push(Digit::try_from(d).unwrap());
    }
    let tail = Digit::try_from(rem).unwrap();
    let shown: String = digits.iter().map(|d| d.symbol()).collect();
    let desc = format!("{head}:{shown}({})", tail.symbol());
    (desc, DigitStream::periodic(head, digits, vec![tail]))
}

fn normalizer() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ones = 0;
    for _ in 0..200 {
        let n = rng.gen_range(-10..=10);
        let (desc, x) = redundant_integer(&mut rng, n);
        check(decode(&x, 30).contains(&int(n)), || {
            format!("generator bug: {desc} is not {n}")
        })?;
        if x.head() != n {
            ones += 1;
        }
        let y = normalize(&x);
        check(y.head() == n && has_zero_tail(&y, 64), || {
            format!("normalize({desc}) = {}", y.render(64))
        })?;
    }
    for _ in 0..200 {
        let r = loop {
            let r = random_rational(&mut rng, -10, 10);
            if !r.is_integer() {
                break r;
            }
        };
        let y = normalize(&from_intervals(&IntervalStream::constant(r.clone())));
        for p in 0..=40 {
            let err = (decode(&y, p).midpoint() - &r).abs();
            check(err <= pow2_neg(p), || format!("normalize({r}) at p = {p}: error {err}"))?;
        }
    }
    let took = within_time(start, Duration::from_secs(30))?;
    Ok(format!(
        "200 integer encodings ({ones} with a shifted head), 200 rationals, {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 3

fn g_catalogue() -> Vec<(&'static str, RealFn1)> {
    let succ = pi1(&TotalFn1::successor());
    let sq = pi1(&TotalFn1::new(|x| x * x));
    vec![
        ("x", RealFn1::identity()),
        ("x+1/2", RealFn1::affine(Rational::one(), rat(1, 2))),
        ("x+1/3", RealFn1::affine(Rational::one(), rat(1, 3))),
        ("x/2", RealFn1::affine(rat(1, 2), Rational::zero())),
        ("2x/3+1/5", RealFn1::affine(rat(2, 3), rat(1, 5))),
        ("-x", RealFn1::affine(-Rational::one(), Rational::zero())),
        ("succ", succ.clone()),
        ("succ+1/7", succ.shifted(rat(1, 7))),
        ("sq-5/11", sq.shifted(rat(-5, 11))),
        ("const 3/2", RealFn1::affine(Rational::zero(), rat(3, 2))),
    ]
}

fn partition_of_unity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut inputs: Vec<Rational> = (0..6).flat_map(|n| [int(n) - rat(1, 3), int(n) + rat(1, 3)]).collect();
    while inputs.len() < 1000 {
        inputs.push(random_rational(&mut rng, -2, 12));
    }
    for x in &inputs {
        let total = mu_point(x).total();
        check(total == Rational::one(), || format!("mu_point({x}) sums to {total}"))?;
    }
    let cat = g_catalogue();
    for (name, g) in &cat {
        for n in 0..=3 {
            let sum = mu_table(n, g, 20)
                .map_err(|e| format!("mu_table({n}, {name}): {e}"))?
                .sum();
            check(sum.contains(&Rational::one()) && sum.width() <= pow2_neg(20), || {
                format!("mu_table({n}, {name}) sums to {sum}")
            })?;
        }
    }
    Ok(format!(
        "{} rows exact; {} tables, n <= 3, width <= 2^-20",
        inputs.len(),
        cat.len() * 4
    ))
}

// ---------------------------------------------------------------- 4

fn pair_catalogue() -> Vec<(&'static str, TotalFn2, &'static str, TotalFn1)> {
    let succ = TotalFn1::successor;
    let id = TotalFn1::identity;
    let half = || TotalFn1::new(|x| x / 2);
    let table = || TotalFn1::from_table(vec![2, 0, 1, 3]);
    vec![
        ("f(0)", TotalFn2::apply_at(0), "succ", succ()),
        ("f(3)", TotalFn2::apply_at(3), "succ", succ()),
        ("f(3)", TotalFn2::apply_at(3), "id", id()),
        ("f(0)+f(1)", TotalFn2::sum_at(0, 1), "succ", succ()),
        ("f(2)+f(5)", TotalFn2::sum_at(2, 5), "x/2", half()),
        ("f(f(0))", TotalFn2::self_apply(0), "succ", succ()),
        ("f(f(1))", TotalFn2::self_apply(1), "table", table()),
        ("7", TotalFn2::constant(7), "id", id()),
        ("f(4)", TotalFn2::apply_at(4), "table", table()),
        ("f(1)+f(1)", TotalFn2::sum_at(1, 1), "const 2", TotalFn1::constant(2)),
        (
            "if f(0)=0 then f(1) else f(2)",
            TotalFn2::new(|o| if o.query(0) == 0 { o.query(1) } else { o.query(2) }),
            "table",
            table(),
        ),
        (
            "f(0)*f(1)+f(2)",
            TotalFn2::new(|o| o.query(0) * o.query(1) + o.query(2)),
            "succ",
            succ(),
        ),
    ]
}

fn embedding_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let len = rng.gen_range(1..=25);
        let (table, f) = random_table_fn(&mut rng, len, 30);
        let g = pi1(&f);
        for a in 0..=20 {
            for p in [0, 20] {
                let x = embed_nat(a).query(p);
                let y = g
                    .apply(&x, p)
                    .ok_or_else(|| format!("pi1({table:?}) undefined at {a}"))?;
                check(y.contains(&nat(f.eval(a))), || {
                    format!("pi1({table:?}) at {a}, p = {p}: {y}")
                })?;
            }
        }
    }
    let mut slowest = Duration::ZERO;
    let pairs = pair_catalogue();
    for (fname, big, gname, f) in &pairs {
        let start = Instant::now();
        let r = pi2_with(big, &pi1(f), 20, &Pi2Config::default()).map_err(|e| format!("{fname} at {gname}: {e}"))?;
        let took = start.elapsed();
        slowest = slowest.max(took);
        let want = nat(big.eval_fn(f));
        check(
            r.path == Pi2Path::Case1 && r.enclosure == RatInterval::point(want.clone()),
            || format!("{fname} at pi1({gname}): {} via {:?}, want {want}", r.enclosure, r.path),
        )?;
        check(took < Duration::from_secs(1), || {
            format!("{fname} at {gname} took {took:.2?}")
        })?;
    }
    Ok(format!(
        "100 random f x 21 points; {} pairs via case 1, slowest {slowest:.2?}",
        pairs.len()
    ))
}

// ---------------------------------------------------------------- 5

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let len = rng.gen_range(1..=25);
        let (table, f) = random_table_fn(&mut rng, len, 30);
        let inv = pi_inv1(&pi1(&f), 20);
        for a in 0..=20 {
            let got = inv.eval(a);
            check(got == InvResult::Value(f.eval(a)), || {
                format!("pi_inv1(pi1({table:?}))({a}) = {got:?}")
            })?;
        }
    }
    let inv = pi_inv1(&RealFn1::affine(Rational::one(), rat(1, 2)), 20);
    for a in 0..=20 {
        let got = inv.eval(a);
        check(got == InvResult::ProvablyOutside, || format!("x+1/2 at {a}: {got:?}"))?;
    }
    Ok("100 random f recovered on 0..20; x+1/2 provably outside on 0..20".into())
}

// ---------------------------------------------------------------- 6

/// Independent evaluation of the weighted sum for a `g` whose values at the
/// naturals are known exactly and stay away from the naturals often enough
/// for the cumulative distance to pass 1.
fn brute_force_case2(big: &TotalFn2, g: &dyn Fn(Nat) -> Rational, mode: WeightMode) -> Rational {
    let dist = |x: &Rational| -> Rational {
        if !x.is_positive() {
            return x.abs().min(rat(1, 2));
        }
        let fl = Rational::from_integer(x.floor().to_integer());
        (x - &fl).min(&fl + Rational::one() - x).min(rat(1, 2))
    };
    let mu = |x: &Rational, m: Nat| -> Rational {
        if !x.is_positive() {
            return if m == 0 { Rational::one() } else { Rational::zero() };
        }
        let fl = x.floor();
        let y = x - &fl;
        let n = fl.to_integer().try_into().unwrap_or(u64::MAX);
        let upper = (y * int(3) - int(1)).clamp(Rational::zero(), Rational::one());
        if m == n {
            Rational::one() - upper
        } else if m == n + 1 {
            upper
        } else {
            Rational::zero()
        }
    };
    let mut eta = Vec::new();
    for k in 0..64 {
        eta.extend(0..=k);
    }
    let mut before = Rational::zero();
    let mut total = Rational::zero();
    for (n, &e) in eta.iter().enumerate() {
        if before > Rational::one() || (mode == WeightMode::Partition && before >= Rational::one()) {
            return total;
        }
        let d = dist(&g(e));
        let through = &before + &d;
        let w = match mode {
            WeightMode::Partition => d.clone().min(Rational::one() - &before),
            WeightMode::Literal => {
                let z = if through <= Rational::one() {
                    Rational::one()
                } else {
                    Rational::one() - &before
                };
                &d * z
            }
        };
        before = through;
        if w.is_zero() {
            continue;
        }
        let n = n as Nat;
        let tables = enum_x(1, n, ENUM_CAP).expect("small stage");
        let mut e_n = Rational::zero();
        for a in &tables {
            let weight = a
                .table()
                .iter()
                .enumerate()
                .fold(Rational::one(), |acc, (b, &v)| acc * mu(&g(b as Nat).min(nat(n)), v));
            if !weight.is_zero() {
                e_n += weight * nat(big.eval(&|i| a.eval_nat(i)));
            }
        }
        total += w * e_n;
    }
    panic!("cumulative distance never passed 1");
}

fn case2_hand_value() -> Outcome {
    let big = TotalFn2::apply_at(0);
    let mut lines = Vec::new();
    for (c, partition_want, literal_want) in [(rat(1, 2), rat(1, 4), rat(1, 4)), (rat(2, 5), rat(3, 25), rat(12, 125))]
    {
        let g = RealFn1::affine(Rational::one(), c.clone());
        let exact = |b: Nat| nat(b) + &c;
        for (mode, want) in [
            (WeightMode::Partition, partition_want.clone()),
            (WeightMode::Literal, literal_want.clone()),
        ] {
            let oracle = brute_force_case2(&big, &exact, mode);
            check(oracle == want, || {
                format!("oracle for x+{c} {mode:?} gives {oracle}, hand value {want}")
            })?;
            let cfg = Pi2Config {
                mode,
                ..Pi2Config::default()
            };
            let r = pi2_with(&big, &g, 20, &cfg).map_err(|e| format!("x+{c} {mode:?}: {e}"))?;
            check(
                r.path == Pi2Path::Case2 && r.enclosure.contains(&want) && r.enclosure.width() <= pow2_neg(20),
                || format!("x+{c} {mode:?}: {} via {:?}, want {want}", r.enclosure, r.path),
            )?;
            lines.push(format!(
                "x+{c} {}: {}",
                if mode == WeightMode::Partition {
                    "partition"
                } else {
                    "literal"
                },
                r.enclosure
            ));
        }
    }
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------- 7

fn grilliot() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (table, f) = random_table_fn(&mut rng, 21, 25);
        for n in 0..=8 {
            let fnn = approx(&KkValue::Fn1(f.clone()), n).unwrap().as_fn1();
            for m in 0..=8 {
                let twice = approx(&KkValue::Fn1(fnn.clone()), m).unwrap();
                let once = approx(&KkValue::Fn1(f.clone()), n.min(m)).unwrap();
                for x in 0..=20 {
                    check(twice.eval_nat(x) == once.eval_nat(x), || {
                        format!("min-law fails for {table:?}, n = {n}, m = {m}, x = {x}")
                    })?;
                }
            }
        }
        for i in 0..=20 {
            let m = modulus1(i, &f);
            for n in m..=m + 20 {
                check(f.approx_fn(n).eval(i) == f.eval(i), || {
                    format!("{table:?}: f_{n}({i}) differs from f({i}) above modulus {m}")
                })?;
            }
        }
    }
    let mut level2 = 0;
    for (fname, big, gname, f) in pair_catalogue() {
        let want = big.eval_fn(&f);
        let m = modulus2(&big, &f, 10_000).map_err(|e| format!("{fname} at {gname}: {e}"))?;
        for n in m..=m + 20 {
            let fn_ = f.approx_fn(n);
            check(big.eval_fn(&fn_) == want && clip(big.eval_fn(&fn_), n) == want, || {
                format!("{fname} at {gname}: stage {n} above modulus {m} differs")
            })?;
            if n <= 4 {
                let table = approx(&KkValue::Fn2(big.clone()), n).unwrap();
                check(table.eval_fn(f.as_dyn()) == want, || {
                    format!("{fname} at {gname}: table stage {n} differs")
                })?;
            }
        }
        level2 += 1;
    }
    for n in 0..=3u64 {
        let xs = enum_x(1, n, ENUM_CAP).unwrap();
        let distinct: BTreeSet<Vec<Nat>> = xs.iter().map(|a| a.table().to_vec()).collect();
        let want = (n + 1).pow(n as u32 + 1) as usize;
        check(xs.len() == want && distinct.len() == want, || {
            format!("|X^1_{n}| = {} ({} distinct), want {want}", xs.len(), distinct.len())
        })?;
    }
    let took = within_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "min-law on 50 f; level-1 moduli on 50 f; level-2 on {level2} pairs; |X^1_n| for n <= 3; {took:.2?}"
    ))
}

// ---------------------------------------------------------------- 8

fn approximation_lemma() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let points: Vec<TotalFn1> = (0..20)
        .map(|_| {
            let mut table: Vec<Nat> = (0..8).map(|_| rng.gen_range(0..=9)).collect();
            table[0] = rng.gen_range(0..=1);
            table[1] = rng.gen_range(0..=1);
            TotalFn1::from_table(table)
        })
        .collect();
    let mut report = Vec::new();
    for (name, f) in [
        ("x(0)+x(1)", TotalFn2::sum_at(0, 1)),
        ("x(x(0))", TotalFn2::self_apply(0)),
        ("5", TotalFn2::constant(5)),
    ] {
        let scheme = ApproxScheme::new(&f, Ambient::everything(), 200);
        for n in 0..=200 {
            let stage = build_stage(&f, scheme.observations(), n);
            check(stage.agreement_holds(), || {
                format!("{name}: Y-agreement fails at stage {n}")
            })?;
        }
        let settled = approximants(&scheme, &points).map_err(|e| format!("{name}: {e}"))?;
        let last = settled.iter().map(|s| s.settled_at).max().unwrap_or(0);
        report.push(format!("{name} by {last}"));
    }
    let took = within_time(start, Duration::from_secs(60))?;
    Ok(format!("20 points, N = 200: {}; {took:.2?}", report.join(", ")))
}

// ---------------------------------------------------------------- 9

fn continuity() -> Outcome {
    let pairs = [
        ("f(3)", TotalFn2::apply_at(3), "succ", TotalFn1::successor()),
        ("f(0)+f(1)", TotalFn2::sum_at(0, 1), "id", TotalFn1::identity()),
        ("f(f(0))", TotalFn2::self_apply(0), "succ", TotalFn1::successor()),
    ];
    let mut lines = Vec::new();
    for (fname, big, gname, f) in pairs {
        let want = nat(big.eval_fn(&f));
        let mut dists = Vec::new();
        for j in 1..=10 {
            let g = pi1(&f).shifted(pow2_neg(j));
            let e = pi2(&big, &g, 20).map_err(|e| format!("{fname} at {gname}+2^-{j}: {e}"))?;
            dists.push(e.max_distance_to(&want));
        }
        for j in 1..dists.len() {
            check(dists[j] <= &dists[j - 1] * int(2), || {
                format!(
                    "{fname}/{gname}: distance {} at 2^-{} after {} at 2^-{j}",
                    dists[j],
                    j + 1,
                    dists[j - 1]
                )
            })?;
            let bound = &dists[0] * int(4) * pow2_neg(j as u32) * int(2) + pow2_neg(20);
            check(dists[j] <= bound, || {
                format!("{fname}/{gname}: distance {} at 2^-{} exceeds {bound}", dists[j], j + 1)
            })?;
        }
        check(dists[9] < dists[0], || format!("{fname}/{gname}: no convergence"))?;
        lines.push(format!("{fname}/{gname} {} -> {}", dists[0], dists[9]));
    }
    Ok(lines.join("; "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("digit decoding", digit_decoding),
        ("normalizer", normalizer),
        ("partition of unity", partition_of_unity),
        ("embedding identity", embedding_identity),
        ("round trip", round_trip),
        ("case-2 hand value", case2_hand_value),
        ("grilliot machinery", grilliot),
        ("approximation lemma", approximation_lemma),
        ("continuity", continuity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
