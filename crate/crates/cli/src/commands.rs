use std::fmt::Write;
use std::panic::AssertUnwindSafe;

use ctreal::digits::{from_intervals, normalize, parse_stream, to_intervals, DigitStream, TailPolicy};
use ctreal::embed::{pi1, pi1_s, pi2_s, pi2_with, DigitRealFn1, Pi2Config, Pi2Path, RealFn1, WeightMode};
use ctreal::exact::{parse_rational, IntervalStream, RatInterval, Rational};
use ctreal::kk::{enum_x, modulus1, modulus2, TotalFn1, TotalFn2};
use ctreal::lemma::{Ambient, ApproxScheme};
use thiserror::Error;

use crate::expr::{self, FnExpr, ParseError};
use crate::{Command, Mode, Tail, Target};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Expr(#[from] ParseError),
    #[error(transparent)]
    Core(#[from] ctreal::Error),
    #[error("cannot write test vector: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use ctreal::Error as E;
        match self {
            CliError::Usage(_) | CliError::Expr(_) => 2,
            CliError::Core(E::Budget(_)) => 3,
            CliError::Core(
                E::MalformedDigits(_) | E::MalformedRational(_) | E::MalformedTable(_) | E::InvalidInterval { .. },
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

/// Output of a command. A command may print partial results and still
/// fail, as `lemma-demo` does when its trace has not settled.
pub struct Report {
    pub text: String,
    pub failure: Option<CliError>,
}

impl From<String> for Report {
    fn from(text: String) -> Self {
        Report { text, failure: None }
    }
}

type Outcome = Result<Report, CliError>;

fn tail_policy(t: Tail) -> TailPolicy {
    match t {
        Tail::Repeat => TailPolicy::RepeatLast,
        Tail::Zeros => TailPolicy::Zeros,
    }
}

fn level1(src: &str, what: &str) -> Result<TotalFn1, CliError> {
    expr::parse(src)?
        .to_fn1()
        .ok_or_else(|| CliError::Usage(format!("{what} must be a type-1 function such as `\\x. x + 1`")))
}

fn level2(src: &str, what: &str) -> Result<TotalFn2, CliError> {
    expr::parse(src)?
        .to_fn2()
        .ok_or_else(|| CliError::Usage(format!("{what} must be a type-2 functional such as `\\f. f(0)`")))
}

/// `-` stands for the first line of standard input.
fn read_arg(input: &str) -> Result<String, CliError> {
    if input != "-" {
        return Ok(input.to_string());
    }
    let mut line = String::new();
    std::io::stdin().read_line(&mut line)?;
    Ok(line.trim_end().to_string())
}

/// A rational, an interval (read as its midpoint), or the real denoted by
/// a digit stream.
fn real_input(input: &str, tail: Tail) -> Result<DigitStream, CliError> {
    let input = read_arg(input)?;
    let input = input.as_str();
    if input.starts_with('[') {
        let iv: RatInterval = input.parse()?;
        Ok(from_intervals(&IntervalStream::constant(iv.midpoint())))
    } else if input.contains(':') {
        Ok(parse_stream(input, tail_policy(tail))?)
    } else {
        Ok(from_intervals(&IntervalStream::constant(parse_rational(input)?)))
    }
}

fn show(iv: &RatInterval) -> String {
    if iv.is_point() {
        iv.lo().to_string()
    } else {
        iv.to_string()
    }
}

pub fn run(cmd: &Command) -> Outcome {
    match cmd {
        Command::Eval { expr, arg } => eval(expr, arg),
        Command::Convert {
            input,
            to,
            precision,
            tail,
        } => convert(input, *to, *precision, *tail),
        Command::Normalize { stream, digits, tail } => {
            let x = parse_stream(&read_arg(stream)?, tail_policy(*tail))?;
            Ok(format!("{}\n", normalize(&x).render(*digits)).into())
        }
        Command::Embed {
            level,
            mode,
            precision,
            func,
            at,
            g_fn,
            g_shift,
            g_linear,
            intensional,
        } => {
            let args = EmbedArgs {
                mode: *mode,
                precision: *precision,
                intensional: *intensional,
            };
            if *level == 1 {
                let at = at
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("--type 1 needs --at".into()))?;
                embed1(func, at, &args)
            } else {
                let g = argument_fn(g_fn.as_deref(), g_shift.as_deref(), g_linear.as_deref())?;
                embed2(func, g, &args)
            }
        }
        Command::Enum { k, n, cap } => {
            let mut out = String::new();
            for a in enum_x(*k, *n, *cap)? {
                writeln!(out, "{a}").unwrap();
            }
            Ok(out.into())
        }
        Command::Modulus {
            level,
            func,
            at,
            arg,
            budget,
        } => {
            let m = if *level == 1 {
                let i = at.ok_or_else(|| CliError::Usage("--level 1 needs --at".into()))?;
                modulus1(i, &level1(func, "--fn")?)
            } else {
                let arg = arg
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("--level 2 needs --arg".into()))?;
                modulus2(&level2(func, "--fn")?, &level1(arg, "--arg")?, *budget)?
            };
            Ok(format!("{m}\n").into())
        }
        Command::LemmaDemo {
            functional,
            stages,
            probe,
        } => lemma_demo(functional, *stages, probe),
    }
}

fn eval(src: &str, arg: &str) -> Outcome {
    let e: FnExpr = expr::parse(src)?;
    if e.level() == 1 && !arg.trim_start().starts_with(['\\', 'λ']) {
        let f = e.to_fn1().expect("level checked");
        let x = RatInterval::point(parse_rational(arg)?);
        let y = pi1(&f).apply(&x, 0).expect("interpolation is defined at points");
        return Ok(format!("{}\n", show(&y)).into());
    }
    let big = e
        .to_fn2()
        .ok_or_else(|| CliError::Usage("a type-1 function takes a rational argument".into()))?;
    let f = level1(arg, "the argument")?;
    Ok(format!("{}\n", big.eval_fn(&f)).into())
}

fn convert(input: &str, to: Target, p: u32, tail: Tail) -> Outcome {
    let x = real_input(input, tail)?;
    let line = match to {
        Target::Digits => from_intervals(&to_intervals(&x)).render(p as usize),
        Target::Interval => show(&x.decode(p)),
    };
    Ok(format!("{line}\nwithin 2^-{p}\n").into())
}

struct EmbedArgs {
    mode: Mode,
    precision: u32,
    intensional: bool,
}

fn argument_fn(g_fn: Option<&str>, shift: Option<&str>, linear: Option<&str>) -> Result<RealFn1, CliError> {
    if let Some(spec) = linear {
        let (a, c) = spec
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("--g-linear expects A,C, got {spec:?}")))?;
        return Ok(RealFn1::affine(parse_rational(a)?, parse_rational(c)?));
    }
    let g = g_fn.ok_or_else(|| CliError::Usage("--type 2 needs --g-fn or --g-linear".into()))?;
    let g = pi1(&level1(g, "--g-fn")?);
    Ok(match shift {
        Some(t) => g.shifted(parse_rational(t)?),
        None => g,
    })
}

fn embed1(func: &str, at: &str, args: &EmbedArgs) -> Outcome {
    let f = level1(func, "--fn")?;
    let r: Rational = parse_rational(at)?;
    let text = if args.intensional {
        let x = from_intervals(&IntervalStream::constant(r));
        pi1_s(&f).apply_stream(&x).render(args.precision as usize)
    } else {
        show(
            &pi1(&f)
                .apply(&RatInterval::point(r), args.precision)
                .expect("defined at points"),
        )
    };
    Ok(format!("{text}\n").into())
}

fn embed2(func: &str, g: RealFn1, args: &EmbedArgs) -> Outcome {
    let big = level2(func, "--fn")?;
    let cfg = Pi2Config {
        mode: match args.mode {
            Mode::Partition => WeightMode::Partition,
            Mode::Literal => WeightMode::Literal,
        },
        ..Pi2Config::default()
    };
    if args.intensional {
        let s = pi2_s(&big, &DigitRealFn1::from_real_fn(g), &cfg)?;
        let hook = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let rendered = std::panic::catch_unwind(AssertUnwindSafe(|| s.render(args.precision as usize)));
        std::panic::set_hook(hook);
        let rendered = rendered.map_err(|_| {
            CliError::Core(ctreal::Error::Budget(
                "refining the digit stream ran out of budget".into(),
            ))
        })?;
        return Ok(format!("{rendered}\n").into());
    }
    let r = pi2_with(&big, &g, args.precision, &cfg)?;
    let path = match r.path {
        Pi2Path::Case1 => "case1",
        Pi2Path::Blended => "blended",
        Pi2Path::Case2 => "case2",
    };
    Ok(format!(
        "enclosure {}\npath {path}\nprecision {}\nterms {}\n",
        r.enclosure, r.precision, r.terms
    )
    .into())
}

fn lemma_demo(functional: &str, stages: usize, probe: &str) -> Outcome {
    let f = level2(functional, "--functional")?;
    let x = level1(probe, "--probe")?;
    let scheme = ApproxScheme::new(&f, Ambient::everything(), stages);
    let value = f.eval_fn(&x);
    let mut text = String::from("n\tf_n(x_n)\n");
    let mut trace = Vec::with_capacity(stages + 1);
    for n in 0..=stages {
        let v = scheme.approximant(n).eval_fn(&x.approx_fn(n as u64));
        writeln!(text, "{n}\t{v}").unwrap();
        trace.push(v);
    }
    let tail = trace.iter().rev().take_while(|&&v| v == value).count();
    if tail == 0 {
        writeln!(text, "f(x) = {value}; not settled by stage {stages}").unwrap();
        return Ok(Report {
            text,
            failure: Some(CliError::Core(ctreal::Error::Budget(format!(
                "f_n(x_n) has not settled on {value} by stage {stages}"
            )))),
        });
    }
    writeln!(text, "f(x) = {value}; settled at stage {}", trace.len() - tail).unwrap();
    Ok(text.into())
}
