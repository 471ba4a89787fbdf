//! `ctreal`: command-line access to signed-digit and interval reals, the
//! finite approximations of type-1 and type-2 functionals, their
//! embeddings into the reals, and the approximation lemma.
//!
//! Exit status: 0 on success, 2 for usage and input errors, 3 when a
//! computation runs out of budget, 1 for anything else.

mod commands;
mod expr;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, Report};

#[derive(Parser, Debug)]
#[command(
    name = "ctreal",
    version,
    about = "Exact computation with signed-digit and interval reals"
)]
struct Cli {
    /// Write this invocation as a test vector (inputs, expected output,
    /// provenance; tab separated) to PATH.
    #[arg(long, global = true, value_name = "PATH")]
    emit_vectors: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tail {
    /// Repeat the last written digit.
    Repeat,
    /// Continue with zeros.
    Zeros,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Digits,
    Interval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Partition,
    Literal,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a functional: a type-1 EXPR at a rational ARG (through its
    /// piecewise-linear extension), or a type-2 EXPR at a type-1 ARG.
    Eval {
        expr: String,
        #[arg(allow_hyphen_values = true)]
        arg: String,
    },

    /// Convert a rational or a digit stream (`a:d1 d2 ...`) into a digit
    /// prefix or an interval enclosure.
    Convert {
        #[arg(allow_hyphen_values = true)]
        input: String,
        #[arg(long, value_enum, default_value = "digits")]
        to: Target,
        /// Digits to print, or enclosure width 2^-p.
        #[arg(long, default_value_t = 20, allow_hyphen_values = true)]
        precision: u32,
        #[arg(long, value_enum, default_value = "repeat")]
        tail: Tail,
    },

    /// Normalize a digit stream; integer values come out as `n:0 0 0 ...`.
    Normalize {
        #[arg(allow_hyphen_values = true)]
        stream: String,
        #[arg(long, default_value_t = 64, allow_hyphen_values = true)]
        digits: usize,
        #[arg(long, value_enum, default_value = "repeat")]
        tail: Tail,
    },

    /// Embed a functional into the reals and evaluate it.
    Embed {
        /// Type level of the embedded functional.
        #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=2))]
        level: u8,
        #[arg(long, value_enum, default_value = "partition")]
        mode: Mode,
        #[arg(long, default_value_t = 20, allow_hyphen_values = true)]
        precision: u32,
        /// The functional, e.g. `\x. x*x` or `\f. f(3)`.
        #[arg(long = "fn")]
        func: String,
        /// Type 1: the rational argument.
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        /// Type 2: the argument is the extension of this type-1 function...
        #[arg(long)]
        g_fn: Option<String>,
        /// ...shifted by this rational.
        #[arg(long, allow_hyphen_values = true)]
        g_shift: Option<String>,
        /// Type 2: the argument is `x ↦ A·x + C`, given as `A,C`.
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["g_fn", "g_shift"])]
        g_linear: Option<String>,
        /// Print a signed-digit stream with `precision` digits instead of an
        /// enclosure.
        #[arg(long)]
        intensional: bool,
    },

    /// List the finite set X^k_n, one element per line.
    Enum {
        #[arg(long)]
        k: u8,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = ctreal::kk::ENUM_CAP)]
        cap: u64,
    },

    /// Grilliot modulus of a type-1 function at `--at`, or of a type-2
    /// functional at `--arg`.
    Modulus {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        level: u8,
        #[arg(long = "fn")]
        func: String,
        #[arg(long)]
        at: Option<u64>,
        #[arg(long)]
        arg: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
    },

    /// Stage-by-stage values f_n(x_n) of the approximation lemma.
    LemmaDemo {
        /// Type-2 functional, e.g. `\x. x(0) + x(1)`.
        #[arg(long)]
        functional: String,
        #[arg(long, default_value_t = 200, allow_hyphen_values = true)]
        stages: usize,
        /// Type-1 test point, e.g. `\k. k + 1`.
        #[arg(long)]
        probe: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Convert { .. } => "convert",
            Command::Normalize { .. } => "normalize",
            Command::Embed { .. } => "embed",
            Command::Enum { .. } => "enum",
            Command::Modulus { .. } => "modulus",
            Command::LemmaDemo { .. } => "lemma-demo",
        }
    }
}

/// Shell-style rendering of the arguments, minus the vector flag.
fn render_inputs(args: &[String]) -> String {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--emit-vectors" {
            skip = true;
            continue;
        }
        if a.starts_with("--emit-vectors=") {
            continue;
        }
        if a.is_empty() || a.contains(char::is_whitespace) {
            out.push(format!("'{}'", a.replace('\t', " ")));
        } else {
            out.push(a.clone());
        }
    }
    out.join(" ")
}

fn write_vector(path: &PathBuf, inputs: &str, expected: &str, tag: &str) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    let expected = expected.trim_end().replace('\n', "\\n").replace('\t', " ");
    writeln!(file, "{inputs}\t{expected}\tcli:{tag}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tag = cli.command.name();
    let (text, failure) = match commands::run(&cli.command) {
        Ok(Report { text, failure }) => (text, failure),
        Err(e) => (String::new(), Some(e)),
    };
    print!("{text}");
    let mut expected = text.clone();
    let code = match &failure {
        None => 0,
        Some(e) => {
            eprintln!("error: {e}");
            expected.push_str(&format!("exit {}: {e}", e.exit_code()));
            e.exit_code()
        }
    };
    if let Some(path) = &cli.emit_vectors {
        if let Err(e) = write_vector(path, &render_inputs(&args), &expected, tag) {
            let e = CliError::Io(e);
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    }
    ExitCode::from(code)
}
