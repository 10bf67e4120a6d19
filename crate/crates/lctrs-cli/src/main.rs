use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use lctrs_cli::commands::{self, BackendOpts, CmdError, InterpretArgs, InterpretKind, RewriteArgs};
use lctrs_core::engine::{Mode, Strategy};
use lctrs_core::interp::DomainMode;

/// Rewriting of existentially constrained terms, with partial and most
/// general steps, instance interpretations, and a theorem-check harness.
#[derive(Parser)]
#[command(name = "lctrs", version, about)]
struct Cli {
    #[command(flatten)]
    backend: BackendCli,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct BackendCli {
    /// SMT solver binary for the unbounded integer theory.
    #[arg(long, global = true)]
    smt_bin: Option<String>,

    /// Per-query solver timeout in milliseconds.
    #[arg(long, global = true, default_value_t = 5000)]
    smt_timeout_ms: u64,

    /// Witness-search window LO..HI used for the unbounded theory when no
    /// solver is available.
    #[arg(long, global = true, default_value = "-16..16", value_parser = commands::parse_window)]
    int_window: (i64, i64),

    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mg,
    Partial,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Mg => Mode::MostGeneral,
            ModeArg::Partial => Mode::Partial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Full,
    First,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Std,
    Value,
    Rule,
}

#[derive(Subcommand)]
enum Cmd {
    /// Explore the reduction space of a constrained term.
    Rewrite {
        file: String,
        /// Constrained term to start from (default: the first one).
        #[arg(long)]
        ect: Option<String>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Depth bound on reduction paths.
        #[arg(long, default_value_t = 40)]
        fuel: usize,
        #[arg(long, value_enum, default_value = "full")]
        strategy: StrategyArg,
        /// Comma-separated rule ids to restrict the system to.
        #[arg(long)]
        rules: Option<String>,
        /// Write a JSON-lines trace of the steps taken.
        #[arg(long)]
        trace: Option<String>,
    },
    /// Decide whether a constrained term is a normal form.
    Normal {
        file: String,
        #[arg(long)]
        ect: Option<String>,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        rules: Option<String>,
    },
    /// Decide instance-set inclusion of two constrained terms.
    Subsume {
        file: String,
        a: String,
        b: String,
        #[arg(long, default_value_t = 200_000)]
        cap: usize,
    },
    /// Decide instance-set equality of two constrained terms.
    Equiv {
        file: String,
        a: String,
        b: String,
        #[arg(long, default_value_t = 200_000)]
        cap: usize,
    },
    /// Enumerate interpretations of constrained terms or rules.
    Interpret {
        file: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        ect: Option<String>,
        #[arg(long)]
        rule: Option<String>,
        /// Value domain: mod:M for the exact finite model, int:LO..HI for
        /// a window of the unbounded one.
        #[arg(long, value_parser = commands::parse_domain)]
        domain: DomainMode,
        /// Number of pool variables for non-logical positions.
        #[arg(long, default_value_t = 2)]
        pool: usize,
        #[arg(long, default_value_t = 200_000)]
        cap: usize,
    },
    /// Run the theorem-check catalogue and report as JSON.
    Verify {
        #[arg(long, default_value = "all")]
        theorem: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        cases: u64,
        #[arg(long = "mod", default_value_t = 5)]
        modulus: u32,
        /// Also write the JSON report to a file.
        #[arg(long)]
        out: Option<String>,
    },
    /// Replay a recorded trace and diff it against a fresh run.
    Trace { file: String, trace_file: String },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems exit 64; --help and --version keep clap's
            // behavior.
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => e.exit(),
                _ => {
                    eprint!("{e}");
                    std::process::exit(64);
                }
            }
        }
    };
    let opts = BackendOpts {
        smt_bin: cli.backend.smt_bin.clone(),
        smt_timeout_ms: cli.backend.smt_timeout_ms,
        int_window: cli.backend.int_window,
    };
    let result = run(cli, &opts);
    match result {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            std::process::exit(outcome.exit);
        }
        Err(CmdError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(64);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}

// The error is built once per process right before exit; its size does
// not matter.
#[allow(clippy::result_large_err)]
fn run(cli: Cli, opts: &BackendOpts) -> Result<commands::Outcome, CmdError> {
    match cli.cmd {
        Cmd::Rewrite { file, ect, mode, fuel, strategy, rules, trace } => {
            let args = RewriteArgs {
                file: &file,
                ect: ect.as_deref(),
                mode: mode.into(),
                fuel,
                strategy: match strategy {
                    StrategyArg::Full => Strategy::Full,
                    StrategyArg::First => Strategy::First,
                },
                rules: rules.as_deref(),
                trace_out: trace.as_deref(),
            };
            commands::rewrite(&args, opts)
        }
        Cmd::Normal { file, ect, mode, rules } => {
            commands::normal(&file, ect.as_deref(), mode.into(), rules.as_deref(), opts)
        }
        Cmd::Subsume { file, a, b, cap } => commands::subsume(&file, &a, &b, cap, opts),
        Cmd::Equiv { file, a, b, cap } => commands::equiv(&file, &a, &b, cap, opts),
        Cmd::Interpret { file, kind, ect, rule, domain, pool, cap } => {
            let args = InterpretArgs {
                file: &file,
                kind: match kind {
                    KindArg::Std => InterpretKind::Std,
                    KindArg::Value => InterpretKind::Value,
                    KindArg::Rule => InterpretKind::Rule,
                },
                ect: ect.as_deref(),
                rule: rule.as_deref(),
                domain,
                pool,
                cap,
            };
            commands::interpret(&args)
        }
        Cmd::Verify { theorem, seed, cases, modulus, out } => {
            commands::verify(&theorem, seed, cases, modulus, out.as_deref())
        }
        Cmd::Trace { file, trace_file } => commands::replay_trace(&file, &trace_file, opts),
    }
}
