//! Command implementations. Each returns its stdout text plus an exit
//! code: 0 for definite results, 2 when the outcome is dominated by
//! unknown solver verdicts, 1 for errors (mapped by the caller).

use std::fmt::Write as _;

use thiserror::Error;

use lctrs_core::ect::{self, OracleConfig, TriVerdict};
use lctrs_core::engine::{self, Mode, NodeStatus, Strategy};
use lctrs_core::harness::{self, GenConfig, TheoremId};
use lctrs_core::interp::{self, DomainMode, DomainSpec};
use lctrs_core::logic::{ConstraintBackend, EnumBackend, IntSearchBackend, TheoryMode};
use lctrs_core::smt::SmtBackend;
use lctrs_core::trace::TraceLine;
use lctrs_core::Lctrs;

use crate::parse::{parse_problem, FileError, ProblemFile};

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    File(#[from] FileError),
    #[error("{0}")]
    Engine(#[from] lctrs_core::engine::EngineError),
    #[error("{0}")]
    Interp(#[from] lctrs_core::interp::InterpError),
    #[error("{0}")]
    Logic(#[from] lctrs_core::logic::LogicError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

pub struct Outcome {
    pub stdout: String,
    pub exit: i32,
}

fn ok(stdout: String) -> Outcome {
    Outcome { stdout, exit: 0 }
}

/// Global backend options.
#[derive(Debug, Clone)]
pub struct BackendOpts {
    pub smt_bin: Option<String>,
    pub smt_timeout_ms: u64,
    pub int_window: (i64, i64),
}

impl Default for BackendOpts {
    fn default() -> BackendOpts {
        BackendOpts { smt_bin: None, smt_timeout_ms: 5000, int_window: (-16, 16) }
    }
}

impl BackendOpts {
    /// Picks the gate backend for a theory: exact enumeration for finite
    /// models; for unbounded integers an SMT process when one is
    /// configured or discoverable, otherwise the sound window search.
    pub fn backend(&self, theory: TheoryMode) -> Box<dyn ConstraintBackend> {
        match theory {
            TheoryMode::IntMod(m) => Box::new(EnumBackend::new(m)),
            TheoryMode::Int => {
                if let Some(bin) = &self.smt_bin {
                    return Box::new(SmtBackend::new(bin, self.smt_timeout_ms));
                }
                if let Some(smt) = SmtBackend::discover(self.smt_timeout_ms) {
                    return Box::new(smt);
                }
                Box::new(IntSearchBackend::new(self.int_window.0, self.int_window.1))
            }
        }
    }

    fn domain(&self, theory: TheoryMode) -> DomainSpec {
        match theory {
            TheoryMode::IntMod(m) => DomainSpec::modular(m),
            TheoryMode::Int => DomainSpec::window(self.int_window.0, self.int_window.1),
        }
    }
}

pub fn load(path: &str) -> Result<ProblemFile, CmdError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_problem(&text)?)
}

fn select_ect<'a>(
    problem: &'a ProblemFile,
    id: Option<&'a str>,
) -> Result<(&'a str, &'a lctrs_core::ECTerm), CmdError> {
    match id {
        Some(name) => problem
            .ect(name)
            .map(|c| (name, c))
            .ok_or_else(|| CmdError::Usage(format!("no constrained term named '{name}'"))),
        None => problem
            .ects
            .first()
            .map(|(n, c)| (n.as_str(), c))
            .ok_or_else(|| CmdError::Usage("the problem declares no constrained terms".into())),
    }
}

fn select_rules(problem: &ProblemFile, filter: Option<&str>) -> Result<Lctrs, CmdError> {
    match filter {
        None => Ok(problem.system.clone()),
        Some(list) => {
            let ids: Vec<&str> = list.split(',').map(str::trim).collect();
            for id in &ids {
                if problem.system.rule(id).is_none() {
                    return Err(CmdError::Usage(format!("no rule named '{id}'")));
                }
            }
            Ok(problem.system.restricted(&ids))
        }
    }
}

pub struct RewriteArgs<'a> {
    pub file: &'a str,
    pub ect: Option<&'a str>,
    pub mode: Mode,
    pub fuel: usize,
    pub strategy: Strategy,
    pub rules: Option<&'a str>,
    pub trace_out: Option<&'a str>,
}

pub fn rewrite(args: &RewriteArgs<'_>, opts: &BackendOpts) -> Result<Outcome, CmdError> {
    let problem = load(args.file)?;
    let (ect_id, c) = select_ect(&problem, args.ect)?;
    let system = select_rules(&problem, args.rules)?;
    let mut backend = opts.backend(problem.theory);
    let tree = engine::reduce(c, &system, args.mode, args.fuel, args.strategy, backend.as_mut())?;

    let mut out = String::new();
    writeln!(out, "input: {c}").unwrap();
    writeln!(out, "mode: {}  fuel: {}  backend: {}", args.mode, args.fuel, backend.describe()).unwrap();
    let steps: Vec<_> = tree.steps().collect();
    writeln!(out, "steps taken: {}", steps.len()).unwrap();
    let mut unknown_frontier = 0usize;
    for (_, node) in tree.frontier() {
        let status = match node.status {
            NodeStatus::Normal => "normal",
            NodeStatus::FuelExhausted => "fuel-exhausted",
            NodeStatus::UnknownGated => {
                unknown_frontier += 1;
                "unknown-gated"
            }
            NodeStatus::Inner => unreachable!("frontier nodes are not inner"),
        };
        writeln!(out, "{status}: {}", node.ect).unwrap();
    }
    let values = tree.value_normal_forms(&opts.domain(problem.theory))?;
    if !values.is_empty() {
        let rendered: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "value normal forms: {}", rendered.join(" ")).unwrap();
    }

    if let Some(path) = args.trace_out {
        let mut text = String::new();
        let header = serde_json::json!({
            "command": "rewrite",
            "ect": ect_id,
            "mode": args.mode.to_string(),
            "fuel": args.fuel,
            "strategy": match args.strategy { Strategy::Full => "full", Strategy::First => "first" },
            "rules": args.rules,
        });
        text.push_str(&header.to_string());
        text.push('\n');
        for step in &steps {
            text.push_str(&TraceLine::from_step(step).to_json());
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }
    let exit = if unknown_frontier > 0 { 2 } else { 0 };
    Ok(Outcome { stdout: out, exit })
}

pub fn normal(
    file: &str,
    ect: Option<&str>,
    mode: Mode,
    rules: Option<&str>,
    opts: &BackendOpts,
) -> Result<Outcome, CmdError> {
    let problem = load(file)?;
    let (_, c) = select_ect(&problem, ect)?;
    let system = select_rules(&problem, rules)?;
    let mut backend = opts.backend(problem.theory);
    let verdict = engine::is_normal_form(c, &system, mode, backend.as_mut())?;
    let mut out = String::new();
    match &verdict {
        TriVerdict::Yes(ev) => {
            writeln!(out, "normal: yes").unwrap();
            writeln!(out, "checked {} rules over {} positions", ev.rules_checked, ev.positions_checked).unwrap();
        }
        TriVerdict::No(step) => {
            writeln!(out, "normal: no").unwrap();
            writeln!(
                out,
                "step: {} at {} gives {}",
                step.redex.rule_id, step.redex.position, step.output
            )
            .unwrap();
        }
        TriVerdict::Unknown(reason) => {
            writeln!(out, "normal: unknown").unwrap();
            writeln!(out, "reason: {reason}").unwrap();
        }
    }
    Ok(Outcome { stdout: out, exit: if verdict.is_unknown() { 2 } else { 0 } })
}

pub fn subsume(file: &str, a: &str, b: &str, cap: usize, opts: &BackendOpts) -> Result<Outcome, CmdError> {
    let problem = load(file)?;
    let left = problem.ect(a).ok_or_else(|| CmdError::Usage(format!("no constrained term '{a}'")))?;
    let right = problem.ect(b).ok_or_else(|| CmdError::Usage(format!("no constrained term '{b}'")))?;
    let mut backend = opts.backend(problem.theory);
    let mut cfg = OracleConfig { backend: backend.as_mut(), cap };
    let verdict = ect::subsumes(left, right, &mut cfg);
    let mut out = String::new();
    writeln!(out, "subsumed: {}", verdict.label()).unwrap();
    match &verdict {
        TriVerdict::No(cex) => writeln!(out, "counterexample: {cex}").unwrap(),
        TriVerdict::Unknown(r) => writeln!(out, "reason: {r}").unwrap(),
        TriVerdict::Yes(_) => {}
    }
    Ok(Outcome { stdout: out, exit: if verdict.is_unknown() { 2 } else { 0 } })
}

pub fn equiv(file: &str, a: &str, b: &str, cap: usize, opts: &BackendOpts) -> Result<Outcome, CmdError> {
    let problem = load(file)?;
    let left = problem.ect(a).ok_or_else(|| CmdError::Usage(format!("no constrained term '{a}'")))?;
    let right = problem.ect(b).ok_or_else(|| CmdError::Usage(format!("no constrained term '{b}'")))?;
    let mut backend = opts.backend(problem.theory);
    let mut cfg = OracleConfig { backend: backend.as_mut(), cap };
    let verdict = ect::equivalent(left, right, &mut cfg);
    let mut out = String::new();
    writeln!(out, "equivalent: {}", verdict.label()).unwrap();
    match &verdict {
        TriVerdict::No(witness) => writeln!(out, "witness: {witness}").unwrap(),
        TriVerdict::Unknown(r) => writeln!(out, "reason: {r}").unwrap(),
        TriVerdict::Yes(_) => {}
    }
    Ok(Outcome { stdout: out, exit: if verdict.is_unknown() { 2 } else { 0 } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpretKind {
    Std,
    Value,
    Rule,
}

pub struct InterpretArgs<'a> {
    pub file: &'a str,
    pub kind: InterpretKind,
    pub ect: Option<&'a str>,
    pub rule: Option<&'a str>,
    pub domain: DomainMode,
    pub pool: usize,
    pub cap: usize,
}

pub fn interpret(args: &InterpretArgs<'_>) -> Result<Outcome, CmdError> {
    let problem = load(args.file)?;
    let pool_names: Vec<String> = (1..=args.pool).map(|i| format!("v{i}")).collect();
    let pool_refs: Vec<&str> = pool_names.iter().map(String::as_str).collect();
    let domain = match args.domain {
        DomainMode::Modular(m) => DomainSpec::modular(m),
        DomainMode::IntWindow(lo, hi) => DomainSpec::window(lo, hi),
    }
    .with_pool(&pool_refs)
    .with_cap(args.cap);

    let mut out = String::new();
    match args.kind {
        InterpretKind::Std | InterpretKind::Value => {
            let (_, c) = select_ect(&problem, args.ect)?;
            let set = if args.kind == InterpretKind::Std {
                interp::enumerate_instances(c, &domain)?
            } else {
                interp::enumerate_value_instances(c, &domain)?
            };
            let mut lines: Vec<String> = set.iter().map(|t| t.to_string()).collect();
            lines.sort();
            for l in lines {
                writeln!(out, "{l}").unwrap();
            }
        }
        InterpretKind::Rule => {
            let id = args
                .rule
                .ok_or_else(|| CmdError::Usage("--kind rule needs --rule ID".into()))?;
            let rule = problem
                .system
                .rule(id)
                .ok_or_else(|| CmdError::Usage(format!("no rule named '{id}'")))?;
            let set = interp::interpret_rule(rule, &domain)?;
            let mut lines: Vec<String> = set.iter().map(|g| g.to_string()).collect();
            lines.sort();
            for l in lines {
                writeln!(out, "{l}").unwrap();
            }
        }
    }
    Ok(ok(out))
}

pub fn verify(
    theorem: &str,
    seed: u64,
    cases: u64,
    modulus: u32,
    out_path: Option<&str>,
) -> Result<Outcome, CmdError> {
    let cfg = GenConfig { seed, cases, modulus, ..GenConfig::default() };
    let reports = if theorem.eq_ignore_ascii_case("all") {
        harness::check_all(&cfg)
    } else {
        let id: TheoremId = theorem.parse().map_err(CmdError::Usage)?;
        vec![harness::check(id, &cfg)]
    };
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    if let Some(path) = out_path {
        std::fs::write(path, &json)?;
    }
    let failures: usize = reports.iter().map(|r| r.failures.len()).sum();
    let mut stdout = json;
    stdout.push('\n');
    Ok(Outcome { stdout, exit: if failures == 0 { 0 } else { 1 } })
}

/// Re-runs the command recorded in a trace header and diffs the steps.
pub fn replay_trace(file: &str, trace_path: &str, opts: &BackendOpts) -> Result<Outcome, CmdError> {
    let text = std::fs::read_to_string(trace_path)?;
    let mut lines = text.lines();
    let header: serde_json::Value = lines
        .next()
        .ok_or_else(|| CmdError::Usage("empty trace file".into()))
        .and_then(|l| {
            serde_json::from_str(l).map_err(|e| CmdError::Usage(format!("bad trace header: {e}")))
        })?;
    if header["command"] != "rewrite" {
        return Err(CmdError::Usage("trace header does not describe a rewrite run".into()));
    }
    let recorded: Vec<TraceLine> = lines
        .map(TraceLine::from_json)
        .collect::<Result<_, _>>()
        .map_err(|e| CmdError::Usage(format!("bad trace line: {e}")))?;

    let problem = load(file)?;
    let ect_id = header["ect"].as_str().map(str::to_string);
    let (_, c) = select_ect(&problem, ect_id.as_deref())?;
    let mode = match header["mode"].as_str() {
        Some("mg") => Mode::MostGeneral,
        Some("partial") => Mode::Partial,
        other => return Err(CmdError::Usage(format!("bad mode in trace header: {other:?}"))),
    };
    let fuel = header["fuel"].as_u64().unwrap_or(40) as usize;
    let strategy = match header["strategy"].as_str() {
        Some("first") => Strategy::First,
        _ => Strategy::Full,
    };
    let rules = header["rules"].as_str().map(str::to_string);
    let system = select_rules(&problem, rules.as_deref())?;

    let mut backend = opts.backend(problem.theory);
    let tree = engine::reduce(c, &system, mode, fuel, strategy, backend.as_mut())?;
    let replayed: Vec<TraceLine> = tree.steps().map(TraceLine::from_step).collect();

    let mut out = String::new();
    if replayed == recorded {
        writeln!(out, "trace matches ({} steps)", replayed.len()).unwrap();
        return Ok(ok(out));
    }
    writeln!(out, "trace differs: recorded {} steps, replayed {}", recorded.len(), replayed.len())
        .unwrap();
    for (i, (rec, rep)) in recorded.iter().zip(&replayed).enumerate() {
        if rec != rep {
            writeln!(out, "first difference at step {i}:").unwrap();
            writeln!(out, "  recorded: {}", rec.to_json()).unwrap();
            writeln!(out, "  replayed: {}", rep.to_json()).unwrap();
            break;
        }
    }
    Ok(Outcome { stdout: out, exit: 1 })
}

/// Parses `mod:M` or `int:LO..HI`.
pub fn parse_domain(s: &str) -> Result<DomainMode, String> {
    if let Some(m) = s.strip_prefix("mod:") {
        let m: u32 = m.parse().map_err(|_| format!("bad modulus in '{s}'"))?;
        if m == 0 {
            return Err("modulus must be positive".into());
        }
        return Ok(DomainMode::Modular(m));
    }
    if let Some(range) = s.strip_prefix("int:") {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| format!("expected LO..HI in '{s}'"))?;
        let lo: i64 = lo.parse().map_err(|_| format!("bad lower bound in '{s}'"))?;
        let hi: i64 = hi.parse().map_err(|_| format!("bad upper bound in '{s}'"))?;
        if lo > hi {
            return Err(format!("empty window in '{s}'"));
        }
        return Ok(DomainMode::IntWindow(lo, hi));
    }
    Err(format!("expected mod:M or int:LO..HI, found '{s}'"))
}

/// Parses `LO..HI`.
pub fn parse_window(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, found '{s}'"))?;
    let lo: i64 = lo.parse().map_err(|_| format!("bad lower bound in '{s}'"))?;
    let hi: i64 = hi.parse().map_err(|_| format!("bad upper bound in '{s}'"))?;
    if lo > hi {
        return Err(format!("empty window in '{s}'"));
    }
    Ok((lo, hi))
}
