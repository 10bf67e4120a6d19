//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measured runtime where a budget applies.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use lctrs_cli::commands::BackendOpts;
use lctrs_cli::parse_problem;
use lctrs_core::ect::{self, OracleConfig, TriVerdict};
use lctrs_core::engine::{self, Mode, NodeStatus, Strategy};
use lctrs_core::harness::{self, GenConfig, TheoremId};
use lctrs_core::interp::{self, DomainSpec};
use lctrs_core::logic::{EnumBackend, ExConstraint, ValidityVerdict, Valuation};
use lctrs_core::term::{Position, Term, Value, Var};

// Criteria with wall-clock budgets must not contend with each other for
// cores, so every criterion runs under one lock.
static SERIAL: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn problem_path(name: &str) -> String {
    format!("{}/../../problems/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn load(name: &str) -> lctrs_cli::ProblemFile {
    let text = std::fs::read_to_string(problem_path(name)).expect("problem file exists");
    parse_problem(&text).expect("problem file parses")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lctrs"))
}

fn ints(ns: impl IntoIterator<Item = i64>) -> BTreeSet<Value> {
    ns.into_iter().map(Value::Int).collect()
}

/// Criterion 1: partial rewriting computes the summation closure
/// {1, 3, 6, 10, 15}, exactly, within the time budget.
#[test]
fn criterion_01_sum_computation() {
    let _serial = serial();
    let start = Instant::now();
    let problem = load("sum_mod16.lctrs");
    let c = problem.ect("start").unwrap();
    let opts = BackendOpts::default();
    let mut backend = opts.backend(problem.theory);
    let tree = engine::reduce(c, &problem.system, Mode::Partial, 40, Strategy::Full, backend.as_mut())
        .unwrap();
    let values = tree.value_normal_forms(&DomainSpec::modular(16)).unwrap();
    assert_eq!(values, ints([1, 3, 6, 10, 15]));
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}, budget 1 s under IntMod 16");

    // The command line agrees.
    let out = bin()
        .args(["rewrite", &problem_path("sum_mod16.lctrs"), "--ect", "start", "--mode", "partial", "--fuel", "40"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("value normal forms: 1 3 6 10 15"),
        "stdout was:\n{stdout}"
    );
    println!("criterion 1 PASS: partial rewriting yields value normal forms {{1, 3, 6, 10, 15}} ({elapsed:?})");
}

/// Criterion 2: most general rewriting halts at x + sum(y) with the
/// recorded constraint, equivalent to the golden form, with no further
/// step.
#[test]
fn criterion_02_mg_stuckness() {
    let _serial = serial();
    let problem = load("sum_mod16.lctrs");
    let c = problem.ect("start").unwrap();
    let opts = BackendOpts::default();
    let mut backend = opts.backend(problem.theory);
    let tree =
        engine::reduce(c, &problem.system, Mode::MostGeneral, 10, Strategy::Full, backend.as_mut())
            .unwrap();
    let frontier: Vec<_> = tree.frontier().collect();
    assert_eq!(frontier.len(), 1, "most general reduction has a single stuck form");
    let (_, node) = frontier[0];
    // Normal status means no further step and no unknown gate.
    assert_eq!(node.status, NodeStatus::Normal);

    // Golden shape: x + sum(y) [1 <= x /\ x <= 5 /\ y = x - 1].
    let golden_text = "\
theory intmod 16
sig sum : Int -> Int term
ect golden: X {x, y} term x + sum(y) exists [] phi 1 <= x /\\ x <= 5 /\\ y = x - 1
";
    let golden = parse_problem(golden_text).unwrap();
    let mut cfg = OracleConfig::new(backend.as_mut());
    assert!(
        ect::equivalent(&node.ect, golden.ect("golden").unwrap(), &mut cfg).is_yes(),
        "stuck form {} is not equivalent to the golden form",
        node.ect
    );
    println!("criterion 2 PASS: mg reduction halts at a form equivalent to x + sum(y) [1<=x /\\ x<=5 /\\ y=x-1]");
}

/// Criterion 3: on 1 + sum(y) under the shifted-window constraint, the
/// first rule admits no most general redex but exactly one partial redex
/// at path [2], with the golden reduct; the non-validity witness y = 1
/// checks out under direct evaluation.
#[test]
fn criterion_03_example_gate_split() {
    let _serial = serial();
    let problem = load("sum_mod16.lctrs");
    let c = problem.ect("ex34").unwrap();
    let r1 = problem.system.rule("r1").unwrap();
    let opts = BackendOpts::default();
    let mut backend = opts.backend(problem.theory);

    let mg = engine::find_redexes(c, r1, Mode::MostGeneral, backend.as_mut()).unwrap();
    assert!(mg.redexes.is_empty());
    assert!(mg.unknown_gated.is_empty());

    let pa = engine::find_redexes(c, r1, Mode::Partial, backend.as_mut()).unwrap();
    assert_eq!(pa.redexes.len(), 1);
    let redex = &pa.redexes[0];
    assert_eq!(redex.info.position, Position(vec![2]));

    let reduct = engine::construct_step(c, redex).unwrap();
    assert_eq!(
        reduct.to_string(),
        "1 + 0 [∃w, y. 1 <= w /\\ w <= 5 /\\ y = w - 1 /\\ 0 >= y]"
    );

    // The most general gate is refuted with witness y = 1; confirm by
    // evaluating both sides of the implication directly.
    let y = Var::int("y");
    let gate_rhs = {
        // 0 >= y, instantiated guard of r1's variant
        let ge = problem.sig.lookup(">=", 2).unwrap().clone();
        ExConstraint::plain(
            Term::app(ge, vec![Term::value(Value::Int(0)), Term::Var(y.clone())]).unwrap(),
        )
    };
    match backend.check_valid_implication(&c.constraint, &gate_rhs).unwrap() {
        ValidityVerdict::NotValid(witness) => {
            assert_eq!(witness.get(&y), Some(Value::Int(1)));
            let model = problem.model();
            // lhs holds at y = 1 via the bound witness w = 2.
            let rho = Valuation::from_pairs([(y.clone(), Value::Int(1)), (Var::int("w"), Value::Int(2))]);
            assert_eq!(model.evaluate(&c.constraint.body, &rho).unwrap(), Value::Bool(true));
            // rhs fails at y = 1.
            let rho = Valuation::from_pairs([(y.clone(), Value::Int(1))]);
            assert_eq!(model.evaluate(&gate_rhs.body, &rho).unwrap(), Value::Bool(false));
        }
        other => panic!("expected a countervaluation, got {other}"),
    }
    println!("criterion 3 PASS: rule r1 has no mg redex, one partial redex at [2], witness y = 1 confirmed");
}

/// Criterion 4: sum(x) for 0 <= x <= 4 is mg-normal yet admits exactly
/// two partial steps; its value interpretation is sum(0)..sum(4).
#[test]
fn criterion_04_normal_form_characterizations() {
    let _serial = serial();
    let problem = load("sum_mod16.lctrs");
    let c = problem.ect("e68").unwrap();
    let opts = BackendOpts::default();
    let mut backend = opts.backend(problem.theory);

    let nf = engine::is_normal_form(c, &problem.system, Mode::MostGeneral, backend.as_mut()).unwrap();
    assert!(nf.is_yes());

    let partial = engine::all_steps(c, &problem.system, Mode::Partial, backend.as_mut()).unwrap();
    assert_eq!(partial.steps.len(), 2);
    assert!(partial.unknown_gated.is_empty());

    let values = interp::enumerate_value_instances(c, &DomainSpec::modular(16)).unwrap();
    let sum = problem.sig.lookup("sum", 1).unwrap().clone();
    let expected: BTreeSet<Term> = (0..=4)
        .map(|n| Term::app(sum.clone(), vec![Term::value(Value::Int(n))]).unwrap())
        .collect();
    assert_eq!(values, expected);

    let out = bin()
        .args(["normal", &problem_path("sum_mod16.lctrs"), "--ect", "e68", "--mode", "mg"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("normal: yes"));
    println!("criterion 4 PASS: mg-normal with exactly two partial steps and value set {{sum(0)..sum(4)}}");
}

/// Criterion 5: sum(x) for 0 <= x <= 1 is mg-normal although both value
/// instances are reducible with the interpreted rules.
#[test]
fn criterion_05_per_rule_per_position_quantification() {
    let _serial = serial();
    let problem = load("sum_mod16.lctrs");
    let c = problem.ect("e68b").unwrap();
    let opts = BackendOpts::default();
    let mut backend = opts.backend(problem.theory);

    let nf = engine::is_normal_form(c, &problem.system, Mode::MostGeneral, backend.as_mut()).unwrap();
    assert!(nf.is_yes());

    let d = DomainSpec::modular(16);
    let values = interp::enumerate_value_instances(c, &d).unwrap();
    assert_eq!(values.len(), 2);
    let ground = interp::interpret_system(&problem.system, &d).unwrap();
    for u in &values {
        assert!(
            interp::ground_reducible(u, &ground, None),
            "value instance {u} should be reducible with the interpreted system"
        );
    }
    println!("criterion 5 PASS: mg-normal although every value instance is ground-reducible");
}

/// Criterion 6: the interpretation regressions match their expected sets
/// exactly.
#[test]
fn criterion_06_interpretation_regressions() {
    let _serial = serial();
    // Standard interpretation with pool {z} over Z_6.
    let even = load("even_mod6.lctrs");
    let c = even.ect("even").unwrap();
    let d6 = DomainSpec::modular(6).with_pool(&["z"]);
    let f = even.sig.lookup("f", 2).unwrap().clone();
    let z = Term::Var(Var::int("z"));
    let expected: BTreeSet<Term> = [0, 2, 4]
        .into_iter()
        .map(|n| Term::app(f.clone(), vec![Term::value(Value::Int(n)), z.clone()]).unwrap())
        .collect();
    assert_eq!(interp::enumerate_instances(c, &d6).unwrap(), expected);

    // Value interpretation canonicalizes the second slot to v1.
    let v1 = Term::Var(Var::int("v1"));
    let expected: BTreeSet<Term> = [0, 2, 4]
        .into_iter()
        .map(|n| Term::app(f.clone(), vec![Term::value(Value::Int(n)), v1.clone()]).unwrap())
        .collect();
    assert_eq!(
        interp::enumerate_value_instances(c, &DomainSpec::modular(6)).unwrap(),
        expected
    );

    // Rule interpretation over the window -3..3.
    let ri = load("rule_interp.lctrs");
    let rho = ri.system.rule("rho").unwrap();
    let got = interp::interpret_rule(rho, &DomainSpec::window(-3, 3)).unwrap();
    let fr = ri.sig.lookup("f", 2).unwrap().clone();
    let y = Term::Var(Var::int("y"));
    let expected: BTreeSet<(Term, Term)> = (-3..=0)
        .map(|n| {
            (
                Term::app(fr.clone(), vec![Term::value(Value::Int(n)), y.clone()]).unwrap(),
                y.clone(),
            )
        })
        .collect();
    let got_pairs: BTreeSet<(Term, Term)> =
        got.into_iter().map(|g| (g.lhs, g.rhs)).collect();
    assert_eq!(got_pairs, expected);
    println!("criterion 6 PASS: standard, value and rule interpretation regressions match exactly");
}

/// Criterion 7: the whole theorem catalogue reports zero failures at the
/// default budget, within ten minutes.
#[test]
fn criterion_07_theorem_suite() {
    let _serial = serial();
    let start = Instant::now();
    let out = bin()
        .args(["verify", "--theorem", "all", "--mod", "5", "--cases", "300", "--seed", "42"])
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    assert!(out.status.success(), "verify exited {:?}", out.status.code());
    let reports: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 16);
    for report in reports {
        assert_eq!(
            report["failures"].as_array().unwrap().len(),
            0,
            "{} reported failures",
            report["theorem"]
        );
        assert_eq!(report["cases_run"], 300);
    }
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}, budget 10 min");
    println!("criterion 7 PASS: verify --theorem all --mod 5 --cases 300 --seed 42 reports 0 failures ({elapsed:?})");
}

/// Criterion 8: subsumption and equivalence verdicts agree with the
/// brute-force instance oracles on 200 generated pairs.
#[test]
fn criterion_08_oracle_agreement() {
    let _serial = serial();
    let cfg = GenConfig { cases: 200, modulus: 5, ..GenConfig::default() };
    let report = harness::check(TheoremId::T45, &cfg);
    assert_eq!(report.cases_run, 200);
    assert!(report.failures.is_empty(), "disagreements: {:?}", report.failures);
    println!("criterion 8 PASS: 200 random pairs, 0 disagreements with the brute-force oracles");
}

/// Criterion 9: the value interpretation does not reflect subsumption:
/// the logical side is subsumed by the free side while their canonical
/// value sets are incomparable.
#[test]
fn criterion_09_subsumption_not_reflected() {
    let _serial = serial();
    let problem = load("free_unary.lctrs");
    let logical = problem.ect("l58").unwrap();
    let free = problem.ect("f58").unwrap();
    let mut backend = EnumBackend::new(2);
    let mut cfg = OracleConfig::new(&mut backend);
    assert!(ect::subsumes(logical, free, &mut cfg).is_yes());

    let d = DomainSpec::modular(2);
    let lv = interp::enumerate_value_instances(logical, &d).unwrap();
    let fv = interp::enumerate_value_instances(free, &d).unwrap();
    let fi = problem.sig.lookup("fi", 1).unwrap().clone();
    let expected_l: BTreeSet<Term> = (0..=1)
        .map(|n| Term::app(fi.clone(), vec![Term::value(Value::Int(n))]).unwrap())
        .collect();
    let expected_f: BTreeSet<Term> =
        [Term::app(fi, vec![Term::Var(Var::int("v1"))]).unwrap()].into();
    assert_eq!(lv, expected_l);
    assert_eq!(fv, expected_f);
    assert!(!lv.is_subset(&fv) && !fv.is_subset(&lv), "value sets must be incomparable");
    println!("criterion 9 PASS: subsumption holds while value sets {{fi(0), fi(1)}} vs {{fi(v1)}} are incomparable");
}

/// Criterion 10: the single-rule witness is partial-normal but not
/// instantiation-normal, and instantiation-normality implies partial
/// normality on 300 generated cases.
#[test]
fn criterion_10_instantiation_normality() {
    let _serial = serial();
    let problem = load("free_unary.lctrs");
    let c = problem.ect("t").unwrap();
    let opts = BackendOpts::default();
    let mut backend = opts.backend(problem.theory);
    let nf = engine::is_normal_form(c, &problem.system, Mode::Partial, backend.as_mut()).unwrap();
    assert!(nf.is_yes(), "the witness term must be partial-normal");

    let d = DomainSpec::modular(2);
    match interp::instantiation_normal(c, &problem.system, &problem.sig, &d) {
        TriVerdict::No(witness) => {
            // fu(au): the reducible instance found by the sweep.
            assert_eq!(witness.to_string(), "fu(au)");
            let ground = interp::interpret_system(&problem.system, &d).unwrap();
            assert!(interp::ground_reducible(&witness, &ground, None));
            assert!(interp::contains_instance(c, &witness, &d).unwrap());
        }
        other => panic!("expected instantiation-normal = No, got {}", other.label()),
    }

    let cfg = GenConfig { cases: 300, ..GenConfig::default() };
    let report = harness::check(TheoremId::T69, &cfg);
    assert!(report.failures.is_empty(), "violations: {:?}", report.failures);
    println!("criterion 10 PASS: witness is partial-normal but not instantiation-normal; 300 cases, 0 violations");
}
