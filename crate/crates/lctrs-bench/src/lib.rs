//! Shared fixtures for the benchmarks: the summation system and its
//! starting terms, built programmatically.

use lctrs_core::ect::ECTerm;
use lctrs_core::logic::{and, ExConstraint};
use lctrs_core::rules::{ConstrainedRule, Lctrs};
use lctrs_core::signature::Signature;
use lctrs_core::term::{FunSym, Kind, Sort, Term, Value, Var};

pub fn sum_signature() -> Signature {
    let mut sig = Signature::with_builtins();
    sig.declare(FunSym::new("sum", vec![Sort::int()], Sort::int(), Kind::Term)).unwrap();
    sig
}

fn app(sig: &Signature, name: &str, args: Vec<Term>) -> Term {
    let arity = args.len();
    Term::app(sig.lookup(name, arity).unwrap().clone(), args).unwrap()
}

pub fn sum_system(sig: &Signature) -> Lctrs {
    let x = Var::int("x");
    let r1 = ConstrainedRule::new(
        "r1",
        [x.clone()],
        app(sig, "sum", vec![Term::Var(x.clone())]),
        Term::value(Value::Int(0)),
        app(sig, ">=", vec![Term::value(Value::Int(0)), Term::Var(x.clone())]),
    );
    let r2 = ConstrainedRule::new(
        "r2",
        [x.clone()],
        app(sig, "sum", vec![Term::Var(x.clone())]),
        app(
            sig,
            "+",
            vec![
                Term::Var(x.clone()),
                app(sig, "sum", vec![app(sig, "+", vec![Term::Var(x.clone()), Term::value(Value::Int(-1))])]),
            ],
        ),
        app(sig, "<", vec![Term::value(Value::Int(0)), Term::Var(x)]),
    );
    Lctrs::with_calc(vec![r1, r2], sig)
}

/// `Π{x}. sum(x) [lo <= x /\ x <= hi]`
pub fn sum_query(sig: &Signature, lo: i64, hi: i64) -> ECTerm {
    let x = Var::int("x");
    let body = and(
        app(sig, "<=", vec![Term::value(Value::Int(lo)), Term::Var(x.clone())]),
        app(sig, "<=", vec![Term::Var(x.clone()), Term::value(Value::Int(hi))]),
    );
    ECTerm::new([x.clone()], app(sig, "sum", vec![Term::Var(x)]), ExConstraint::plain(body))
}
