//! Display for terms with the usual infix conventions.

use std::fmt;

use crate::term::Term;

/// Binding strength of an operator; higher binds tighter.
pub fn precedence(name: &str, arity: usize) -> Option<(u8, Assoc)> {
    Some(match (name, arity) {
        ("*", 2) => (70, Assoc::Left),
        ("+", 2) | ("-", 2) => (60, Assoc::Left),
        ("=", 2) | (">=", 2) | ("<=", 2) | (">", 2) | ("<", 2) => (50, Assoc::None),
        ("/\\", 2) => (40, Assoc::Left),
        ("\\/", 2) => (30, Assoc::Left),
        ("=>", 2) => (20, Assoc::Right),
        ("<=>", 2) => (10, Assoc::Left),
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assoc {
    Left,
    Right,
    None,
}

fn fmt_term(t: &Term, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(v) => write!(f, "{v}"),
        Term::App(sym, args) => {
            if args.is_empty() {
                return f.write_str(sym.name());
            }
            if let Some((prec, assoc)) = precedence(sym.name(), args.len()) {
                let parens = prec < min;
                if parens {
                    f.write_str("(")?;
                }
                let (lmin, rmin) = match assoc {
                    Assoc::Left => (prec, prec + 1),
                    Assoc::Right => (prec + 1, prec),
                    Assoc::None => (prec + 1, prec + 1),
                };
                fmt_term(&args[0], lmin, f)?;
                write!(f, " {} ", sym.name())?;
                fmt_term(&args[1], rmin, f)?;
                if parens {
                    f.write_str(")")?;
                }
                return Ok(());
            }
            match (sym.name(), args.len()) {
                ("-", 1) => {
                    f.write_str("-")?;
                    match &args[0] {
                        Term::Var(v) => write!(f, "{v}"),
                        inner => {
                            f.write_str("(")?;
                            fmt_term(inner, 0, f)?;
                            f.write_str(")")
                        }
                    }
                }
                ("not", 1) => {
                    let parens = 85 < min;
                    if parens {
                        f.write_str("(")?;
                    }
                    f.write_str("not ")?;
                    fmt_term(&args[0], 86, f)?;
                    if parens {
                        f.write_str(")")?;
                    }
                    Ok(())
                }
                _ => {
                    f.write_str(sym.name())?;
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        fmt_term(a, 0, f)?;
                    }
                    f.write_str(")")
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, f)
    }
}
