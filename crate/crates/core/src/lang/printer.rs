use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

const ATOM: u8 = 10;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        Expr::Unary(..) => 8,
        Expr::Int(n) if *n < 0 => 8,
        Expr::Index(..) | Expr::Length(..) => 9,
        _ => ATOM,
    }
}

fn child(f: &mut Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Null => f.write_str("null"),
            Expr::Var(v) => f.write_str(v),
            Expr::Old(v) => write!(f, "\\old({v})"),
            Expr::Result => f.write_str("\\result"),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                // `-(5)` keeps the negation distinct from the literal -5
                if matches!(op, UnOp::Neg) && matches!(**e, Expr::Int(_)) {
                    write!(f, "({e})")
                } else {
                    child(f, e, 8)
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let (lmin, rmin) = if *op == BinOp::Implies {
                    (p + 1, p)
                } else {
                    (p, p + 1)
                };
                child(f, l, lmin)?;
                write!(f, " {} ", op.symbol())?;
                child(f, r, rmin)
            }
            Expr::Index(a, i) => {
                child(f, a, 9)?;
                write!(f, "[{i}]")
            }
            Expr::Length(a) => {
                child(f, a, 9)?;
                f.write_str(".length")
            }
            Expr::Quant {
                q,
                var,
                lo,
                hi,
                body,
            } => {
                let kw = match q {
                    Quantifier::Forall => "forall",
                    Quantifier::Exists => "exists",
                };
                write!(f, "({kw} {var} in ")?;
                child(f, lo, 6)?;
                f.write_str(" .. ")?;
                child(f, hi, 6)?;
                write!(f, " :: {body})")
            }
            Expr::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

fn indent(out: &mut String, n: usize) {
    for _ in 0..n {
        out.push_str("    ");
    }
}

fn print_block(out: &mut String, s: &Stmt, depth: usize) {
    out.push_str("{\n");
    match s {
        Stmt::Seq(items) => {
            for i in items {
                print_stmt(out, i, depth + 1);
            }
        }
        other => print_stmt(out, other, depth + 1),
    }
    indent(out, depth);
    out.push('}');
}

fn print_if(out: &mut String, s: &Stmt, depth: usize) {
    let Stmt::If { cond, then, els, .. } = s else {
        unreachable!()
    };
    let _ = write!(out, "if ({cond}) ");
    print_block(out, then, depth);
    match &**els {
        Stmt::Skip => {}
        e @ Stmt::If { .. } => {
            out.push_str(" else ");
            print_if(out, e, depth);
        }
        e => {
            out.push_str(" else ");
            print_block(out, e, depth);
        }
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    match s {
        Stmt::Seq(items) => {
            for i in items {
                print_stmt(out, i, depth);
            }
            return;
        }
        _ => indent(out, depth),
    }
    match s {
        Stmt::Skip => out.push_str("skip;"),
        Stmt::Assign { target, rhs } => {
            let _ = write!(out, "{target} := {rhs};");
        }
        Stmt::Store { array, index, rhs } => {
            let _ = write!(out, "{array}[{index}] := {rhs};");
        }
        Stmt::If { .. } => print_if(out, s, depth),
        Stmt::While {
            cond,
            invariants,
            body,
            ..
        } => {
            let _ = write!(out, "while ({cond})");
            for inv in invariants {
                out.push('\n');
                indent(out, depth + 1);
                let _ = write!(out, "invariant {inv};");
            }
            out.push(if invariants.is_empty() { ' ' } else { '\n' });
            if !invariants.is_empty() {
                indent(out, depth);
            }
            print_block(out, body, depth);
        }
        Stmt::Seq(_) => unreachable!(),
    }
    out.push('\n');
}

fn decl(name: &str, ty: Type) -> String {
    format!("{name}: {ty}")
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|(n, t)| decl(n, *t)).collect();
        write!(f, "method {}({})", self.name, params.join(", "))?;
        if let Some((n, t)) = &self.ret {
            write!(f, " returns ({})", decl(n, *t))?;
        }
        writeln!(f)?;
        for c in &self.pre {
            writeln!(f, "    requires {c};")?;
        }
        for c in &self.post {
            writeln!(f, "    ensures {c};")?;
        }
        writeln!(f, "{{")?;
        for (n, t) in &self.locals {
            writeln!(f, "    var {};", decl(n, *t))?;
        }
        let mut body = String::new();
        print_stmt(&mut body, &self.body, 1);
        f.write_str(&body)?;
        writeln!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use crate::lang::{parse_formula, parse_program};

    fn roundtrip(src: &str) {
        let f = parse_formula(src).unwrap();
        let printed = f.to_string();
        assert_eq!(parse_formula(&printed).unwrap(), f, "{src} -> {printed}");
    }

    #[test]
    fn formulas_roundtrip() {
        for s in [
            "\\result < 0 ==> !has(a, fromIndex, toIndex, key)",
            "(a ==> b) ==> c",
            "x - (y - z)",
            "x - y - z",
            "-(5) + -5",
            "- -x",
            "!(a && b) || c",
            "\\old(a)[k] + a.length * (2 % n)",
            "(forall k in 0 .. i :: a[k] == val) && i >= 0",
            "(forall k in x - 1 .. n + 1 :: (exists j in 0 .. k :: a[j] < a[k]))",
        ] {
            roundtrip(s);
        }
    }

    #[test]
    fn program_roundtrip() {
        let src = "method m(a: int[], n: int) returns (r: bool)
            requires a != null;
            ensures \\result ==> n > 0;
            { var i: int;
              i := 0;
              while (i < n && i < a.length) invariant 0 <= i; { a[i] := 0; i := i + 1; }
              if (i > 0) { r := true; } else if (i < 0) { skip; } else { r := false; }
            }";
        let p = parse_program(src).unwrap();
        let again = parse_program(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }
}
