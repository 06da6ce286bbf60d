use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::*;
use super::predicates;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: duplicate declaration of `{name}`")]
    DuplicateDeclaration {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: unknown identifier `{name}`")]
    UnknownIdentifier {
        line: usize,
        col: usize,
        name: String,
    },
    #[error("{line}:{col}: unknown predicate `{name}`")]
    UnknownPredicate {
        line: usize,
        col: usize,
        name: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    /// `\old`, `\result`
    Backslash(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &[
    "==>", ":=", "::", "..", "==", "!=", "<=", ">=", "&&", "||", "(", ")", "[", "]", "{", "}",
    ",", ";", ":", ".", "+", "-", "*", "/", "%", "<", ">", "!",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let n = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                line: tl,
                col: tc,
                msg: format!("integer literal `{text}` out of range"),
            })?;
            col += i - start;
            out.push(Token { tok: Tok::Int(n), line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '\\' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if let Some(rest) = text.strip_prefix('\\') {
                Tok::Backslash(rest.to_string())
            } else {
                Tok::Ident(text)
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token { tok: Tok::Sym(s), line: tl, col: tc });
            }
            None => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "method", "returns", "requires", "ensures", "invariant", "var", "while", "if", "else", "skip",
    "true", "false", "null", "forall", "exists", "in", "int", "bool",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    bound: Vec<Ident>,
    uses: Vec<(Ident, usize, usize)>,
    loop_counter: usize,
    if_counter: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        if self.eat_kw("int") {
            if self.eat_sym("[") {
                self.expect_sym("]")?;
                Ok(Type::IntArray)
            } else {
                Ok(Type::Int)
            }
        } else if self.eat_kw("bool") {
            Ok(Type::Bool)
        } else {
            self.err("expected a type (`int`, `int[]` or `bool`)")
        }
    }

    fn decl(&mut self, seen: &mut BTreeSet<Ident>) -> PResult<(Ident, Type)> {
        let (line, col) = self.here();
        let name = self.ident()?;
        self.expect_sym(":")?;
        let ty = self.ty()?;
        if !seen.insert(name.clone()) {
            return Err(ParseError::DuplicateDeclaration { line, col, name });
        }
        Ok((name, ty))
    }

    fn program(&mut self) -> PResult<Program> {
        self.expect_kw("method")?;
        let name = self.ident()?;
        let mut seen = BTreeSet::new();
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                params.push(self.decl(&mut seen)?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let ret = if self.eat_kw("returns") {
            self.expect_sym("(")?;
            let d = self.decl(&mut seen)?;
            self.expect_sym(")")?;
            Some(d)
        } else {
            None
        };
        let mut pre = Vec::new();
        let mut post = Vec::new();
        loop {
            if self.eat_kw("requires") {
                pre.push(self.expr()?);
                self.expect_sym(";")?;
            } else if self.eat_kw("ensures") {
                post.push(self.expr()?);
                self.expect_sym(";")?;
            } else {
                break;
            }
        }
        self.expect_sym("{")?;
        let mut locals = Vec::new();
        while self.eat_kw("var") {
            locals.push(self.decl(&mut seen)?);
            self.expect_sym(";")?;
        }
        let mut items = Vec::new();
        while !self.is_sym("}") {
            items.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        if *self.peek() != Tok::Eof {
            return self.err(format!("trailing input: {}", describe(self.peek())));
        }
        for (name, line, col) in std::mem::take(&mut self.uses) {
            if !seen.contains(&name) {
                return Err(ParseError::UnknownIdentifier { line, col, name });
            }
        }
        let mut p = Program {
            name,
            params,
            ret,
            locals,
            pre,
            post,
            body: Stmt::Seq(items),
            loops: Vec::new(),
        };
        p.index_loops();
        Ok(p)
    }

    fn block(&mut self) -> PResult<Stmt> {
        self.expect_sym("{")?;
        let mut items = Vec::new();
        while !self.is_sym("}") {
            if *self.peek() == Tok::Eof {
                return self.err("unterminated block");
            }
            items.push(self.stmt()?);
        }
        self.expect_sym("}")?;
        Ok(Stmt::Seq(items))
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        if self.eat_kw("skip") {
            self.expect_sym(";")?;
            return Ok(Stmt::Skip);
        }
        if self.is_kw("if") {
            return self.if_stmt();
        }
        if self.eat_kw("while") {
            let id = self.loop_counter;
            self.loop_counter += 1;
            self.expect_sym("(")?;
            let cond = self.expr()?;
            self.expect_sym(")")?;
            let mut invariants = Vec::new();
            while self.eat_kw("invariant") {
                invariants.push(self.expr()?);
                self.expect_sym(";")?;
            }
            let body = self.block()?;
            return Ok(Stmt::While {
                id,
                cond,
                invariants,
                body: Box::new(body),
            });
        }
        let (line, col) = self.here();
        let name = self.ident()?;
        self.uses.push((name.clone(), line, col));
        if self.eat_sym("[") {
            let index = self.expr()?;
            self.expect_sym("]")?;
            self.expect_sym(":=")?;
            let rhs = self.expr()?;
            self.expect_sym(";")?;
            return Ok(Stmt::Store { array: name, index, rhs });
        }
        self.expect_sym(":=")?;
        let rhs = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::Assign { target: name, rhs })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        self.expect_kw("if")?;
        let id = self.if_counter;
        self.if_counter += 1;
        self.expect_sym("(")?;
        let cond = self.expr()?;
        self.expect_sym(")")?;
        let then = self.block()?;
        let els = if self.eat_kw("else") {
            if self.is_kw("if") {
                self.if_stmt()?
            } else {
                self.block()?
            }
        } else {
            Stmt::Skip
        };
        Ok(Stmt::If {
            id,
            cond,
            then: Box::new(then),
            els: Box::new(els),
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.or()?;
        if self.eat_sym("==>") {
            let rhs = self.expr()?;
            return Ok(Expr::bin(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut e = self.and()?;
        while self.eat_sym("||") {
            let r = self.and()?;
            e = Expr::bin(BinOp::Or, e, r);
        }
        Ok(e)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut e = self.equality()?;
        while self.eat_sym("&&") {
            let r = self.equality()?;
            e = Expr::bin(BinOp::And, e, r);
        }
        Ok(e)
    }

    fn equality(&mut self) -> PResult<Expr> {
        let mut e = self.relational()?;
        loop {
            let op = if self.eat_sym("==") {
                BinOp::Eq
            } else if self.eat_sym("!=") {
                BinOp::Ne
            } else {
                break;
            };
            let r = self.relational()?;
            e = Expr::bin(op, e, r);
        }
        Ok(e)
    }

    fn relational(&mut self) -> PResult<Expr> {
        let mut e = self.additive()?;
        loop {
            let op = if self.eat_sym("<=") {
                BinOp::Le
            } else if self.eat_sym(">=") {
                BinOp::Ge
            } else if self.eat_sym("<") {
                BinOp::Lt
            } else if self.eat_sym(">") {
                BinOp::Gt
            } else {
                break;
            };
            let r = self.additive()?;
            e = Expr::bin(op, e, r);
        }
        Ok(e)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                break;
            };
            let r = self.multiplicative()?;
            e = Expr::bin(op, e, r);
        }
        Ok(e)
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else if self.eat_sym("%") {
                BinOp::Mod
            } else {
                break;
            };
            let r = self.unary()?;
            e = Expr::bin(op, e, r);
        }
        Ok(e)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.is_sym("-") {
            if let Tok::Int(n) = *self.peek_at(1) {
                self.bump();
                self.bump();
                return self.postfix(Expr::Int(-n));
            }
            self.bump();
            let e = self.unary()?;
            return Ok(Expr::Unary(UnOp::Neg, Box::new(e)));
        }
        if self.eat_sym("!") {
            let e = self.unary()?;
            return Ok(Expr::Unary(UnOp::Not, Box::new(e)));
        }
        let p = self.primary()?;
        self.postfix(p)
    }

    fn postfix(&mut self, mut e: Expr) -> PResult<Expr> {
        loop {
            if self.eat_sym("[") {
                let i = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::Index(Box::new(e), Box::new(i));
            } else if self.is_sym(".") {
                self.bump();
                match self.bump() {
                    Tok::Ident(s) if s == "length" => e = Expr::Length(Box::new(e)),
                    other => {
                        return self.err(format!("expected `length`, found {}", describe(&other)))
                    }
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Backslash(name) => {
                self.bump();
                match name.as_str() {
                    "result" => Ok(Expr::Result),
                    "old" => {
                        self.expect_sym("(")?;
                        let (l, c) = self.here();
                        let v = self.ident()?;
                        self.uses.push((v.clone(), l, c));
                        self.expect_sym(")")?;
                        Ok(Expr::Old(v))
                    }
                    _ => Err(ParseError::Syntax {
                        line,
                        col,
                        msg: format!("unknown specification keyword `\\{name}`"),
                    }),
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(k) if k == "true" => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(k) if k == "false" => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(k) if k == "null" => {
                self.bump();
                Ok(Expr::Null)
            }
            Tok::Ident(k) if k == "forall" || k == "exists" => {
                self.bump();
                let q = if k == "forall" {
                    Quantifier::Forall
                } else {
                    Quantifier::Exists
                };
                let var = self.ident()?;
                self.expect_kw("in")?;
                let lo = self.additive()?;
                self.expect_sym("..")?;
                let hi = self.additive()?;
                self.expect_sym("::")?;
                self.bound.push(var.clone());
                let body = self.expr();
                self.bound.pop();
                Ok(Expr::Quant {
                    q,
                    var,
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    body: Box::new(body?),
                })
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_sym("(") {
                    if predicates::lookup(&name).is_none() {
                        return Err(ParseError::UnknownPredicate { line, col, name });
                    }
                    let mut args = Vec::new();
                    if !self.is_sym(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_sym(",") {
                                break;
                            }
                        }
                    }
                    self.expect_sym(")")?;
                    Ok(Expr::Call(name, args))
                } else {
                    if !self.bound.contains(&name) {
                        self.uses.push((name.clone(), line, col));
                    }
                    Ok(Expr::Var(name))
                }
            }
            other => self.err(format!("expected an expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Backslash(s) => format!("`\\{s}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

fn parser(src: &str) -> PResult<Parser> {
    Ok(Parser {
        toks: lex(src)?,
        pos: 0,
        bound: Vec::new(),
        uses: Vec::new(),
        loop_counter: 0,
        if_counter: 0,
    })
}

/// Parse a complete `.mlw` method.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    parser(src)?.program()
}

/// Parse a standalone formula. Identifiers are not resolved against any scope.
pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = parser(src)?;
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("trailing input: {}", describe(p.peek())));
    }
    Ok(e)
}
