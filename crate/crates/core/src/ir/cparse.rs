//! Parser and evaluator for the C subset [`emit_c`](super::emit_c) produces, used to check
//! that rendered programs mean what the interpreter computes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Arg, Outputs, RunResult, TestCase, Trap};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct CParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CAtom {
    Name(String),
    Num(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CIndex {
    Var(String),
    /// `major * stride + minor`
    Linear(String, String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Atom(CAtom),
    Bin(char, CAtom, CAtom),
    Abs(CAtom),
    Load(String, CIndex),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CStmt {
    Decl(String, CExpr),
    Assign(String, CAtom),
    For { var: String, bound: String, body: Vec<CStmt> },
    Store { buffer: String, index: CIndex, value: CAtom },
    Return(CAtom),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CParamKind {
    Int,
    Float,
    Pointer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CFunction {
    pub name: String,
    pub returns: bool,
    pub params: Vec<(CParamKind, String)>,
    pub body: Vec<CStmt>,
}

const SYMS: [&str; 14] = ["++", "(", ")", "{", "}", "[", "]", ";", ",", "=", "<", "+", "-", "*"];

fn tokenize(text: &str) -> Result<Vec<(Tok, usize, usize)>, CParseError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = (ln + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[s..i].iter().collect()), pos.0, pos.1));
            } else if c.is_ascii_digit() {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let t: String = chars[s..i].iter().collect();
                let v = t.parse().map_err(|_| CParseError { line: pos.0, col: pos.1, msg: "bad number".into() })?;
                out.push((Tok::Num(v), pos.0, pos.1));
            } else {
                let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let sym = SYMS.iter().find(|s| rest.starts_with(**s)).ok_or_else(|| CParseError {
                    line: pos.0,
                    col: pos.1,
                    msg: alloc::format!("unexpected `{c}`"),
                })?;
                i += sym.len();
                out.push((Tok::Sym(sym), pos.0, pos.1));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn err<T>(&self, msg: &str) -> Result<T, CParseError> {
        let (line, col) = self.toks.get(self.pos).or(self.toks.last()).map_or((0, 0), |t| (t.1, t.2));
        Err(CParseError { line, col, msg: msg.to_string() })
    }

    fn sym(&mut self, s: &str) -> Result<(), CParseError> {
        if self.peek() == Some(&Tok::Sym(SYMS.iter().copied().find(|x| *x == s).unwrap_or(""))) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(&alloc::format!("expected `{s}`"))
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.sym(s).is_ok()
    }

    fn ident(&mut self) -> Result<String, CParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn keyword(&mut self, k: &str) -> Result<(), CParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == k => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err(&alloc::format!("expected `{k}`")),
        }
    }

    fn atom(&mut self) -> Result<CAtom, CParseError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(CAtom::Num(v))
            }
            _ => Ok(CAtom::Name(self.ident()?)),
        }
    }

    fn index(&mut self) -> Result<CIndex, CParseError> {
        let a = self.ident()?;
        if self.eat("*") {
            let b = self.ident()?;
            self.sym("+")?;
            let c = self.ident()?;
            Ok(CIndex::Linear(a, b, c))
        } else {
            Ok(CIndex::Var(a))
        }
    }

    fn expr(&mut self) -> Result<CExpr, CParseError> {
        if self.peek() == Some(&Tok::Ident("fabs".into())) {
            self.pos += 1;
            self.sym("(")?;
            let a = self.atom()?;
            self.sym(")")?;
            return Ok(CExpr::Abs(a));
        }
        let a = self.atom()?;
        if let CAtom::Name(buf) = &a {
            if self.eat("[") {
                let idx = self.index()?;
                self.sym("]")?;
                return Ok(CExpr::Load(buf.clone(), idx));
            }
        }
        for op in ['+', '-', '*'] {
            if self.eat(op.encode_utf8(&mut [0; 4])) {
                return Ok(CExpr::Bin(op, a, self.atom()?));
            }
        }
        Ok(CExpr::Atom(a))
    }

    fn block(&mut self) -> Result<Vec<CStmt>, CParseError> {
        let mut out = Vec::new();
        while !self.eat("}") {
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> Result<CStmt, CParseError> {
        match self.peek() {
            Some(Tok::Ident(k)) if k == "float" => {
                self.pos += 1;
                let name = self.ident()?;
                self.sym("=")?;
                let e = self.expr()?;
                self.sym(";")?;
                Ok(CStmt::Decl(name, e))
            }
            Some(Tok::Ident(k)) if k == "for" => {
                self.pos += 1;
                self.sym("(")?;
                self.keyword("int")?;
                let var = self.ident()?;
                self.sym("=")?;
                if self.atom()? != CAtom::Num(0.0) {
                    return self.err("loops start at 0");
                }
                self.sym(";")?;
                if self.ident()? != var {
                    return self.err("loop condition must test the induction variable");
                }
                self.sym("<")?;
                let bound = self.ident()?;
                self.sym(";")?;
                self.sym("++")?;
                if self.ident()? != var {
                    return self.err("loop must increment the induction variable");
                }
                self.sym(")")?;
                self.sym("{")?;
                let body = self.block()?;
                Ok(CStmt::For { var, bound, body })
            }
            Some(Tok::Ident(k)) if k == "return" => {
                self.pos += 1;
                let a = self.atom()?;
                self.sym(";")?;
                Ok(CStmt::Return(a))
            }
            _ => {
                let name = self.ident()?;
                if self.eat("[") {
                    let index = self.index()?;
                    self.sym("]")?;
                    self.sym("=")?;
                    let value = self.atom()?;
                    self.sym(";")?;
                    Ok(CStmt::Store { buffer: name, index, value })
                } else {
                    self.sym("=")?;
                    let value = self.atom()?;
                    self.sym(";")?;
                    Ok(CStmt::Assign(name, value))
                }
            }
        }
    }

    fn function(&mut self) -> Result<CFunction, CParseError> {
        let returns = match self.ident()?.as_str() {
            "void" => false,
            "float" => true,
            _ => return self.err("expected `void` or `float`"),
        };
        let name = self.ident()?;
        self.sym("(")?;
        let mut params = Vec::new();
        if !self.eat(")") {
            loop {
                let kind = match self.ident()?.as_str() {
                    "int" => CParamKind::Int,
                    "float" if self.eat("*") => CParamKind::Pointer,
                    "float" => CParamKind::Float,
                    _ => return self.err("expected a parameter type"),
                };
                params.push((kind, self.ident()?));
                if self.eat(")") {
                    break;
                }
                self.sym(",")?;
            }
        }
        self.sym("{")?;
        let body = self.block()?;
        if self.pos != self.toks.len() {
            return self.err("trailing input");
        }
        Ok(CFunction { name, returns, params, body })
    }
}

pub fn parse_c(text: &str) -> Result<CFunction, CParseError> {
    Parser { toks: tokenize(text)?, pos: 0 }.function()
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Int(i64),
    Float(f64),
    Buffer(usize),
}

struct Eval {
    scope: Vec<(String, Slot)>,
    bufs: Vec<(String, Vec<f64>)>,
    ret: Option<f64>,
}

impl Eval {
    fn get(&self, name: &str) -> Slot {
        self.scope.iter().rev().find(|(n, _)| n == name).map(|s| s.1).unwrap_or_else(|| panic!("unbound `{name}`"))
    }

    fn set(&mut self, name: &str, v: f64) {
        let slot = self.scope.iter_mut().rev().find(|(n, _)| n == name).unwrap_or_else(|| panic!("unbound `{name}`"));
        slot.1 = Slot::Float(v);
    }

    fn float(&self, a: &CAtom) -> f64 {
        match a {
            CAtom::Num(v) => *v,
            CAtom::Name(n) => match self.get(n) {
                Slot::Float(v) => v,
                Slot::Int(v) => v as f64,
                Slot::Buffer(_) => panic!("`{n}` is a buffer"),
            },
        }
    }

    fn int(&self, name: &str) -> i64 {
        match self.get(name) {
            Slot::Int(v) => v,
            _ => panic!("`{name}` is not an int"),
        }
    }

    fn element(&self, buf: &str, idx: &CIndex) -> Result<(usize, usize), Trap> {
        let Slot::Buffer(b) = self.get(buf) else { panic!("`{buf}` is not a buffer") };
        let i = match idx {
            CIndex::Var(v) => self.int(v),
            CIndex::Linear(a, s, c) => self.int(a).saturating_mul(self.int(s)).saturating_add(self.int(c)),
        };
        let len = self.bufs[b].1.len();
        if i < 0 || i as u64 >= len as u64 {
            return Err(Trap::OutOfBounds { buffer: buf.to_string(), index: i, len });
        }
        Ok((b, i as usize))
    }

    fn block(&mut self, body: &[CStmt]) -> Result<(), Trap> {
        let mark = self.scope.len();
        for s in body {
            match s {
                CStmt::Decl(name, e) => {
                    let v = match e {
                        CExpr::Atom(a) => self.float(a),
                        CExpr::Bin(op, a, b) => {
                            let (a, b) = (self.float(a), self.float(b));
                            match op {
                                '+' => a + b,
                                '-' => a - b,
                                _ => a * b,
                            }
                        }
                        CExpr::Abs(a) => self.float(a).abs(),
                        CExpr::Load(buf, idx) => {
                            let (b, i) = self.element(buf, idx)?;
                            self.bufs[b].1[i]
                        }
                    };
                    self.scope.push((name.clone(), Slot::Float(v)));
                }
                CStmt::Assign(name, a) => {
                    let v = self.float(a);
                    self.set(name, v);
                }
                CStmt::For { var, bound, body } => {
                    let n = self.int(bound);
                    for i in 0..n.max(0) {
                        self.scope.push((var.clone(), Slot::Int(i)));
                        self.block(body)?;
                        self.scope.pop();
                    }
                }
                CStmt::Store { buffer, index, value } => {
                    let v = self.float(value);
                    let (b, i) = self.element(buffer, index)?;
                    self.bufs[b].1[i] = v;
                }
                CStmt::Return(a) => {
                    self.ret = Some(self.float(a));
                }
            }
        }
        self.scope.truncate(mark);
        Ok(())
    }
}

impl CFunction {
    /// Evaluates the parsed function with double-precision arithmetic.
    pub fn eval(&self, case: &TestCase) -> RunResult {
        let mut ev = Eval { scope: Vec::new(), bufs: Vec::new(), ret: None };
        let mut positions = Vec::new();
        for (i, ((_, name), arg)) in self.params.iter().zip(&case.args).enumerate() {
            let slot = match arg {
                Arg::Int(v) => Slot::Int(*v),
                Arg::Float(v) => Slot::Float(*v),
                Arg::Buffer(b) => {
                    ev.bufs.push((name.clone(), b.clone()));
                    positions.push(i);
                    Slot::Buffer(ev.bufs.len() - 1)
                }
            };
            ev.scope.push((name.clone(), slot));
        }
        if let Err(t) = ev.block(&self.body) {
            return RunResult::Trap(t);
        }
        RunResult::Ok(Outputs {
            ret: if self.returns { ev.ret } else { None },
            buffers: positions.into_iter().zip(ev.bufs).map(|(p, (_, b))| (p, b)).collect(),
        })
    }
}
