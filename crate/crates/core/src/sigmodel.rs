//! C-style signatures and the property relations attached to them.
//!
//! A [`FunctionSpec`] is a signature plus a set of named relations whose tuples range over
//! parameters, C types, string literals and numeric literals. Specs are loaded from a small
//! line-oriented format:
//!
//! ```text
//! function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void
//! relations:
//!   size(x, n)
//!   size(y, m)
//!   output(y)
//! ```

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::lex::{self, Cursor, LexError, Tok};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CType {
    Int,
    Float,
    Pointer(Box<CType>),
    /// Fixed-length array; the length is always positive.
    Array(Box<CType>, u32),
    Aggregate(Vec<(String, CType)>),
}

impl CType {
    pub fn pointer_to(inner: CType) -> CType {
        CType::Pointer(Box::new(inner))
    }

    pub fn is_pointer(&self) -> bool {
        is_pointer(self)
    }
}

/// True iff `t` is a pointer type. Arrays are not pointers in this model.
pub fn is_pointer(t: &CType) -> bool {
    matches!(t, CType::Pointer(_))
}

impl fmt::Display for CType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CType::Int => f.write_str("int"),
            CType::Float => f.write_str("float"),
            CType::Pointer(inner) => write!(f, "{inner}*"),
            CType::Array(inner, len) => write!(f, "{inner}[{len}]"),
            CType::Aggregate(fields) => {
                f.write_str("struct {")?;
                for (name, ty) in fields {
                    write!(f, " {name}: {ty};")?;
                }
                f.write_str(" }")
            }
        }
    }
}

/// An exact decimal literal, normalized so that equal values compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal {
    negative: bool,
    /// Significant digits without leading zeros ("0" for zero).
    digits: String,
    /// Number of digits after the decimal point.
    scale: u32,
}

impl Decimal {
    /// Parses `-?[0-9]+(\.[0-9]+)?`.
    pub fn parse(text: &str) -> Option<Decimal> {
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int, frac) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int.is_empty()
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || (body.contains('.') && frac.is_empty())
        {
            return None;
        }
        let frac = frac.trim_end_matches('0');
        let mut digits: String = int.to_owned() + frac;
        let trimmed = digits.trim_start_matches('0');
        digits = if trimmed.is_empty() { "0".to_string() } else { trimmed.to_string() };
        if digits == "0" {
            return Some(Decimal { negative: false, digits, scale: 0 });
        }
        Some(Decimal { negative, digits, scale: frac.len() as u32 })
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative {
            f.write_str("-")?;
        }
        let scale = self.scale as usize;
        if scale == 0 {
            return f.write_str(&self.digits);
        }
        if self.digits.len() > scale {
            let (i, fr) = self.digits.split_at(self.digits.len() - scale);
            write!(f, "{i}.{fr}")
        } else {
            f.write_str("0.")?;
            for _ in self.digits.len()..scale {
                f.write_str("0")?;
            }
            f.write_str(&self.digits)
        }
    }
}

/// An element of the universe relations range over.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Param(String),
    Type(CType),
    Str(String),
    Num(Decimal),
}

impl Atom {
    pub fn param(name: &str) -> Atom {
        Atom::Param(name.to_string())
    }

    pub fn as_param(&self) -> Option<&str> {
        match self {
            Atom::Param(p) => Some(p),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Param(p) => f.write_str(p),
            Atom::Type(t) => write!(f, "{t}"),
            Atom::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Atom::Num(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ctype: CType,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Param>,
    /// `None` is `void`.
    pub return_type: Option<CType>,
}

impl Signature {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "function {}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", p.name, p.ctype)?;
        }
        f.write_str(") -> ")?;
        match &self.return_type {
            Some(t) => write!(f, "{t}"),
            None => f.write_str("void"),
        }
    }
}

/// A named relation; every tuple has the same arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
    pub tuples: BTreeSet<Vec<Atom>>,
}

impl Relation {
    pub fn contains(&self, tuple: &[Atom]) -> bool {
        self.tuples.contains(tuple)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown type name `{name}`")]
    UnknownType { line: usize, col: usize, name: String },
    #[error("{line}:{col}: undeclared parameter {name}")]
    UndeclaredParameter { line: usize, col: usize, name: String },
    #[error("{line}:{col}: duplicate parameter `{name}`")]
    DuplicateParameter { line: usize, col: usize, name: String },
    #[error("{line}:{col}: relation `{name}` has arity {expected}, found a tuple of arity {found}")]
    ArityMismatch { line: usize, col: usize, name: String, expected: usize, found: usize },
    #[error("{line}:{col}: invalid type: {msg}")]
    InvalidType { line: usize, col: usize, msg: String },
}

impl From<LexError> for SpecError {
    fn from(e: LexError) -> Self {
        SpecError::Syntax { line: e.line, col: e.col, msg: e.msg }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeOfError {
    #[error("untyped atom {0}")]
    Untyped(String),
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
}

/// Reasons a well-formed spec is still outside what the synthesizer handles.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Ineligible {
    #[error("parameter `{name}` has type {ty}; only int, float and float* parameters can be synthesized")]
    ParamType { name: String, ty: CType },
    #[error("return type {0} is not supported; use void or float")]
    ReturnType(CType),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpec {
    pub signature: Signature,
    relations: BTreeMap<String, Relation>,
}

const TYPE_KEYWORDS: [&str; 4] = ["int", "float", "void", "struct"];

pub(crate) fn is_type_keyword(s: &str) -> bool {
    TYPE_KEYWORDS.contains(&s)
}

impl FunctionSpec {
    /// Builds a spec directly, validating parameter references and arities.
    pub fn new(
        signature: Signature,
        relations: impl IntoIterator<Item = (String, Vec<Atom>)>,
    ) -> Result<FunctionSpec, SpecError> {
        let mut spec = FunctionSpec { signature, relations: BTreeMap::new() };
        for (name, tuple) in relations {
            spec.insert(name, tuple, 0, 0)?;
        }
        Ok(spec)
    }

    fn insert(&mut self, name: String, tuple: Vec<Atom>, line: usize, col: usize) -> Result<(), SpecError> {
        if tuple.is_empty() {
            return Err(SpecError::Syntax { line, col, msg: "relations need at least one argument".into() });
        }
        for atom in &tuple {
            if let Atom::Param(p) = atom {
                if self.signature.param(p).is_none() {
                    return Err(SpecError::UndeclaredParameter { line, col, name: p.clone() });
                }
            }
        }
        let rel = self.relations.entry(name.clone()).or_insert_with(|| Relation {
            name: name.clone(),
            arity: tuple.len(),
            tuples: BTreeSet::new(),
        });
        if rel.arity != tuple.len() {
            return Err(SpecError::ArityMismatch {
                line,
                col,
                name,
                expected: rel.arity,
                found: tuple.len(),
            });
        }
        rel.tuples.insert(tuple);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<FunctionSpec, SpecError> {
        parse_spec(text)
    }

    pub fn name(&self) -> &str {
        &self.signature.name
    }

    pub fn params(&self) -> &[Param] {
        &self.signature.params
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.signature.param(name)
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    /// Relations in name order.
    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    /// Whether the tuple is present in the named relation.
    pub fn holds(&self, name: &str, tuple: &[Atom]) -> bool {
        self.relation(name).is_some_and(|r| r.contains(tuple))
    }

    pub fn type_of(&self, atom: &Atom) -> Result<CType, TypeOfError> {
        type_of(self, atom)
    }

    /// Integer parameters `n` with a `size(X, n)` tuple for some pointer parameter `X`.
    pub fn size_bound_params(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        if let Some(rel) = self.relation("size") {
            for t in &rel.tuples {
                if let [Atom::Param(x), Atom::Param(n)] = t.as_slice() {
                    let px = self.param(x).map(|p| p.ctype.is_pointer());
                    let pn = self.param(n).map(|p| p.ctype == CType::Int);
                    if px == Some(true) && pn == Some(true) {
                        out.insert(n.as_str());
                    }
                }
            }
        }
        out
    }

    /// Buffers tagged `output(X)`.
    pub fn outputs(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        if let Some(rel) = self.relation("output") {
            for t in &rel.tuples {
                if let [Atom::Param(x)] = t.as_slice() {
                    out.insert(x.as_str());
                }
            }
        }
        out
    }

    /// Only scalars and pointer-to-float parameters, with a void or float result, are
    /// synthesized. Everything else parses but is rejected here.
    pub fn check_synthesizable(&self) -> Result<(), Ineligible> {
        for p in self.params() {
            let ok = match &p.ctype {
                CType::Int | CType::Float => true,
                CType::Pointer(inner) => **inner == CType::Float,
                _ => false,
            };
            if !ok {
                return Err(Ineligible::ParamType { name: p.name.clone(), ty: p.ctype.clone() });
            }
        }
        match &self.signature.return_type {
            None | Some(CType::Float) => Ok(()),
            Some(t) => Err(Ineligible::ReturnType(t.clone())),
        }
    }
}

/// Canonical text: declaration-order parameters, relations sorted by name then tuple.
impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.signature)?;
        if self.relations.is_empty() {
            return Ok(());
        }
        writeln!(f, "relations:")?;
        for rel in self.relations.values() {
            for t in &rel.tuples {
                write!(f, "  {}(", rel.name)?;
                for (i, a) in t.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                writeln!(f, ")")?;
            }
        }
        Ok(())
    }
}

pub fn type_of(spec: &FunctionSpec, atom: &Atom) -> Result<CType, TypeOfError> {
    match atom {
        Atom::Param(p) => spec
            .param(p)
            .map(|p| p.ctype.clone())
            .ok_or_else(|| TypeOfError::UnknownParameter(p.clone())),
        Atom::Type(t) => Ok(t.clone()),
        other => Err(TypeOfError::Untyped(other.to_string())),
    }
}

pub fn parse_spec(text: &str) -> Result<FunctionSpec, SpecError> {
    let lines = lex::lex(text)?;
    let mut iter = lines.iter();
    let header = iter.next().ok_or(SpecError::Syntax {
        line: 1,
        col: 1,
        msg: "expected `function` header".into(),
    })?;
    let signature = parse_header(header)?;
    let mut spec = FunctionSpec { signature, relations: BTreeMap::new() };

    let Some(section) = iter.next() else {
        return Ok(spec);
    };
    let mut cur = Cursor::new(section);
    if section.indented || cur.peek() != Some(&Tok::Ident("relations".into())) {
        return Err(cur.error(alloc::format!("expected `relations:`, found {}", cur.found())).into());
    }
    cur.next();
    cur.expect_punct(':')?;
    cur.expect_end()?;

    for line in iter {
        let mut cur = Cursor::new(line);
        if !line.indented {
            return Err(cur.error("relation lines must be indented").into());
        }
        let col = cur.col();
        let name = cur.expect_ident("relation name")?;
        if is_type_keyword(name) || name == "_" {
            return Err(SpecError::Syntax { line: line.number, col, msg: alloc::format!("`{name}` is not a valid relation name") });
        }
        cur.expect_punct('(')?;
        let mut tuple = Vec::new();
        if !cur.eat_punct(')') {
            loop {
                tuple.push(parse_atom(&mut cur)?);
                if cur.eat_punct(')') {
                    break;
                }
                cur.expect_punct(',')?;
            }
        }
        cur.expect_end()?;
        spec.insert(name.to_string(), tuple, line.number, col)?;
    }
    Ok(spec)
}

fn parse_header(line: &lex::Line) -> Result<Signature, SpecError> {
    let mut cur = Cursor::new(line);
    if line.indented || cur.peek() != Some(&Tok::Ident("function".into())) {
        return Err(cur.error(alloc::format!("expected `function`, found {}", cur.found())).into());
    }
    cur.next();
    let col = cur.col();
    let name = cur.expect_ident("function name")?;
    check_name(name, line.number, col)?;
    cur.expect_punct('(')?;
    let mut params: Vec<Param> = Vec::new();
    if !cur.eat_punct(')') {
        loop {
            let col = cur.col();
            let pname = cur.expect_ident("parameter name")?;
            check_name(pname, line.number, col)?;
            if params.iter().any(|p| p.name == pname) {
                return Err(SpecError::DuplicateParameter { line: line.number, col, name: pname.to_string() });
            }
            cur.expect_punct(':')?;
            let ctype = parse_ctype(&mut cur, false)?
                .ok_or_else(|| invalid_type(&cur, "void is only valid as a return type"))?;
            params.push(Param { name: pname.to_string(), ctype, position: params.len() });
            if cur.eat_punct(')') {
                break;
            }
            cur.expect_punct(',')?;
        }
    }
    if cur.next() != Some(&Tok::Arrow) {
        return Err(cur.error("expected `->` before the return type").into());
    }
    let return_type = parse_ctype(&mut cur, true)?;
    cur.expect_end()?;
    Ok(Signature { name: name.to_string(), params, return_type })
}

fn check_name(name: &str, line: usize, col: usize) -> Result<(), SpecError> {
    if is_type_keyword(name) || name == "_" || name == "function" || name == "relations" {
        return Err(SpecError::Syntax { line, col, msg: alloc::format!("`{name}` is reserved") });
    }
    Ok(())
}

fn invalid_type(cur: &Cursor<'_>, msg: &str) -> SpecError {
    SpecError::InvalidType { line: cur.line(), col: cur.col(), msg: msg.to_string() }
}

/// Parses a C type. Returns `Ok(None)` for `void` when `allow_void` is set.
pub(crate) fn parse_ctype(cur: &mut Cursor<'_>, allow_void: bool) -> Result<Option<CType>, SpecError> {
    let col = cur.col();
    let line = cur.line();
    let base = match cur.next() {
        Some(Tok::Ident(s)) if s == "int" => CType::Int,
        Some(Tok::Ident(s)) if s == "float" => CType::Float,
        Some(Tok::Ident(s)) if s == "void" => {
            if !allow_void {
                return Err(SpecError::InvalidType { line, col, msg: "void is only valid as a return type".into() });
            }
            if matches!(cur.peek(), Some(Tok::Punct('*' | '['))) {
                return Err(invalid_type(cur, "void cannot be used as an element type"));
            }
            return Ok(None);
        }
        Some(Tok::Ident(s)) if s == "struct" => {
            cur.expect_punct('{')?;
            let mut fields: Vec<(String, CType)> = Vec::new();
            while !cur.eat_punct('}') {
                let fcol = cur.col();
                let fname = cur.expect_ident("field name")?;
                if fields.iter().any(|(n, _)| n == fname) {
                    return Err(SpecError::InvalidType { line, col: fcol, msg: alloc::format!("duplicate field `{fname}`") });
                }
                cur.expect_punct(':')?;
                let fty = parse_ctype(cur, false)?.expect("void rejected above");
                fields.push((fname.to_string(), fty));
                // The separator after the last field is optional.
                if cur.eat_punct('}') {
                    break;
                }
                cur.expect_punct(';')?;
            }
            CType::Aggregate(fields)
        }
        Some(Tok::Ident(s)) => return Err(SpecError::UnknownType { line, col, name: s.clone() }),
        Some(t) => return Err(SpecError::Syntax { line, col, msg: alloc::format!("expected a type, found {}", t.describe()) }),
        None => return Err(SpecError::Syntax { line, col, msg: "expected a type, found end of line".into() }),
    };
    let mut ty = base;
    loop {
        if cur.eat_punct('*') {
            ty = CType::pointer_to(ty);
        } else if cur.eat_punct('[') {
            let len = match cur.next() {
                Some(Tok::Num(n)) => n.parse::<u32>().ok(),
                _ => None,
            };
            match len {
                Some(0) => return Err(invalid_type(cur, "array length must be positive")),
                Some(len) => ty = CType::Array(Box::new(ty), len),
                None => return Err(invalid_type(cur, "expected an array length")),
            }
            cur.expect_punct(']')?;
        } else {
            break;
        }
    }
    Ok(Some(ty))
}

pub(crate) fn parse_atom(cur: &mut Cursor<'_>) -> Result<Atom, SpecError> {
    let col = cur.col();
    match cur.peek() {
        Some(Tok::Ident(s)) if is_type_keyword(s) => {
            let ty = parse_ctype(cur, false)?.expect("void rejected");
            Ok(Atom::Type(ty))
        }
        Some(Tok::Ident(s)) if s == "_" => Err(SpecError::Syntax { line: cur.line(), col, msg: "`_` is not an atom".into() }),
        Some(Tok::Ident(s)) => {
            cur.next();
            Ok(Atom::Param(s.clone()))
        }
        Some(Tok::Str(s)) => {
            cur.next();
            Ok(Atom::Str(s.clone()))
        }
        Some(Tok::Num(n)) => {
            cur.next();
            Decimal::parse(n)
                .map(Atom::Num)
                .ok_or_else(|| SpecError::Syntax { line: cur.line(), col, msg: alloc::format!("bad number {n}") })
        }
        _ => Err(cur.error(alloc::format!("expected an atom, found {}", cur.found())).into()),
    }
}
