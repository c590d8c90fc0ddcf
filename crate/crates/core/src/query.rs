//! Rule language for fragment instantiation.
//!
//! A rule is a conjunction of matching expressions over the relations of a [`FunctionSpec`],
//! plus the two signature builtins `type(A, T)` and `pointer(T)`, that instantiates a fragment
//! template when satisfied:
//!
//! ```text
//! rule loop(N, T, X):
//!   size(X, N), type(N, int), type(X, T), pointer(T)
//! ```
//!
//! Negative literals (`not r(...)`) use negation as failure and are checked once every
//! positive literal has been matched. Distinct variables never bind the same parameter.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::lex::{self, Cursor, LexError, Tok};
use crate::sigmodel::{is_pointer, is_type_keyword, parse_atom, Atom, CType, FunctionSpec, SpecError};

/// The rule library shipped with the synthesizer.
pub const DEFAULT_RULES: &str = include_str!("../rules/default.rules");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateKind {
    Loop,
    ZipLoop,
    Store,
    AffineAccess,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 4] =
        [TemplateKind::Loop, TemplateKind::ZipLoop, TemplateKind::Store, TemplateKind::AffineAccess];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::Loop => "loop",
            TemplateKind::ZipLoop => "zip_loop",
            TemplateKind::Store => "store",
            TemplateKind::AffineAccess => "affine_access",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            TemplateKind::Loop => 3,
            TemplateKind::ZipLoop => 5,
            TemplateKind::Store | TemplateKind::AffineAccess => 2,
        }
    }

    pub fn from_name(name: &str) -> Option<TemplateKind> {
        TemplateKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_loop(self) -> bool {
        matches!(self, TemplateKind::Loop | TemplateKind::ZipLoop)
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Wildcard,
    Const(Atom),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Wildcard => f.write_str("_"),
            Term::Const(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub pred: String,
    pub args: Vec<Term>,
}

impl Literal {
    pub fn new(negated: bool, pred: &str, args: Vec<Term>) -> Literal {
        Literal { negated, pred: pred.to_string(), args }
    }

    pub fn is_builtin(&self) -> bool {
        builtin_arity(&self.pred).is_some()
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

fn builtin_arity(pred: &str) -> Option<usize> {
    match pred {
        "type" => Some(2),
        "pointer" => Some(1),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Head {
    pub kind: TemplateKind,
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub head: Head,
    pub body: Vec<Literal>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}(", self.head.kind)?;
        for (i, v) in self.head.vars.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(v)?;
        }
        f.write_str("):\n  ")?;
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str("\n")
    }
}

/// A fragment head with its variables replaced by atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeadInstance {
    pub kind: TemplateKind,
    pub args: Vec<Atom>,
}

impl fmt::Display for HeadInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unknown fragment head kind `{name}`")]
    UnknownHeadKind { line: usize, col: usize, name: String },
    #[error("line {line}: `{kind}` takes {expected} arguments, found {found}")]
    HeadArity { line: usize, kind: TemplateKind, expected: usize, found: usize },
    #[error("line {line}: unbound head variable {var}")]
    UnboundHeadVariable { line: usize, var: String },
    #[error("line {line}: wildcard in positive literal `{pred}`")]
    WildcardInPositive { line: usize, pred: String },
    #[error("line {line}: negative match requires positive conjunct")]
    NegationWithoutPositive { line: usize },
    #[error("line {line}: variable {var} occurs only in negative literals")]
    UnsafeVariable { line: usize, var: String },
    #[error("line {line}: builtin `{pred}` takes {expected} arguments, found {found}")]
    BuiltinArity { line: usize, pred: String, expected: usize, found: usize },
    #[error("line {line}: empty rule body")]
    EmptyBody { line: usize },
}

impl From<LexError> for RuleError {
    fn from(e: LexError) -> Self {
        RuleError::Syntax { line: e.line, col: e.col, msg: e.msg }
    }
}

impl From<SpecError> for RuleError {
    fn from(e: SpecError) -> Self {
        let (line, col, msg) = match e {
            SpecError::Syntax { line, col, msg } => (line, col, msg),
            SpecError::UnknownType { line, col, name } => (line, col, alloc::format!("unknown type `{name}`")),
            SpecError::InvalidType { line, col, msg } => (line, col, msg),
            other => (0, 0, other.to_string()),
        };
        RuleError::Syntax { line, col, msg }
    }
}

/// Checks that a conjunction can be evaluated: builtin arities, no wildcards in positive
/// literals, at least one positive literal, and every variable bound positively.
pub fn validate_body(body: &[Literal], line: usize) -> Result<(), RuleError> {
    if body.is_empty() {
        return Err(RuleError::EmptyBody { line });
    }
    for lit in body {
        if let Some(expected) = builtin_arity(&lit.pred) {
            if lit.args.len() != expected {
                return Err(RuleError::BuiltinArity { line, pred: lit.pred.clone(), expected, found: lit.args.len() });
            }
        }
        if !lit.negated && lit.args.contains(&Term::Wildcard) {
            return Err(RuleError::WildcardInPositive { line, pred: lit.pred.clone() });
        }
    }
    if body.iter().all(|l| l.negated) {
        return Err(RuleError::NegationWithoutPositive { line });
    }
    let positive: BTreeSet<&str> = body.iter().filter(|l| !l.negated).flat_map(Literal::vars).collect();
    for lit in body.iter().filter(|l| l.negated) {
        if let Some(v) = lit.vars().find(|v| !positive.contains(v)) {
            return Err(RuleError::UnsafeVariable { line, var: v.to_string() });
        }
    }
    Ok(())
}

impl Rule {
    pub fn new(kind: TemplateKind, vars: &[&str], body: Vec<Literal>) -> Result<Rule, RuleError> {
        let rule = Rule {
            name: kind.name().to_string(),
            head: Head { kind, vars: vars.iter().map(|v| v.to_string()).collect() },
            body,
        };
        rule.validate(0)?;
        Ok(rule)
    }

    fn validate(&self, line: usize) -> Result<(), RuleError> {
        if self.head.vars.len() != self.head.kind.arity() {
            return Err(RuleError::HeadArity {
                line,
                kind: self.head.kind,
                expected: self.head.kind.arity(),
                found: self.head.vars.len(),
            });
        }
        if self.body.is_empty() {
            return Err(RuleError::EmptyBody { line });
        }
        if self.body.iter().all(|l| l.negated) {
            return Err(RuleError::NegationWithoutPositive { line });
        }
        let positive: BTreeSet<&str> = self.body.iter().filter(|l| !l.negated).flat_map(Literal::vars).collect();
        if let Some(v) = self.head.vars.iter().find(|v| !positive.contains(v.as_str())) {
            return Err(RuleError::UnboundHeadVariable { line, var: v.clone() });
        }
        validate_body(&self.body, line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleLibrary {
    rules: Vec<Rule>,
}

impl RuleLibrary {
    pub fn new(rules: Vec<Rule>) -> RuleLibrary {
        RuleLibrary { rules }
    }

    pub fn parse(text: &str) -> Result<RuleLibrary, RuleError> {
        parse_rules(text)
    }

    pub fn default_library() -> RuleLibrary {
        parse_rules(DEFAULT_RULES).expect("bundled rules parse")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl fmt::Display for RuleLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.rules.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{r}")?;
        }
        Ok(())
    }
}

pub fn parse_rules(text: &str) -> Result<RuleLibrary, RuleError> {
    let lines = lex::lex(text)?;
    let mut rules = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let header = &lines[i];
        let mut cur = Cursor::new(header);
        if header.indented || cur.peek() != Some(&Tok::Ident("rule".into())) {
            return Err(cur.error(alloc::format!("expected `rule`, found {}", cur.found())).into());
        }
        cur.next();
        let col = cur.col();
        let kind_name = cur.expect_ident("fragment head kind")?;
        let kind = TemplateKind::from_name(kind_name).ok_or_else(|| RuleError::UnknownHeadKind {
            line: header.number,
            col,
            name: kind_name.to_string(),
        })?;
        cur.expect_punct('(')?;
        let mut vars = Vec::new();
        if !cur.eat_punct(')') {
            loop {
                let vcol = cur.col();
                let v = cur.expect_ident("head variable")?;
                if !is_var_name(v) {
                    return Err(RuleError::Syntax {
                        line: header.number,
                        col: vcol,
                        msg: alloc::format!("head arguments must be variables, found `{v}`"),
                    });
                }
                vars.push(v.to_string());
                if cur.eat_punct(')') {
                    break;
                }
                cur.expect_punct(',')?;
            }
        }
        cur.expect_punct(':')?;
        cur.expect_end()?;
        i += 1;

        let mut body = Vec::new();
        let mut continues = true;
        while i < lines.len() && lines[i].indented {
            let mut cur = Cursor::new(&lines[i]);
            if !continues {
                return Err(cur.error("expected `,` at the end of the previous line").into());
            }
            loop {
                body.push(parse_literal(&mut cur)?);
                if cur.at_end() {
                    continues = false;
                    break;
                }
                cur.expect_punct(',')?;
                if cur.at_end() {
                    continues = true;
                    break;
                }
            }
            i += 1;
        }
        if body.is_empty() {
            return Err(RuleError::EmptyBody { line: header.number });
        }
        if continues {
            let last = &lines[i - 1];
            return Err(RuleError::Syntax { line: last.number, col: last.end_col, msg: "dangling `,`".into() });
        }
        let rule = Rule { name: kind.name().to_string(), head: Head { kind, vars }, body };
        rule.validate(header.number)?;
        rules.push(rule);
    }
    Ok(RuleLibrary { rules })
}

fn is_var_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

fn parse_literal(cur: &mut Cursor<'_>) -> Result<Literal, RuleError> {
    let negated = if cur.peek() == Some(&Tok::Ident("not".into())) && matches!(cur.peek_at(1), Some(Tok::Ident(_))) {
        cur.next();
        true
    } else {
        false
    };
    let col = cur.col();
    let pred = cur.expect_ident("predicate")?;
    if is_type_keyword(pred) && pred != "type" || is_var_name(pred) || pred == "_" {
        return Err(RuleError::Syntax { line: cur.line(), col, msg: alloc::format!("`{pred}` is not a predicate name") });
    }
    cur.expect_punct('(')?;
    let mut args = Vec::new();
    if !cur.eat_punct(')') {
        loop {
            args.push(parse_term(cur)?);
            if cur.eat_punct(')') {
                break;
            }
            cur.expect_punct(',')?;
        }
    }
    Ok(Literal { negated, pred: pred.to_string(), args })
}

fn parse_term(cur: &mut Cursor<'_>) -> Result<Term, RuleError> {
    match cur.peek() {
        Some(Tok::Ident(s)) if s == "_" => {
            cur.next();
            Ok(Term::Wildcard)
        }
        Some(Tok::Ident(s)) if is_var_name(s) => {
            cur.next();
            Ok(Term::Var(s.clone()))
        }
        _ => Ok(Term::Const(parse_atom(cur)?)),
    }
}

/// A total assignment of a body's variables to atoms.
pub type Binding = BTreeMap<String, Atom>;

/// The atoms variables range over: parameters, their types, every atom in a relation tuple,
/// and every constant in the body.
pub fn domain(spec: &FunctionSpec, body: &[Literal]) -> BTreeSet<Atom> {
    let mut out = BTreeSet::new();
    for p in spec.params() {
        out.insert(Atom::Param(p.name.clone()));
        out.insert(Atom::Type(p.ctype.clone()));
    }
    for rel in spec.relations() {
        for t in &rel.tuples {
            out.extend(t.iter().cloned());
        }
    }
    for lit in body {
        for t in &lit.args {
            if let Term::Const(a) = t {
                out.insert(a.clone());
            }
        }
    }
    out
}

struct Solver<'a> {
    spec: &'a FunctionSpec,
    domain: BTreeSet<Atom>,
    positives: Vec<&'a Literal>,
    negatives: Vec<&'a Literal>,
}

enum Resolved {
    Known(Atom),
    /// An unbound variable or a wildcard.
    Free,
}

fn resolve(term: &Term, b: &Binding) -> Resolved {
    match term {
        Term::Const(a) => Resolved::Known(a.clone()),
        Term::Wildcard => Resolved::Free,
        Term::Var(v) => match b.get(v) {
            Some(a) => Resolved::Known(a.clone()),
            None => Resolved::Free,
        },
    }
}

/// Binds `term` to `atom` if consistent. Returns whether it succeeded and which variable (if
/// any) was newly bound, so the caller can undo it.
fn unify(term: &Term, atom: &Atom, b: &mut Binding, bound: &mut Vec<String>) -> bool {
    match term {
        Term::Wildcard => true,
        Term::Const(c) => c == atom,
        Term::Var(v) => match b.get(v) {
            Some(existing) => existing == atom,
            None => {
                if matches!(atom, Atom::Param(_)) && b.values().any(|x| x == atom) {
                    return false;
                }
                b.insert(v.clone(), atom.clone());
                bound.push(v.clone());
                true
            }
        },
    }
}

fn undo(b: &mut Binding, bound: &mut Vec<String>) {
    for v in bound.drain(..) {
        b.remove(&v);
    }
}

impl<'a> Solver<'a> {
    /// Calls `k` for every extension of `b` satisfying `lit` read positively. `k` returns
    /// false to stop the enumeration; the return value reports whether it was stopped.
    fn each_match(&self, lit: &Literal, b: &mut Binding, k: &mut dyn FnMut(&mut Binding) -> bool) -> bool {
        let mut bound = Vec::new();
        let mut attempt = |b: &mut Binding, pairs: &[(&Term, &Atom)], k: &mut dyn FnMut(&mut Binding) -> bool| -> bool {
            let mut ok = true;
            for (t, a) in pairs {
                if !unify(t, a, b, &mut bound) {
                    ok = false;
                    break;
                }
            }
            let keep_going = if ok { k(b) } else { true };
            undo(b, &mut bound);
            keep_going
        };
        match lit.pred.as_str() {
            "type" => {
                let (target, ty) = (&lit.args[0], &lit.args[1]);
                match resolve(target, b) {
                    Resolved::Known(Atom::Param(p)) => {
                        let Some(param) = self.spec.param(&p) else { return true };
                        let t = Atom::Type(param.ctype.clone());
                        attempt(b, &[(ty, &t)], k)
                    }
                    Resolved::Known(_) => true,
                    Resolved::Free => {
                        for param in self.spec.params() {
                            let p = Atom::Param(param.name.clone());
                            let t = Atom::Type(param.ctype.clone());
                            if !attempt(b, &[(target, &p), (ty, &t)], k) {
                                return false;
                            }
                        }
                        true
                    }
                }
            }
            "pointer" => match resolve(&lit.args[0], b) {
                Resolved::Known(Atom::Type(t)) if is_pointer(&t) => k(b),
                Resolved::Known(_) => true,
                Resolved::Free => {
                    for a in &self.domain {
                        if matches!(a, Atom::Type(t) if is_pointer(t)) && !attempt(b, &[(&lit.args[0], a)], k) {
                            return false;
                        }
                    }
                    true
                }
            },
            name => {
                let Some(rel) = self.spec.relation(name) else { return true };
                if rel.arity != lit.args.len() {
                    return true;
                }
                for tuple in &rel.tuples {
                    let pairs: Vec<(&Term, &Atom)> = lit.args.iter().zip(tuple.iter()).collect();
                    if !attempt(b, &pairs, k) {
                        return false;
                    }
                }
                true
            }
        }
    }

    fn extend(&self, idx: usize, b: &mut Binding, out: &mut BTreeSet<Binding>) {
        if idx == self.positives.len() {
            let blocked = self.negatives.iter().any(|lit| {
                let mut found = false;
                self.each_match(lit, b, &mut |_| {
                    found = true;
                    false
                });
                found
            });
            if !blocked {
                out.insert(b.clone());
            }
            return;
        }
        let lit = self.positives[idx];
        self.each_match(lit, b, &mut |b| {
            self.extend(idx + 1, b, out);
            true
        });
    }
}

/// All bindings of the body's variables that satisfy it against `spec`.
pub fn solve(body: &[Literal], spec: &FunctionSpec) -> BTreeSet<Binding> {
    let solver = Solver {
        spec,
        domain: domain(spec, body),
        positives: body.iter().filter(|l| !l.negated).collect(),
        negatives: body.iter().filter(|l| l.negated).collect(),
    };
    let mut out = BTreeSet::new();
    solver.extend(0, &mut Binding::new(), &mut out);
    out
}

pub fn match_rule(rule: &Rule, spec: &FunctionSpec) -> BTreeSet<HeadInstance> {
    solve(&rule.body, spec)
        .into_iter()
        .map(|b| HeadInstance {
            kind: rule.head.kind,
            args: rule.head.vars.iter().map(|v| b[v].clone()).collect(),
        })
        .collect()
}

/// Matches of every rule in the library, in canonical order.
pub fn match_library(lib: &RuleLibrary, spec: &FunctionSpec) -> BTreeSet<HeadInstance> {
    lib.rules().iter().flat_map(|r| match_rule(r, spec)).collect()
}

/// Shorthand used by tests and the default rules: the type literal `float*`.
pub fn float_ptr() -> Atom {
    Atom::Type(CType::pointer_to(CType::Float))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmodel::parse_spec;
    use alloc::vec;

    const GEMV: &str = "function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void\n\
                        relations:\n  size(x, n)\n  size(y, m)\n  output(y)\n";
    const DOT: &str = "function dot(n: int, x: float*, y: float*) -> float\nrelations:\n  size(x, n)\n  size(y, n)\n";

    fn rule(kind: TemplateKind) -> Rule {
        RuleLibrary::default_library().rules().iter().find(|r| r.head.kind == kind).unwrap().clone()
    }

    fn binding(pairs: &[(&str, Atom)]) -> Binding {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn default_library_has_four_rules() {
        let lib = RuleLibrary::default_library();
        assert_eq!(lib.len(), 4);
        let kinds: Vec<_> = lib.rules().iter().map(|r| r.head.kind).collect();
        assert_eq!(kinds, TemplateKind::ALL);
        assert_eq!(parse_rules(&lib.to_string()).unwrap(), lib);
    }

    #[test]
    fn loop_rule_on_gemv() {
        let spec = parse_spec(GEMV).unwrap();
        let got = solve(&rule(TemplateKind::Loop).body, &spec);
        let expected: BTreeSet<_> = [
            binding(&[("X", Atom::param("x")), ("N", Atom::param("n")), ("T", float_ptr())]),
            binding(&[("X", Atom::param("y")), ("N", Atom::param("m")), ("T", float_ptr())]),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn zip_loop_does_not_match_gemv() {
        let spec = parse_spec(GEMV).unwrap();
        assert!(solve(&rule(TemplateKind::ZipLoop).body, &spec).is_empty());
        assert!(match_rule(&rule(TemplateKind::ZipLoop), &spec).is_empty());
    }

    #[test]
    fn affine_and_store_on_gemv() {
        let spec = parse_spec(GEMV).unwrap();
        let affine = solve(&rule(TemplateKind::AffineAccess).body, &spec);
        assert_eq!(affine.into_iter().collect::<Vec<_>>(), vec![binding(&[("X", Atom::param("a")), ("T", float_ptr())])]);
        let store = solve(&rule(TemplateKind::Store).body, &spec);
        assert_eq!(store.into_iter().collect::<Vec<_>>(), vec![binding(&[("X", Atom::param("y")), ("T", float_ptr())])]);
    }

    #[test]
    fn match_rule_instances() {
        let spec = parse_spec(GEMV).unwrap();
        let loops: Vec<String> = match_rule(&rule(TemplateKind::Loop), &spec).iter().map(|h| h.to_string()).collect();
        assert_eq!(loops, ["loop(m, float*, y)", "loop(n, float*, x)"]);
        let dot = parse_spec(DOT).unwrap();
        let zips: Vec<String> = match_rule(&rule(TemplateKind::ZipLoop), &dot).iter().map(|h| h.to_string()).collect();
        assert_eq!(zips, ["zip_loop(n, float*, x, float*, y)", "zip_loop(n, float*, y, float*, x)"]);
    }

    #[test]
    fn empty_relations_yield_nothing() {
        let spec = parse_spec("function f(n: int, x: float*) -> void").unwrap();
        for r in RuleLibrary::default_library().rules() {
            if r.head.kind != TemplateKind::AffineAccess {
                assert!(solve(&r.body, &spec).is_empty(), "{r}");
            }
        }
        // Builtin-only bodies still see the signature.
        assert_eq!(solve(&rule(TemplateKind::AffineAccess).body, &spec).len(), 1);
    }

    #[test]
    fn unknown_relations() {
        let spec = parse_spec(GEMV).unwrap();
        let body = vec![
            Literal::new(false, "size", vec![Term::var("X"), Term::var("N")]),
            Literal::new(true, "missing", vec![Term::var("X")]),
        ];
        assert_eq!(solve(&body, &spec).len(), 2);
        let body = vec![Literal::new(false, "missing", vec![Term::var("X")])];
        assert!(solve(&body, &spec).is_empty());
    }

    #[test]
    fn negative_with_only_wildcards() {
        let spec = parse_spec(GEMV).unwrap();
        let body = vec![
            Literal::new(false, "output", vec![Term::var("X")]),
            Literal::new(true, "size", vec![Term::Wildcard, Term::Wildcard]),
        ];
        assert!(solve(&body, &spec).is_empty());
    }

    #[test]
    fn parse_errors() {
        let err = parse_rules("rule loop(N, T, X):\n  size(Y, N), type(N, int), type(Y, T)\n").unwrap_err();
        assert!(err.to_string().contains("unbound head variable X"), "{err}");
        let err = parse_rules("rule store(X, T):\n  not size(X, _)\n").unwrap_err();
        assert!(err.to_string().contains("negative match requires positive conjunct"), "{err}");
        let err = parse_rules("rule gather(X):\n  size(X, _)\n").unwrap_err();
        assert!(matches!(err, RuleError::UnknownHeadKind { ref name, .. } if name == "gather"));
        let err = parse_rules("rule store(X, T):\n  output(X), size(X, _), type(X, T)\n").unwrap_err();
        assert!(matches!(err, RuleError::WildcardInPositive { .. }), "{err}");
        let err = parse_rules("rule store(X, T):\n  output(X), type(X, T), not size(X, N)\n").unwrap_err();
        assert!(matches!(err, RuleError::UnsafeVariable { ref var, .. } if var == "N"), "{err}");
        let err = parse_rules("rule store(X):\n  output(X)\n").unwrap_err();
        assert!(matches!(err, RuleError::HeadArity { expected: 2, found: 1, .. }));
        assert!(parse_rules("rule store(X, T):\n  output(X),\n").is_err());
        assert!(parse_rules("rule store(X, T):\n  output(X)\n  type(X, T)\n").is_err());
        assert!(parse_rules("rule store(X, T):\n  output(X), pointer(T, T), type(X, T)\n").is_err());
        assert!(parse_rules("rule store(x, T):\n  output(x), type(x, T)\n").is_err());
    }

    #[test]
    fn constants_and_literal_atoms() {
        let text = "function f(n: int, x: float*) -> void\nrelations:\n  size(x, n)\n  tag(x, \"hot\", 2)\n";
        let spec = parse_spec(text).unwrap();
        let lib = parse_rules("rule store(X, T):\n  tag(X, \"hot\", 2), type(X, T)\n").unwrap();
        assert_eq!(match_rule(&lib.rules()[0], &spec).len(), 1);
        let lib = parse_rules("rule store(X, T):\n  tag(X, \"cold\", 2), type(X, T)\n").unwrap();
        assert!(match_rule(&lib.rules()[0], &spec).is_empty());
        let lib = parse_rules("rule store(X, T):\n  size(X, n), type(X, T), not tag(X, _, 2.0)\n").unwrap();
        assert!(match_rule(&lib.rules()[0], &spec).is_empty());
    }

    #[test]
    fn injectivity_is_parameter_only() {
        let spec = parse_spec(DOT).unwrap();
        // T and S may coincide, X and Y may not.
        let got = solve(&rule(TemplateKind::ZipLoop).body, &spec);
        assert_eq!(got.len(), 2);
        for b in &got {
            assert_ne!(b["X"], b["Y"]);
            assert_eq!(b["T"], b["S"]);
        }
    }
}
