//! Brute-force reference implementations shared by the differential tests. Each one is
//! written from the semantics, not from the optimised code it is compared against.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use relsynth_core::fragments::{Composition, FragmentSet, Node};
use relsynth_core::ir::{Arg, IndexExpr, LoadIndex, ParamKind, Program, Skeleton, Stmt, TestCase};
use relsynth_core::query::{validate_body, Binding, Literal, TemplateKind, Term};
use relsynth_core::sigmodel::{is_pointer, Atom, CType, FunctionSpec};

pub const GEMV: &str = "function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void\n\
                        relations:\n  size(x, n)\n  size(y, m)\n  output(y)\n";

// ---------------------------------------------------------------------------------------
// Queries

const TYPES: [&str; 5] = ["int", "float", "float*", "int*", "float**"];
const VARS: [&str; 4] = ["A", "B", "C", "D"];

fn type_atom(t: &str) -> Atom {
    let mut ty = if t.starts_with("int") { CType::Int } else { CType::Float };
    for _ in 0..t.matches('*').count() {
        ty = CType::pointer_to(ty);
    }
    Atom::Type(ty)
}

/// A random spec with at most eight parameters, as source text.
pub fn random_spec_text<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(1..=8);
    let params: Vec<String> = (0..n).map(|i| format!("p{i}: {}", TYPES[rng.random_range(0..TYPES.len())])).collect();
    let mut text = format!("function f({}) -> void\nrelations:\n", params.join(", "));
    let atom = |rng: &mut R| -> String {
        match rng.random_range(0..10) {
            0 => "4".into(),
            1 => "float*".into(),
            2 => "\"s\"".into(),
            _ => format!("p{}", rng.random_range(0..n)),
        }
    };
    for _ in 0..rng.random_range(0..8) {
        let line = match rng.random_range(0..4) {
            0 | 1 => format!("size({}, {})", atom(rng), atom(rng)),
            2 => format!("output({})", atom(rng)),
            _ => format!("r({}, {}, {})", atom(rng), atom(rng), atom(rng)),
        };
        text.push_str("  ");
        text.push_str(&line);
        text.push('\n');
    }
    text
}

fn random_term<R: Rng>(rng: &mut R, negated: bool, n_params: usize) -> Term {
    match rng.random_range(0..12) {
        0 if negated => Term::Wildcard,
        1 => Term::Const(Atom::param(&format!("p{}", rng.random_range(0..n_params.max(1))))),
        2 => Term::Const(type_atom(TYPES[rng.random_range(0..TYPES.len())])),
        3 => Term::Const(Atom::Num(relsynth_core::sigmodel::Decimal::parse("4").unwrap())),
        _ => Term::var(VARS[rng.random_range(0..VARS.len())]),
    }
}

/// A random rule body of one to six literals that passes `validate_body`. Retries until a
/// valid one comes up.
pub fn random_body<R: Rng>(rng: &mut R, n_params: usize) -> Vec<Literal> {
    const PREDS: [(&str, usize); 7] =
        [("size", 2), ("output", 1), ("r", 3), ("type", 2), ("type", 2), ("pointer", 1), ("missing", 1)];
    loop {
        let len = rng.random_range(1..=6);
        let body: Vec<Literal> = (0..len)
            .map(|_| {
                let negated = rng.random_bool(0.3);
                let (pred, arity) = PREDS[rng.random_range(0..PREDS.len())];
                let args = (0..arity).map(|_| random_term(rng, negated, n_params)).collect();
                Literal::new(negated, pred, args)
            })
            .collect();
        if validate_body(&body, 1).is_ok() {
            return body;
        }
    }
}

fn brute_domain(spec: &FunctionSpec, body: &[Literal]) -> Vec<Atom> {
    let mut out = BTreeSet::new();
    for p in spec.params() {
        out.insert(Atom::Param(p.name.clone()));
        out.insert(Atom::Type(p.ctype.clone()));
    }
    for r in spec.relations() {
        for t in &r.tuples {
            out.extend(t.iter().cloned());
        }
    }
    for l in body {
        for t in &l.args {
            if let Term::Const(a) = t {
                out.insert(a.clone());
            }
        }
    }
    out.into_iter().collect()
}

fn term_matches(t: &Term, a: &Atom, b: &Binding) -> bool {
    match t {
        Term::Wildcard => true,
        Term::Var(v) => &b[v] == a,
        Term::Const(c) => c == a,
    }
}

/// Whether some ground instance of `lit` (wildcards existential) is true.
fn literal_true(lit: &Literal, b: &Binding, spec: &FunctionSpec, domain: &[Atom]) -> bool {
    match lit.pred.as_str() {
        "type" => spec.params().iter().any(|p| {
            term_matches(&lit.args[0], &Atom::Param(p.name.clone()), b)
                && term_matches(&lit.args[1], &Atom::Type(p.ctype.clone()), b)
        }),
        "pointer" => domain
            .iter()
            .any(|a| matches!(a, Atom::Type(t) if is_pointer(t)) && term_matches(&lit.args[0], a, b)),
        name => spec.relations().filter(|r| r.name == name && r.arity == lit.args.len()).any(|r| {
            r.tuples.iter().any(|t| lit.args.iter().zip(t).all(|(term, a)| term_matches(term, a, b)))
        }),
    }
}

/// Every assignment of the positive variables over the domain, filtered by the body.
pub fn brute_solve(body: &[Literal], spec: &FunctionSpec) -> BTreeSet<Binding> {
    let domain = brute_domain(spec, body);
    let vars: Vec<String> = body
        .iter()
        .filter(|l| !l.negated)
        .flat_map(|l| l.args.iter())
        .filter_map(|t| match t {
            Term::Var(v) => Some(v.clone()),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let b: Binding = vars.iter().cloned().zip(idx.iter().map(|&i| domain[i].clone())).collect();
        let params: Vec<&Atom> = b.values().filter(|a| matches!(a, Atom::Param(_))).collect();
        let injective = params.iter().collect::<BTreeSet<_>>().len() == params.len();
        if injective
            && body.iter().all(|l| literal_true(l, &b, spec, &domain) != l.negated)
        {
            out.insert(b);
        }
        // Odometer step.
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------------------
// Compositions

/// All ordered forests of distinct fragments with at most `max` nodes, any node allowed any
/// children.
fn all_forests(n: usize, used: u64, budget: usize) -> Vec<(Vec<Node>, u64, usize)> {
    let mut out = vec![(Vec::new(), used, 0)];
    for first in 0..n {
        if used >> first & 1 == 1 || budget == 0 {
            continue;
        }
        let used1 = used | 1 << first;
        for (children, used2, c) in all_forests(n, used1, budget - 1) {
            for (rest, used3, r) in all_forests(n, used2, budget - 1 - c) {
                let mut f = vec![Node::new(first, children.clone())];
                f.extend(rest);
                out.push((f, used3, 1 + c + r));
            }
        }
    }
    out
}

fn node_ok(n: &Node, set: &FragmentSet, spec: &FunctionSpec, loops: &mut Vec<usize>) -> bool {
    let f = set.get(n.frag);
    let is_loop = matches!(f.kind, TemplateKind::Loop | TemplateKind::ZipLoop);
    let ok = match f.kind {
        TemplateKind::Store => loops.iter().any(|&l| spec.holds("size", &[f.args[0].clone(), set.get(l).args[0].clone()])),
        TemplateKind::AffineAccess => loops.len() == 1 || loops.len() == 2,
        _ => true,
    };
    if !ok || (!is_loop && !n.children.is_empty()) {
        return false;
    }
    loops.push(n.frag);
    let ok = n.children.iter().all(|c| node_ok(c, set, spec, loops));
    loops.pop();
    ok
}

/// Valid compositions up to `max` instances, sorted by size then preorder key.
pub fn brute_compositions(set: &FragmentSet, spec: &FunctionSpec, max: usize) -> Vec<Composition> {
    let mut all: Vec<Composition> = all_forests(set.len(), 0, max)
        .into_iter()
        .filter(|(f, _, _)| !f.is_empty())
        .map(|(f, _, _)| Composition::new(f))
        .filter(|c| c.roots.iter().all(|r| node_ok(r, set, spec, &mut Vec::new())))
        .collect();
    all.sort_by_key(|c| (c.size(), c.key()));
    all.dedup();
    all
}

// ---------------------------------------------------------------------------------------
// Interpreter

/// First out-of-range access of `p` on `case`, found by walking the loop nest directly:
/// `(buffer name, index, length)`.
pub fn first_overrun(p: &Program, case: &TestCase) -> Option<(String, i64, usize)> {
    let sk = &p.skeleton;
    let ints: Vec<i64> = case.args.iter().map(|a| if let Arg::Int(v) = a { *v } else { 0 }).collect();
    let lens: Vec<usize> = case.args.iter().map(|a| if let Arg::Buffer(b) = a { b.len() } else { 0 }).collect();
    let mut iv = vec![0i64; sk.loops.len()];
    walk(sk, p, &sk.body, &ints, &lens, &mut iv).err()
}

fn walk(
    sk: &Skeleton,
    p: &Program,
    body: &[Stmt],
    ints: &[i64],
    lens: &[usize],
    iv: &mut Vec<i64>,
) -> Result<(), (String, i64, usize)> {
    let check = |buf: usize, i: i64| {
        if i < 0 || i >= lens[buf] as i64 {
            Err((sk.params[buf].name.clone(), i, lens[buf]))
        } else {
            Ok(())
        }
    };
    for s in body {
        match s {
            Stmt::Loop { id, loads, body } => {
                for i in 0..ints[sk.loops[*id].bound].max(0) {
                    iv[*id] = i;
                    for &ld in loads {
                        load_index(sk, p, ld, ints, iv).map_or(Ok(()), |i| check(sk.loads[ld].buffer, i))?;
                    }
                    walk(sk, p, body, ints, lens, iv)?;
                }
            }
            Stmt::Load(ld) => load_index(sk, p, *ld, ints, iv).map_or(Ok(()), |i| check(sk.loads[*ld].buffer, i))?,
            Stmt::Store { buffer, loop_id, .. } => check(*buffer, iv[*loop_id])?,
        }
    }
    Ok(())
}

fn load_index(sk: &Skeleton, p: &Program, ld: usize, ints: &[i64], iv: &[i64]) -> Option<i64> {
    let e = match sk.loads[ld].index {
        LoadIndex::Fixed(e) => e,
        LoadIndex::Choice(slot) => sk.affine[slot].candidates[p.filling.affine[slot] as usize],
    };
    Some(match e {
        IndexExpr::Var(l) => iv[l],
        IndexExpr::Linear { major, stride, minor } => iv[major].saturating_mul(ints[stride]).saturating_add(iv[minor]),
    })
}

/// Buffers some store statement writes.
pub fn stored_buffers(sk: &Skeleton) -> BTreeSet<usize> {
    fn go(body: &[Stmt], out: &mut BTreeSet<usize>) {
        for s in body {
            match s {
                Stmt::Loop { body, .. } => go(body, out),
                Stmt::Store { buffer, .. } => {
                    out.insert(*buffer);
                }
                Stmt::Load(_) => {}
            }
        }
    }
    let mut out = BTreeSet::new();
    go(&sk.body, &mut out);
    out
}

/// Arguments for `sk` with small, unrelated ints and buffer lengths, so that overruns are
/// common.
pub fn random_case<R: Rng>(sk: &Skeleton, rng: &mut R) -> TestCase {
    let args = sk
        .params
        .iter()
        .map(|p| match p.kind {
            ParamKind::Int => Arg::Int(rng.random_range(-1..=5)),
            ParamKind::Float => Arg::Float(rng.random_range(-4.0..4.0)),
            ParamKind::Buffer => {
                let n = rng.random_range(0..=7);
                Arg::Buffer((0..n).map(|_| rng.random_range(-4.0..4.0)).collect())
            }
        })
        .collect();
    TestCase { args }
}

/// `name(p1,p2,...)` from a full head instance line such as `loop(m, float*, y)`.
pub fn short_head(line: &str) -> String {
    let (name, rest) = line.split_once('(').unwrap();
    let args: Vec<&str> =
        rest.trim_end_matches(')').split(',').map(str::trim).filter(|a| !a.contains('*') && !a.starts_with("int") && !a.starts_with("float")).collect();
    format!("{name}({})", args.join(","))
}


// ---------------------------------------------------------------------------------------
// Fuzzing

pub const FUZZ_SPECS: [&str; 4] = [
    GEMV,
    "function dot(n: int, x: float*, y: float*) -> float\nrelations:\n  size(x, n)\n  size(y, n)\n",
    "function axpy(n: int, alpha: float, x: float*, y: float*) -> void\nrelations:\n  size(x, n)\n  size(y, n)\n  output(y)\n",
    "function scal(n: int, alpha: float, x: float*) -> void\nrelations:\n  size(x, n)\n  output(x)\n",
];

/// One fuzzed run checked against the walker: an overrun must trap with the walker's
/// first out-of-range access, and a clean run must leave unstored buffers bit-identical.
/// Returns whether the run trapped.
pub fn fuzz_one<R: Rng>(p: &Program, rng: &mut R) -> Result<bool, String> {
    use relsynth_core::ir::{interpret, RunResult, Trap};
    let case = random_case(&p.skeleton, rng);
    let stored = stored_buffers(&p.skeleton);
    match (interpret(p, &case), first_overrun(p, &case)) {
        (RunResult::Trap(Trap::OutOfBounds { buffer, index, len }), Some(expect)) => {
            if (buffer.clone(), index, len) != expect {
                return Err(format!("trap at {buffer}[{index}] (len {len}), walker says {expect:?} on {case}"));
            }
            Ok(true)
        }
        (RunResult::Ok(out), None) => {
            for (pos, arg) in case.args.iter().enumerate() {
                let Arg::Buffer(input) = arg else { continue };
                let after = out.buffer(pos).ok_or_else(|| format!("buffer {pos} missing on {case}"))?;
                if after.len() != input.len() {
                    return Err(format!("buffer {pos} resized on {case}"));
                }
                if !stored.contains(&pos) && input.iter().zip(after).any(|(a, b)| a.to_bits() != b.to_bits()) {
                    return Err(format!("non-output buffer {pos} changed on {case}"));
                }
            }
            Ok(false)
        }
        (got, expect) => Err(format!("interpreter gave {got:?}, walker expected {expect:?} on {case}")),
    }
}

/// `runs` fuzzed runs over random fillings of every composition (up to three fragments)
/// of the fuzz specs. Returns the number of traps.
pub fn fuzz(runs: usize, seed: u64) -> Result<usize, String> {
    use rand::SeedableRng;
    use relsynth_core::fragments::{enumerate_compositions, instantiate_fragments, lower};
    use relsynth_core::ir::{fill_holes, FillMode};
    use relsynth_core::query::RuleLibrary;
    use std::sync::Arc;

    let lib = RuleLibrary::default_library();
    let mut programs = Vec::new();
    for text in FUZZ_SPECS {
        let spec = FunctionSpec::parse(text).unwrap();
        let set = instantiate_fragments(&lib, &spec);
        for c in enumerate_compositions(&set, 3) {
            let sk = Arc::new(lower(&c, &set, &spec));
            programs.push(fill_holes(sk, 2, FillMode::Random, Some(u64::MAX), seed ^ programs.len() as u64));
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut trapped = 0;
    for _ in 0..runs {
        let k = rng.random_range(0..programs.len());
        let p = programs[k].next().ok_or("empty filling space")?;
        trapped += fuzz_one(&p, &mut rng)? as usize;
    }
    Ok(trapped)
}
