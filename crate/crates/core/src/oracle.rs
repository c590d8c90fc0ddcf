//! Reference functions, typed input generation and candidate-versus-reference testing.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{interpret, Arg, Outputs, ParamKind, Program, RunResult, TestCase, Trap};
use crate::sigmodel::{Atom, CType, FunctionSpec, Ineligible};

/// A black-box reference implementation.
#[derive(Debug, Clone, Copy)]
pub struct OracleFn {
    pub name: &'static str,
    /// Parameter kinds in order.
    pub shape: &'static [ParamKind],
    pub returns: bool,
    eval: fn(&TestCase) -> Outputs,
}

impl OracleFn {
    pub fn eval(&self, case: &TestCase) -> Outputs {
        (self.eval)(case)
    }

    pub fn check_compatible(&self, spec: &FunctionSpec) -> Result<(), Incompatible> {
        let kinds: Vec<Option<ParamKind>> = spec
            .params()
            .iter()
            .map(|p| match &p.ctype {
                CType::Int => Some(ParamKind::Int),
                CType::Float => Some(ParamKind::Float),
                CType::Pointer(t) if **t == CType::Float => Some(ParamKind::Buffer),
                _ => None,
            })
            .collect();
        let same = kinds.len() == self.shape.len() && kinds.iter().zip(self.shape).all(|(k, s)| *k == Some(*s));
        let ret_ok = spec.signature.return_type.is_some() == self.returns;
        if same && ret_ok {
            Ok(())
        } else {
            Err(Incompatible { oracle: self.name, spec: alloc::format!("{}", spec.signature) })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown oracle `{0}`")]
pub struct UnknownOracle(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("oracle `{oracle}` does not fit `{spec}`")]
pub struct Incompatible {
    pub oracle: &'static str,
    pub spec: String,
}

use ParamKind::{Buffer as B, Float as F, Int as I};

/// Loop count: the int parameter at `p`, clamped to the lengths of the buffers the
/// loop walks so that oracles stay total on inputs that ignore their size relations.
fn len(case: &TestCase, p: usize, bufs: &[usize]) -> usize {
    bufs.iter().fold(case.int(p).max(0) as usize, |n, &b| n.min(case.buffer(b).len()))
}

fn dot(c: &TestCase) -> Outputs {
    let (x, y) = (c.buffer(1), c.buffer(2));
    let mut s = 0.0;
    for i in 0..len(c, 0, &[1, 2]) {
        s += x[i] * y[i];
    }
    Outputs { ret: Some(s), ..c.outputs() }
}

fn axpy(c: &TestCase) -> Outputs {
    let mut out = c.outputs();
    let (alpha, x) = (c.float(1), c.buffer(2));
    let n = len(c, 0, &[2, 3]);
    let y = &mut out.buffers[1].1;
    for i in 0..n {
        y[i] = alpha * x[i] + y[i];
    }
    out
}

fn scal(c: &TestCase) -> Outputs {
    let mut out = c.outputs();
    let alpha = c.float(1);
    let n = len(c, 0, &[2]);
    let x = &mut out.buffers[0].1;
    for v in &mut x[..n] {
        *v *= alpha;
    }
    out
}

fn vadd(c: &TestCase) -> Outputs {
    let mut out = c.outputs();
    let (x, y) = (c.buffer(1), c.buffer(2));
    let n = len(c, 0, &[1, 2, 3]);
    let z = &mut out.buffers[2].1;
    for i in 0..n {
        z[i] = x[i] + y[i];
    }
    out
}

fn asum(c: &TestCase) -> Outputs {
    let x = c.buffer(1);
    let mut s = 0.0;
    for v in &x[..len(c, 0, &[1])] {
        s += v.abs();
    }
    Outputs { ret: Some(s), ..c.outputs() }
}

fn copy(c: &TestCase) -> Outputs {
    let mut out = c.outputs();
    let n = len(c, 0, &[1, 2]);
    out.buffers[1].1[..n].copy_from_slice(&c.buffer(1)[..n]);
    out
}

/// y <- alpha * A x + beta * y, with A row-major m x n. Rows that do not fit in `a` or
/// `y` are left alone.
fn gemv(c: &TestCase) -> Outputs {
    let mut out = c.outputs();
    let n = c.int(1).max(0) as usize;
    let (alpha, a, x, beta) = (c.float(2), c.buffer(3), c.buffer(4), c.float(5));
    let rows = if n == 0 { usize::MAX } else { a.len() / n };
    let m = len(c, 0, &[6]).min(rows);
    let cols = n.min(x.len());
    let y = &mut out.buffers[2].1;
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..cols {
            acc += a[i * n + j] * x[j];
        }
        y[i] = alpha * acc + beta * y[i];
    }
    out
}

static REGISTRY: [OracleFn; 7] = [
    OracleFn { name: "asum", shape: &[I, B], returns: true, eval: asum },
    OracleFn { name: "axpy", shape: &[I, F, B, B], returns: false, eval: axpy },
    OracleFn { name: "copy", shape: &[I, B, B], returns: false, eval: copy },
    OracleFn { name: "dot", shape: &[I, B, B], returns: true, eval: dot },
    OracleFn { name: "gemv", shape: &[I, I, F, B, B, F, B], returns: false, eval: gemv },
    OracleFn { name: "scal", shape: &[I, F, B], returns: false, eval: scal },
    OracleFn { name: "vadd", shape: &[I, B, B, B], returns: false, eval: vadd },
];

/// Built-in oracles, sorted by name.
pub fn registry() -> &'static [OracleFn] {
    &REGISTRY
}

pub fn lookup_oracle(name: &str) -> Result<&'static OracleFn, UnknownOracle> {
    REGISTRY.iter().find(|o| o.name == name).ok_or_else(|| UnknownOracle(name.into()))
}

/// How buffer lengths and int values are drawn for a spec.
#[derive(Debug, Clone)]
struct Shapes {
    /// Per int parameter: the representative of its size class, if size-bound.
    class: Vec<Option<usize>>,
    /// Per buffer parameter: its length source.
    lengths: Vec<Length>,
}

#[derive(Debug, Clone, Copy)]
enum Length {
    Param(usize),
    Fixed(usize),
    Product,
}

fn shapes(spec: &FunctionSpec) -> Shapes {
    let n = spec.params().len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let mut bound = alloc::vec![false; n];
    let mut lengths = alloc::vec![Length::Product; n];
    if let Some(rel) = spec.relation("size") {
        for t in &rel.tuples {
            let [Atom::Param(x), size] = t.as_slice() else { continue };
            let Some(px) = spec.param(x).filter(|p| p.ctype.is_pointer()) else { continue };
            match size {
                Atom::Param(s) => {
                    let Some(ps) = spec.param(s).filter(|p| p.ctype == CType::Int) else { continue };
                    bound[ps.position] = true;
                    match lengths[px.position] {
                        Length::Param(other) => {
                            // Two sizes for one buffer force them equal.
                            let (a, b) = (find(&mut parent, other), find(&mut parent, ps.position));
                            let (lo, hi) = (a.min(b), a.max(b));
                            parent[hi] = lo;
                        }
                        _ => lengths[px.position] = Length::Param(ps.position),
                    }
                }
                Atom::Num(d) => {
                    if let Ok(k) = alloc::format!("{d}").parse::<usize>() {
                        if !matches!(lengths[px.position], Length::Param(_)) {
                            lengths[px.position] = Length::Fixed(k);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let class = (0..n).map(|i| bound[i].then(|| find(&mut parent, i))).collect();
    Shapes { class, lengths }
}

/// Draws a test case: size-bound ints uniform in `size_range`, other ints in [0, 4],
/// floats and buffer elements in [-1, 1]. Sized buffers take their size parameter's
/// value; unsized ones the product of all size-bound ints (at least 1).
pub fn gen_inputs<R: Rng>(spec: &FunctionSpec, rng: &mut R, size_range: (i64, i64)) -> Result<TestCase, Ineligible> {
    spec.check_synthesizable()?;
    let (lo, hi) = size_range;
    assert!(1 <= lo && lo <= hi, "invalid size range [{lo}, {hi}]");
    let sh = shapes(spec);
    let params = spec.params();
    let mut ints = alloc::vec![0i64; params.len()];
    for (i, p) in params.iter().enumerate() {
        if p.ctype != CType::Int {
            continue;
        }
        ints[i] = match sh.class[i] {
            Some(rep) if rep < i => ints[rep],
            Some(_) => rng.random_range(lo..=hi),
            None => rng.random_range(0..=4),
        };
    }
    let product = (0..params.len())
        .filter(|&i| sh.class[i].is_some())
        .fold(1i64, |p, i| p.saturating_mul(ints[i]))
        .max(1) as usize;
    let mut args = Vec::with_capacity(params.len());
    for (i, p) in params.iter().enumerate() {
        args.push(match p.ctype {
            CType::Int => Arg::Int(ints[i]),
            CType::Float => Arg::Float(rng.random_range(-1.0..=1.0)),
            _ => {
                let n = match sh.lengths[i] {
                    Length::Param(s) => ints[s] as usize,
                    Length::Fixed(k) => k,
                    Length::Product => product,
                };
                Arg::Buffer((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
            }
        });
    }
    Ok(TestCase { args })
}

/// `count` cases from a generator seeded with `seed`.
pub fn gen_tests(spec: &FunctionSpec, seed: u64, count: usize, size_range: (i64, i64)) -> Result<Vec<TestCase>, Ineligible> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| gen_inputs(spec, &mut rng, size_range)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 1e-9, rel: 1e-6 }
    }
}

impl Tol {
    pub const EXACT: Tol = Tol { abs: 0.0, rel: 0.0 };

    #[inline]
    pub fn close(&self, candidate: f64, reference: f64) -> bool {
        candidate == reference || (candidate - reference).abs() <= self.abs + self.rel * reference.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Equivalent(usize),
    Distinguished { case: TestCase, candidate: Outputs, oracle: Outputs },
    Rejected { case: TestCase, trap: Trap },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent(_))
    }
}

/// Whether candidate outputs match the reference: the return value and every buffer
/// within `tol`, and buffers outside `outputs` bit-identical to their inputs.
pub fn outputs_match(case: &TestCase, candidate: &Outputs, reference: &Outputs, outputs: &[usize], tol: Tol) -> bool {
    match (candidate.ret, reference.ret) {
        (Some(c), Some(r)) if !tol.close(c, r) => return false,
        (Some(_), None) | (None, Some(_)) => return false,
        _ => {}
    }
    if candidate.buffers.len() != reference.buffers.len() {
        return false;
    }
    for ((p, c), (q, r)) in candidate.buffers.iter().zip(&reference.buffers) {
        if p != q || c.len() != r.len() || !c.iter().zip(r).all(|(&c, &r)| tol.close(c, r)) {
            return false;
        }
        if !outputs.contains(p) {
            let input = case.buffer(*p);
            if input.iter().zip(c).any(|(a, b)| a.to_bits() != b.to_bits()) {
                return false;
            }
        }
    }
    true
}

/// Positions of the buffers tagged as outputs.
pub fn output_positions(spec: &FunctionSpec) -> Vec<usize> {
    let outs = spec.outputs();
    spec.params().iter().filter(|p| outs.contains(p.name.as_str())).map(|p| p.position).collect()
}

/// Runs the candidate and the oracle on each case; the first trap or mismatch decides.
pub fn equivalent_on(p: &Program, f: &OracleFn, spec: &FunctionSpec, cases: &[TestCase], tol: Tol) -> Verdict {
    let outputs = output_positions(spec);
    for case in cases {
        let reference = f.eval(case);
        match interpret(p, case) {
            RunResult::Trap(trap) => return Verdict::Rejected { case: case.clone(), trap },
            RunResult::Ok(candidate) => {
                if !outputs_match(case, &candidate, &reference, &outputs, tol) {
                    return Verdict::Distinguished { case: case.clone(), candidate, oracle: reference };
                }
            }
        }
    }
    Verdict::Equivalent(cases.len())
}

/// Tests on `n_tests` cases drawn from a generator seeded with `seed`.
pub fn equivalent(
    p: &Program,
    f: &OracleFn,
    spec: &FunctionSpec,
    n_tests: usize,
    tol: Tol,
    size_range: (i64, i64),
    seed: u64,
) -> Result<Verdict, Ineligible> {
    let cases = gen_tests(spec, seed, n_tests, size_range)?;
    Ok(equivalent_on(p, f, spec, &cases, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmodel::parse_spec;

    const GEMV: &str = "function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void\n\
                        relations:\n  size(x, n)\n  size(y, m)\n  output(y)\n";

    fn case(args: Vec<Arg>) -> TestCase {
        TestCase { args }
    }

    #[test]
    fn registry_lookup() {
        let names: Vec<&str> = registry().iter().map(|o| o.name).collect();
        for n in ["dot", "axpy", "scal", "vadd", "asum", "copy", "gemv"] {
            assert!(names.contains(&n));
            assert_eq!(lookup_oracle(n).unwrap().name, n);
        }
        assert_eq!(lookup_oracle("nosuch").unwrap_err(), UnknownOracle("nosuch".into()));
    }

    #[test]
    fn gemv_metamorphic() {
        let g = lookup_oracle("gemv").unwrap();
        let spec = parse_spec(GEMV).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut c = gen_inputs(&spec, &mut rng, (1, 6)).unwrap();
            let (m, n) = (c.int(0) as usize, c.int(1) as usize);
            // alpha = 0, beta = 1 leaves y unchanged.
            c.args[2] = Arg::Float(0.0);
            c.args[5] = Arg::Float(1.0);
            assert_eq!(g.eval(&c).buffer(6).unwrap(), c.buffer(6));
            // A = I (square), alpha = 1, beta = 0 gives y = x.
            let k = m.min(n);
            c.args[0] = Arg::Int(k as i64);
            c.args[1] = Arg::Int(k as i64);
            c.args[3] = Arg::Buffer((0..k * k).map(|i| if i % (k + 1) == 0 { 1.0 } else { 0.0 }).collect());
            c.args[4] = Arg::Buffer(c.buffer(4)[..k].to_vec());
            c.args[6] = Arg::Buffer(c.buffer(6)[..k].to_vec());
            c.args[2] = Arg::Float(1.0);
            c.args[5] = Arg::Float(0.0);
            assert_eq!(g.eval(&c).buffer(6).unwrap(), c.buffer(4));
        }
    }

    #[test]
    fn gemv_small_case() {
        let g = lookup_oracle("gemv").unwrap();
        let c = case(alloc::vec![
            Arg::Int(1),
            Arg::Int(2),
            Arg::Float(1.0),
            Arg::Buffer(alloc::vec![2.0, 3.0]),
            Arg::Buffer(alloc::vec![4.0, 5.0]),
            Arg::Float(0.0),
            Arg::Buffer(alloc::vec![9.0]),
        ]);
        assert_eq!(g.eval(&c).buffer(6).unwrap(), [23.0]);
    }

    #[test]
    fn dot_and_asum_against_iterator_forms() {
        let spec = parse_spec("function dot(n: int, x: float*, y: float*) -> float\nrelations:\n  size(x, n)\n  size(y, n)\n").unwrap();
        let d = lookup_oracle("dot").unwrap();
        let s = lookup_oracle("asum").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let c = gen_inputs(&spec, &mut rng, (1, 16)).unwrap();
            let (x, y) = (c.buffer(1), c.buffer(2));
            let expect: f64 = x.iter().zip(y).map(|(a, b)| a * b).fold(0.0, |s, v| s + v);
            assert_eq!(d.eval(&c).ret, Some(expect));
            let xx = case(alloc::vec![c.args[0].clone(), c.args[1].clone(), c.args[1].clone()]);
            assert!(d.eval(&xx).ret.unwrap() >= 0.0);
            let one = case(alloc::vec![c.args[0].clone(), c.args[1].clone()]);
            assert!(s.eval(&one).ret.unwrap() >= 0.0);
        }
    }

    #[test]
    fn gemv_input_shapes() {
        let spec = parse_spec(GEMV).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let c = gen_inputs(&spec, &mut rng, (1, 4)).unwrap();
            let (m, n) = (c.int(0), c.int(1));
            assert!((1..=4).contains(&m) && (1..=4).contains(&n));
            assert_eq!(c.buffer(4).len() as i64, n);
            assert_eq!(c.buffer(6).len() as i64, m);
            assert_eq!(c.buffer(3).len() as i64, m * n);
            assert!(c.buffer(3).iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        let ones = gen_tests(&spec, 5, 20, (1, 1)).unwrap();
        assert!(ones.iter().all(|c| c.int(0) == 1 && c.int(1) == 1 && c.buffer(3).len() == 1));
        assert_eq!(gen_tests(&spec, 11, 5, (1, 4)).unwrap(), gen_tests(&spec, 11, 5, (1, 4)).unwrap());
    }

    #[test]
    fn shared_buffer_sizes_are_equal() {
        let spec = parse_spec("function f(n: int, k: int, x: float*) -> void\nrelations:\n  size(x, n)\n  size(x, k)\n").unwrap();
        let cases = gen_tests(&spec, 2, 30, (1, 16)).unwrap();
        assert!(cases.iter().all(|c| c.int(0) == c.int(1) && c.buffer(2).len() as i64 == c.int(0)));
    }

    #[test]
    fn compatibility() {
        let spec = parse_spec(GEMV).unwrap();
        assert!(lookup_oracle("gemv").unwrap().check_compatible(&spec).is_ok());
        assert!(lookup_oracle("dot").unwrap().check_compatible(&spec).is_err());
        let bad = parse_spec("function f(s: int[3]) -> void").unwrap();
        assert!(gen_inputs(&bad, &mut ChaCha8Rng::seed_from_u64(0), (1, 4)).is_err());
    }
}
