use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::{Filling, IndexExpr, LoadIndex, Op, Operand, ParamKind, Program, Skeleton, Stmt};

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Int(i64),
    Float(f64),
    Buffer(Vec<f64>),
}

/// One argument per parameter, in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCase {
    pub args: Vec<Arg>,
}

impl TestCase {
    pub fn int(&self, p: usize) -> i64 {
        match self.args[p] {
            Arg::Int(v) => v,
            _ => panic!("argument {p} is not an int"),
        }
    }

    pub fn float(&self, p: usize) -> f64 {
        match self.args[p] {
            Arg::Float(v) => v,
            _ => panic!("argument {p} is not a float"),
        }
    }

    pub fn buffer(&self, p: usize) -> &[f64] {
        match &self.args[p] {
            Arg::Buffer(v) => v,
            _ => panic!("argument {p} is not a buffer"),
        }
    }

    /// Final-state template: every buffer copied, no return value.
    pub fn outputs(&self) -> Outputs {
        Outputs {
            ret: None,
            buffers: self
                .args
                .iter()
                .enumerate()
                .filter_map(|(i, a)| match a {
                    Arg::Buffer(b) => Some((i, b.clone())),
                    _ => None,
                })
                .collect(),
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match a {
                Arg::Int(v) => write!(f, "{v}")?,
                Arg::Float(v) => write!(f, "{v:?}")?,
                Arg::Buffer(b) => write!(f, "{b:?}")?,
            }
        }
        f.write_str(")")
    }
}

/// Observable results: the return value and the final contents of every buffer, keyed by
/// parameter position.
#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub ret: Option<f64>,
    pub buffers: Vec<(usize, Vec<f64>)>,
}

impl Outputs {
    pub fn buffer(&self, p: usize) -> Option<&[f64]> {
        self.buffers.iter().find(|(i, _)| *i == p).map(|(_, b)| b.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Trap {
    #[error("index {index} out of bounds for `{buffer}` of length {len}")]
    OutOfBounds { buffer: String, index: i64, len: usize },
    #[error("hole {hole} reads undefined register {reg}")]
    UndefinedRegister { hole: usize, reg: u16 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Ok(Outputs),
    Trap(Trap),
}

impl RunResult {
    pub fn ok(self) -> Option<Outputs> {
        match self {
            RunResult::Ok(o) => Some(o),
            RunResult::Trap(_) => None,
        }
    }
}

/// What a probe run records at output holes instead of evaluating them.
#[derive(Debug, Clone, Default)]
pub(crate) struct Probe {
    /// (hole, buffer, index, offset into `env`) per executed store.
    pub stores: Vec<(usize, usize, usize, usize)>,
    /// Scope values of each recorded event, concatenated.
    pub env: Vec<f64>,
    /// Scope values at the return hole.
    pub ret_env: Option<usize>,
    written: Vec<Vec<bool>>,
    /// A load read an element a store had already (notionally) written.
    pub tainted: bool,
}

impl Probe {
    pub fn clear(&mut self) {
        self.stores.clear();
        self.env.clear();
        self.ret_env = None;
        self.written.clear();
        self.tainted = false;
    }
}

struct Machine<'a> {
    sk: &'a Skeleton,
    fill: &'a Filling,
    vals: Vec<f64>,
    regs: Vec<f64>,
    ints: Vec<i64>,
    bufs: Vec<Vec<f64>>,
    iv: Vec<i64>,
    probe: Option<&'a mut Probe>,
}

impl Machine<'_> {
    #[inline]
    fn operand(&self, hole: usize, o: Operand, k: usize) -> Result<f64, Trap> {
        match o {
            Operand::Value(v) => self.vals.get(v as usize).copied().ok_or(Trap::UndefinedRegister { hole, reg: v }),
            Operand::Reg(r) if (r as usize) < k => Ok(self.regs[r as usize]),
            Operand::Reg(r) => Err(Trap::UndefinedRegister { hole, reg: r as u16 }),
        }
    }

    fn hole(&mut self, hole: usize) -> Result<Option<f64>, Trap> {
        let hf = &self.fill.holes[hole];
        if let Some(v) = hf.bare {
            return self.operand(hole, Operand::Value(v), 0).map(Some);
        }
        if hf.instrs.is_empty() {
            return Ok(None);
        }
        if self.regs.len() < hf.instrs.len() {
            self.regs.resize(hf.instrs.len(), 0.0);
        }
        for (k, ins) in hf.instrs.iter().enumerate() {
            let a = self.operand(hole, ins.lhs, k)?;
            let b = if ins.op == Op::Abs { a } else { self.operand(hole, ins.rhs, k)? };
            self.regs[k] = ins.op.apply(a, b);
        }
        Ok(Some(self.regs[hf.instrs.len() - 1]))
    }

    fn index(&self, e: IndexExpr) -> i64 {
        match e {
            IndexExpr::Var(l) => self.iv[l],
            IndexExpr::Linear { major, stride, minor } => {
                self.iv[major].saturating_mul(self.ints[stride]).saturating_add(self.iv[minor])
            }
        }
    }

    fn check(&self, buffer: usize, index: i64) -> Result<usize, Trap> {
        let len = self.bufs[buffer].len();
        if index < 0 || index as u64 >= len as u64 {
            return Err(Trap::OutOfBounds { buffer: self.sk.params[buffer].name.clone(), index, len });
        }
        Ok(index as usize)
    }

    fn snapshot(&mut self, hole: usize) -> usize {
        let probe = self.probe.as_mut().expect("probe mode");
        let at = probe.env.len();
        for &v in &self.sk.holes[hole].scope {
            probe.env.push(self.vals[v as usize]);
        }
        at
    }

    fn load(&mut self, ld: usize) -> Result<(), Trap> {
        let site = &self.sk.loads[ld];
        let e = match site.index {
            LoadIndex::Fixed(e) => e,
            LoadIndex::Choice(slot) => {
                let c = self.fill.affine[slot] as usize;
                self.sk.affine[slot].candidates[c]
            }
        };
        let i = self.check(site.buffer, self.index(e))?;
        if let Some(p) = self.probe.as_mut() {
            if p.written[site.buffer].get(i).copied().unwrap_or(false) {
                p.tainted = true;
            }
        }
        self.vals[site.value as usize] = self.bufs[site.buffer][i];
        Ok(())
    }

    fn block(&mut self, body: &[Stmt]) -> Result<(), Trap> {
        for s in body {
            match s {
                Stmt::Loop { id, loads, body } => {
                    let info = &self.sk.loops[*id];
                    let acc = info.acc as usize;
                    let update = info.update;
                    self.vals[acc] = self.hole(info.init)?.unwrap_or(0.0);
                    let n = self.ints[info.bound].max(0);
                    for i in 0..n {
                        self.iv[*id] = i;
                        for &ld in loads {
                            self.load(ld)?;
                        }
                        self.block(body)?;
                        if let Some(v) = self.hole(update)? {
                            self.vals[acc] = v;
                        }
                    }
                }
                Stmt::Load(ld) => self.load(*ld)?,
                Stmt::Store { hole, buffer, loop_id } => {
                    let i = self.check(*buffer, self.iv[*loop_id])?;
                    if self.probe.is_some() {
                        let at = self.snapshot(*hole);
                        let p = self.probe.as_mut().unwrap();
                        p.stores.push((*hole, *buffer, i, at));
                        p.written[*buffer][i] = true;
                    } else {
                        let v = self.hole(*hole)?.unwrap_or(0.0);
                        self.bufs[*buffer][i] = v;
                    }
                }
            }
        }
        Ok(())
    }
}

fn run(sk: &Skeleton, fill: &Filling, case: &TestCase, probe: Option<&mut Probe>) -> Result<Outputs, Trap> {
    let mut m = Machine {
        sk,
        fill,
        vals: alloc::vec![0.0; sk.values.len()],
        regs: Vec::new(),
        ints: alloc::vec![0; sk.params.len()],
        bufs: alloc::vec![Vec::new(); sk.params.len()],
        iv: alloc::vec![0; sk.loops.len()],
        probe,
    };
    for (i, (p, a)) in sk.params.iter().zip(&case.args).enumerate() {
        match (p.kind, a) {
            (ParamKind::Int, Arg::Int(v)) => m.ints[i] = *v,
            (ParamKind::Buffer, Arg::Buffer(b)) => m.bufs[i] = b.clone(),
            (ParamKind::Float, Arg::Float(_)) => {}
            _ => panic!("argument {i} does not match parameter `{}`", p.name),
        }
    }
    for (v, val) in sk.values.iter().enumerate() {
        m.vals[v] = match val.kind {
            super::ValueKind::Zero => 0.0,
            super::ValueKind::One => 1.0,
            super::ValueKind::Scalar(p) => case.float(p),
            _ => 0.0,
        };
    }
    if let Some(p) = m.probe.as_mut() {
        p.clear();
        p.written = m.bufs.iter().map(|b| alloc::vec![false; b.len()]).collect();
    }
    m.block(&sk.body)?;
    let ret = match sk.ret {
        Some(h) if m.probe.is_some() => {
            let at = m.snapshot(h);
            m.probe.as_mut().unwrap().ret_env = Some(at);
            None
        }
        Some(h) => Some(m.hole(h)?.unwrap_or(0.0)),
        None => None,
    };
    let buffers = sk
        .params
        .iter()
        .enumerate()
        .filter(|(_, p)| p.kind == ParamKind::Buffer)
        .map(|(i, _)| (i, core::mem::take(&mut m.bufs[i])))
        .collect();
    Ok(Outputs { ret, buffers })
}

/// Runs a program with 64-bit float semantics. Loop bounds are read once at entry; any
/// index outside a buffer traps. Only stores write to buffers.
pub fn interpret(p: &Program, inputs: &TestCase) -> RunResult {
    match run(&p.skeleton, &p.filling, inputs, None) {
        Ok(o) => RunResult::Ok(o),
        Err(t) => RunResult::Trap(t),
    }
}

/// Runs everything except output holes, recording the scope values each store and the
/// return would have seen. Buffers are left unwritten.
pub(crate) fn probe(sk: &Skeleton, fill: &Filling, case: &TestCase, probe: &mut Probe) -> Result<(), Trap> {
    run(sk, fill, case, Some(probe)).map(|_| ())
}
