//! Candidate programs: skeletons with filled holes, their enumeration, interpretation and
//! C-like rendering.

mod cparse;
mod emit;
mod interp;
mod skeleton;
mod space;

pub use cparse::{parse_c, CFunction, CParseError};
pub use emit::emit_c;
pub use interp::{interpret, Arg, Outputs, RunResult, TestCase, Trap};
pub(crate) use interp::{probe, Probe};
pub use skeleton::{
    AffineSlot, Hole, HoleKind, IndexExpr, LoadIndex, LoadSite, LoopInfo, ParamKind, SkParam, Skeleton, Stmt, Value,
    ValueId, ValueKind,
};
pub use space::{fill_holes, FillMode, Fillings, FillingSpace, HoleSpace, MAX_HOLE_LEN};

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Abs,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "fadd",
            Op::Sub => "fsub",
            Op::Mul => "fmul",
            Op::Abs => "fabs",
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }

    pub fn is_unary(self) -> bool {
        self == Op::Abs
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Abs => a.abs(),
        }
    }
}

/// `Value` sorts before `Reg`, which fixes the canonical order of commutative operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Value(ValueId),
    /// A register defined earlier in the same hole, by position.
    Reg(u8),
}

/// `dest` is implicit: the k-th instruction of a hole defines register k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instr {
    pub op: Op,
    pub lhs: Operand,
    /// Equal to `lhs` for unary operations.
    pub rhs: Operand,
}

impl Instr {
    pub fn new(op: Op, lhs: Operand, rhs: Operand) -> Instr {
        Instr { op, lhs, rhs }
    }

    pub fn unary(op: Op, arg: Operand) -> Instr {
        Instr { op, lhs: arg, rhs: arg }
    }
}

/// Contents of one hole: an instruction sequence whose last register is the result, or a
/// bare value designation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct HoleFill {
    pub instrs: Vec<Instr>,
    pub bare: Option<ValueId>,
}

impl HoleFill {
    pub fn bare(v: ValueId) -> HoleFill {
        HoleFill { instrs: Vec::new(), bare: Some(v) }
    }

    pub fn seq(instrs: Vec<Instr>) -> HoleFill {
        HoleFill { instrs, bare: None }
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty() && self.bare.is_none()
    }

    /// Bitmask of the load sites this fill reads, directly or as its bare value.
    pub fn loads_read(&self, sk: &Skeleton) -> u64 {
        let bit = |v: ValueId| sk.load_of(v).map_or(0, |l| 1u64 << l);
        let mut m = self.bare.map_or(0, bit);
        for i in &self.instrs {
            for o in [i.lhs, i.rhs] {
                if let Operand::Value(v) = o {
                    m |= bit(v);
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Filling {
    pub holes: Vec<HoleFill>,
    /// Chosen candidate per affine slot.
    pub affine: Vec<u8>,
}

impl Filling {
    pub fn instr_count(&self) -> usize {
        self.holes.iter().map(|h| h.instrs.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("filling has {found} holes, skeleton has {expected}")]
    HoleCount { expected: usize, found: usize },
    #[error("filling has {found} affine choices, skeleton has {expected}")]
    AffineCount { expected: usize, found: usize },
    #[error("affine slot {slot}: choice {choice} out of range")]
    AffineChoice { slot: usize, choice: u8 },
    #[error("hole {hole}: {msg}")]
    Hole { hole: usize, msg: &'static str },
    #[error("hole {hole}, instruction {instr}: operand not in scope")]
    Scope { hole: usize, instr: usize },
}

/// A skeleton with every hole filled.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub skeleton: Arc<Skeleton>,
    pub filling: Filling,
}

impl Program {
    /// Checks hole shapes, operand scoping and register definitions.
    pub fn new(skeleton: Arc<Skeleton>, filling: Filling) -> Result<Program, ProgramError> {
        check(&skeleton, &filling)?;
        Ok(Program { skeleton, filling })
    }

    /// Skips validation; the interpreter still traps on undefined registers.
    pub fn new_unchecked(skeleton: Arc<Skeleton>, filling: Filling) -> Program {
        Program { skeleton, filling }
    }

    pub fn emit_c(&self) -> alloc::string::String {
        emit_c(self)
    }
}

fn check(sk: &Skeleton, fill: &Filling) -> Result<(), ProgramError> {
    if fill.holes.len() != sk.holes.len() {
        return Err(ProgramError::HoleCount { expected: sk.holes.len(), found: fill.holes.len() });
    }
    if fill.affine.len() != sk.affine.len() {
        return Err(ProgramError::AffineCount { expected: sk.affine.len(), found: fill.affine.len() });
    }
    for (slot, (&c, a)) in fill.affine.iter().zip(&sk.affine).enumerate() {
        if c as usize >= a.candidates.len() {
            return Err(ProgramError::AffineChoice { slot, choice: c });
        }
    }
    for (h, (hf, hole)) in fill.holes.iter().zip(&sk.holes).enumerate() {
        let err = |msg| Err(ProgramError::Hole { hole: h, msg });
        match (hf.bare, hf.instrs.is_empty()) {
            (Some(_), false) => return err("both a bare value and instructions"),
            (Some(v), true) => {
                if !hole.kind.allows_bare() {
                    return err("bare values are not allowed here");
                }
                if hole.scope.binary_search(&v).is_err() {
                    return Err(ProgramError::Scope { hole: h, instr: 0 });
                }
            }
            (None, true) if !hole.kind.allows_empty() => return err("hole must produce a value"),
            _ => {}
        }
        if hf.instrs.len() > u8::MAX as usize {
            return err("too many instructions");
        }
        for (k, ins) in hf.instrs.iter().enumerate() {
            if ins.op.is_unary() && ins.lhs != ins.rhs {
                return err("unary instruction with two operands");
            }
            for o in [ins.lhs, ins.rhs] {
                let ok = match o {
                    Operand::Value(v) => hole.scope.binary_search(&v).is_ok(),
                    Operand::Reg(r) => (r as usize) < k,
                };
                if !ok {
                    return Err(ProgramError::Scope { hole: h, instr: k });
                }
            }
        }
    }
    Ok(())
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_c(self))
    }
}
