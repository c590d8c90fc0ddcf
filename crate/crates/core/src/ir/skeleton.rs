use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type ValueId = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Int,
    Float,
    Buffer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkParam {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Zero,
    One,
    /// A float parameter, by position.
    Scalar(usize),
    /// The element read by a load site.
    Load(usize),
    /// The accumulator of a loop.
    Acc(usize),
}

/// A named float value programs can read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Value {
    pub kind: ValueKind,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexExpr {
    Var(usize),
    /// `major * stride + minor`, with `stride` an int parameter.
    Linear { major: usize, stride: usize, minor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadIndex {
    Fixed(IndexExpr),
    /// Chosen by the filling, from an affine slot's candidates.
    Choice(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadSite {
    pub buffer: usize,
    pub value: ValueId,
    pub index: LoadIndex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineSlot {
    pub load: usize,
    pub candidates: Vec<IndexExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopInfo {
    /// Int parameter read once at loop entry.
    pub bound: usize,
    pub var: String,
    pub acc: ValueId,
    pub init: usize,
    pub update: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HoleKind {
    /// Accumulator initialiser before a loop: a bare value or a non-empty sequence.
    Init,
    /// End of a loop body; empty leaves the accumulator unchanged.
    Update,
    /// Value of a store; non-empty.
    Store,
    /// Function result: a bare value or a non-empty sequence.
    Return,
}

impl HoleKind {
    pub fn allows_bare(self) -> bool {
        matches!(self, HoleKind::Init | HoleKind::Return)
    }

    pub fn allows_empty(self) -> bool {
        self == HoleKind::Update
    }

    /// Store and return holes produce what the oracle observes.
    pub fn is_output(self) -> bool {
        matches!(self, HoleKind::Store | HoleKind::Return)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hole {
    pub kind: HoleKind,
    /// Values readable by the hole, in id order.
    pub scope: Vec<ValueId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Loop { id: usize, loads: Vec<usize>, body: Vec<Stmt> },
    Load(usize),
    Store { hole: usize, buffer: usize, loop_id: usize },
}

/// A program with holes: control flow, loads and stores are fixed; hole contents and
/// affine index choices are left open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub name: String,
    pub params: Vec<SkParam>,
    pub returns: bool,
    pub values: Vec<Value>,
    pub loops: Vec<LoopInfo>,
    pub loads: Vec<LoadSite>,
    pub affine: Vec<AffineSlot>,
    pub holes: Vec<Hole>,
    pub body: Vec<Stmt>,
    pub ret: Option<usize>,
}

impl Skeleton {
    /// Bitmask of load sites whose values are in the hole's scope.
    pub fn loads_in_scope(&self, hole: usize) -> u64 {
        self.holes[hole].scope.iter().fold(0, |m, &v| match self.values[v as usize].kind {
            ValueKind::Load(l) => m | 1 << l,
            _ => m,
        })
    }

    /// The load site read into `v`, if any.
    pub fn load_of(&self, v: ValueId) -> Option<usize> {
        match self.values[v as usize].kind {
            ValueKind::Load(l) => Some(l),
            _ => None,
        }
    }

    pub fn index_text(&self, e: &IndexExpr) -> String {
        match *e {
            IndexExpr::Var(l) => self.loops[l].var.clone(),
            IndexExpr::Linear { major, stride, minor } => alloc::format!(
                "{} * {} + {}",
                self.loops[major].var,
                self.params[stride].name,
                self.loops[minor].var
            ),
        }
    }

    pub(crate) fn header(&self) -> String {
        let mut s = String::new();
        s.push_str(if self.returns { "float " } else { "void " });
        s.push_str(&self.name);
        s.push('(');
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push_str(match p.kind {
                ParamKind::Int => "int ",
                ParamKind::Float => "float ",
                ParamKind::Buffer => "float *",
            });
            s.push_str(&p.name);
        }
        s.push(')');
        s
    }
}

/// Sketch form: holes print as `?N`, affine indices as `?`.
impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn stmts(sk: &Skeleton, body: &[Stmt], depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let pad = "  ".repeat(depth);
            for s in body {
                match s {
                    Stmt::Loop { id, loads, body } => {
                        let l = &sk.loops[*id];
                        writeln!(f, "{pad}float {} = ?{};", sk.values[l.acc as usize].name, l.init)?;
                        let b = &sk.params[l.bound].name;
                        writeln!(f, "{pad}for (int {v} = 0; {v} < {b}; ++{v}) {{", v = l.var)?;
                        for &ld in loads {
                            load(sk, ld, depth + 1, f)?;
                        }
                        stmts(sk, body, depth + 1, f)?;
                        writeln!(f, "{pad}  {} = ?{};", sk.values[l.acc as usize].name, l.update)?;
                        writeln!(f, "{pad}}}")?;
                    }
                    Stmt::Load(ld) => load(sk, *ld, depth, f)?,
                    Stmt::Store { hole, buffer, loop_id } => {
                        writeln!(f, "{pad}{}[{}] = ?{hole};", sk.params[*buffer].name, sk.loops[*loop_id].var)?;
                    }
                }
            }
            Ok(())
        }
        fn load(sk: &Skeleton, ld: usize, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            let site = &sk.loads[ld];
            let idx = match &site.index {
                LoadIndex::Fixed(e) => sk.index_text(e),
                LoadIndex::Choice(_) => "?".into(),
            };
            writeln!(
                f,
                "{}float {} = {}[{idx}];",
                "  ".repeat(depth),
                sk.values[site.value as usize].name,
                sk.params[site.buffer].name
            )
        }
        writeln!(f, "{} {{", self.header())?;
        stmts(self, &self.body, 1, f)?;
        if let Some(h) = self.ret {
            writeln!(f, "  return ?{h};")?;
        }
        writeln!(f, "}}")
    }
}
