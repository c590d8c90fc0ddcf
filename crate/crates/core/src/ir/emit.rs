use alloc::string::String;
use core::fmt::Write;

use super::{HoleFill, LoadIndex, Op, Operand, Program, Skeleton, Stmt};

struct Emitter<'a> {
    sk: &'a Skeleton,
    p: &'a Program,
    out: String,
    next_reg: usize,
}

impl Emitter<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    /// Emits the hole's instructions; returns the name holding its result.
    fn hole(&mut self, h: usize, depth: usize) -> Option<String> {
        let hf: &HoleFill = &self.p.filling.holes[h];
        if let Some(v) = hf.bare {
            return Some(self.sk.values[v as usize].name.clone());
        }
        let base = self.next_reg;
        let name = |o: Operand| match o {
            Operand::Value(v) => self.sk.values[v as usize].name.clone(),
            Operand::Reg(r) => alloc::format!("t{}", base + r as usize),
        };
        let mut lines = alloc::vec::Vec::new();
        for (k, ins) in hf.instrs.iter().enumerate() {
            let (a, b) = (name(ins.lhs), name(ins.rhs));
            let expr = match ins.op {
                Op::Add => alloc::format!("{a} + {b}"),
                Op::Sub => alloc::format!("{a} - {b}"),
                Op::Mul => alloc::format!("{a} * {b}"),
                Op::Abs => alloc::format!("fabs({a})"),
            };
            lines.push(alloc::format!("float t{} = {expr};", base + k));
        }
        for l in &lines {
            self.line(depth, l);
        }
        self.next_reg += hf.instrs.len();
        (!hf.instrs.is_empty()).then(|| alloc::format!("t{}", self.next_reg - 1))
    }

    fn load(&mut self, ld: usize, depth: usize) {
        let site = &self.sk.loads[ld];
        let e = match site.index {
            LoadIndex::Fixed(e) => e,
            LoadIndex::Choice(slot) => self.sk.affine[slot].candidates[self.p.filling.affine[slot] as usize],
        };
        let text = alloc::format!(
            "float {} = {}[{}];",
            self.sk.values[site.value as usize].name,
            self.sk.params[site.buffer].name,
            self.sk.index_text(&e)
        );
        self.line(depth, &text);
    }

    fn block(&mut self, body: &[Stmt], depth: usize) {
        for s in body {
            match s {
                Stmt::Loop { id, loads, body } => {
                    let info = &self.sk.loops[*id];
                    let acc = self.sk.values[info.acc as usize].name.clone();
                    let init = self.hole(info.init, depth).unwrap_or_else(|| "0.0".into());
                    self.line(depth, &alloc::format!("float {acc} = {init};"));
                    let header = alloc::format!(
                        "for (int {v} = 0; {v} < {b}; ++{v}) {{",
                        v = info.var,
                        b = self.sk.params[info.bound].name
                    );
                    self.line(depth, &header);
                    for &ld in loads {
                        self.load(ld, depth + 1);
                    }
                    self.block(body, depth + 1);
                    if let Some(r) = self.hole(info.update, depth + 1) {
                        self.line(depth + 1, &alloc::format!("{acc} = {r};"));
                    }
                    self.line(depth, "}");
                }
                Stmt::Load(ld) => self.load(*ld, depth),
                Stmt::Store { hole, buffer, loop_id } => {
                    let r = self.hole(*hole, depth).unwrap_or_else(|| "0.0".into());
                    let text = alloc::format!(
                        "{}[{}] = {r};",
                        self.sk.params[*buffer].name,
                        self.sk.loops[*loop_id].var
                    );
                    self.line(depth, &text);
                }
            }
        }
    }
}

/// Deterministic C-like rendering. Registers are `tN`, numbered in program order; loads
/// are `vN` and loop accumulators `accN`. Arithmetic is double precision whatever the
/// declared `float`.
pub fn emit_c(p: &Program) -> String {
    let sk = &*p.skeleton;
    let mut e = Emitter { sk, p, out: String::new(), next_reg: 0 };
    let _ = writeln!(e.out, "{} {{", sk.header());
    e.block(&sk.body, 1);
    if let Some(h) = sk.ret {
        let r = e.hole(h, 1).unwrap_or_else(|| "0.0".into());
        e.line(1, &alloc::format!("return {r};"));
    }
    e.out.push_str("}\n");
    e.out
}
