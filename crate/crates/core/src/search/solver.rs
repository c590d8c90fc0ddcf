//! Output-hole solver: given the scope values a store or return hole sees at every
//! execution that matters, and the value the oracle wants there, find a smallest
//! expression tree over the scope that reproduces every target within tolerance.
//!
//! Trees are enumerated bottom-up by instruction count with observational
//! deduplication (identical values on a few sketch points, same obligation coverage).
//! The last level is never materialised: each left subtree looks up the right subtrees
//! whose value on the first sketch point lands in the tolerance window, and survivors
//! are evaluated on every point.

use alloc::vec::Vec;
use hashbrown::{HashMap, HashTable};

use super::order::splitmix;
use crate::ir::{HoleFill, Instr, Op, Operand, ValueId};
use crate::oracle::Tol;

const BINARY: [Op; 3] = [Op::Add, Op::Sub, Op::Mul];
const CACHE_LIMIT: usize = 1 << 17;
/// Points kept per node for deduplication and lookup.
const SKETCH: usize = 4;

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Value id and position in the scope.
    Leaf(ValueId, u16),
    Abs(u32),
    Bin(Op, u32, u32),
}

/// One hole's constraint system.
pub(crate) struct Task<'a> {
    pub hole: usize,
    pub scope: &'a [ValueId],
    /// Obligation bit contributed by each scope value (0 for non-obligated ones).
    pub bits: &'a [u64],
    /// Row-major, one row of `scope.len()` values per point.
    pub points: &'a [f64],
    pub targets: &'a [f64],
    /// Loads the fill must read.
    pub oblig: u64,
    /// 0 when a bare value is acceptable.
    pub min_size: usize,
}

enum Window {
    Any,
    None,
    Range(f64, f64),
}

pub(crate) struct Solver {
    max: usize,
    tol: Tol,
    /// Sketch points in use, and their indices among all points.
    np: usize,
    sketch: Vec<usize>,
    sketch_targets: Vec<f64>,
    kinds: Vec<Kind>,
    masks: Vec<u64>,
    hashes: Vec<u64>,
    vals: Vec<f64>,
    levels: Vec<Vec<u32>>,
    table: HashTable<u32>,
    scratch: Vec<f64>,
    cache: HashMap<u64, Option<HoleFill>>,
}

fn hash_vals(vals: &[f64], seed: u64) -> u64 {
    let h = vals.iter().fold(seed, |h, v| (h.rotate_left(5) ^ v.to_bits()).wrapping_mul(0x517c_c1b7_2722_0a95));
    splitmix(h)
}

impl Solver {
    pub fn new(max: usize, tol: Tol) -> Solver {
        Solver {
            max,
            tol,
            np: 0,
            sketch: Vec::new(),
            sketch_targets: Vec::new(),
            kinds: Vec::new(),
            masks: Vec::new(),
            hashes: Vec::new(),
            vals: Vec::new(),
            levels: Vec::new(),
            table: HashTable::new(),
            scratch: Vec::new(),
            cache: HashMap::new(),
        }
    }

    pub fn solve(&mut self, t: &Task) -> Option<HoleFill> {
        let mut key = splitmix(t.hole as u64 ^ (t.min_size as u64) << 32) ^ t.oblig;
        key = hash_vals(t.points, key);
        key = hash_vals(t.targets, key);
        if let Some(r) = self.cache.get(&key) {
            return r.clone();
        }
        let r = self.run(t);
        if self.cache.len() >= CACHE_LIMIT {
            self.cache.clear();
        }
        self.cache.insert(key, r.clone());
        r
    }

    fn row(&self, id: u32) -> &[f64] {
        &self.vals[id as usize * self.np..(id as usize + 1) * self.np]
    }

    fn eval(&self, id: u32, p: usize, t: &Task) -> f64 {
        match self.kinds[id as usize] {
            Kind::Leaf(_, s) => t.points[p * t.scope.len() + s as usize],
            Kind::Abs(a) => self.eval(a, p, t).abs(),
            Kind::Bin(op, a, b) => op.apply(self.eval(a, p, t), self.eval(b, p, t)),
        }
    }

    /// Sketch values first, then every point.
    fn matches(&self, vals: &[f64], mask: u64, id: u32, t: &Task) -> bool {
        mask == t.oblig
            && vals.iter().zip(&self.sketch_targets).all(|(&v, &g)| self.tol.close(v, g))
            && (0..t.targets.len()).all(|p| self.tol.close(self.eval(id, p, t), t.targets[p]))
    }

    /// Adds the node whose values sit in `scratch` unless an equivalent one exists.
    fn insert(&mut self, kind: Kind, mask: u64) -> Option<u32> {
        let h = hash_vals(&self.scratch, mask);
        let (np, vals, masks, scratch) = (self.np, &self.vals, &self.masks, &self.scratch);
        let same = |&id: &u32| {
            let row = &vals[id as usize * np..(id as usize + 1) * np];
            masks[id as usize] == mask && row.iter().zip(scratch).all(|(a, b)| a.to_bits() == b.to_bits())
        };
        if self.table.find(h, same).is_some() {
            return None;
        }
        let id = self.kinds.len() as u32;
        self.kinds.push(kind);
        self.masks.push(mask);
        self.hashes.push(h);
        self.vals.extend_from_slice(&self.scratch);
        let hashes = &self.hashes;
        self.table.insert_unique(h, id, |&i| hashes[i as usize]);
        Some(id)
    }

    fn run(&mut self, t: &Task) -> Option<HoleFill> {
        let ns = t.scope.len();
        let all = t.targets.len();
        self.np = all.min(SKETCH);
        self.sketch.clear();
        self.sketch.extend((0..self.np).map(|k| k * all / self.np));
        self.sketch_targets.clear();
        self.sketch_targets.extend(self.sketch.iter().map(|&p| t.targets[p]));
        self.kinds.clear();
        self.masks.clear();
        self.hashes.clear();
        self.vals.clear();
        self.table.clear();
        self.levels.clear();
        self.scratch.resize(self.np, 0.0);

        let mut level = Vec::new();
        for s in 0..ns {
            for k in 0..self.np {
                self.scratch[k] = t.points[self.sketch[k] * ns + s];
            }
            if let Some(id) = self.insert(Kind::Leaf(t.scope[s], s as u16), t.bits[s]) {
                if t.min_size == 0 && self.matches(&self.scratch, t.bits[s], id, t) {
                    return Some(self.fill(id, None));
                }
                level.push(id);
            }
        }
        self.levels.push(level);

        for size in 1..=self.max {
            if size == self.max && self.np > 0 {
                return self.meet(size, t);
            }
            let levels = core::mem::take(&mut self.levels);
            let found = self.grow(&levels, size, t);
            self.levels = levels;
            match found {
                Ok(level) => self.levels.push(level),
                Err(id) => return Some(self.fill(id, None)),
            }
        }
        None
    }

    /// Materialises the level of trees with `size` instructions; `Err` carries a match.
    fn grow(&mut self, levels: &[Vec<u32>], size: usize, t: &Task) -> Result<Vec<u32>, u32> {
        let np = self.np;
        let accept = size >= t.min_size;
        let mut out = Vec::new();
        for &l in &levels[size - 1] {
            for p in 0..np {
                self.scratch[p] = self.vals[l as usize * np + p].abs();
            }
            let mask = self.masks[l as usize];
            if let Some(id) = self.insert(Kind::Abs(l), mask) {
                if accept && self.matches(&self.scratch, mask, id, t) {
                    return Err(id);
                }
                out.push(id);
            }
        }
        for a in 0..size {
            let b = size - 1 - a;
            for op in BINARY {
                if op.is_commutative() && a > b {
                    continue;
                }
                for (li, &l) in levels[a].iter().enumerate() {
                    let start = if op.is_commutative() && a == b { li } else { 0 };
                    for &r in &levels[b][start..] {
                        for p in 0..np {
                            self.scratch[p] = op.apply(self.vals[l as usize * np + p], self.vals[r as usize * np + p]);
                        }
                        let mask = self.masks[l as usize] | self.masks[r as usize];
                        if let Some(id) = self.insert(Kind::Bin(op, l, r), mask) {
                            if accept && self.matches(&self.scratch, mask, id, t) {
                                return Err(id);
                            }
                            out.push(id);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn window(&self, op: Op, l0: f64, t0: f64) -> Window {
        if !l0.is_finite() || !t0.is_finite() {
            return Window::Any;
        }
        // Generous slack: the window only prefilters, every survivor is re-checked.
        let d = self.tol.abs + self.tol.rel * t0.abs() + 1e-12 * (1.0 + t0.abs() + l0.abs());
        match op {
            Op::Add => Window::Range(t0 - l0 - d, t0 - l0 + d),
            Op::Sub => Window::Range(l0 - t0 - d, l0 - t0 + d),
            Op::Mul if l0.abs() > 1e-100 => {
                let c = t0 / l0;
                let h = d / l0.abs() * (1.0 + 1e-9) + 1e-12 * c.abs();
                Window::Range(c - h, c + h)
            }
            Op::Mul if t0.abs() <= d => Window::Any,
            _ => Window::None,
        }
    }

    fn meet(&mut self, size: usize, t: &Task) -> Option<HoleFill> {
        let np = self.np;
        let all = t.targets.len();
        let close_all = |f: &dyn Fn(usize) -> f64| (0..all).all(|p| self.tol.close(f(p), t.targets[p]));
        for &l in &self.levels[size - 1] {
            let row = self.row(l);
            if self.masks[l as usize] == t.oblig
                && row.iter().zip(&self.sketch_targets).all(|(v, &g)| self.tol.close(v.abs(), g))
                && close_all(&|p| self.eval(l, p, t).abs())
            {
                let mut instrs = Vec::new();
                let x = self.emit(l, &mut instrs);
                instrs.push(Instr::unary(Op::Abs, x));
                return Some(HoleFill::seq(instrs));
            }
        }
        let sorted: Vec<Vec<(f64, u32)>> = self
            .levels
            .iter()
            .map(|lv| {
                let mut v: Vec<(f64, u32)> = lv.iter().map(|&id| (self.vals[id as usize * np], id)).collect();
                v.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
                v
            })
            .collect();
        let t0 = self.sketch_targets[0];
        for a in 0..size {
            let b = size - 1 - a;
            for op in BINARY {
                if op.is_commutative() && a > b {
                    continue;
                }
                for &l in &self.levels[a] {
                    let lrow = self.row(l);
                    let range = match self.window(op, lrow[0], t0) {
                        Window::None => continue,
                        Window::Any => &sorted[b][..],
                        Window::Range(lo, hi) => {
                            let s = &sorted[b];
                            let i = s.partition_point(|x| x.0 < lo);
                            let j = s.partition_point(|x| x.0 <= hi);
                            &s[i..j.max(i)]
                        }
                    };
                    for &(_, r) in range {
                        if self.masks[l as usize] | self.masks[r as usize] != t.oblig {
                            continue;
                        }
                        let rrow = self.row(r);
                        let sketch_ok =
                            (0..np).all(|k| self.tol.close(op.apply(lrow[k], rrow[k]), self.sketch_targets[k]));
                        if sketch_ok && close_all(&|p| op.apply(self.eval(l, p, t), self.eval(r, p, t))) {
                            return Some(self.fill(r, Some((op, l))));
                        }
                    }
                }
            }
        }
        None
    }

    fn emit(&self, id: u32, out: &mut Vec<Instr>) -> Operand {
        match self.kinds[id as usize] {
            Kind::Leaf(v, _) => Operand::Value(v),
            Kind::Abs(a) => {
                let x = self.emit(a, out);
                out.push(Instr::unary(Op::Abs, x));
                Operand::Reg(out.len() as u8 - 1)
            }
            Kind::Bin(op, a, b) => {
                let x = self.emit(a, out);
                let y = self.emit(b, out);
                out.push(binary(op, x, y));
                Operand::Reg(out.len() as u8 - 1)
            }
        }
    }

    /// The fill computing node `id`, or `op(lhs, id)` when `outer` is given.
    fn fill(&self, id: u32, outer: Option<(Op, u32)>) -> HoleFill {
        let mut instrs = Vec::new();
        match outer {
            None => {
                if let Kind::Leaf(v, _) = self.kinds[id as usize] {
                    return HoleFill::bare(v);
                }
                self.emit(id, &mut instrs);
            }
            Some((op, l)) => {
                let x = self.emit(l, &mut instrs);
                let y = self.emit(id, &mut instrs);
                instrs.push(binary(op, x, y));
            }
        }
        HoleFill::seq(instrs)
    }
}

fn binary(op: Op, x: Operand, y: Operand) -> Instr {
    if op.is_commutative() && y < x {
        Instr::new(op, y, x)
    } else {
        Instr::new(op, x, y)
    }
}
