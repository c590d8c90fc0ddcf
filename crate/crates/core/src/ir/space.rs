//! The space of hole fillings, counted exactly and indexable by rank.
//!
//! A filling is pruned-canonical when
//! (a) `fadd`/`fmul` operands are ordered (`lhs <= rhs`),
//! (b) every register except a hole's last is read by a later instruction of that hole, and
//! (c) every load is read by some hole that has it in scope (a bare designation counts).
//!
//! Fillings are grouped into strata by total instruction count. Within a stratum they are
//! ranked by hole (earlier holes vary slowest), then by per-hole length and covered-load set,
//! then by instruction choices in `Op` and operand order, and finally by affine choices.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Filling, HoleFill, HoleKind, Instr, Op, Operand, Program, Skeleton, ValueId};

/// Longest instruction sequence a hole may hold.
pub const MAX_HOLE_LEN: usize = 10;
/// Most loads a single hole can be obliged to consume.
const MAX_LOCAL_BITS: usize = 6;

#[derive(Debug, Clone, Copy)]
struct Choice {
    instr: Instr,
    /// Registers read.
    regs: u16,
    /// Tracked loads read, as local bits.
    loads: u8,
}

/// All pruned sequences for one hole, up to a maximum length, grouped into cells by
/// (length, exact set of tracked loads read).
#[derive(Debug, Clone)]
pub struct HoleSpace {
    kind: HoleKind,
    scope: Vec<ValueId>,
    /// Local bit per scope position (0 if untracked).
    scope_bits: Vec<u8>,
    /// Global load id of each local bit.
    bit_loads: Vec<usize>,
    max_len: usize,
    choices: Vec<Vec<Choice>>,
    /// Per length L >= 1: completions from (k, pending, covered) ending at each final set.
    tables: Vec<Vec<u128>>,
    /// (length, local covered set, count), count > 0, sorted.
    cells: Vec<(usize, u8, u128)>,
}

impl HoleSpace {
    /// `tracked` selects the loads (by global id) whose consumption is recorded.
    pub fn new(sk: &Skeleton, hole: usize, max_len: usize, tracked: u64) -> HoleSpace {
        assert!(max_len <= MAX_HOLE_LEN, "at most {MAX_HOLE_LEN} instructions per hole");
        let h = &sk.holes[hole];
        let mut bit_loads = Vec::new();
        let scope_bits: Vec<u8> = h
            .scope
            .iter()
            .map(|&v| match sk.load_of(v) {
                Some(l) if tracked >> l & 1 == 1 => {
                    bit_loads.push(l);
                    1 << (bit_loads.len() - 1)
                }
                _ => 0,
            })
            .collect();
        assert!(bit_loads.len() <= MAX_LOCAL_BITS, "too many loads in scope of hole {hole}");
        let mut hs = HoleSpace {
            kind: h.kind,
            scope: h.scope.clone(),
            scope_bits,
            bit_loads,
            max_len,
            choices: Vec::new(),
            tables: Vec::new(),
            cells: Vec::new(),
        };
        hs.choices = (0..max_len).map(|k| hs.step_choices(k)).collect();
        hs.tables = alloc::vec![Vec::new()];
        for len in 1..=max_len {
            let t = hs.table(len);
            hs.tables.push(t);
        }
        hs.cells = hs.compute_cells();
        hs
    }

    fn nbits(&self) -> usize {
        self.bit_loads.len()
    }

    fn step_choices(&self, k: usize) -> Vec<Choice> {
        let mut ops: Vec<(Operand, u16, u8)> =
            self.scope.iter().zip(&self.scope_bits).map(|(&v, &b)| (Operand::Value(v), 0, b)).collect();
        ops.extend((0..k).map(|r| (Operand::Reg(r as u8), 1u16 << r, 0)));
        let mut out = Vec::new();
        for op in Op::ALL {
            for (i, a) in ops.iter().enumerate() {
                if op.is_unary() {
                    out.push(Choice { instr: Instr::unary(op, a.0), regs: a.1, loads: a.2 });
                    continue;
                }
                let start = if op.is_commutative() { i } else { 0 };
                for b in &ops[start..] {
                    out.push(Choice { instr: Instr::new(op, a.0, b.0), regs: a.1 | b.1, loads: a.2 | b.2 });
                }
            }
        }
        out
    }

    #[inline]
    fn idx(&self, len: usize, k: usize, pending: usize, covered: usize) -> usize {
        let nb = 1 << self.nbits();
        ((k << len | pending) * nb + covered) * nb
    }

    fn table(&self, len: usize) -> Vec<u128> {
        let nb = 1usize << self.nbits();
        let mut t = alloc::vec![0u128; (len + 1) * (1 << len) * nb * nb];
        let last = 1usize << (len - 1);
        for cov in 0..nb {
            let i = self.idx(len, len, last, cov);
            t[i + cov] = 1;
        }
        for k in (0..len).rev() {
            for pending in 0..(1usize << k) {
                for cov in 0..nb {
                    let at = self.idx(len, k, pending, cov);
                    for c in &self.choices[k] {
                        let p2 = (pending & !(c.regs as usize)) | 1 << k;
                        let c2 = cov | c.loads as usize;
                        let from = self.idx(len, k + 1, p2, c2);
                        for fin in 0..nb {
                            t[at + fin] = t[at + fin].saturating_add(t[from + fin]);
                        }
                    }
                }
            }
        }
        t
    }

    fn compute_cells(&self) -> Vec<(usize, u8, u128)> {
        let nb = 1usize << self.nbits();
        let mut cells = Vec::new();
        match self.kind {
            HoleKind::Init | HoleKind::Return => {
                for c in 0..nb {
                    let n = self.scope_bits.iter().filter(|&&b| b as usize == c).count() as u128;
                    if n > 0 {
                        cells.push((0, c as u8, n));
                    }
                }
            }
            HoleKind::Update => cells.push((0, 0, 1)),
            HoleKind::Store => {}
        }
        for len in 1..=self.max_len {
            let base = self.idx(len, 0, 0, 0);
            for c in 0..nb {
                let n = self.tables[len][base + c];
                if n > 0 {
                    cells.push((len, c as u8, n));
                }
            }
        }
        cells
    }

    /// Global load mask of a local covered set.
    pub fn global_mask(&self, local: u8) -> u64 {
        (0..self.nbits()).filter(|b| local >> b & 1 == 1).fold(0, |m, b| m | 1 << self.bit_loads[b])
    }

    /// Number of sequences of exactly `len` instructions (bare designations count as 0).
    pub fn count(&self, len: usize) -> u128 {
        self.cells.iter().filter(|c| c.0 == len).fold(0u128, |s, c| s.saturating_add(c.2))
    }

    pub fn total(&self) -> u128 {
        self.cells.iter().fold(0u128, |s, c| s.saturating_add(c.2))
    }

    /// The `idx`-th sequence of a cell.
    pub fn unrank(&self, len: usize, local: u8, mut idx: u128) -> HoleFill {
        if len == 0 {
            if self.kind == HoleKind::Update {
                return HoleFill::default();
            }
            for (&v, &b) in self.scope.iter().zip(&self.scope_bits) {
                if b == local {
                    if idx == 0 {
                        return HoleFill::bare(v);
                    }
                    idx -= 1;
                }
            }
            panic!("rank out of range");
        }
        let t = &self.tables[len];
        let (mut pending, mut cov) = (0usize, 0usize);
        let mut instrs = Vec::with_capacity(len);
        for k in 0..len {
            let mut picked = None;
            for c in &self.choices[k] {
                let p2 = (pending & !(c.regs as usize)) | 1 << k;
                let c2 = cov | c.loads as usize;
                let n = t[self.idx(len, k + 1, p2, c2) + local as usize];
                if idx < n {
                    picked = Some((c.instr, p2, c2));
                    break;
                }
                idx -= n;
            }
            let (ins, p2, c2) = picked.expect("rank out of range");
            instrs.push(ins);
            pending = p2;
            cov = c2;
        }
        HoleFill::seq(instrs)
    }

    /// Inverse of [`unrank`](Self::unrank): the cell and index of a sequence, or `None` if
    /// it is outside the pruned space.
    pub fn rank(&self, hf: &HoleFill) -> Option<(usize, u8, u128)> {
        let len = hf.instrs.len();
        if len > self.max_len {
            return None;
        }
        if len == 0 {
            return match (hf.bare, self.kind) {
                (None, HoleKind::Update) => Some((0, 0, 0)),
                (Some(v), HoleKind::Init | HoleKind::Return) => {
                    let pos = self.scope.iter().position(|&s| s == v)?;
                    let local = self.scope_bits[pos];
                    let idx = self.scope_bits[..pos].iter().filter(|&&b| b == local).count();
                    Some((0, local, idx as u128))
                }
                _ => None,
            };
        }
        if hf.bare.is_some() {
            return None;
        }
        // Covered set first, since counts depend on the target cell.
        let mut local = 0u8;
        for k in 0..len {
            let c = self.choices[k].iter().find(|c| c.instr == hf.instrs[k])?;
            local |= c.loads;
        }
        let t = &self.tables[len];
        let (mut pending, mut cov, mut idx) = (0usize, 0usize, 0u128);
        for k in 0..len {
            for c in &self.choices[k] {
                let p2 = (pending & !(c.regs as usize)) | 1 << k;
                let c2 = cov | c.loads as usize;
                if c.instr == hf.instrs[k] {
                    if t[self.idx(len, k + 1, p2, c2) + local as usize] == 0 {
                        return None;
                    }
                    pending = p2;
                    cov = c2;
                    break;
                }
                idx += t[self.idx(len, k + 1, p2, c2) + local as usize];
            }
        }
        Some((len, local, idx))
    }

    /// Maps a rank over the whole hole space to a sequence, returning the global loads read.
    pub fn unrank_any(&self, mut idx: u128) -> (HoleFill, u64) {
        for &(len, c, n) in &self.cells {
            if idx < n {
                return (self.unrank(len, c, idx), self.global_mask(c));
            }
            idx -= n;
        }
        panic!("rank out of range");
    }

    fn cells(&self) -> &[(usize, u8, u128)] {
        &self.cells
    }
}

/// Products of hole spaces plus affine choices, with obligations on which loads the
/// selected holes must read between them.
#[derive(Debug, Clone)]
pub struct FillingSpace {
    sk: Arc<Skeleton>,
    holes: Vec<usize>,
    spaces: Vec<HoleSpace>,
    with_affine: bool,
    required: u64,
    /// Compact index of each required load.
    req_bits: Vec<usize>,
    max_total: usize,
    /// count_from[s][t][m]: completions from slot s with t instructions left and required
    /// loads `m` (compact) already covered.
    count_from: Vec<Vec<Vec<u128>>>,
}

impl FillingSpace {
    /// Space over `holes` (and affine slots if `with_affine`). Every load in `required`
    /// must be read by one of those holes.
    pub fn new(sk: Arc<Skeleton>, holes: Vec<usize>, with_affine: bool, required: u64, max_len: usize) -> FillingSpace {
        let req_bits: Vec<usize> = (0..64).filter(|b| required >> b & 1 == 1).collect();
        let spaces: Vec<HoleSpace> = holes.iter().map(|&h| HoleSpace::new(&sk, h, max_len, required)).collect();
        let max_total = max_len * holes.len();
        let nm = 1usize << req_bits.len();
        let full = nm - 1;
        let mut count_from = alloc::vec![alloc::vec![alloc::vec![0u128; nm]; max_total + 1]; holes.len() + 1];
        count_from[holes.len()][0][full] = 1;
        for s in (0..holes.len()).rev() {
            for t in 0..=max_total {
                for m in 0..nm {
                    let mut sum = 0u128;
                    for &(len, c, n) in spaces[s].cells() {
                        if len > t {
                            continue;
                        }
                        let m2 = m | compact(spaces[s].global_mask(c), &req_bits);
                        sum = sum.saturating_add(n.saturating_mul(count_from[s + 1][t - len][m2]));
                    }
                    count_from[s][t][m] = sum;
                }
            }
        }
        FillingSpace { sk, holes, spaces, with_affine, required, req_bits, max_total, count_from }
    }

    /// The whole space of a skeleton: every hole, every affine slot, every load obliged.
    pub fn full(sk: Arc<Skeleton>, max_len: usize) -> FillingSpace {
        let holes = (0..sk.holes.len()).collect();
        let required = if sk.loads.is_empty() { 0 } else { u64::MAX >> (64 - sk.loads.len()) };
        FillingSpace::new(sk, holes, true, required, max_len)
    }

    pub fn skeleton(&self) -> &Arc<Skeleton> {
        &self.sk
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    pub fn required(&self) -> u64 {
        self.required
    }

    fn affine_product(&self) -> u128 {
        if !self.with_affine {
            return 1;
        }
        self.sk.affine.iter().fold(1u128, |p, a| p.saturating_mul(a.candidates.len() as u128))
    }

    /// Number of fillings using exactly `total` instructions; `None` if it does not fit
    /// in 128 bits.
    pub fn stratum_len(&self, total: usize) -> Option<u128> {
        if total > self.max_total {
            return Some(0);
        }
        let n = self.count_from[0][total][0].checked_mul(self.affine_product())?;
        (n != u128::MAX && self.count_from[0][total][0] != u128::MAX).then_some(n)
    }

    /// The `rank`-th filling of a stratum. Holes outside the space are left empty.
    pub fn unrank(&self, total: usize, mut rank: u128) -> Filling {
        let mut fill = Filling {
            holes: alloc::vec![HoleFill::default(); self.sk.holes.len()],
            affine: alloc::vec![0; self.sk.affine.len()],
        };
        let ap = self.affine_product();
        let mut aff = rank % ap;
        rank /= ap;
        let (mut t, mut m) = (total, 0usize);
        for (s, sp) in self.spaces.iter().enumerate() {
            let mut done = false;
            for &(len, c, n) in sp.cells() {
                if len > t {
                    continue;
                }
                let m2 = m | compact(sp.global_mask(c), &self.req_bits);
                let rest = self.count_from[s + 1][t - len][m2];
                let block = n.saturating_mul(rest);
                if rank < block {
                    fill.holes[self.holes[s]] = sp.unrank(len, c, rank / rest);
                    rank %= rest;
                    t -= len;
                    m = m2;
                    done = true;
                    break;
                }
                rank -= block;
            }
            assert!(done, "rank out of range");
        }
        if self.with_affine {
            for (slot, a) in self.sk.affine.iter().enumerate() {
                let r = a.candidates.len() as u128;
                fill.affine[slot] = (aff % r) as u8;
                aff /= r;
            }
        }
        fill
    }

    /// Uniform sample from the whole space by independent per-hole draws and rejection on
    /// the load obligations. Gives up after `attempts` rejections.
    pub fn sample<R: Rng>(&self, rng: &mut R, attempts: usize) -> Option<Filling> {
        let totals: Vec<u128> = self.spaces.iter().map(HoleSpace::total).collect();
        if totals.contains(&0) {
            return None;
        }
        for _ in 0..attempts {
            let mut fill = Filling {
                holes: alloc::vec![HoleFill::default(); self.sk.holes.len()],
                affine: alloc::vec![0; self.sk.affine.len()],
            };
            let mut covered = 0u64;
            for (s, sp) in self.spaces.iter().enumerate() {
                let (hf, mask) = sp.unrank_any(rng.random_range(0..totals[s]));
                fill.holes[self.holes[s]] = hf;
                covered |= mask;
            }
            if self.with_affine {
                for (slot, a) in self.sk.affine.iter().enumerate() {
                    fill.affine[slot] = rng.random_range(0..a.candidates.len()) as u8;
                }
            }
            if covered & self.required == self.required {
                return Some(fill);
            }
        }
        None
    }
}

fn compact(mask: u64, req_bits: &[usize]) -> usize {
    req_bits.iter().enumerate().filter(|(_, &b)| mask >> b & 1 == 1).fold(0, |m, (i, _)| m | 1 << i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillMode {
    Exhaustive,
    Random,
}

/// Iterator over the programs of a skeleton's filling space.
pub struct Fillings {
    space: FillingSpace,
    mode: FillMode,
    limit: Option<u64>,
    seed: u64,
    emitted: u64,
    stratum: usize,
    rank: u128,
}

impl Iterator for Fillings {
    type Item = Program;

    fn next(&mut self) -> Option<Program> {
        if self.limit.is_some_and(|l| self.emitted >= l) {
            return None;
        }
        let fill = match self.mode {
            FillMode::Exhaustive => loop {
                if self.stratum > self.space.max_total() {
                    return None;
                }
                // Enumeration ends at a stratum too large to index.
                let len = self.space.stratum_len(self.stratum)?;
                if self.rank < len {
                    let f = self.space.unrank(self.stratum, self.rank);
                    self.rank += 1;
                    break f;
                }
                self.stratum += 1;
                self.rank = 0;
            },
            FillMode::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(self.emitted);
                self.space.sample(&mut rng, 100_000)?
            }
        };
        self.emitted += 1;
        Some(Program::new_unchecked(self.space.sk.clone(), fill))
    }
}

/// Fillings of a skeleton with at most `max_instr` instructions per hole.
///
/// Exhaustive mode walks strata in increasing instruction count and ranks in order. Random
/// mode draws `max_candidates` fillings uniformly and independently from the pruned space;
/// candidate `k` uses its own stream of a generator seeded with `seed`.
pub fn fill_holes(sk: Arc<Skeleton>, max_instr: usize, mode: FillMode, max_candidates: Option<u64>, seed: u64) -> Fillings {
    assert!(mode == FillMode::Exhaustive || max_candidates.is_some(), "random mode needs a candidate budget");
    Fillings {
        space: FillingSpace::full(sk, max_instr),
        mode,
        limit: max_candidates,
        seed,
        emitted: 0,
        stratum: 0,
        rank: 0,
    }
}
