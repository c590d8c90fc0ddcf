//! The synthesis loop.
//!
//! Compositions are visited in canonical order. Within one, the holes split into a
//! *prefix* (accumulator initialisers and updates, plus affine index choices) and the
//! *outputs* (stores and the return). Output holes feed nothing but the observable
//! result, so once a prefix is fixed a probe run tells exactly which scope values each
//! output hole sees and the oracle says what it must produce there; the solver then
//! fills the outputs directly instead of enumerating them. Prefixes are enumerated by
//! total instruction count, in rank order (exhaustive) or a keyed permutation of each
//! stratum (random).

mod order;
mod solver;

pub use order::{sub_seed, Feistel};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::fragments::{enumerate_compositions, instantiate_fragments, lower, Composition, Compositions, FragmentSet};
use crate::ir::{emit_c, probe, FillMode, Filling, FillingSpace, HoleKind, Outputs, Probe, Program, Skeleton, Stmt, TestCase, MAX_HOLE_LEN};
use crate::oracle::{equivalent_on, gen_tests, Incompatible, OracleFn, Tol};
use crate::query::RuleLibrary;
use crate::sigmodel::{FunctionSpec, Ineligible};
use solver::{Solver, Task};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub max_fragments: usize,
    pub max_instr: usize,
    pub mode: FillMode,
    /// Prefixes tried per composition, in either mode.
    pub max_candidates: u64,
    pub n_tests: usize,
    pub verify_tests: usize,
    pub seed: u64,
    /// Enforced by the caller's stop callback; carried here for reporting.
    pub timeout_seconds: u64,
    pub size_range: (i64, i64),
    pub tol: Tol,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            max_fragments: 4,
            max_instr: 3,
            mode: FillMode::Random,
            max_candidates: 200_000,
            n_tests: 8,
            verify_tests: 64,
            seed: 0,
            timeout_seconds: 900,
            size_range: (1, 4),
            tol: Tol::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub compositions_tried: u64,
    pub candidates_tried: u64,
    pub candidates_trapped: u64,
    /// Filled in by whoever owns a clock.
    pub wall_seconds: f64,
    pub winning_composition_index: Option<u64>,
}

#[derive(Debug, Clone)]
pub enum SynthesisResult {
    Found { program: Program, c_text: String, stats: Stats },
    Exhausted(Stats),
    TimedOut(Stats),
}

impl SynthesisResult {
    pub fn stats(&self) -> &Stats {
        match self {
            SynthesisResult::Found { stats, .. } | SynthesisResult::Exhausted(stats) | SynthesisResult::TimedOut(stats) => {
                stats
            }
        }
    }

    pub fn stats_mut(&mut self) -> &mut Stats {
        match self {
            SynthesisResult::Found { stats, .. } | SynthesisResult::Exhausted(stats) | SynthesisResult::TimedOut(stats) => {
                stats
            }
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            SynthesisResult::Found { .. } => "found",
            SynthesisResult::Exhausted(_) => "exhausted",
            SynthesisResult::TimedOut(_) => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Incompatible(#[from] Incompatible),
    #[error(transparent)]
    Ineligible(#[from] Ineligible),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

/// How one composition's search ended.
#[derive(Debug, Clone)]
pub enum Outcome {
    Found(Program),
    Exhausted,
    Stopped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompStats {
    pub candidates: u64,
    pub trapped: u64,
}

/// Everything fixed for a synthesis run: fragments, tests and oracle results.
pub struct Problem<'a> {
    spec: &'a FunctionSpec,
    oracle: &'a OracleFn,
    cfg: SearchConfig,
    set: FragmentSet,
    quick: Vec<TestCase>,
    quick_out: Vec<Outputs>,
    verify: Vec<TestCase>,
}

/// Checks made every this many prefixes.
const STOP_STRIDE: u64 = 64;

enum Tried {
    Trapped,
    Rejected,
    Found(Program),
}

impl<'a> Problem<'a> {
    pub fn new(
        spec: &'a FunctionSpec,
        lib: &RuleLibrary,
        oracle: &'a OracleFn,
        cfg: &SearchConfig,
    ) -> Result<Problem<'a>, SearchError> {
        spec.check_synthesizable()?;
        oracle.check_compatible(spec)?;
        let (lo, hi) = cfg.size_range;
        if !(1 <= lo && lo <= hi && hi <= 16) {
            return Err(SearchError::Config("size range must satisfy 1 <= lo <= hi <= 16"));
        }
        if cfg.n_tests == 0 || cfg.verify_tests == 0 {
            return Err(SearchError::Config("test counts must be positive"));
        }
        if cfg.max_fragments == 0 || cfg.max_candidates == 0 {
            return Err(SearchError::Config("max_fragments and max_candidates must be positive"));
        }
        if cfg.max_instr > MAX_HOLE_LEN {
            return Err(SearchError::Config("max_instr exceeds the supported hole length"));
        }
        let quick = gen_tests(spec, sub_seed(cfg.seed, 1), cfg.n_tests, cfg.size_range)?;
        let quick_out = quick.iter().map(|c| oracle.eval(c)).collect();
        let verify = gen_tests(spec, sub_seed(cfg.seed, 2), cfg.verify_tests, cfg.size_range)?;
        let set = instantiate_fragments(lib, spec);
        Ok(Problem { spec, oracle, cfg: cfg.clone(), set, quick, quick_out, verify })
    }

    pub fn fragments(&self) -> &FragmentSet {
        &self.set
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn compositions(&self) -> Compositions<'_> {
        enumerate_compositions(&self.set, self.cfg.max_fragments)
    }

    /// Searches the composition with canonical index `index`. `stop` is polled between
    /// candidates.
    pub fn search(&self, index: u64, comp: &Composition, stop: &dyn Fn() -> bool) -> (Outcome, CompStats) {
        let sk = Arc::new(lower(comp, &self.set, self.spec));
        let mut stats = CompStats::default();
        if !self.feasible(&sk) {
            return (Outcome::Exhausted, stats);
        }
        let outputs: Vec<usize> = (0..sk.holes.len()).filter(|&h| sk.holes[h].kind.is_output()).collect();
        let prefix: Vec<usize> = (0..sk.holes.len()).filter(|&h| !sk.holes[h].kind.is_output()).collect();
        let all = if sk.loads.is_empty() { 0 } else { u64::MAX >> (64 - sk.loads.len()) };
        let out_scope = outputs.iter().fold(0, |m, &h| m | sk.loads_in_scope(h));
        let space = FillingSpace::new(sk.clone(), prefix, true, all & !out_scope, self.cfg.max_instr);
        let mut ctx = Ctx::new(&sk, &outputs, self.cfg.max_instr, self.cfg.tol);
        for t in 0..=space.max_total() {
            let Some(n) = space.stratum_len(t) else { break };
            let perm = Feistel::new(n, sub_seed(self.cfg.seed, index.wrapping_mul(1 << 8) ^ t as u64 ^ 0x5eed));
            for r in 0..n {
                if stats.candidates == self.cfg.max_candidates {
                    return (Outcome::Exhausted, stats);
                }
                if stats.candidates % STOP_STRIDE == 0 && stop() {
                    return (Outcome::Stopped, stats);
                }
                stats.candidates += 1;
                let rank = match self.cfg.mode {
                    FillMode::Exhaustive => r,
                    FillMode::Random => perm.apply(r),
                };
                match self.try_prefix(&sk, space.unrank(t, rank), &mut ctx) {
                    Tried::Found(p) => return (Outcome::Found(p), stats),
                    Tried::Trapped => stats.trapped += 1,
                    Tried::Rejected => {}
                }
            }
        }
        (Outcome::Exhausted, stats)
    }

    /// No candidate can succeed if the oracle changes a buffer nothing stores to.
    fn feasible(&self, sk: &Skeleton) -> bool {
        let stored = stored_buffers(&sk.body);
        self.quick.iter().zip(&self.quick_out).all(|(case, out)| {
            out.buffers.iter().all(|(p, b)| {
                stored >> p & 1 == 1 || case.buffer(*p).iter().zip(b).all(|(&i, &o)| self.cfg.tol.close(i, o))
            }) && (out.ret.is_some() == sk.ret.is_some())
        })
    }

    fn try_prefix(&self, sk: &Arc<Skeleton>, mut fill: Filling, ctx: &mut Ctx) -> Tried {
        for c in ctx.cons.iter_mut() {
            c.points.clear();
            c.targets.clear();
        }
        let tol = self.cfg.tol;
        for (case, want) in self.quick.iter().zip(&self.quick_out) {
            if probe(sk, &fill, case, &mut ctx.probe).is_err() {
                return Tried::Trapped;
            }
            if ctx.probe.tainted {
                return Tried::Rejected;
            }
            ctx.seen.clear();
            for a in &case.args {
                let len = if let crate::ir::Arg::Buffer(b) = a { b.len() } else { 0 };
                ctx.seen.push(alloc::vec![false; len]);
            }
            for &(hole, buf, idx, at) in ctx.probe.stores.iter().rev() {
                if core::mem::replace(&mut ctx.seen[buf][idx], true) {
                    continue;
                }
                let c = &mut ctx.cons[ctx.slot[hole]];
                c.points.extend_from_slice(&ctx.probe.env[at..at + sk.holes[hole].scope.len()]);
                c.targets.push(want.buffer(buf).unwrap()[idx]);
            }
            for &(p, ref out) in &want.buffers {
                if ctx.stored >> p & 1 == 1 {
                    let input = case.buffer(p);
                    let untouched = ctx.seen[p].iter().enumerate().filter(|(_, &s)| !s).map(|(i, _)| i);
                    if untouched.into_iter().any(|i| !tol.close(input[i], out[i])) {
                        return Tried::Rejected;
                    }
                }
            }
            if let (Some(at), Some(h)) = (ctx.probe.ret_env, sk.ret) {
                let c = &mut ctx.cons[ctx.slot[h]];
                c.points.extend_from_slice(&ctx.probe.env[at..at + sk.holes[h].scope.len()]);
                c.targets.push(want.ret.unwrap());
            }
        }

        // Loads the prefix leaves unread go to the first output hole that can see them.
        let all = if sk.loads.is_empty() { 0 } else { u64::MAX >> (64 - sk.loads.len()) };
        let mut left = all & !fill.holes.iter().fold(0, |m, h| m | h.loads_read(sk));
        for (k, &h) in ctx.outputs.iter().enumerate() {
            let oblig = left & sk.loads_in_scope(h);
            left &= !oblig;
            let scope = &sk.holes[h].scope;
            ctx.bits.clear();
            ctx.bits.extend(scope.iter().map(|&v| sk.load_of(v).map_or(0, |l| (1u64 << l) & oblig)));
            let task = Task {
                hole: h,
                scope,
                bits: &ctx.bits,
                points: &ctx.cons[k].points,
                targets: &ctx.cons[k].targets,
                oblig,
                min_size: if sk.holes[h].kind == HoleKind::Return { 0 } else { 1 },
            };
            match ctx.solver.solve(&task) {
                Some(hf) => fill.holes[h] = hf,
                None => return Tried::Rejected,
            }
        }
        debug_assert_eq!(left, 0);

        let Ok(p) = Program::new(sk.clone(), fill) else { return Tried::Rejected };
        if equivalent_on(&p, self.oracle, self.spec, &self.quick, tol).is_equivalent()
            && equivalent_on(&p, self.oracle, self.spec, &self.verify, tol).is_equivalent()
        {
            Tried::Found(p)
        } else {
            Tried::Rejected
        }
    }
}

#[derive(Default)]
struct Constraints {
    points: Vec<f64>,
    targets: Vec<f64>,
}

/// Per-composition scratch state.
struct Ctx {
    outputs: Vec<usize>,
    /// Hole id -> index into `outputs`.
    slot: Vec<usize>,
    stored: u64,
    cons: Vec<Constraints>,
    probe: Probe,
    seen: Vec<Vec<bool>>,
    bits: Vec<u64>,
    solver: Solver,
}

impl Ctx {
    fn new(sk: &Skeleton, outputs: &[usize], max_instr: usize, tol: Tol) -> Ctx {
        let mut slot = alloc::vec![usize::MAX; sk.holes.len()];
        for (k, &h) in outputs.iter().enumerate() {
            slot[h] = k;
        }
        Ctx {
            outputs: outputs.to_vec(),
            slot,
            stored: stored_buffers(&sk.body),
            cons: outputs.iter().map(|_| Constraints::default()).collect(),
            probe: Probe::default(),
            seen: Vec::new(),
            bits: Vec::new(),
            solver: Solver::new(max_instr, tol),
        }
    }
}

fn stored_buffers(body: &[Stmt]) -> u64 {
    body.iter().fold(0, |m, s| match s {
        Stmt::Loop { body, .. } => m | stored_buffers(body),
        Stmt::Store { buffer, .. } => m | 1 << buffer,
        Stmt::Load(_) => m,
    })
}

/// Runs the whole search on one thread. `stop` is polled between candidates; when it
/// returns true the result is `TimedOut`.
pub fn synthesize(
    spec: &FunctionSpec,
    lib: &RuleLibrary,
    oracle: &OracleFn,
    cfg: &SearchConfig,
    stop: &dyn Fn() -> bool,
) -> Result<SynthesisResult, SearchError> {
    let problem = Problem::new(spec, lib, oracle, cfg)?;
    let mut stats = Stats::default();
    for (i, comp) in problem.compositions().enumerate() {
        if stop() {
            return Ok(SynthesisResult::TimedOut(stats));
        }
        stats.compositions_tried += 1;
        let (outcome, cs) = problem.search(i as u64, &comp, stop);
        stats.candidates_tried += cs.candidates;
        stats.candidates_trapped += cs.trapped;
        match outcome {
            Outcome::Found(program) => {
                stats.winning_composition_index = Some(i as u64);
                let c_text = emit_c(&program);
                return Ok(SynthesisResult::Found { program, c_text, stats });
            }
            Outcome::Stopped => return Ok(SynthesisResult::TimedOut(stats)),
            Outcome::Exhausted => {}
        }
    }
    Ok(SynthesisResult::Exhausted(stats))
}
