//! Wall-clock limits and the composition-level worker pool.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use relsynth_core::fragments::Composition;
use relsynth_core::ir::emit_c;
use relsynth_core::oracle::OracleFn;
use relsynth_core::query::RuleLibrary;
use relsynth_core::search::{synthesize, Outcome, Problem, SearchConfig, SearchError, Stats, SynthesisResult};
use relsynth_core::sigmodel::FunctionSpec;

/// Runs the search with `cfg.timeout_seconds` as a wall-clock budget. One worker gives
/// the deterministic sequential search; more split compositions between threads and
/// keep the found program with the lowest composition index.
pub fn run(
    spec: &FunctionSpec,
    lib: &RuleLibrary,
    oracle: &OracleFn,
    cfg: &SearchConfig,
    workers: usize,
) -> Result<SynthesisResult, SearchError> {
    let start = Instant::now();
    let deadline = start + Duration::from_secs(cfg.timeout_seconds);
    let expired = || Instant::now() >= deadline;
    let mut result = if workers <= 1 {
        synthesize(spec, lib, oracle, cfg, &expired)?
    } else {
        parallel(spec, lib, oracle, cfg, workers, &expired)?
    };
    result.stats_mut().wall_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

fn parallel(
    spec: &FunctionSpec,
    lib: &RuleLibrary,
    oracle: &OracleFn,
    cfg: &SearchConfig,
    workers: usize,
    expired: &(dyn Fn() -> bool + Sync),
) -> Result<SynthesisResult, SearchError> {
    let problem = Problem::new(spec, lib, oracle, cfg)?;
    let comps: Vec<Composition> = problem.compositions().collect();
    let next = AtomicUsize::new(0);
    let best = AtomicU64::new(u64::MAX);
    let found = Mutex::new(None);
    let totals = Mutex::new((Stats::default(), false));

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= comps.len() || i as u64 > best.load(Ordering::SeqCst) {
                    break;
                }
                if expired() {
                    totals.lock().unwrap().1 = true;
                    break;
                }
                let stop = || expired() || best.load(Ordering::SeqCst) < i as u64;
                let (outcome, cs) = problem.search(i as u64, &comps[i], &stop);
                {
                    let mut t = totals.lock().unwrap();
                    t.0.compositions_tried += 1;
                    t.0.candidates_tried += cs.candidates;
                    t.0.candidates_trapped += cs.trapped;
                }
                match outcome {
                    Outcome::Found(p) => {
                        let mut f = found.lock().unwrap();
                        if best.fetch_min(i as u64, Ordering::SeqCst) > i as u64 {
                            *f = Some((i as u64, p));
                        }
                    }
                    Outcome::Stopped if expired() => totals.lock().unwrap().1 = true,
                    _ => {}
                }
            });
        }
    });

    let (mut stats, timed_out) = totals.into_inner().unwrap();
    Ok(match found.into_inner().unwrap() {
        Some((i, program)) => {
            stats.winning_composition_index = Some(i);
            let c_text = emit_c(&program);
            SynthesisResult::Found { program, c_text, stats }
        }
        None if timed_out => SynthesisResult::TimedOut(stats),
        None => SynthesisResult::Exhausted(stats),
    })
}
