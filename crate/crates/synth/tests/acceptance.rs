//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails. Runs without
//! the libtest harness so the lines are always printed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relsynth_core::fragments::{enumerate_compositions, instantiate_fragments, Composition};
use relsynth_core::oracle::{equivalent_on, gen_tests, lookup_oracle, Tol};
use relsynth_core::query::{solve, RuleLibrary};
use relsynth_core::search::{SearchConfig, SynthesisResult};
use relsynth_core::sigmodel::FunctionSpec;

const MATCH_LIMIT: Duration = Duration::from_secs(1);
const GEMV_SEED: u64 = 42;
const GEMV_LIMIT_SECS: u64 = 900;
const FRESH_TESTS: usize = 1000;
const FRESH_SEED: u64 = 0x00f7_e5b0;
const TOL: Tol = Tol { abs: 1e-9, rel: 1e-6 };
const KERNELS: [&str; 6] = ["dot", "scal", "vadd", "axpy", "asum", "copy"];
const KERNEL_LIMIT: Duration = Duration::from_secs(60);
const QUERY_PAIRS: usize = 1000;
const QUERY_SEED: u64 = 0x9e37;
const MAX_FRAGMENTS: usize = 4;
const FUZZ_RUNS: usize = 100_000;
const FUZZ_SEED: u64 = 0xacce;

fn spec_path(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "specs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn synth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synth")).args(args).output().unwrap()
}

fn load(name: &str) -> FunctionSpec {
    FunctionSpec::parse(&std::fs::read_to_string(spec_path(name)).unwrap()).unwrap()
}

type Verdict = Result<String, String>;

fn match_gemv() -> Verdict {
    let start = Instant::now();
    let out = synth(&["match", "--spec", &spec_path("gemv.sig")]);
    let took = start.elapsed();
    let got: BTreeSet<String> = String::from_utf8_lossy(&out.stdout).lines().map(common::short_head).collect();
    let want: BTreeSet<String> =
        ["loop(m,y)", "loop(n,x)", "store(y)", "affine_access(a)"].iter().map(|s| s.to_string()).collect();
    let lines = out.stdout.iter().filter(|&&b| b == b'\n').count();
    if out.status.code() != Some(0) || got != want || lines != 4 {
        return Err(format!("got {got:?} ({lines} lines, exit {:?})", out.status.code()));
    }
    if took >= MATCH_LIMIT {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("4 fragments in {:.3}s", took.as_secs_f64()))
}

/// Nested i/j loops, `x[j]` and `a[i * n + j]` in the inner one, and the `y[i]` store
/// after it in the outer one.
fn gemv_shape(c: &str) -> Result<(), String> {
    let lines: Vec<&str> = c.lines().collect();
    let find = |pred: &dyn Fn(&str) -> bool| lines.iter().position(|l| pred(l));
    let outer = find(&|l| l.starts_with("  for (int i = 0; i < m;")).ok_or("no outer loop over m")?;
    let inner = find(&|l| l.starts_with("    for (int j = 0; j < n;")).ok_or("no inner loop over n")?;
    let inner_end = (inner + 1..lines.len()).find(|&k| lines[k] == "    }").ok_or("inner loop not closed")?;
    let body = &lines[inner..inner_end];
    if !(outer < inner && body.iter().any(|l| l.contains("x[j]")) && body.iter().any(|l| l.contains("a[i * n + j]"))) {
        return Err("inner loop does not read x[j] and a[i * n + j]".into());
    }
    let store = find(&|l| l.starts_with("    y[i] = ")).ok_or("no y[i] store in the outer loop")?;
    if store < inner_end {
        return Err("y[i] store precedes the inner loop".into());
    }
    Ok(())
}

fn gemv_found() -> Verdict {
    let spec = load("gemv.sig");
    let lib = RuleLibrary::default_library();
    let oracle = lookup_oracle("gemv").unwrap();
    let cfg = SearchConfig { seed: GEMV_SEED, timeout_seconds: GEMV_LIMIT_SECS, ..SearchConfig::default() };
    let result = relsynth::run::run(&spec, &lib, oracle, &cfg, 1).map_err(|e| e.to_string())?;
    let secs = result.stats().wall_seconds;
    let SynthesisResult::Found { program, c_text, stats } = result else {
        return Err(format!("status {} after {secs:.1}s", result.status()));
    };
    gemv_shape(&c_text).map_err(|e| format!("{e}:\n{c_text}"))?;
    let fresh = gen_tests(&spec, FRESH_SEED, FRESH_TESTS, cfg.size_range).unwrap();
    let verdict = equivalent_on(&program, oracle, &spec, &fresh, TOL);
    if !verdict.is_equivalent() {
        return Err(format!("fresh tests: {verdict:?}\n{c_text}"));
    }
    if secs >= GEMV_LIMIT_SECS as f64 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok(format!(
        "found in {secs:.1}s ({} compositions, {} candidates), {FRESH_TESTS} fresh tests pass",
        stats.compositions_tried, stats.candidates_tried
    ))
}

fn kernels() -> Verdict {
    let mut notes = Vec::new();
    for k in KERNELS {
        let spec = spec_path(&format!("{k}.sig"));
        let args = ["run", "--spec", &spec, "--oracle", k, "--mode", "exhaustive", "--max-instr", "2", "--emit", "json"];
        let mut reports = Vec::new();
        for _ in 0..2 {
            let start = Instant::now();
            let out = synth(&args);
            let took = start.elapsed();
            if out.status.code() != Some(0) {
                return Err(format!("{k}: exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
            }
            if took >= KERNEL_LIMIT {
                return Err(format!("{k}: took {took:?}"));
            }
            reports.push((out.stdout, took));
        }
        if reports[0].0 != reports[1].0 {
            return Err(format!("{k}: reports differ between runs"));
        }
        let v: serde_json::Value = serde_json::from_slice(&reports[0].0).map_err(|e| format!("{k}: {e}"))?;
        if v["status"] != "found" {
            return Err(format!("{k}: status {}", v["status"]));
        }
        let slowest = reports.iter().map(|r| r.1).max().unwrap();
        notes.push(format!("{k} {:.1}s", slowest.as_secs_f64()));
    }
    Ok(format!("all found, reports identical ({})", notes.join(", ")))
}

fn query_differential() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(QUERY_SEED);
    let mut answers = 0;
    for i in 0..QUERY_PAIRS {
        let text = common::random_spec_text(&mut rng);
        let spec = FunctionSpec::parse(&text).unwrap();
        let body = common::random_body(&mut rng, spec.params().len());
        let got = solve(&body, &spec);
        if got != common::brute_solve(&body, &spec) {
            let body: Vec<String> = body.iter().map(|l| l.to_string()).collect();
            return Err(format!("pair {i} differs: {} on\n{text}", body.join(", ")));
        }
        answers += got.len();
    }
    Ok(format!("{QUERY_PAIRS} pairs agree ({answers} answers)"))
}

fn composition_differential() -> Verdict {
    let spec = load("gemv.sig");
    let full = instantiate_fragments(&RuleLibrary::default_library(), &spec);
    let mut total = 0;
    for mask in 0u32..1 << full.len() {
        let ids: Vec<usize> = (0..full.len()).filter(|i| mask >> i & 1 == 1).collect();
        let set = full.subset(&ids, &spec);
        let got: Vec<Composition> = enumerate_compositions(&set, MAX_FRAGMENTS).collect();
        if got != common::brute_compositions(&set, &spec, MAX_FRAGMENTS) {
            return Err(format!("subset {ids:?} differs"));
        }
        total += got.len();
    }
    Ok(format!("{} subsets agree ({total} compositions)", 1 << full.len()))
}

fn interpreter_fuzz() -> Verdict {
    let trapped = common::fuzz(FUZZ_RUNS, FUZZ_SEED)?;
    Ok(format!("{FUZZ_RUNS} runs, {trapped} trapped"))
}

fn gemv_no_output() -> Verdict {
    let out = synth(&["run", "--spec", &spec_path("gemv_no_output.sig"), "--oracle", "gemv", "--emit", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    if v["status"] != "exhausted" || out.status.code() != Some(1) {
        return Err(format!("status {} exit {:?}", v["status"], out.status.code()));
    }
    Ok(format!("exhausted after {} compositions", v["stats"]["compositions_tried"]))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("match lists the four GEMV fragments", match_gemv),
        ("GEMV is found and passes fresh tests", gemv_found),
        ("BLAS-1 kernels found, deterministic", kernels),
        ("query solver vs brute force", query_differential),
        ("composition enumeration vs brute force", composition_differential),
        ("interpreter fuzz: traps and purity", interpreter_fuzz),
        ("GEMV without output annotation", gemv_no_output),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(note) => println!("PASS {}: {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
