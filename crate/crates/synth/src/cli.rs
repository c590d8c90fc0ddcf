use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use relsynth_core::fragments::instantiate_fragments;
use relsynth_core::ir::FillMode;
use relsynth_core::oracle::{lookup_oracle, Tol};
use relsynth_core::query::RuleLibrary;
use relsynth_core::search::{SearchConfig, SynthesisResult};
use relsynth_core::sigmodel::FunctionSpec;

use crate::report;

pub const EXIT_FOUND: i32 = 0;
pub const EXIT_NOT_FOUND: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_UNKNOWN_ORACLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "synth", version, about = "Synthesise numeric kernels from annotated signatures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Search for a program equivalent to a reference oracle.
    Run(RunArgs),
    /// Parse and validate a spec file.
    Check {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Print the fragment instances the rules produce for a spec, one per line.
    Match {
        #[arg(long)]
        spec: PathBuf,
        /// Rule file; the built-in rules when omitted.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Emit {
    C,
    Json,
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Rule file; the built-in rules when omitted.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    oracle: String,
    #[arg(long, default_value_t = 4)]
    max_fragments: usize,
    #[arg(long, default_value_t = 3)]
    max_instr: usize,
    #[arg(long, value_enum, default_value_t = Mode::Random)]
    mode: Mode,
    #[arg(long, default_value_t = 200_000)]
    max_candidates: u64,
    #[arg(long, default_value_t = 8)]
    tests: usize,
    #[arg(long, default_value_t = 64)]
    verify_tests: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 900)]
    timeout_secs: u64,
    #[arg(long, value_enum, default_value_t = Emit::C)]
    emit: Emit,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl RunArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            max_fragments: self.max_fragments,
            max_instr: self.max_instr,
            mode: match self.mode {
                Mode::Exhaustive => FillMode::Exhaustive,
                Mode::Random => FillMode::Random,
            },
            max_candidates: self.max_candidates,
            n_tests: self.tests,
            verify_tests: self.verify_tests,
            seed: self.seed,
            timeout_seconds: self.timeout_secs,
            size_range: (1, 4),
            tol: Tol::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|source| Failure::Io { path: path.display().to_string(), source })
}

fn load_spec(path: &Path) -> Result<FunctionSpec, Failure> {
    FunctionSpec::parse(&read(path)?).map_err(|e| Failure::Parse { path: path.display().to_string(), msg: e.to_string() })
}

fn load_rules(path: Option<&Path>) -> Result<RuleLibrary, Failure> {
    match path {
        None => Ok(RuleLibrary::default_library()),
        Some(p) => RuleLibrary::parse(&read(p)?).map_err(|e| Failure::Parse { path: p.display().to_string(), msg: e.to_string() }),
    }
}

/// Runs the command line `args` (program name first), writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_FOUND };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match cli.cmd {
        Cmd::Check { spec } => check(&spec, out, err),
        Cmd::Match { spec, rules } => match_cmd(&spec, rules.as_deref(), out, err),
        Cmd::Run(args) => run(&args, out, err),
    }
}

fn check(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match load_spec(path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Err(e) = spec.check_synthesizable() {
        let _ = writeln!(err, "error: {}: {e}", path.display());
        return EXIT_INVALID;
    }
    let n_rel: usize = spec.relations().map(|r| r.tuples.len()).sum();
    let _ = writeln!(out, "ok: {} ({} params, {} relation tuples)", spec.name(), spec.params().len(), n_rel);
    EXIT_FOUND
}

fn match_cmd(spec: &Path, rules: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = load_spec(spec).and_then(|s| Ok((s, load_rules(rules)?)));
    let (spec, lib) = match loaded {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    for f in instantiate_fragments(&lib, &spec).iter() {
        let _ = writeln!(out, "{f}");
    }
    EXIT_FOUND
}

fn run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let loaded = load_spec(&args.spec).and_then(|s| Ok((s, load_rules(args.rules.as_deref())?)));
    let (spec, lib) = match loaded {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let oracle = match lookup_oracle(&args.oracle) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_UNKNOWN_ORACLE;
        }
    };
    let cfg = args.config();
    let result = match crate::run::run(&spec, &lib, oracle, &cfg, args.workers) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let s = result.stats();
    let _ = writeln!(
        err,
        "status: {}\ncompositions_tried: {}\ncandidates_tried: {}\ncandidates_trapped: {}\nwall_seconds: {:.3}",
        result.status(),
        s.compositions_tried,
        s.candidates_tried,
        s.candidates_trapped,
        s.wall_seconds
    );
    match args.emit {
        Emit::Json => {
            let _ = out.write_all(report::to_json(&report::build(&result, &spec, &lib, &args.oracle, &cfg)).as_bytes());
        }
        Emit::C => {
            if let SynthesisResult::Found { c_text, .. } = &result {
                let _ = out.write_all(c_text.as_bytes());
            }
        }
    }
    match result {
        SynthesisResult::Found { .. } => EXIT_FOUND,
        _ => EXIT_NOT_FOUND,
    }
}
