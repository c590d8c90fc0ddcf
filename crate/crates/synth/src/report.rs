//! Canonical JSON reports. Field order is fixed by declaration order; the wall-clock
//! time is only reported for timeouts so that identical runs give identical bytes.

use relsynth_core::fragments::{enumerate_compositions, instantiate_fragments};
use relsynth_core::ir::{HoleKind, LoadIndex, Operand, Program};
use relsynth_core::query::RuleLibrary;
use relsynth_core::search::{SearchConfig, SynthesisResult};
use relsynth_core::sigmodel::FunctionSpec;
use relsynth_core::ir::FillMode;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Report {
    pub status: &'static str,
    pub function: String,
    pub oracle: String,
    pub config: ConfigReport,
    pub stats: StatsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub composition: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub program: Option<ProgramDump>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ConfigReport {
    pub max_fragments: usize,
    pub max_instr: usize,
    pub mode: &'static str,
    pub max_candidates: u64,
    pub n_tests: usize,
    pub verify_tests: usize,
    pub seed: u64,
    pub timeout_seconds: u64,
    pub size_range: [i64; 2],
    pub tol_abs: f64,
    pub tol_rel: f64,
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub compositions_tried: u64,
    pub candidates_tried: u64,
    pub candidates_trapped: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    pub winning_composition_index: Option<u64>,
}

/// Instruction list per hole, operands by name.
#[derive(Debug, Serialize)]
pub struct ProgramDump {
    pub holes: Vec<HoleDump>,
    pub indices: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct HoleDump {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bare: Option<String>,
    pub instrs: Vec<[String; 3]>,
}

pub fn mode_name(mode: FillMode) -> &'static str {
    match mode {
        FillMode::Exhaustive => "exhaustive",
        FillMode::Random => "random",
    }
}

fn config(cfg: &SearchConfig) -> ConfigReport {
    ConfigReport {
        max_fragments: cfg.max_fragments,
        max_instr: cfg.max_instr,
        mode: mode_name(cfg.mode),
        max_candidates: cfg.max_candidates,
        n_tests: cfg.n_tests,
        verify_tests: cfg.verify_tests,
        seed: cfg.seed,
        timeout_seconds: cfg.timeout_seconds,
        size_range: [cfg.size_range.0, cfg.size_range.1],
        tol_abs: cfg.tol.abs,
        tol_rel: cfg.tol.rel,
    }
}

pub fn dump_program(p: &Program) -> ProgramDump {
    let sk = &p.skeleton;
    let name = |o: Operand| match o {
        Operand::Value(v) => sk.values[v as usize].name.clone(),
        Operand::Reg(r) => format!("r{r}"),
    };
    let holes = sk
        .holes
        .iter()
        .zip(&p.filling.holes)
        .map(|(h, f)| HoleDump {
            kind: match h.kind {
                HoleKind::Init => "init",
                HoleKind::Update => "update",
                HoleKind::Store => "store",
                HoleKind::Return => "return",
            },
            bare: f.bare.map(|v| sk.values[v as usize].name.clone()),
            instrs: f.instrs.iter().map(|i| [i.op.name().to_string(), name(i.lhs), name(i.rhs)]).collect(),
        })
        .collect();
    let indices = sk
        .loads
        .iter()
        .filter_map(|ld| match ld.index {
            LoadIndex::Choice(slot) => {
                let e = sk.affine[slot].candidates[p.filling.affine[slot] as usize];
                Some(format!("{}[{}]", sk.params[ld.buffer].name, sk.index_text(&e)))
            }
            LoadIndex::Fixed(_) => None,
        })
        .collect();
    ProgramDump { holes, indices }
}

pub fn build(
    result: &SynthesisResult,
    spec: &FunctionSpec,
    lib: &RuleLibrary,
    oracle: &str,
    cfg: &SearchConfig,
) -> Report {
    let s = result.stats();
    let stats = StatsReport {
        compositions_tried: s.compositions_tried,
        candidates_tried: s.candidates_tried,
        candidates_trapped: s.candidates_trapped,
        wall_seconds: matches!(result, SynthesisResult::TimedOut(_)).then_some(s.wall_seconds),
        winning_composition_index: s.winning_composition_index,
    };
    let (composition, program, c) = match result {
        SynthesisResult::Found { program, c_text, stats } => {
            let set = instantiate_fragments(lib, spec);
            let comp = stats
                .winning_composition_index
                .and_then(|i| enumerate_compositions(&set, cfg.max_fragments).nth(i as usize))
                .map(|c| c.display(&set).to_string());
            (comp, Some(dump_program(program)), Some(c_text.clone()))
        }
        _ => (None, None, None),
    };
    Report {
        status: result.status(),
        function: spec.name().to_string(),
        oracle: oracle.to_string(),
        config: config(cfg),
        stats,
        composition,
        program,
        c,
    }
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialises");
    s.push('\n');
    s
}
