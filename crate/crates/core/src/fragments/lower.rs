use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Composition, FragmentSet, Node};
use crate::ir::{
    AffineSlot, Hole, HoleKind, IndexExpr, LoadIndex, LoadSite, LoopInfo, ParamKind, SkParam, Skeleton, Stmt, Value,
    ValueId, ValueKind,
};
use crate::query::TemplateKind;
use crate::sigmodel::{CType, FunctionSpec};

struct Lowering<'a> {
    set: &'a FragmentSet,
    spec: &'a FunctionSpec,
    sk: Skeleton,
    /// Enclosing loops as (fragment id, loop id), outermost first.
    enclosing: Vec<(usize, usize)>,
}

impl Lowering<'_> {
    fn param(&self, name: &str) -> usize {
        self.spec.param(name).expect("fragment arguments name parameters").position
    }

    fn value(&mut self, kind: ValueKind, name: String) -> ValueId {
        self.sk.values.push(Value { kind, name });
        (self.sk.values.len() - 1) as ValueId
    }

    fn hole(&mut self, kind: HoleKind, env: &[ValueId]) -> usize {
        let mut scope = env.to_vec();
        scope.sort_unstable();
        self.sk.holes.push(Hole { kind, scope });
        self.sk.holes.len() - 1
    }

    fn load(&mut self, buffer: usize, index: LoadIndex) -> (usize, ValueId) {
        let id = self.sk.loads.len();
        let v = self.value(ValueKind::Load(id), alloc::format!("v{id}"));
        self.sk.loads.push(LoadSite { buffer, value: v, index });
        (id, v)
    }

    fn nodes(&mut self, nodes: &[Node], env: &mut Vec<ValueId>) -> Vec<Stmt> {
        let mut out = Vec::new();
        for n in nodes {
            let frag = self.set.get(n.frag).clone();
            match frag.kind {
                TemplateKind::Loop | TemplateKind::ZipLoop => {
                    let init = self.hole(HoleKind::Init, env);
                    let id = self.sk.loops.len();
                    let depth = self.enclosing.len();
                    let var = match depth {
                        0..=3 => ["i", "j", "k", "l"][depth].to_string(),
                        d => alloc::format!("i{d}"),
                    };
                    let acc = self.value(ValueKind::Acc(id), alloc::format!("acc{id}"));
                    let bound = self.param(frag.bound().expect("loops have bounds"));
                    self.sk.loops.push(LoopInfo { bound, var, acc, init, update: usize::MAX, depth });
                    let mut inner = env.clone();
                    inner.push(acc);
                    let mut loads = Vec::new();
                    for b in frag.buffers() {
                        let (ld, v) = self.load(self.param(b), LoadIndex::Fixed(IndexExpr::Var(id)));
                        loads.push(ld);
                        inner.push(v);
                    }
                    self.enclosing.push((n.frag, id));
                    let body = self.nodes(&n.children, &mut inner);
                    self.enclosing.pop();
                    self.sk.loops[id].update = self.hole(HoleKind::Update, &inner);
                    env.push(acc);
                    out.push(Stmt::Loop { id, loads, body });
                }
                TemplateKind::Store => {
                    let hole = self.hole(HoleKind::Store, env);
                    // Nearest enclosing loop whose bound sizes the buffer.
                    let &(_, loop_id) = self
                        .enclosing
                        .iter()
                        .rev()
                        .find(|&&(f, _)| self.set.store_fits(n.frag, f))
                        .expect("validity guarantees a sizing loop");
                    out.push(Stmt::Store { hole, buffer: self.param(frag.buffers()[0]), loop_id });
                }
                TemplateKind::AffineAccess => {
                    let loops: Vec<usize> = self.enclosing.iter().map(|&(_, l)| l).collect();
                    let mut candidates: Vec<IndexExpr> = loops.iter().map(|&l| IndexExpr::Var(l)).collect();
                    if let [outer, inner] = loops[..] {
                        let (bo, bi) = (self.sk.loops[outer].bound, self.sk.loops[inner].bound);
                        candidates.push(IndexExpr::Linear { major: outer, stride: bi, minor: inner });
                        candidates.push(IndexExpr::Linear { major: inner, stride: bo, minor: outer });
                    }
                    let slot = self.sk.affine.len();
                    let (ld, v) = self.load(self.param(frag.buffers()[0]), LoadIndex::Choice(slot));
                    self.sk.affine.push(AffineSlot { load: ld, candidates });
                    env.push(v);
                    out.push(Stmt::Load(ld));
                }
            }
        }
        out
    }
}

/// Lowers a valid composition to a skeleton.
///
/// Values are numbered `0.0`, `1.0`, float parameters in declaration order, then loads and
/// accumulators as the walk creates them. Each loop gets an init hole (scope: values before
/// the loop) and an update hole (scope: values at the end of the body); its accumulator is
/// readable inside the loop and by everything after it in the enclosing block.
pub fn lower(comp: &Composition, set: &FragmentSet, spec: &FunctionSpec) -> Skeleton {
    let params = spec
        .params()
        .iter()
        .map(|p| SkParam {
            name: p.name.clone(),
            kind: match p.ctype {
                CType::Int => ParamKind::Int,
                CType::Float => ParamKind::Float,
                _ => ParamKind::Buffer,
            },
        })
        .collect::<Vec<_>>();
    let sk = Skeleton {
        name: spec.name().to_string(),
        returns: spec.signature.return_type.is_some(),
        params,
        values: Vec::new(),
        loops: Vec::new(),
        loads: Vec::new(),
        affine: Vec::new(),
        holes: Vec::new(),
        body: Vec::new(),
        ret: None,
    };
    let mut lw = Lowering { set, spec, sk, enclosing: Vec::new() };
    let mut env = alloc::vec![
        lw.value(ValueKind::Zero, "0.0".into()),
        lw.value(ValueKind::One, "1.0".into()),
    ];
    for (i, p) in spec.params().iter().enumerate() {
        if p.ctype == CType::Float {
            env.push(lw.value(ValueKind::Scalar(i), p.name.clone()));
        }
    }
    lw.sk.body = lw.nodes(&comp.roots, &mut env);
    if lw.sk.returns {
        lw.sk.ret = Some(lw.hole(HoleKind::Return, &env));
    }
    lw.sk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::{enumerate_compositions, instantiate_fragments};
    use crate::query::RuleLibrary;
    use crate::sigmodel::parse_spec;

    const GEMV: &str = "function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void\n\
                        relations:\n  size(x, n)\n  size(y, m)\n  output(y)\n";
    const DOT: &str = "function dot(n: int, x: float*, y: float*) -> float\nrelations:\n  size(x, n)\n  size(y, n)\n";

    fn gemv_winner() -> (Skeleton, FragmentSet) {
        let spec = parse_spec(GEMV).unwrap();
        let set = instantiate_fragments(&RuleLibrary::default_library(), &spec);
        // ids: 0 loop(m,y), 1 loop(n,x), 2 store(y), 3 affine_access(a)
        let comp = Composition::new(alloc::vec![Node::new(
            0,
            alloc::vec![Node::new(1, alloc::vec![Node::leaf(3)]), Node::leaf(2)],
        )]);
        (lower(&comp, &set, &spec), set)
    }

    #[test]
    fn gemv_sketch_shape() {
        let (sk, _) = gemv_winner();
        let text = sk.to_string();
        let expected = "\
void gemv(int m, int n, float alpha, float *a, float *x, float beta, float *y) {
  float acc0 = ?0;
  for (int i = 0; i < m; ++i) {
    float v0 = y[i];
    float acc1 = ?1;
    for (int j = 0; j < n; ++j) {
      float v1 = x[j];
      float v2 = a[?];
      acc1 = ?2;
    }
    y[i] = ?3;
    acc0 = ?4;
  }
}
";
        assert_eq!(text, expected);
        assert_eq!(sk.holes.len(), 5);
        assert_eq!(sk.holes[3].kind, HoleKind::Store);
        // Store sees 0.0, 1.0, alpha, beta, acc0, v0 and acc1, but not the inner loads.
        let names: Vec<&str> = sk.holes[3].scope.iter().map(|&v| sk.values[v as usize].name.as_str()).collect();
        assert_eq!(names, ["0.0", "1.0", "alpha", "beta", "acc0", "v0", "acc1"]);
    }

    #[test]
    fn affine_candidates_two_loops() {
        let (sk, _) = gemv_winner();
        let texts: Vec<String> = sk.affine[0].candidates.iter().map(|c| sk.index_text(c)).collect();
        assert_eq!(texts, ["i", "j", "i * n + j", "j * m + i"]);
    }

    #[test]
    fn dot_single_loop_holes() {
        let spec = parse_spec(DOT).unwrap();
        let set = instantiate_fragments(&RuleLibrary::default_library(), &spec);
        let comp = enumerate_compositions(&set, 1).next().unwrap();
        let sk = lower(&comp, &set, &spec);
        let kinds: Vec<HoleKind> = sk.holes.iter().map(|h| h.kind).collect();
        assert_eq!(kinds, [HoleKind::Init, HoleKind::Update, HoleKind::Return]);
        assert_eq!(lower(&comp, &set, &spec), sk);
    }
}
