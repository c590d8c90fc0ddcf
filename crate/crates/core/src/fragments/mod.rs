//! Fragment templates instantiated from rule matches, and their compositions.

mod compose;
mod lower;

pub use compose::{enumerate_compositions, is_valid, Composition, Compositions, Node};
pub use lower::lower;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::query::{match_library, HeadInstance, RuleLibrary, TemplateKind};
use crate::sigmodel::{Atom, CType, FunctionSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FragmentInstance {
    pub id: usize,
    pub kind: TemplateKind,
    pub args: Vec<Atom>,
}

impl FragmentInstance {
    fn param(&self, i: usize) -> &str {
        self.args[i].as_param().expect("fragment arguments are type-checked")
    }

    /// Loop bound parameter.
    pub fn bound(&self) -> Option<&str> {
        self.kind.is_loop().then(|| self.param(0))
    }

    /// Buffers the fragment reads or writes, in argument order.
    pub fn buffers(&self) -> Vec<&str> {
        match self.kind {
            TemplateKind::Loop => alloc::vec![self.param(2)],
            TemplateKind::ZipLoop => alloc::vec![self.param(2), self.param(4)],
            TemplateKind::Store | TemplateKind::AffineAccess => alloc::vec![self.param(0)],
        }
    }

    /// The instance with type arguments dropped, e.g. `loop(n,x)`.
    pub fn short(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if let Some(b) = self.bound() {
            parts.push(b);
        }
        parts.extend(self.buffers());
        alloc::format!("{}({})", self.kind, parts.join(","))
    }

    fn head(&self) -> HeadInstance {
        HeadInstance { kind: self.kind, args: self.args.clone() }
    }
}

impl fmt::Display for FragmentInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head())
    }
}

/// Instantiated fragments of one spec, with ids in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FragmentSet {
    frags: Vec<FragmentInstance>,
    /// For each store fragment, the loop fragments whose bound sizes the stored buffer.
    store_loops: Vec<u64>,
}

/// The most fragments a set may hold; compositions track membership in a `u64`.
pub const MAX_FRAGMENTS: usize = 64;

impl FragmentSet {
    /// Type-checks and numbers `heads`. Ill-typed heads are dropped.
    pub fn new(heads: impl IntoIterator<Item = HeadInstance>, spec: &FunctionSpec) -> FragmentSet {
        let heads: BTreeSet<HeadInstance> = heads.into_iter().filter(|h| well_typed(h, spec)).collect();
        assert!(heads.len() <= MAX_FRAGMENTS, "too many fragment instances ({})", heads.len());
        let frags: Vec<FragmentInstance> = heads
            .into_iter()
            .enumerate()
            .map(|(id, h)| FragmentInstance { id, kind: h.kind, args: h.args })
            .collect();
        let store_loops = frags
            .iter()
            .map(|s| {
                if s.kind != TemplateKind::Store {
                    return 0;
                }
                let x = s.args[0].clone();
                frags
                    .iter()
                    .filter(|l| l.kind.is_loop() && spec.holds("size", &[x.clone(), l.args[0].clone()]))
                    .fold(0u64, |m, l| m | 1 << l.id)
            })
            .collect();
        FragmentSet { frags, store_loops }
    }

    pub fn len(&self) -> usize {
        self.frags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frags.is_empty()
    }

    pub fn get(&self, id: usize) -> &FragmentInstance {
        &self.frags[id]
    }

    pub fn iter(&self) -> impl Iterator<Item = &FragmentInstance> {
        self.frags.iter()
    }

    /// Whether `loop_id` may serve as the indexing loop of store `store_id`.
    pub fn store_fits(&self, store_id: usize, loop_id: usize) -> bool {
        self.store_loops[store_id] >> loop_id & 1 == 1
    }

    /// Restricts the set to the given ids, renumbering in order.
    pub fn subset(&self, ids: &[usize], spec: &FunctionSpec) -> FragmentSet {
        FragmentSet::new(ids.iter().map(|&i| self.frags[i].head()), spec)
    }
}

fn well_typed(h: &HeadInstance, spec: &FunctionSpec) -> bool {
    let ty = |a: &Atom| a.as_param().and_then(|p| spec.param(p)).map(|p| &p.ctype);
    let array = |x: usize, t: usize| match ty(&h.args[x]) {
        Some(pt @ CType::Pointer(_)) => h.args[t] == Atom::Type(pt.clone()),
        _ => false,
    };
    if h.args.len() != h.kind.arity() {
        return false;
    }
    match h.kind {
        TemplateKind::Loop => ty(&h.args[0]) == Some(&CType::Int) && array(2, 1),
        TemplateKind::ZipLoop => ty(&h.args[0]) == Some(&CType::Int) && array(2, 1) && array(4, 3),
        TemplateKind::Store | TemplateKind::AffineAccess => array(0, 1),
    }
}

/// Every rule match in the library, deduplicated and numbered canonically.
pub fn instantiate_fragments(lib: &RuleLibrary, spec: &FunctionSpec) -> FragmentSet {
    FragmentSet::new(match_library(lib, spec), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sigmodel::parse_spec;
    use alloc::string::ToString;

    pub(crate) const GEMV: &str = "function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void\n\
                        relations:\n  size(x, n)\n  size(y, m)\n  output(y)\n";
    const DOT: &str = "function dot(n: int, x: float*, y: float*) -> float\nrelations:\n  size(x, n)\n  size(y, n)\n";

    fn shorts(set: &FragmentSet) -> Vec<String> {
        set.iter().map(FragmentInstance::short).collect()
    }

    #[test]
    fn gemv_fragments() {
        let spec = parse_spec(GEMV).unwrap();
        let set = instantiate_fragments(&RuleLibrary::default_library(), &spec);
        assert_eq!(shorts(&set), ["loop(m,y)", "loop(n,x)", "store(y)", "affine_access(a)"]);
        assert!(set.store_fits(2, 0));
        assert!(!set.store_fits(2, 1));
    }

    #[test]
    fn dot_fragments() {
        let spec = parse_spec(DOT).unwrap();
        let set = instantiate_fragments(&RuleLibrary::default_library(), &spec);
        assert_eq!(shorts(&set), ["loop(n,x)", "loop(n,y)", "zip_loop(n,x,y)", "zip_loop(n,y,x)"]);
        assert_eq!(set.get(2).to_string(), "zip_loop(n, float*, x, float*, y)");
    }

    #[test]
    fn no_relations_no_pointers() {
        let spec = parse_spec("function f(n: int, a: float) -> float").unwrap();
        assert!(instantiate_fragments(&RuleLibrary::default_library(), &spec).is_empty());
    }

    #[test]
    fn ill_typed_heads_are_dropped() {
        let spec = parse_spec("function f(n: float, x: float*) -> void\nrelations:\n  size(x, n)\n").unwrap();
        let set = instantiate_fragments(&RuleLibrary::default_library(), &spec);
        assert!(set.is_empty(), "{:?}", shorts(&set));
    }
}
