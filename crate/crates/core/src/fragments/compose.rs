use alloc::vec::Vec;
use core::fmt;

use super::FragmentSet;
use crate::query::TemplateKind;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Node {
    pub frag: usize,
    pub children: Vec<Node>,
}

impl Node {
    pub fn leaf(frag: usize) -> Node {
        Node { frag, children: Vec::new() }
    }

    pub fn new(frag: usize, children: Vec<Node>) -> Node {
        Node { frag, children }
    }
}

/// An ordered forest of fragment instances.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Composition {
    pub roots: Vec<Node>,
}

impl Composition {
    pub fn new(roots: Vec<Node>) -> Composition {
        Composition { roots }
    }

    pub fn size(&self) -> usize {
        fn count(n: &Node) -> usize {
            1 + n.children.iter().map(count).sum::<usize>()
        }
        self.roots.iter().map(count).sum()
    }

    /// Preorder walk: `id + 1` on entering a node, `0` on leaving it. Compositions of equal
    /// size are ordered by this key.
    pub fn key(&self) -> Vec<u16> {
        fn walk(n: &Node, out: &mut Vec<u16>) {
            out.push(n.frag as u16 + 1);
            for c in &n.children {
                walk(c, out);
            }
            out.push(0);
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut out);
        }
        out
    }

    /// Fragment ids in preorder.
    pub fn preorder(&self) -> Vec<usize> {
        self.key().into_iter().filter(|&k| k > 0).map(|k| k as usize - 1).collect()
    }

    pub fn display<'a>(&'a self, set: &'a FragmentSet) -> impl fmt::Display + 'a {
        struct D<'a>(&'a Composition, &'a FragmentSet);
        fn node(n: &Node, set: &FragmentSet, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str(&set.get(n.frag).short())?;
            if !n.children.is_empty() {
                f.write_str(" { ")?;
                list(&n.children, set, f)?;
                f.write_str(" }")?;
            }
            Ok(())
        }
        fn list(ns: &[Node], set: &FragmentSet, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (i, n) in ns.iter().enumerate() {
                if i > 0 {
                    f.write_str("; ")?;
                }
                node(n, set, f)?;
            }
            Ok(())
        }
        impl fmt::Display for D<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("[")?;
                list(&self.0.roots, self.1, f)?;
                f.write_str("]")
            }
        }
        D(self, set)
    }
}

/// Structural and contextual validity:
/// - every instance occurs at most once and only loops have children;
/// - a store has an enclosing loop whose bound sizes the stored buffer;
/// - an affine access has one or two enclosing loops.
pub fn is_valid(comp: &Composition, set: &FragmentSet) -> bool {
    fn check(n: &Node, set: &FragmentSet, ancestors: &mut Vec<usize>, seen: &mut u64) -> bool {
        if n.frag >= set.len() || *seen >> n.frag & 1 == 1 {
            return false;
        }
        *seen |= 1 << n.frag;
        let kind = set.get(n.frag).kind;
        let ok = match kind {
            TemplateKind::Store => ancestors.iter().any(|&l| set.store_fits(n.frag, l)),
            TemplateKind::AffineAccess => (1..=2).contains(&ancestors.len()),
            TemplateKind::Loop | TemplateKind::ZipLoop => true,
        };
        if !ok || (!kind.is_loop() && !n.children.is_empty()) {
            return false;
        }
        ancestors.push(n.frag);
        let ok = n.children.iter().all(|c| check(c, set, ancestors, seen));
        ancestors.pop();
        ok
    }
    let mut seen = 0u64;
    !comp.roots.is_empty() && comp.roots.iter().all(|r| check(r, set, &mut Vec::new(), &mut seen))
}

/// All ordered forests over exactly the fragments in `mask`.
fn forests(mask: u64, set: &FragmentSet) -> Vec<Vec<Node>> {
    if mask == 0 {
        return alloc::vec![Vec::new()];
    }
    let mut out = Vec::new();
    for r in bits(mask) {
        let rest = mask & !(1 << r);
        let leaf = !set.get(r).kind.is_loop();
        // Split `rest` into r's descendants and the remaining siblings.
        let mut sub = rest;
        loop {
            if !(leaf && sub != 0) {
                let below = forests(sub, set);
                let after = forests(rest & !sub, set);
                for children in &below {
                    for tail in &after {
                        let mut f = Vec::with_capacity(1 + tail.len());
                        f.push(Node::new(r, children.clone()));
                        f.extend(tail.iter().cloned());
                        out.push(f);
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    out
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |i| mask >> i & 1 == 1)
}

/// Iterative-deepening sequence of valid compositions: all compositions of one instance,
/// then two, and so on up to `max_fragments`, each level in canonical key order.
pub struct Compositions<'a> {
    set: &'a FragmentSet,
    max: usize,
    level: usize,
    buf: alloc::vec::IntoIter<Composition>,
}

impl Iterator for Compositions<'_> {
    type Item = Composition;

    fn next(&mut self) -> Option<Composition> {
        loop {
            if let Some(c) = self.buf.next() {
                return Some(c);
            }
            if self.level >= self.max.min(self.set.len()) {
                return None;
            }
            self.level += 1;
            self.buf = level(self.set, self.level).into_iter();
        }
    }
}

fn level(set: &FragmentSet, k: usize) -> Vec<Composition> {
    let n = set.len();
    let mut out: Vec<(Vec<u16>, Composition)> = Vec::new();
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let mask = subset.iter().fold(0u64, |m, &i| m | 1 << i);
        for f in forests(mask, set) {
            let comp = Composition::new(f);
            if is_valid(&comp, set) {
                out.push((comp.key(), comp));
            }
        }
        // Next k-combination in lexicographic order.
        let Some(pos) = (0..k).rev().find(|&i| subset[i] < n - k + i) else { break };
        subset[pos] += 1;
        for i in pos + 1..k {
            subset[i] = subset[i - 1] + 1;
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.dedup_by(|a, b| a.0 == b.0);
    out.into_iter().map(|(_, c)| c).collect()
}

pub fn enumerate_compositions(set: &FragmentSet, max_fragments: usize) -> Compositions<'_> {
    Compositions { set, max: max_fragments, level: 0, buf: Vec::new().into_iter() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragments::instantiate_fragments;
    use crate::query::RuleLibrary;
    use crate::sigmodel::parse_spec;
    use alloc::string::{String, ToString};

    const GEMV: &str = "function gemv(m: int, n: int, alpha: float, a: float*, x: float*, beta: float, y: float*) -> void\n\
                        relations:\n  size(x, n)\n  size(y, m)\n  output(y)\n";
    const DOT: &str = "function dot(n: int, x: float*, y: float*) -> float\nrelations:\n  size(x, n)\n  size(y, n)\n";

    fn set_for(text: &str) -> FragmentSet {
        instantiate_fragments(&RuleLibrary::default_library(), &parse_spec(text).unwrap())
    }

    fn shown(set: &FragmentSet, max: usize) -> Vec<String> {
        enumerate_compositions(set, max).map(|c| c.display(set).to_string()).collect()
    }

    #[test]
    fn gemv_contains_the_nested_shape() {
        let set = set_for(GEMV);
        let all = shown(&set, 4);
        assert!(all.contains(&"[loop(m,y) { loop(n,x) { affine_access(a) }; store(y) }]".to_string()));
        assert!(all.contains(&"[loop(m,y) { store(y); loop(n,x) { affine_access(a) } }]".to_string()));
        assert!(!all.iter().any(|s| s == "[store(y)]"));
        // Store inside the x loop alone is not sized by n.
        assert!(!all.contains(&"[loop(n,x) { store(y) }]".to_string()));
    }

    #[test]
    fn dot_single_fragment_level() {
        let set = set_for(DOT);
        assert_eq!(shown(&set, 1), ["[loop(n,x)]", "[loop(n,y)]", "[zip_loop(n,x,y)]", "[zip_loop(n,y,x)]"]);
    }

    #[test]
    fn sizes_nondecreasing_and_unique() {
        let set = set_for(GEMV);
        let comps: Vec<Composition> = enumerate_compositions(&set, 4).collect();
        for w in comps.windows(2) {
            assert!(w[0].size() <= w[1].size());
            if w[0].size() == w[1].size() {
                assert!(w[0].key() < w[1].key());
            }
        }
        assert!(comps.iter().all(|c| is_valid(c, &set)));
    }

    #[test]
    fn affine_depth_limit() {
        let spec = "function f(n: int, x: float*, y: float*, z: float*, a: float*) -> void\n\
                    relations:\n  size(x, n)\n  size(y, n)\n  size(z, n)\n";
        let set = set_for(spec);
        let a = set.iter().find(|f| f.kind == TemplateKind::AffineAccess).unwrap().id;
        let l = |name: &str| set.iter().find(|f| f.short() == name).unwrap().id;
        let deep = Composition::new(alloc::vec![Node::new(
            l("loop(n,x)"),
            alloc::vec![Node::new(l("loop(n,y)"), alloc::vec![Node::new(l("loop(n,z)"), alloc::vec![Node::leaf(a)])])],
        )]);
        assert!(!is_valid(&deep, &set));
        let ok = Composition::new(alloc::vec![Node::new(l("loop(n,x)"), alloc::vec![Node::leaf(a)])]);
        assert!(is_valid(&ok, &set));
        assert!(!is_valid(&Composition::new(alloc::vec![Node::leaf(a)]), &set));
    }
}
