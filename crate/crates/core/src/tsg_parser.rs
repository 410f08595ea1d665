//! Tree-substitution partial parser built from learned associated subtrees.
//!
//! Each elementary tree is used as a flat rule `root -> frontier`; its internal
//! nodes ride along as payload and are only unfolded when the combiner seeds
//! the CFG chart. A frontier symbol is matched either by an input token with
//! that tag or by a completed item rooted in that symbol.

use std::collections::BTreeMap;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::cfg_parser::{dump_items, Backpointer, ItemKey};
use crate::learner::LearnedLexicon;
use crate::scalar::Ratio;
use crate::symbol::Symbol;
use crate::treebank::Tree;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElementaryTree {
    pub tree: Tree,
    pub root: Symbol,
    pub frontier: Vec<Symbol>,
    /// Contributed by at least one unconditional entry learned at θ = 1.
    pub sure: bool,
    /// Indices of the lexicon entries this tree came from.
    pub sources: Vec<usize>,
    pub count: u64,
}

#[derive(Clone, Debug, Default)]
pub struct Tsg {
    pub etrees: Vec<ElementaryTree>,
    pub start: Option<Symbol>,
    by_first: FxHashMap<Symbol, Vec<usize>>,
    unary: FxHashMap<Symbol, Vec<usize>>,
}

impl Tsg {
    /// Deduplicates `trees` by structure. Each tree carries its sure flag and
    /// source index.
    pub fn from_trees(trees: impl IntoIterator<Item = (Tree, bool, usize, u64)>) -> Tsg {
        let mut index: FxHashMap<Tree, usize> = FxHashMap::default();
        let mut etrees: Vec<ElementaryTree> = Vec::new();
        for (tree, sure, source, count) in trees {
            match index.get(&tree) {
                Some(&e) => {
                    let et = &mut etrees[e];
                    et.sure |= sure;
                    if !et.sources.contains(&source) {
                        et.sources.push(source);
                    }
                    et.count += count;
                }
                None => {
                    index.insert(tree.clone(), etrees.len());
                    etrees.push(ElementaryTree {
                        root: tree.label(0),
                        frontier: tree.frontier(0).expect("root exists"),
                        tree,
                        sure,
                        sources: vec![source],
                        count,
                    });
                }
            }
        }
        etrees.sort_by_cached_key(|e| e.tree.to_bracketed());
        let mut g = Tsg {
            etrees,
            ..Tsg::default()
        };
        for (e, et) in g.etrees.iter().enumerate() {
            if et.frontier.len() == 1 {
                g.unary.entry(et.frontier[0]).or_default().push(e);
            } else {
                g.by_first.entry(et.frontier[0]).or_default().push(e);
            }
        }
        g
    }

    pub fn with_start(mut self, start: Symbol) -> Tsg {
        self.start = Some(start);
        self
    }

    pub fn len(&self) -> usize {
        self.etrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etrees.is_empty()
    }

    /// Treat every elementary tree as sure.
    pub fn trust_all(mut self) -> Tsg {
        for e in &mut self.etrees {
            e.sure = true;
        }
        self
    }
}

/// Elementary trees from every entry's associated subtrees. A tree is sure
/// when some entry contributing it was learned at θ = 1 under the wildcard
/// context, i.e. its frontier was a constituent wherever it occurred.
pub fn build_tsg<T: Ratio>(lex: &LearnedLexicon<T>) -> Tsg {
    Tsg::from_trees(lex.entries.iter().enumerate().flat_map(|(i, e)| {
        let sure = e.theta.at_least(T::one()) && e.context.is_wildcard();
        e.subtrees
            .iter()
            .map(move |(t, c)| (t.clone(), sure, i, *c))
    }))
}

/// What fills one frontier position of an elementary tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Filler {
    /// The input tag at this position.
    Token(usize),
    Item(ItemKey),
}

impl Filler {
    pub fn span(&self) -> (usize, usize) {
        match self {
            Filler::Token(p) => (*p, p + 1),
            Filler::Item(k) => k.span(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Analysis {
    pub etree: usize,
    pub fillers: Vec<Filler>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialItem {
    pub key: ItemKey,
    pub analyses: Vec<Analysis>,
    pub sure: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialChart {
    pub n: usize,
    pub items: BTreeMap<ItemKey, PartialItem>,
}

impl PartialChart {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = ItemKey> + '_ {
        self.items.keys().copied()
    }

    pub fn sure_keys(&self) -> impl Iterator<Item = ItemKey> + '_ {
        self.items.values().filter(|i| i.sure).map(|i| i.key)
    }

    /// One line per item: `start end root sure|unsure analysis-count`.
    pub fn dump(&self) -> String {
        dump_items(self.items.values().map(|i| {
            let flag = if i.sure { "sure" } else { "unsure" };
            (i.key, flag.to_string(), i.analyses.len())
        }))
    }

    /// Marks every item sure.
    pub fn trust_all(&mut self) {
        for i in self.items.values_mut() {
            i.sure = true;
        }
    }

    /// Removes `gone`, then every analysis that used a removed item, then
    /// every item left without analyses, until nothing changes. Sure flags
    /// are recomputed. Returns all keys removed.
    pub fn remove(&mut self, g: &Tsg, gone: &FxHashSet<ItemKey>) -> Vec<ItemKey> {
        let mut removed: Vec<ItemKey> = Vec::new();
        let mut dead: FxHashSet<ItemKey> = FxHashSet::default();
        for k in gone {
            if self.items.remove(k).is_some() {
                removed.push(*k);
                dead.insert(*k);
            }
        }
        while !dead.is_empty() {
            let mut next = FxHashSet::default();
            for item in self.items.values_mut() {
                item.analyses.retain(|a| {
                    !a.fillers
                        .iter()
                        .any(|f| matches!(f, Filler::Item(k) if dead.contains(k)))
                });
                if item.analyses.is_empty() {
                    next.insert(item.key);
                }
            }
            for k in &next {
                self.items.remove(k);
                removed.push(*k);
            }
            dead = next;
        }
        self.recompute_sure(g);
        removed.sort();
        removed
    }

    /// Keeps only the analyses for which `keep` holds, cascading as
    /// [`PartialChart::remove`] does.
    pub fn retain_analyses(
        &mut self,
        g: &Tsg,
        mut keep: impl FnMut(&ItemKey, &Analysis) -> bool,
    ) -> Vec<ItemKey> {
        let mut empty = FxHashSet::default();
        for item in self.items.values_mut() {
            let key = item.key;
            item.analyses.retain(|a| keep(&key, a));
            if item.analyses.is_empty() {
                empty.insert(key);
            }
        }
        self.remove(g, &empty)
    }

    /// Least fixpoint: an item is sure iff one of its analyses uses a sure
    /// elementary tree and only sure items.
    pub fn recompute_sure(&mut self, g: &Tsg) {
        for item in self.items.values_mut() {
            item.sure = false;
        }
        loop {
            let mut changed = Vec::new();
            for item in self.items.values() {
                if item.sure {
                    continue;
                }
                let ok = item.analyses.iter().any(|a| {
                    g.etrees[a.etree].sure
                        && a.fillers.iter().all(|f| match f {
                            Filler::Token(_) => true,
                            Filler::Item(k) => self.items.get(k).is_some_and(|i| i.sure),
                        })
                });
                if ok {
                    changed.push(item.key);
                }
            }
            if changed.is_empty() {
                break;
            }
            for k in changed {
                self.items.get_mut(&k).expect("present").sure = true;
            }
        }
    }

    /// The tag sequence an analysis covers once every filler is unfolded.
    /// Unary cycles are skipped by never re-entering an item on the current
    /// path.
    pub fn replay(&self, g: &Tsg, input: &[Vec<Symbol>], a: &Analysis) -> Vec<Symbol> {
        self.replay_on(g, input, a, &mut Vec::new())
            .expect("items are built bottom-up, so one analysis is grounded")
    }

    fn replay_on(
        &self,
        g: &Tsg,
        input: &[Vec<Symbol>],
        a: &Analysis,
        path: &mut Vec<ItemKey>,
    ) -> Option<Vec<Symbol>> {
        let et = &g.etrees[a.etree];
        let mut out = Vec::new();
        for (sym, f) in et.frontier.iter().zip(&a.fillers) {
            match f {
                Filler::Token(p) => {
                    debug_assert!(input[*p].contains(sym));
                    out.push(*sym);
                }
                Filler::Item(k) => {
                    if path.contains(k) {
                        return None;
                    }
                    path.push(*k);
                    let found = self.items[k]
                        .analyses
                        .iter()
                        .find_map(|b| self.replay_on(g, input, b, path));
                    path.pop();
                    out.extend(found?);
                }
            }
        }
        Some(out)
    }

    /// CFG items spelled out by an analysis of `key`: one per internal node
    /// of the elementary tree, each with the backpointer its children give.
    /// The first entry is `key` itself.
    pub fn unfold(&self, g: &Tsg, key: &ItemKey, a: &Analysis) -> Vec<(ItemKey, Backpointer)> {
        let t = &g.etrees[a.etree].tree;
        let mut span = vec![(0, 0); t.len()];
        let mut leaf = 0;
        for (n, s) in span.iter_mut().enumerate() {
            if t.is_leaf(n) {
                *s = a.fillers[leaf].span();
                leaf += 1;
            }
        }
        for n in (0..t.len()).rev() {
            let kids = t.children(n);
            if let (Some(&first), Some(&last)) = (kids.first(), kids.last()) {
                span[n] = (span[first].0, span[last].1);
            }
        }
        let node_key = |n: usize| ItemKey::new(span[n].0, span[n].1, t.label(n));
        debug_assert_eq!(node_key(0), *key);
        (0..t.len())
            .filter(|&n| !t.is_leaf(n))
            .map(|n| {
                (
                    node_key(n),
                    t.children(n).iter().map(|&c| node_key(c)).collect(),
                )
            })
            .collect()
    }
}

/// Bottom-up partial parse of a tag lattice.
pub fn partial_parse(input: &[Vec<Symbol>], g: &Tsg) -> PartialChart {
    let n = input.len();
    let mut b = Builder {
        input,
        g,
        items: FxHashMap::default(),
        ends: FxHashMap::default(),
    };
    for len in 1..=n {
        for i in 0..=n - len {
            let j = i + len;
            if len > 1 {
                b.complete_span(i, j);
            }
            b.unary_closure(i, j);
        }
    }
    let mut chart = PartialChart {
        n,
        items: BTreeMap::new(),
    };
    for (key, mut analyses) in b.items {
        analyses.sort();
        chart.items.insert(
            key,
            PartialItem {
                key,
                analyses,
                sure: false,
            },
        );
    }
    chart.recompute_sure(g);
    chart
}

struct Builder<'a> {
    input: &'a [Vec<Symbol>],
    g: &'a Tsg,
    items: FxHashMap<ItemKey, Vec<Analysis>>,
    ends: FxHashMap<(usize, Symbol), Vec<usize>>,
}

impl Builder<'_> {
    fn add(&mut self, key: ItemKey, a: Analysis) -> bool {
        match self.items.get_mut(&key) {
            Some(v) => {
                if !v.contains(&a) {
                    v.push(a);
                }
                false
            }
            None => {
                self.items.insert(key, vec![a]);
                self.ends
                    .entry((key.start, key.label))
                    .or_default()
                    .push(key.end);
                true
            }
        }
    }

    /// Ways to cover `[pos, ..)` with `sym`: the token, then items.
    fn options(&self, pos: usize, sym: Symbol) -> Vec<(Filler, usize)> {
        let mut out = Vec::new();
        if pos < self.input.len() && self.input[pos].contains(&sym) {
            out.push((Filler::Token(pos), pos + 1));
        }
        if let Some(ends) = self.ends.get(&(pos, sym)) {
            out.extend(
                ends.iter()
                    .map(|&e| (Filler::Item(ItemKey::new(pos, e, sym)), e)),
            );
        }
        out
    }

    fn complete_span(&mut self, i: usize, j: usize) {
        let mut firsts: FxHashSet<Symbol> = self.input[i].iter().copied().collect();
        for (s, l) in self.ends.keys() {
            if *s == i {
                firsts.insert(*l);
            }
        }
        let mut found = Vec::new();
        for first in firsts {
            let Some(ids) = self.g.by_first.get(&first) else {
                continue;
            };
            for &e in ids {
                let frontier = &self.g.etrees[e].frontier;
                if frontier.len() > j - i {
                    continue;
                }
                let mut fillers = Vec::with_capacity(frontier.len());
                self.match_frontier(frontier, 0, i, j, &mut fillers, &mut |f| {
                    found.push((e, f.to_vec()))
                });
            }
        }
        for (e, fillers) in found {
            let key = ItemKey::new(i, j, self.g.etrees[e].root);
            self.add(key, Analysis { etree: e, fillers });
        }
    }

    fn match_frontier(
        &self,
        frontier: &[Symbol],
        d: usize,
        pos: usize,
        j: usize,
        fillers: &mut Vec<Filler>,
        emit: &mut dyn FnMut(&[Filler]),
    ) {
        let remaining = frontier.len() - d - 1;
        for (f, e) in self.options(pos, frontier[d]) {
            if remaining == 0 {
                if e != j {
                    continue;
                }
            } else if e + remaining > j {
                continue;
            }
            fillers.push(f);
            if remaining == 0 {
                emit(fillers);
            } else {
                self.match_frontier(frontier, d + 1, e, j, fillers, emit);
            }
            fillers.pop();
        }
    }

    fn unary_closure(&mut self, i: usize, j: usize) {
        let mut work: Vec<Filler> = Vec::new();
        if j == i + 1 {
            work.push(Filler::Token(i));
        }
        for k in self.items.keys() {
            if k.start == i && k.end == j {
                work.push(Filler::Item(*k));
            }
        }
        let mut seen: FxHashSet<Filler> = work.iter().copied().collect();
        while let Some(f) = work.pop() {
            let syms: Vec<Symbol> = match f {
                Filler::Token(p) => self.input[p].clone(),
                Filler::Item(k) => vec![k.label],
            };
            for sym in syms {
                let Some(ids) = self.g.unary.get(&sym) else {
                    continue;
                };
                for &e in ids {
                    let key = ItemKey::new(i, j, self.g.etrees[e].root);
                    self.add(
                        key,
                        Analysis {
                            etree: e,
                            fillers: vec![f],
                        },
                    );
                    let next = Filler::Item(key);
                    if seen.insert(next) {
                        work.push(next);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg_parser::lattice_from_tags;

    fn syms(s: &str) -> Vec<Symbol> {
        s.split_whitespace().map(Symbol::new).collect()
    }

    fn tsg(trees: &[(&str, bool)]) -> Tsg {
        Tsg::from_trees(
            trees
                .iter()
                .enumerate()
                .map(|(i, (t, sure))| (Tree::parse(t).unwrap(), *sure, i, 1)),
        )
    }

    fn key(i: usize, j: usize, l: &str) -> ItemKey {
        ItemKey::new(i, j, Symbol::new(l))
    }

    #[test]
    fn empty_input_and_empty_grammar() {
        let g = tsg(&[]);
        assert!(g.is_empty());
        assert!(partial_parse(&[], &g).is_empty());
        let g = tsg(&[("(mp p np)", true)]);
        assert!(partial_parse(&[], &g).is_empty());
    }

    #[test]
    fn single_etree_covers_span() {
        let g = tsg(&[("(mp p np p np)", true)]);
        let c = partial_parse(&lattice_from_tags(&syms("p np p np")), &g);
        assert_eq!(c.keys().collect::<Vec<_>>(), vec![key(0, 4, "mp")]);
        assert!(c.items[&key(0, 4, "mp")].sure);
    }

    #[test]
    fn two_level_composition() {
        let g = tsg(&[("(mp p np)", true), ("(S per (vp v mp infp))", false)]);
        let input = lattice_from_tags(&syms("per v p np infp"));
        let c = partial_parse(&input, &g);
        let keys: Vec<_> = c.keys().collect();
        assert_eq!(keys, vec![key(0, 5, "S"), key(2, 4, "mp")]);
        assert!(c.items[&key(2, 4, "mp")].sure);
        assert!(!c.items[&key(0, 5, "S")].sure);
        let s = &c.items[&key(0, 5, "S")];
        assert_eq!(
            c.replay(&g, &input, &s.analyses[0]),
            syms("per v p np infp")
        );
        let unfolded = c.unfold(&g, &s.key, &s.analyses[0]);
        assert_eq!(
            unfolded[0],
            (key(0, 5, "S"), vec![key(0, 1, "per"), key(1, 5, "vp")])
        );
        assert_eq!(
            unfolded[1],
            (
                key(1, 5, "vp"),
                vec![key(1, 2, "v"), key(2, 4, "mp"), key(4, 5, "infp")]
            )
        );
    }

    #[test]
    fn duplicates_merge_with_provenance() {
        let g = tsg(&[
            ("(mp p np)", false),
            ("(mp p np)", true),
            ("(vp v mp)", false),
        ]);
        assert_eq!(g.len(), 2);
        let mp = g
            .etrees
            .iter()
            .find(|e| e.root == Symbol::new("mp"))
            .unwrap();
        assert_eq!(mp.sources, vec![0, 1]);
        assert!(mp.sure);
        assert_eq!(mp.count, 2);
    }

    #[test]
    fn unary_etrees_reach_fixpoint() {
        let g = tsg(&[
            ("(X Y)", true),
            ("(Y X)", true),
            ("(Z a b)", true),
            ("(X Z)", true),
        ]);
        let c = partial_parse(&lattice_from_tags(&syms("a b")), &g);
        let keys: Vec<_> = c.keys().collect();
        assert_eq!(keys, vec![key(0, 2, "X"), key(0, 2, "Y"), key(0, 2, "Z")]);
        assert!(c.items.values().all(|i| i.sure));
        let input = lattice_from_tags(&syms("a b"));
        for item in c.items.values() {
            for a in &item.analyses {
                assert_eq!(c.replay(&g, &input, a), syms("a b"));
            }
        }
        let c = partial_parse(&lattice_from_tags(&syms("Y")), &g);
        assert_eq!(
            c.keys().collect::<Vec<_>>(),
            vec![key(0, 1, "X"), key(0, 1, "Y")]
        );
    }

    #[test]
    fn lattice_arcs_are_alternatives() {
        let g = tsg(&[("(np det n)", true)]);
        let input = vec![syms("det p"), syms("n v")];
        let c = partial_parse(&input, &g);
        assert_eq!(c.keys().collect::<Vec<_>>(), vec![key(0, 2, "np")]);
    }

    #[test]
    fn sure_needs_sure_parts() {
        let g = tsg(&[("(mp p np)", false), ("(vp v mp)", true)]);
        let c = partial_parse(&lattice_from_tags(&syms("v p np")), &g);
        assert!(!c.items[&key(0, 3, "vp")].sure);
        let g = tsg(&[("(mp p np)", true), ("(vp v mp)", true)]);
        let c = partial_parse(&lattice_from_tags(&syms("v p np")), &g);
        assert!(c.items[&key(0, 3, "vp")].sure);
    }

    #[test]
    fn removal_cascades() {
        let g = tsg(&[("(mp p np)", true), ("(vp v mp)", true)]);
        let mut c = partial_parse(&lattice_from_tags(&syms("v p np")), &g);
        let gone: FxHashSet<ItemKey> = [key(1, 3, "mp")].into_iter().collect();
        let removed = c.remove(&g, &gone);
        assert_eq!(removed, vec![key(0, 3, "vp"), key(1, 3, "mp")]);
        assert!(c.is_empty());
    }

    #[test]
    fn dump_format() {
        let g = tsg(&[("(mp p np)", true)]);
        let c = partial_parse(&lattice_from_tags(&syms("p np")), &g);
        assert_eq!(c.dump(), "0\t2\tmp\tsure\t1\n");
    }
}
