//! Generators and brute-force oracles shared by the integration tests. The
//! oracles only use the public tree accessors, never the library's own
//! tabulation, chart or projection code.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ebl_core::cfg_parser::{crosses, ItemKey, Lattice};
use ebl_core::learner::{ContextField, ContextPattern, LearnOutcome};
use ebl_core::treebank::{CfGrammar, Rule};
use ebl_core::tsg_parser::{Analysis, Filler, Tsg};
use ebl_core::{Symbol, Tree, TreeBank};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn syms(s: &str) -> Vec<Symbol> {
    s.split_whitespace().map(Symbol::new).collect()
}

pub fn sym(s: &str) -> Symbol {
    Symbol::new(s)
}

// ---------------------------------------------------------------- corpora

const SMALL_WORDS: &[(&str, &[&str])] = &[
    ("det", &["de", "een"]),
    ("n", &["trein", "bus", "stad"]),
    ("v", &["rijdt", "gaat", "bus"]),
    ("p", &["naar", "van"]),
    ("adj", &["snelle"]),
];

fn word(r: &mut ChaCha8Rng, tag: &str) -> Tree {
    let words = SMALL_WORDS.iter().find(|(t, _)| *t == tag).unwrap().1;
    Tree::branch(tag, [Tree::leaf(*words.choose(r).unwrap())])
}

fn small_np(r: &mut ChaCha8Rng, depth: usize) -> Tree {
    match r.gen_range(0..10) {
        0..=4 => Tree::branch("np", [word(r, "det"), word(r, "n")]),
        5..=6 => Tree::branch("np", [word(r, "n")]),
        7 => Tree::branch("np", [word(r, "det"), word(r, "adj"), word(r, "n")]),
        _ if depth > 0 => Tree::branch("np", [small_np(r, depth - 1), small_pp(r, depth - 1)]),
        _ => Tree::branch("np", [word(r, "det"), word(r, "n")]),
    }
}

fn small_pp(r: &mut ChaCha8Rng, depth: usize) -> Tree {
    Tree::branch("pp", [word(r, "p"), small_np(r, depth)])
}

fn small_vp(r: &mut ChaCha8Rng) -> Tree {
    match r.gen_range(0..10) {
        0..=3 => Tree::branch("vp", [word(r, "v"), small_np(r, 1)]),
        4..=5 => Tree::branch("vp", [word(r, "v")]),
        6..=7 => Tree::branch("vp", [word(r, "v"), small_pp(r, 0)]),
        _ => Tree::branch("vp", [word(r, "v"), small_np(r, 0), small_pp(r, 0)]),
    }
}

/// Word-bearing sentences from a tiny grammar, each with at most
/// `max_nodes` nodes (words included).
pub fn small_corpus(seed: u64, trees: usize, max_nodes: usize) -> TreeBank {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(trees);
    while out.len() < trees {
        let t = match r.gen_range(0..10) {
            0..=6 => Tree::branch("S", [small_np(&mut r, 1), small_vp(&mut r)]),
            7..=8 => Tree::branch("S", [small_vp(&mut r)]),
            _ => Tree::branch(
                "S",
                [small_np(&mut r, 0), small_vp(&mut r), small_pp(&mut r, 0)],
            ),
        };
        if t.len() <= max_nodes {
            out.push(t);
        }
    }
    TreeBank::new(out, sym("S")).unwrap()
}

// ------------------------------------------------------------ tree oracles

/// Leaf labels left to right, by direct recursion.
pub fn yield_of(t: &Tree, a: usize) -> Vec<Symbol> {
    if t.children(a).is_empty() {
        return vec![t.label(a)];
    }
    t.children(a).iter().flat_map(|&c| yield_of(t, c)).collect()
}

/// Span of every node, by direct recursion.
pub fn spans_of(t: &Tree) -> Vec<(usize, usize)> {
    fn walk(t: &Tree, a: usize, start: usize, out: &mut Vec<(usize, usize)>) -> usize {
        let mut end = start;
        if t.children(a).is_empty() {
            end += 1;
        } else {
            for &c in t.children(a) {
                end = walk(t, c, end, out);
            }
        }
        out[a] = (start, end);
        end
    }
    let mut out = vec![(0, 0); t.len()];
    walk(t, 0, 0, &mut out);
    out
}

fn field_matches(f: ContextField, frontier: &[Symbol], pos: isize) -> bool {
    let actual = if pos < 0 || pos as usize >= frontier.len() {
        ContextField::Boundary
    } else {
        ContextField::Sym(frontier[pos as usize])
    };
    f == ContextField::Any || f == actual
}

/// `(fc, f)` of `ssf` under `ctx`, counted occurrence by occurrence.
pub fn oracle_counts(tb: &TreeBank, ssf: &[Symbol], ctx: &ContextPattern) -> (u64, u64) {
    let (mut fc, mut f) = (0, 0);
    for t in &tb.trees {
        let frontier = yield_of(t, 0);
        let constituents: HashSet<(usize, usize)> = spans_of(t).into_iter().collect();
        if ssf.len() > frontier.len() {
            continue;
        }
        for i in 0..=frontier.len() - ssf.len() {
            let j = i + ssf.len();
            if frontier[i..j] != *ssf {
                continue;
            }
            let (i, j) = (i as isize, j as isize);
            let fields = ctx.fields();
            if !(field_matches(fields[0], &frontier, i - 2)
                && field_matches(fields[1], &frontier, i - 1)
                && field_matches(fields[2], &frontier, j)
                && field_matches(fields[3], &frontier, j + 1))
            {
                continue;
            }
            f += 1;
            if constituents.contains(&(i as usize, j as usize)) {
                fc += 1;
            }
        }
    }
    (fc, f)
}

/// The tree-bank as it stood when pass `iteration` began.
pub fn state_at<T: Clone>(out: &LearnOutcome<T>, iteration: usize) -> TreeBank {
    let later: Vec<_> = out
        .trace
        .iter()
        .filter(|p| p.iteration >= iteration)
        .cloned()
        .collect();
    ebl_core::learner::reconstruct(&out.residual, &later).unwrap()
}

/// Whether `pattern` occurs at node `a` of `t`: same labels, same child
/// lists, pattern leaves matching any node with that label.
pub fn matches_at(t: &Tree, a: usize, pattern: &Tree, q: usize) -> bool {
    if t.label(a) != pattern.label(q) {
        return false;
    }
    let pk = pattern.children(q);
    if pk.is_empty() {
        return true;
    }
    let tk = t.children(a);
    tk.len() == pk.len()
        && tk
            .iter()
            .zip(pk)
            .all(|(&x, &y)| matches_at(t, x, pattern, y))
}

/// Nodes of `t` covered by the occurrence of `pattern` rooted at `a`, split
/// into (root and frontier, internal).
pub fn occurrence_nodes(t: &Tree, a: usize, pattern: &Tree) -> (Vec<usize>, Vec<usize>) {
    fn walk(
        t: &Tree,
        a: usize,
        p: &Tree,
        q: usize,
        boundary: &mut Vec<usize>,
        internal: &mut Vec<usize>,
        top: bool,
    ) {
        if top || p.children(q).is_empty() {
            boundary.push(a);
        } else {
            internal.push(a);
        }
        for (&x, &y) in t.children(a).iter().zip(p.children(q)) {
            walk(t, x, p, y, boundary, internal, false);
        }
    }
    let (mut b, mut i) = (Vec::new(), Vec::new());
    walk(t, a, pattern, 0, &mut b, &mut i, true);
    (b, i)
}

// -------------------------------------------------------- fragment oracle

/// Every fragment of `t` as a sorted node set, found by scanning all node
/// subsets. A fragment has a marked internal root, contains all or none of
/// each member's children, keeps a pre-terminal's word with it, has only
/// marked nodes or words on its frontier, and meets the limits.
pub fn oracle_fragments(
    t: &Tree,
    marks: &[bool],
    d: usize,
    n: usize,
    w: usize,
    c: usize,
) -> Vec<Vec<usize>> {
    assert!(t.len() <= 20, "subset oracle is exponential");
    let len = t.len();
    let mut parent = vec![None; len];
    let mut depth = vec![0usize; len];
    for a in 0..len {
        for &ch in t.children(a) {
            parent[ch] = Some(a);
            depth[ch] = depth[a] + 1;
        }
    }
    let mut out = Vec::new();
    for set in 1u32..(1 << len) {
        let inside = |a: usize| set & (1 << a) != 0;
        let members: Vec<usize> = (0..len).filter(|&a| inside(a)).collect();
        let roots: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&a| parent[a].is_none_or(|p| !inside(p)))
            .collect();
        if roots.len() != 1 {
            continue;
        }
        let r = roots[0];
        if t.children(r).is_empty() || !marks[r] || !t.children(r).iter().all(|&ch| inside(ch)) {
            continue;
        }
        let mut ok = true;
        let mut frontier = Vec::new();
        for &a in &members {
            let kids = t.children(a);
            let taken = kids.iter().filter(|&&ch| inside(ch)).count();
            if taken != 0 && taken != kids.len() {
                ok = false;
                break;
            }
            if taken == 0 && !kids.is_empty() && !marks[a] {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        // Frontier in left-to-right order: members without members below.
        fn collect(t: &Tree, a: usize, inside: &dyn Fn(usize) -> bool, out: &mut Vec<bool>) {
            let kids = t.children(a);
            if kids.is_empty() {
                out.push(true);
            } else if !inside(kids[0]) {
                out.push(false);
            } else {
                for &ch in kids {
                    collect(t, ch, inside, out);
                }
            }
        }
        collect(t, r, &inside, &mut frontier);
        let height = members
            .iter()
            .map(|&a| depth[a] - depth[r])
            .max()
            .unwrap_or(0);
        let words = frontier.iter().filter(|x| **x).count();
        let sites = frontier.len() - words;
        let mut run = 0;
        let mut longest = 0;
        for &x in &frontier {
            run = if x { run + 1 } else { 0 };
            longest = longest.max(run);
        }
        if height <= d && sites <= n && words <= w && longest <= c {
            out.push(members);
        }
    }
    out.sort();
    out
}

// --------------------------------------------------------------- grammars

/// A random grammar over nonterminals S A B C and tags a b c, with at most
/// `max_rules` rules and right-hand sides of length 1 to 3.
pub fn random_cfg(r: &mut ChaCha8Rng, max_rules: usize) -> CfGrammar {
    let nts = syms("S A B C");
    let all = syms("S A B C a b c");
    let tags = syms("a b c");
    let mut rules = BTreeSet::new();
    let count = r.gen_range(2..=max_rules);
    while rules.len() < count {
        let lhs = if rules.is_empty() {
            nts[0]
        } else {
            *nts.choose(r).unwrap()
        };
        let len = r.gen_range(1..=3);
        let rhs: Vec<Symbol> = (0..len)
            .map(|_| {
                if r.gen_bool(0.5) {
                    *tags.choose(r).unwrap()
                } else {
                    *all.choose(r).unwrap()
                }
            })
            .collect();
        rules.insert(Rule { lhs, rhs });
    }
    CfGrammar {
        rules,
        start: nts[0],
    }
}

/// Terminal strings of length 1..=`max_len` derivable from every symbol,
/// by iterating bounded-depth derivation sets to a fixpoint.
pub fn cfg_languages(
    g: &CfGrammar,
    tags: &[Symbol],
    max_len: usize,
) -> BTreeMap<Symbol, BTreeSet<Vec<Symbol>>> {
    let mut lang: BTreeMap<Symbol, BTreeSet<Vec<Symbol>>> = BTreeMap::new();
    for &t in tags {
        lang.entry(t).or_default().insert(vec![t]);
    }
    for rule in &g.rules {
        lang.entry(rule.lhs).or_default();
        for s in &rule.rhs {
            lang.entry(*s).or_default();
        }
    }
    loop {
        let mut changed = false;
        for rule in &g.rules {
            let mut partial: Vec<Vec<Symbol>> = vec![Vec::new()];
            for s in &rule.rhs {
                let options = &lang[s];
                let mut next = Vec::new();
                for p in &partial {
                    for o in options {
                        if p.len() + o.len() <= max_len {
                            let mut q = p.clone();
                            q.extend_from_slice(o);
                            next.push(q);
                        }
                    }
                }
                partial = next;
            }
            let set = lang.get_mut(&rule.lhs).unwrap();
            for p in partial {
                changed |= set.insert(p);
            }
        }
        if !changed {
            return lang;
        }
    }
}

/// Every string of length 1..=`max_len` over `tags`.
pub fn all_strings(tags: &[Symbol], max_len: usize) -> Vec<Vec<Symbol>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Symbol>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|p| {
                tags.iter().map(move |t| {
                    let mut q = p.clone();
                    q.push(*t);
                    q
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Parse trees of `input[i..j]` rooted in `x`, straight from the grammar,
/// never repeating a (label, span) on a root-to-leaf path.
pub fn oracle_trees(
    g: &CfGrammar,
    input: &Lattice,
    x: Symbol,
    i: usize,
    j: usize,
    path: &mut Vec<(Symbol, usize, usize)>,
) -> Vec<Tree> {
    if path.contains(&(x, i, j)) {
        return Vec::new();
    }
    path.push((x, i, j));
    let mut out = Vec::new();
    if j == i + 1 && input[i].contains(&x) {
        out.push(Tree::leaf(x));
    }
    for rule in g.rules.iter().filter(|r| r.lhs == x) {
        for cuts in splits(i, j, rule.rhs.len()) {
            let mut partial: Vec<Vec<Tree>> = vec![Vec::new()];
            for (k, s) in rule.rhs.iter().enumerate() {
                let options = oracle_trees(g, input, *s, cuts[k], cuts[k + 1], path);
                partial = partial
                    .iter()
                    .flat_map(|p| {
                        options.iter().map(move |o| {
                            let mut q = p.clone();
                            q.push(o.clone());
                            q
                        })
                    })
                    .collect();
            }
            out.extend(partial.into_iter().map(|kids| Tree::branch(x, kids)));
        }
    }
    path.pop();
    out
}

/// All ways to cut `[i, j)` into `parts` non-empty pieces, as boundary lists.
pub fn splits(i: usize, j: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return if i == j { vec![vec![i]] } else { Vec::new() };
    }
    if j < i + parts {
        return Vec::new();
    }
    let mut out = Vec::new();
    for mid in i + 1..=j - (parts - 1) {
        for mut rest in splits(mid, j, parts - 1) {
            rest.insert(0, i);
            out.push(rest);
        }
    }
    out
}

// ------------------------------------------------------------------- TSGs

/// A random grammar of up to `max_trees` elementary trees of depth at most
/// two over labels S A B and tags a b c; about a third are marked sure.
pub fn random_tsg(r: &mut ChaCha8Rng, max_trees: usize) -> Tsg {
    let nts = syms("S A B");
    let leaves = syms("S A B a b c a b c");
    fn node(
        r: &mut ChaCha8Rng,
        label: Symbol,
        depth: usize,
        nts: &[Symbol],
        leaves: &[Symbol],
    ) -> Tree {
        let kids = r.gen_range(1..=3);
        Tree::branch(
            label,
            (0..kids).map(|_| {
                if depth > 1 && r.gen_bool(0.3) {
                    let label = *nts.choose(r).unwrap();
                    node(r, label, depth - 1, nts, leaves)
                } else {
                    Tree::leaf(*leaves.choose(r).unwrap())
                }
            }),
        )
    }
    let count = r.gen_range(1..=max_trees);
    let trees: Vec<(Tree, bool, usize, u64)> = (0..count)
        .map(|k| {
            let root = *nts.choose(r).unwrap();
            (node(r, root, 2, &nts, &leaves), r.gen_bool(0.35), k, 1)
        })
        .collect();
    Tsg::from_trees(trees)
}

pub fn random_lattice(r: &mut ChaCha8Rng, len: usize, ambiguity: f64) -> Lattice {
    let tags = syms("a b c");
    (0..len)
        .map(|_| {
            let mut pos: Vec<Symbol> = vec![*tags.choose(r).unwrap()];
            if r.gen_bool(ambiguity) {
                let extra = *tags.choose(r).unwrap();
                if !pos.contains(&extra) {
                    pos.push(extra);
                }
            }
            pos.sort();
            pos
        })
        .collect()
}

/// Whether some composition of elementary trees rooted in `x` spells
/// `input[i..j]`. Depth-first over compositions, never revisiting a
/// (label, span) on the current path.
pub fn tsg_derives(
    g: &Tsg,
    input: &Lattice,
    x: Symbol,
    i: usize,
    j: usize,
    path: &mut Vec<(Symbol, usize, usize)>,
) -> bool {
    if path.contains(&(x, i, j)) {
        return false;
    }
    path.push((x, i, j));
    let found = g.etrees.iter().filter(|e| e.root == x).any(|e| {
        splits(i, j, e.frontier.len()).into_iter().any(|cuts| {
            e.frontier.iter().enumerate().all(|(k, &s)| {
                let (a, b) = (cuts[k], cuts[k + 1]);
                (b == a + 1 && input[a].contains(&s)) || tsg_derives(g, input, s, a, b, path)
            })
        })
    });
    path.pop();
    found
}

/// Every (item, analysis) pair the partial parser should build, given the
/// derivable item set.
pub fn tsg_analyses(
    g: &Tsg,
    input: &Lattice,
    items: &BTreeSet<ItemKey>,
) -> BTreeMap<ItemKey, BTreeSet<Analysis>> {
    let mut out: BTreeMap<ItemKey, BTreeSet<Analysis>> = BTreeMap::new();
    for key in items {
        for (e, et) in g
            .etrees
            .iter()
            .enumerate()
            .filter(|(_, et)| et.root == key.label)
        {
            for cuts in splits(key.start, key.end, et.frontier.len()) {
                let mut options: Vec<Vec<Filler>> = vec![Vec::new()];
                for (k, &s) in et.frontier.iter().enumerate() {
                    let (a, b) = (cuts[k], cuts[k + 1]);
                    let mut here = Vec::new();
                    if b == a + 1 && input[a].contains(&s) {
                        here.push(Filler::Token(a));
                    }
                    let sub = ItemKey::new(a, b, s);
                    if items.contains(&sub) {
                        here.push(Filler::Item(sub));
                    }
                    options = options
                        .iter()
                        .flat_map(|p| {
                            here.iter().map(move |f| {
                                let mut q = p.clone();
                                q.push(*f);
                                q
                            })
                        })
                        .collect();
                }
                for fillers in options {
                    out.entry(*key)
                        .or_default()
                        .insert(Analysis { etree: e, fillers });
                }
            }
        }
    }
    out
}

/// Spans of the analysis' elementary-tree nodes, computed from the tree
/// shape and the filler spans.
pub fn analysis_brackets(g: &Tsg, a: &Analysis) -> Vec<(usize, usize)> {
    let t = &g.etrees[a.etree].tree;
    fn walk(
        t: &Tree,
        n: usize,
        fillers: &[Filler],
        next: &mut usize,
        out: &mut Vec<(usize, usize)>,
    ) -> (usize, usize) {
        if t.children(n).is_empty() {
            let s = fillers[*next].span();
            *next += 1;
            return s;
        }
        let spans: Vec<(usize, usize)> = t
            .children(n)
            .iter()
            .map(|&c| walk(t, c, fillers, next, out))
            .collect();
        let s = (spans[0].0, spans[spans.len() - 1].1);
        out.push(s);
        s
    }
    let mut out = Vec::new();
    walk(t, 0, &a.fillers, &mut 0, &mut out);
    out
}

/// Pairs of `(key, brackets)` entries with some crossing brackets.
pub fn crossing_pairs(items: &[(ItemKey, Vec<(usize, usize)>)]) -> BTreeSet<(ItemKey, ItemKey)> {
    let mut out = BTreeSet::new();
    for x in 0..items.len() {
        for y in x + 1..items.len() {
            let (a, ba) = &items[x];
            let (b, bb) = &items[y];
            if ba.iter().any(|s| bb.iter().any(|t| crosses(*s, *t))) {
                out.insert((*a.min(b), *a.max(b)));
            }
        }
    }
    out
}

/// Brackets of every node of a tree, leaves included.
pub fn tree_brackets(t: &Tree) -> Vec<(usize, usize)> {
    spans_of(t)
}
