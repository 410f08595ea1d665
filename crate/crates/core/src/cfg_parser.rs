//! CYK-style chart parser for the grammar underlying a tree-bank.
//!
//! Rules of any arity are matched directly against the chart (no
//! binarization), so every item in the chart corresponds to a node label the
//! grammar can actually produce. Input positions carry a set of alternative
//! tags; each becomes a length-1 token item.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::symbol::Symbol;
use crate::treebank::{CfGrammar, Tree};

/// `label` over input positions `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemKey {
    pub start: usize,
    pub end: usize,
    pub label: Symbol,
}

impl ItemKey {
    pub fn new(start: usize, end: usize, label: Symbol) -> ItemKey {
        ItemKey { start, end, label }
    }

    pub fn span(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

/// Children of one derivation step. Empty for an input token.
pub type Backpointer = Vec<ItemKey>;

/// Tag lattice: the alternative tags at each input position.
pub type Lattice = Vec<Vec<Symbol>>;

pub fn lattice_from_tags(tags: &[Symbol]) -> Lattice {
    tags.iter().map(|t| vec![*t]).collect()
}

/// True iff the spans overlap without one containing the other.
pub fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0 < b.0 && b.0 < a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 < b.1 && b.1 < a.1)
}

fn strictly_inside(inner: (usize, usize), outer: (usize, usize)) -> bool {
    outer.0 <= inner.0 && inner.1 <= outer.1 && inner != outer
}

/// Restrictions and pre-built items handed to the parser.
#[derive(Clone, Debug, Default)]
pub struct SpanConstraints {
    /// No item may cross any of these spans.
    pub borders: Vec<(usize, usize)>,
    /// No new item or backpointer may be created strictly inside these spans.
    pub sealed: Vec<(usize, usize)>,
    /// Items accepted as given, with their backpointers.
    pub seeds: Vec<(ItemKey, Backpointer)>,
}

impl SpanConstraints {
    pub fn allows(&self, span: (usize, usize)) -> bool {
        !self.borders.iter().any(|b| crosses(span, *b))
            && !self.sealed.iter().any(|s| strictly_inside(span, *s))
    }
}

/// A recognition chart.
#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub n: usize,
    pub start: Option<Symbol>,
    items: FxHashMap<ItemKey, Vec<Backpointer>>,
    ends: FxHashMap<(usize, Symbol), Vec<usize>>,
    firsts: FxHashMap<usize, Vec<Symbol>>,
    cells: FxHashMap<(usize, usize), Vec<Symbol>>,
}

impl Chart {
    pub fn new(n: usize, start: Option<Symbol>) -> Chart {
        Chart {
            n,
            start,
            ..Chart::default()
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, key: &ItemKey) -> bool {
        self.items.contains_key(key)
    }

    pub fn backpointers(&self, key: &ItemKey) -> Option<&[Backpointer]> {
        self.items.get(key).map(Vec::as_slice)
    }

    /// Items in (start, end, label) order.
    pub fn keys(&self) -> Vec<ItemKey> {
        let mut keys: Vec<ItemKey> = self.items.keys().copied().collect();
        keys.sort();
        keys
    }

    pub fn labels_at(&self, start: usize, end: usize) -> &[Symbol] {
        self.cells
            .get(&(start, end))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Adds an item or a new backpointer to an existing one. Returns whether
    /// the item is new.
    pub fn add(&mut self, key: ItemKey, bp: Backpointer) -> bool {
        match self.items.get_mut(&key) {
            Some(bps) => {
                if !bps.contains(&bp) {
                    bps.push(bp);
                }
                false
            }
            None => {
                self.items.insert(key, vec![bp]);
                let ends = self.ends.entry((key.start, key.label)).or_default();
                if ends.is_empty() {
                    self.firsts.entry(key.start).or_default().push(key.label);
                }
                ends.push(key.end);
                self.cells
                    .entry((key.start, key.end))
                    .or_default()
                    .push(key.label);
                true
            }
        }
    }

    fn ends_from(&self, start: usize, label: Symbol) -> &[usize] {
        self.ends
            .get(&(start, label))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// One line per item: `start end label - backpointer-count`.
    pub fn dump(&self) -> String {
        dump_items(
            self.keys()
                .into_iter()
                .map(|k| (k, "-".to_string(), self.items[&k].len())),
        )
    }
}

pub(crate) fn dump_items(rows: impl Iterator<Item = (ItemKey, String, usize)>) -> String {
    let mut out = String::new();
    for (k, flag, count) in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            k.start, k.end, k.label, flag, count
        );
    }
    out
}

/// The T-parser: a grammar indexed for chart parsing.
#[derive(Clone, Debug)]
pub struct TParser {
    pub start: Symbol,
    rules: Vec<(Symbol, Vec<Symbol>)>,
    by_first: FxHashMap<Symbol, Vec<usize>>,
    unary: FxHashMap<Symbol, Vec<Symbol>>,
}

impl TParser {
    pub fn new(g: &CfGrammar) -> TParser {
        let mut rules = Vec::new();
        let mut by_first: FxHashMap<Symbol, Vec<usize>> = FxHashMap::default();
        let mut unary: FxHashMap<Symbol, Vec<Symbol>> = FxHashMap::default();
        for r in &g.rules {
            if r.rhs.len() == 1 {
                unary.entry(r.rhs[0]).or_default().push(r.lhs);
            } else {
                by_first.entry(r.rhs[0]).or_default().push(rules.len());
                rules.push((r.lhs, r.rhs.clone()));
            }
        }
        TParser {
            start: g.start,
            rules,
            by_first,
            unary,
        }
    }

    pub fn parse(&self, input: &[Vec<Symbol>], constraints: Option<&SpanConstraints>) -> Chart {
        let n = input.len();
        let mut chart = Chart::new(n, Some(self.start));
        for (p, tags) in input.iter().enumerate() {
            for &t in tags {
                chart.add(ItemKey::new(p, p + 1, t), Vec::new());
            }
        }
        let empty = SpanConstraints::default();
        let cons = constraints.unwrap_or(&empty);
        for (k, bp) in &cons.seeds {
            chart.add(*k, bp.clone());
        }
        for len in 1..=n {
            for i in 0..=n - len {
                let j = i + len;
                if !cons.allows((i, j)) {
                    continue;
                }
                if len > 1 {
                    self.complete_span(&mut chart, i, j);
                }
                self.unary_closure(&mut chart, i, j);
            }
        }
        chart
    }

    fn complete_span(&self, chart: &mut Chart, i: usize, j: usize) {
        let mut found: Vec<(ItemKey, Backpointer)> = Vec::new();
        let firsts: Vec<Symbol> = chart.firsts.get(&i).cloned().unwrap_or_default();
        for first in firsts {
            let Some(rule_ids) = self.by_first.get(&first) else {
                continue;
            };
            for &r in rule_ids {
                let (lhs, rhs) = &self.rules[r];
                if rhs.len() > j - i {
                    continue;
                }
                let mut children = Vec::with_capacity(rhs.len());
                self.match_rhs(chart, rhs, 0, i, j, &mut children, &mut |kids| {
                    found.push((ItemKey::new(i, j, *lhs), kids.to_vec()));
                });
            }
        }
        for (k, bp) in found {
            chart.add(k, bp);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn match_rhs(
        &self,
        chart: &Chart,
        rhs: &[Symbol],
        d: usize,
        pos: usize,
        j: usize,
        children: &mut Vec<ItemKey>,
        emit: &mut dyn FnMut(&[ItemKey]),
    ) {
        let remaining = rhs.len() - d - 1;
        if remaining == 0 {
            let key = ItemKey::new(pos, j, rhs[d]);
            if chart.contains(&key) {
                children.push(key);
                emit(children);
                children.pop();
            }
            return;
        }
        for &e in chart.ends_from(pos, rhs[d]) {
            if e + remaining > j {
                continue;
            }
            children.push(ItemKey::new(pos, e, rhs[d]));
            self.match_rhs(chart, rhs, d + 1, e, j, children, emit);
            children.pop();
        }
    }

    fn unary_closure(&self, chart: &mut Chart, i: usize, j: usize) {
        let mut work: Vec<Symbol> = chart.labels_at(i, j).to_vec();
        let mut seen: FxHashSet<Symbol> = work.iter().copied().collect();
        while let Some(b) = work.pop() {
            let Some(parents) = self.unary.get(&b) else {
                continue;
            };
            for &a in parents {
                chart.add(ItemKey::new(i, j, a), vec![ItemKey::new(i, j, b)]);
                if seen.insert(a) {
                    work.push(a);
                }
            }
        }
    }
}

/// Parses `input` with the grammar, optionally under span constraints.
pub fn cyk_parse(
    input: &[Vec<Symbol>],
    g: &CfGrammar,
    constraints: Option<&SpanConstraints>,
) -> Chart {
    TParser::new(g).parse(input, constraints)
}

/// Chart items reachable top-down from a full-span start item.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseForest {
    pub n: usize,
    pub root: Option<ItemKey>,
    pub items: BTreeMap<ItemKey, Vec<Backpointer>>,
}

impl ParseForest {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn contains(&self, key: &ItemKey) -> bool {
        self.items.contains_key(key)
    }

    /// Same layout as [`Chart::dump`].
    pub fn dump(&self) -> String {
        dump_items(self.items.iter().map(|(k, bps)| {
            let flag = if Some(*k) == self.root { "root" } else { "-" };
            (*k, flag.to_string(), bps.len())
        }))
    }

    /// Complete parse trees, at most `limit` of them. Items are not repeated
    /// along a root-to-leaf path, so unary cycles do not loop.
    pub fn enumerate(&self, limit: usize) -> Vec<Tree> {
        let Some(root) = self.root else {
            return Vec::new();
        };
        let mut path = Vec::new();
        self.trees_of(root, limit, &mut path)
    }

    fn trees_of(&self, key: ItemKey, limit: usize, path: &mut Vec<ItemKey>) -> Vec<Tree> {
        if path.contains(&key) {
            return Vec::new();
        }
        path.push(key);
        let mut out = Vec::new();
        for bp in &self.items[&key] {
            if bp.is_empty() {
                out.push(Tree::leaf(key.label));
            } else {
                let mut partial: Vec<Vec<Tree>> = vec![Vec::new()];
                for child in bp {
                    let options = self.trees_of(*child, limit, path);
                    let mut next = Vec::new();
                    'outer: for prefix in &partial {
                        for opt in &options {
                            let mut p = prefix.clone();
                            p.push(opt.clone());
                            next.push(p);
                            if next.len() >= limit {
                                break 'outer;
                            }
                        }
                    }
                    partial = next;
                    if partial.is_empty() {
                        break;
                    }
                }
                for kids in partial {
                    out.push(Tree::branch(key.label, kids));
                }
            }
            if out.len() >= limit {
                out.truncate(limit);
                break;
            }
        }
        path.pop();
        out
    }
}

pub fn extract_forest(c: &Chart) -> ParseForest {
    let mut forest = ParseForest {
        n: c.n,
        ..ParseForest::default()
    };
    let Some(start) = c.start else { return forest };
    let root = ItemKey::new(0, c.n, start);
    if c.n == 0 || !c.contains(&root) {
        return forest;
    }
    forest.root = Some(root);
    let mut stack = vec![root];
    while let Some(k) = stack.pop() {
        if forest.items.contains_key(&k) {
            continue;
        }
        let bps = c.items[&k].clone();
        for bp in &bps {
            stack.extend(bp.iter().copied());
        }
        forest.items.insert(k, bps);
    }
    forest
}

pub fn count_active_nodes(f: &ParseForest) -> usize {
    f.items.len()
}

/// Whether `gold` (word-stripped, one leaf per input position) can be read
/// off the forest.
pub fn contains_parse(f: &ParseForest, gold: &Tree) -> Result<bool> {
    let leaves = gold.leaves().len();
    if leaves != f.n {
        return Err(Error::Input(format!(
            "gold tree has {leaves} leaves but the forest spans {} positions",
            f.n
        )));
    }
    if f.is_empty() {
        return Ok(false);
    }
    let spans = gold.spans();
    let key = |a: usize| ItemKey::new(spans[a].0, spans[a].1, gold.label(a));
    for a in 0..gold.len() {
        let Some(bps) = f.items.get(&key(a)) else {
            return Ok(false);
        };
        let want: Backpointer = gold.children(a).iter().map(|&c| key(c)).collect();
        if !bps.contains(&want) {
            return Ok(false);
        }
    }
    Ok(f.root == Some(key(0)))
}
