//! Bracketed tree-banks: reading, writing, node addressing, word stripping,
//! grammar extraction and tree reduction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::symbol::{is_valid_name, join, Symbol, SymbolKind};

/// Pre-order index of a node within its tree. The root is always 0.
pub type Address = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub label: Symbol,
    pub children: Vec<Address>,
    pub parent: Option<Address>,
}

/// An ordered labelled tree with dense pre-order addresses.
///
/// Two trees are equal iff they have the same shape and labels, because the
/// addressing is canonical.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Subtree removed by [`Tree::reduce_at`], together with the address of the
/// leaf that replaced it in the reduced tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Excision {
    pub leaf: Address,
    pub subtree: Tree,
}

impl Excision {
    pub fn frontier(&self) -> Vec<Symbol> {
        self.subtree.frontier(0).expect("root exists")
    }
}

impl Tree {
    pub fn leaf(label: impl Into<Symbol>) -> Tree {
        Tree {
            nodes: vec![Node {
                label: label.into(),
                children: Vec::new(),
                parent: None,
            }],
        }
    }

    pub fn branch(label: impl Into<Symbol>, children: impl IntoIterator<Item = Tree>) -> Tree {
        let mut nodes = vec![Node {
            label: label.into(),
            children: Vec::new(),
            parent: None,
        }];
        for child in children {
            let offset = nodes.len();
            nodes[0].children.push(offset);
            for (i, mut n) in child.nodes.into_iter().enumerate() {
                n.parent = Some(match n.parent {
                    Some(p) => p + offset,
                    None => 0,
                });
                debug_assert!(i > 0 || n.parent == Some(0));
                for c in &mut n.children {
                    *c += offset;
                }
                nodes.push(n);
            }
        }
        Tree { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Address {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn get(&self, a: Address) -> Option<&Node> {
        self.nodes.get(a)
    }

    fn check(&self, a: Address) -> Result<&Node> {
        self.nodes.get(a).ok_or(Error::UnknownAddress(a))
    }

    /// Panics on an address that does not belong to this tree.
    pub fn label(&self, a: Address) -> Symbol {
        self.nodes[a].label
    }

    pub fn children(&self, a: Address) -> &[Address] {
        &self.nodes[a].children
    }

    pub fn parent(&self, a: Address) -> Option<Address> {
        self.nodes[a].parent
    }

    pub fn is_leaf(&self, a: Address) -> bool {
        self.nodes[a].children.is_empty()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.children.is_empty()).count()
    }

    /// Leaf addresses, left to right.
    pub fn leaves(&self) -> Vec<Address> {
        (0..self.nodes.len()).filter(|&a| self.is_leaf(a)).collect()
    }

    /// Leaf labels of the partial-tree rooted at `a`, left to right.
    pub fn frontier(&self, a: Address) -> Result<Vec<Symbol>> {
        self.check(a)?;
        let mut out = Vec::new();
        let mut stack = vec![a];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.children.is_empty() {
                out.push(node.label);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        Ok(out)
    }

    /// Per node, the half-open range of leaf positions it dominates.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut spans = vec![(0, 0); self.nodes.len()];
        let mut next = 0;
        for (a, n) in self.nodes.iter().enumerate() {
            if n.children.is_empty() {
                spans[a] = (next, next + 1);
                next += 1;
            }
        }
        for a in (0..self.nodes.len()).rev() {
            let n = &self.nodes[a];
            if let (Some(&first), Some(&last)) = (n.children.first(), n.children.last()) {
                spans[a] = (spans[first].0, spans[last].1);
            }
        }
        spans
    }

    /// Distance from the root, per node.
    pub fn depths(&self) -> Vec<usize> {
        let mut d = vec![0; self.nodes.len()];
        for a in 1..self.nodes.len() {
            d[a] = d[self.nodes[a].parent.expect("non-root has parent")] + 1;
        }
        d
    }

    /// Height of the tree: edges on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    /// Addresses dominated by `a`, excluding `a`. Pre-order numbering makes
    /// this a contiguous range.
    pub fn descendants(&self, a: Address) -> std::ops::Range<Address> {
        let mut end = a + 1;
        while end < self.nodes.len() && self.dominates(a, end) {
            end += 1;
        }
        a + 1..end
    }

    /// True iff `a` is a proper ancestor of `b`.
    pub fn dominates(&self, a: Address, b: Address) -> bool {
        let mut cur = self.nodes[b].parent;
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.nodes[p].parent;
        }
        false
    }

    pub fn ancestors(&self, a: Address) -> Vec<Address> {
        let mut out = Vec::new();
        let mut cur = self.nodes[a].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        out
    }

    /// Nodes strictly above or strictly below `a`.
    pub fn competitors(&self, a: Address) -> Result<BTreeSet<Address>> {
        self.check(a)?;
        let mut out: BTreeSet<Address> = self.ancestors(a).into_iter().collect();
        out.extend(self.descendants(a));
        Ok(out)
    }

    /// Copy of the partial-tree rooted at `a`, renumbered from 0.
    pub fn subtree(&self, a: Address) -> Result<Tree> {
        self.check(a)?;
        let mut nodes = Vec::new();
        self.copy_into(a, None, &mut nodes, &mut |_, _, _| Visit::Descend);
        Ok(Tree { nodes })
    }

    /// Turns every marked node into a leaf and returns the excised subtrees.
    ///
    /// Marked nodes must be pairwise non-nested.
    pub fn reduce_at(&self, marked: &[Address]) -> Result<(Tree, Vec<Excision>)> {
        let mut is_marked = vec![false; self.nodes.len()];
        for &m in marked {
            self.check(m)?;
            is_marked[m] = true;
        }
        for &m in marked {
            if let Some(anc) = self.ancestors(m).into_iter().find(|&p| is_marked[p]) {
                return Err(Error::Invariant(format!(
                    "marked node {m} is nested under marked node {anc}"
                )));
            }
        }
        let mut nodes = Vec::new();
        let mut excised = Vec::new();
        self.copy_into(0, None, &mut nodes, &mut |tree, a, new_addr| {
            if is_marked[a] {
                excised.push(Excision {
                    leaf: new_addr,
                    subtree: tree.subtree(a).expect("address checked"),
                });
                Visit::Cut
            } else {
                Visit::Descend
            }
        });
        Ok((Tree { nodes }, excised))
    }

    /// Replaces leaves by trees whose root carries the leaf's label. The inverse
    /// of [`Tree::reduce_at`].
    pub fn substitute(&self, at: &[(Address, &Tree)]) -> Result<Tree> {
        let mut repl: Vec<Option<&Tree>> = vec![None; self.nodes.len()];
        for &(a, t) in at {
            let node = self.check(a)?;
            if !node.children.is_empty() {
                return Err(Error::Invariant(format!(
                    "substitution site {a} is not a leaf"
                )));
            }
            if node.label != t.label(0) {
                return Err(Error::Invariant(format!(
                    "substitution at {a} of a {} tree into a {} leaf",
                    t.label(0),
                    node.label
                )));
            }
            repl[a] = Some(t);
        }
        let mut nodes = Vec::new();
        build_substituted(self, 0, None, &repl, &mut nodes);
        Ok(Tree { nodes })
    }

    fn copy_into(
        &self,
        a: Address,
        parent: Option<Address>,
        out: &mut Vec<Node>,
        visit: &mut dyn FnMut(&Tree, Address, Address) -> Visit,
    ) {
        let new_addr = out.len();
        out.push(Node {
            label: self.nodes[a].label,
            children: Vec::new(),
            parent,
        });
        if let Some(p) = parent {
            out[p].children.push(new_addr);
        }
        if visit(self, a, new_addr) == Visit::Cut {
            return;
        }
        for &c in &self.nodes[a].children {
            self.copy_into(c, Some(new_addr), out, visit);
        }
    }

    fn write_node(&self, a: Address, out: &mut String) {
        let node = &self.nodes[a];
        if node.children.is_empty() {
            if a == 0 {
                out.push('(');
                out.push_str(node.label.as_str());
                out.push(')');
            } else {
                out.push_str(node.label.as_str());
            }
            return;
        }
        out.push('(');
        out.push_str(node.label.as_str());
        for &c in &node.children {
            out.push(' ');
            self.write_node(c, out);
        }
        out.push(')');
    }

    /// Canonical single-line bracketed form.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_node(0, &mut out);
        out
    }

    /// Parses a single bracketed tree.
    pub fn parse(text: &str) -> Result<Tree> {
        let mut trees = parse_records(text)?;
        match trees.len() {
            1 => Ok(trees.pop().unwrap()),
            0 => Err(Error::EmptyCorpus),
            n => Err(Error::Syntax {
                line: 1,
                message: format!("expected one tree, found {n}"),
            }),
        }
    }
}

#[derive(PartialEq, Eq)]
enum Visit {
    Descend,
    Cut,
}

fn build_substituted(
    t: &Tree,
    a: Address,
    parent: Option<Address>,
    repl: &[Option<&Tree>],
    out: &mut Vec<Node>,
) {
    if let Some(sub) = repl[a] {
        sub.copy_into(0, parent, out, &mut |_, _, _| Visit::Descend);
        return;
    }
    let new_addr = out.len();
    out.push(Node {
        label: t.nodes[a].label,
        children: Vec::new(),
        parent,
    });
    if let Some(p) = parent {
        out[p].children.push(new_addr);
    }
    for &c in &t.nodes[a].children {
        build_substituted(t, c, Some(new_addr), repl, out);
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tree({})", self.to_bracketed())
    }
}

/// An ordered list of trees sharing one start symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeBank {
    pub trees: Vec<Tree>,
    pub start: Symbol,
}

impl TreeBank {
    /// Checks that every tree is rooted in `start`.
    pub fn new(trees: Vec<Tree>, start: Symbol) -> Result<TreeBank> {
        for (i, t) in trees.iter().enumerate() {
            if t.label(0) != start {
                return Err(Error::StartMismatch {
                    tree: i,
                    expected: start.to_string(),
                    found: t.label(0).to_string(),
                });
            }
        }
        Ok(TreeBank { trees, start })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(Tree::len).sum()
    }

    pub fn subset(&self, indices: &[usize]) -> TreeBank {
        TreeBank {
            trees: indices.iter().map(|&i| self.trees[i].clone()).collect(),
            start: self.start,
        }
    }
}

/// Reads a bracketed corpus: one `(LABEL child ...)` tree per record, `#`
/// comment lines ignored.
pub fn read_treebank(text: &str) -> Result<TreeBank> {
    let trees = parse_records(text)?;
    let start = match trees.first() {
        Some(t) => t.label(0),
        None => return Err(Error::EmptyCorpus),
    };
    TreeBank::new(trees, start)
}

/// One canonical tree per line.
pub fn write_treebank(tb: &TreeBank) -> String {
    let mut out = String::new();
    for t in &tb.trees {
        out.push_str(&t.to_bracketed());
        out.push('\n');
    }
    out
}

#[derive(Debug)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(text: &str) -> Vec<(Token<'_>, usize)> {
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim_start().starts_with('#') {
            continue;
        }
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'(' => {
                    tokens.push((Token::Open, line_no));
                    i += 1;
                }
                b')' => {
                    tokens.push((Token::Close, line_no));
                    i += 1;
                }
                c if (c as char).is_ascii_whitespace() => i += 1,
                _ => {
                    let start = i;
                    while i < bytes.len()
                        && !matches!(bytes[i], b'(' | b')')
                        && !(bytes[i] as char).is_ascii_whitespace()
                    {
                        i += 1;
                    }
                    // Multi-byte whitespace is rare enough to split after the fact.
                    let atom = &line[start..i];
                    for piece in atom.split(char::is_whitespace).filter(|p| !p.is_empty()) {
                        tokens.push((Token::Atom(piece), line_no));
                    }
                }
            }
        }
    }
    tokens
}

fn parse_records(text: &str) -> Result<Vec<Tree>> {
    let tokens = tokenize(text);
    let last_line = text.lines().count().max(1);
    let mut pos = 0;
    let mut trees = Vec::new();
    while pos < tokens.len() {
        match tokens[pos] {
            (Token::Open, _) => {
                let tree = parse_node(&tokens, &mut pos, last_line)?;
                trees.push(tree);
            }
            (Token::Close, line) => {
                return Err(Error::Syntax {
                    line,
                    message: "unmatched ')'".into(),
                })
            }
            (Token::Atom(a), line) => {
                return Err(Error::Syntax {
                    line,
                    message: format!("bare token {a:?} outside any tree"),
                })
            }
        }
    }
    Ok(trees)
}

/// Parses `( label child* )` starting at an Open token.
fn parse_node(tokens: &[(Token<'_>, usize)], pos: &mut usize, last_line: usize) -> Result<Tree> {
    let eof = || Error::Syntax {
        line: last_line,
        message: "unexpected end of input: unbalanced brackets".into(),
    };
    let open_line = tokens[*pos].1;
    *pos += 1;
    let label = match tokens.get(*pos) {
        Some((Token::Atom(a), line)) => {
            if !is_valid_name(a) {
                return Err(Error::Syntax {
                    line: *line,
                    message: format!("invalid label {a:?}"),
                });
            }
            *pos += 1;
            Some(Symbol::new(a))
        }
        Some(_) => None,
        None => return Err(eof()),
    };
    let mut children = Vec::new();
    loop {
        match tokens.get(*pos) {
            None => return Err(eof()),
            Some((Token::Close, _)) => {
                *pos += 1;
                break;
            }
            Some((Token::Open, _)) => children.push(parse_node(tokens, pos, last_line)?),
            Some((Token::Atom(a), line)) => {
                if !is_valid_name(a) {
                    return Err(Error::Syntax {
                        line: *line,
                        message: format!("invalid label {a:?}"),
                    });
                }
                children.push(Tree::leaf(*a));
                *pos += 1;
            }
        }
    }
    match label {
        Some(l) => Ok(Tree::branch(l, children)),
        // Penn-style unlabelled wrapper around a single tree.
        None if children.len() == 1 => Ok(children.pop().unwrap()),
        None => Err(Error::Syntax {
            line: open_line,
            message: "node without a label".into(),
        }),
    }
}

/// Word → pos-tags attested in a tree-bank.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PosLexicon {
    pub entries: BTreeMap<Symbol, BTreeSet<Symbol>>,
}

impl PosLexicon {
    pub fn insert(&mut self, word: Symbol, tag: Symbol) {
        self.entries.entry(word).or_default().insert(tag);
    }

    pub fn tags(&self, word: Symbol) -> Option<&BTreeSet<Symbol>> {
        self.entries.get(&word)
    }

    /// Collects (word, tag) pairs from a word-bearing tree-bank.
    pub fn from_treebank(tb: &TreeBank) -> Result<PosLexicon> {
        Ok(strip_words(tb)?.lexicon)
    }

    /// Tag lattice for a sentence: every tag each word was seen with. Unknown
    /// words yield an empty position.
    pub fn lattice(&self, words: &[Symbol]) -> Vec<Vec<Symbol>> {
        words
            .iter()
            .map(|w| {
                self.tags(*w)
                    .map(|s| s.iter().copied().collect())
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn merge(&mut self, other: &PosLexicon) {
        for (w, tags) in &other.entries {
            self.entries
                .entry(*w)
                .or_default()
                .extend(tags.iter().copied());
        }
    }
}

/// Result of [`strip_words`].
#[derive(Clone, Debug)]
pub struct Stripped {
    pub treebank: TreeBank,
    /// The words of each tree, in order.
    pub sentences: Vec<Vec<Symbol>>,
    pub lexicon: PosLexicon,
}

/// Deletes word leaves so pos-tags become the leaves. Every word must be the
/// only child of its pos-tag.
pub fn strip_words(tb: &TreeBank) -> Result<Stripped> {
    let mut trees = Vec::with_capacity(tb.trees.len());
    let mut sentences = Vec::with_capacity(tb.trees.len());
    let mut lexicon = PosLexicon::default();
    for (i, t) in tb.trees.iter().enumerate() {
        let mut words = Vec::new();
        let mut cut = Vec::new();
        for leaf in t.leaves() {
            let parent = t.parent(leaf).ok_or_else(|| Error::Annotation {
                tree: i,
                message: format!("word {} has no pos-tag", t.label(leaf)),
            })?;
            if t.children(parent).len() != 1 {
                return Err(Error::Annotation {
                    tree: i,
                    message: format!(
                        "{} dominates {} children including word {}; a pos-tag must dominate exactly one word",
                        t.label(parent),
                        t.children(parent).len(),
                        t.label(leaf)
                    ),
                });
            }
            words.push(t.label(leaf));
            lexicon.insert(t.label(leaf), t.label(parent));
            cut.push(parent);
        }
        let (reduced, _) = t.reduce_at(&cut)?;
        trees.push(reduced);
        sentences.push(words);
    }
    Ok(Stripped {
        treebank: TreeBank {
            trees,
            start: tb.start,
        },
        sentences,
        lexicon,
    })
}

/// Symbol roles inferred from tree positions.
#[derive(Clone, Debug, Default)]
pub struct Alphabet {
    pub words: BTreeSet<Symbol>,
    pub pos_tags: BTreeSet<Symbol>,
    pub phrasal: BTreeSet<Symbol>,
    pub start: Option<Symbol>,
}

impl Alphabet {
    /// Leaves are words, their parents pos-tags, everything else phrasal.
    pub fn infer(tb: &TreeBank) -> Alphabet {
        let mut alpha = Alphabet {
            start: Some(tb.start),
            ..Alphabet::default()
        };
        for t in &tb.trees {
            for (a, n) in t.nodes().iter().enumerate() {
                if n.children.is_empty() {
                    if n.parent.is_some() {
                        alpha.words.insert(n.label);
                    }
                } else if n.children.len() == 1 && t.is_leaf(n.children[0]) {
                    alpha.pos_tags.insert(n.label);
                } else if a != 0 {
                    alpha.phrasal.insert(n.label);
                }
            }
        }
        alpha
    }

    /// Same, with pos-tags declared up front; used for corpora that break the
    /// leaf/pos-tag convention.
    pub fn with_declared_tags(tb: &TreeBank, tags: BTreeSet<Symbol>) -> Alphabet {
        let mut alpha = Alphabet::infer(tb);
        alpha.phrasal.extend(
            alpha
                .pos_tags
                .difference(&tags)
                .copied()
                .collect::<Vec<_>>(),
        );
        alpha.phrasal.retain(|s| !tags.contains(s));
        alpha.pos_tags = tags;
        alpha
    }

    pub fn kind(&self, s: Symbol) -> Option<SymbolKind> {
        if self.start == Some(s) {
            Some(SymbolKind::Start)
        } else if self.phrasal.contains(&s) {
            Some(SymbolKind::Phrasal)
        } else if self.pos_tags.contains(&s) {
            Some(SymbolKind::PosTag)
        } else if self.words.contains(&s) {
            Some(SymbolKind::Word)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub lhs: Symbol,
    pub rhs: Vec<Symbol>,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, join(&self.rhs))
    }
}

/// The set of rules appearing in a tree-bank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfGrammar {
    pub rules: BTreeSet<Rule>,
    pub start: Symbol,
}

impl CfGrammar {
    /// Rule file: a `%start S` line followed by `lhs -> rhs...` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("%start {}\n", self.start);
        for r in &self.rules {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<CfGrammar> {
        let mut start = None;
        let mut rules = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(s) = line.strip_prefix("%start") {
                let s = s.trim();
                if !is_valid_name(s) {
                    return Err(Error::format(i + 1, format!("bad start symbol {s:?}")));
                }
                start = Some(Symbol::new(s));
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| Error::format(i + 1, "expected `lhs -> rhs`"))?;
            let lhs = lhs.trim();
            let rhs: Vec<&str> = rhs.split_whitespace().collect();
            if !is_valid_name(lhs) || rhs.is_empty() {
                return Err(Error::format(
                    i + 1,
                    "rule needs a symbol on the left and at least one on the right",
                ));
            }
            rules.insert(Rule {
                lhs: Symbol::new(lhs),
                rhs: rhs.into_iter().map(Symbol::new).collect(),
            });
        }
        let start = start.ok_or_else(|| Error::format(1, "missing %start line"))?;
        Ok(CfGrammar { rules, start })
    }
}

/// Every (parent → children) pair in the tree-bank, duplicates collapsed.
pub fn extract_cfg(tb: &TreeBank) -> CfGrammar {
    let mut rules = BTreeSet::new();
    for t in &tb.trees {
        for n in t.nodes() {
            if !n.children.is_empty() {
                rules.insert(Rule {
                    lhs: n.label,
                    rhs: n.children.iter().map(|&c| t.label(c)).collect(),
                });
            }
        }
    }
    CfGrammar {
        rules,
        start: tb.start,
    }
}
