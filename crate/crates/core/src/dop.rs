//! Node marking and fragment projection for DOP-style subtree grammars.
//!
//! Trees here keep their words. A fragment is cut out of a tree at marked
//! nodes only: its root and every frontier node must be marked.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::learner::LearnedLexicon;
use crate::symbol::Symbol;
use crate::treebank::{Address, Tree, TreeBank};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProjectionLimits {
    /// Maximum fragment depth.
    pub depth: usize,
    /// Maximum number of substitution sites on the frontier.
    pub sites: usize,
    /// Maximum number of words on the frontier.
    pub words: usize,
    /// Maximum run of adjacent frontier words.
    pub consecutive: usize,
}

impl Default for ProjectionLimits {
    fn default() -> Self {
        ProjectionLimits {
            depth: 4,
            sites: 2,
            words: 7,
            consecutive: 2,
        }
    }
}

impl ProjectionLimits {
    pub const UNBOUNDED: ProjectionLimits = ProjectionLimits {
        depth: usize::MAX,
        sites: usize::MAX,
        words: usize::MAX,
        consecutive: usize::MAX,
    };

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.sites == 0 || self.words == 0 || self.consecutive == 0 {
            return Err(Error::Input("projection limits must be positive".into()));
        }
        Ok(())
    }
}

/// Per tree, per address: may the tree be cut here.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMarking {
    pub marks: Vec<Vec<bool>>,
}

impl NodeMarking {
    pub fn all(tb: &TreeBank) -> NodeMarking {
        NodeMarking {
            marks: tb.trees.iter().map(|t| vec![true; t.len()]).collect(),
        }
    }

    pub fn marked_count(&self) -> usize {
        self.marks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .sum()
    }
}

/// A node all of whose children are leaves.
fn is_preterminal(t: &Tree, a: Address) -> bool {
    let kids = t.children(a);
    !kids.is_empty() && kids.iter().all(|&c| t.is_leaf(c))
}

/// Every embedding of `pattern` into `t`, as the address of each pattern node
/// in `t`. A pattern leaf matches any node carrying its label.
pub fn occurrences(t: &Tree, pattern: &Tree) -> Vec<Vec<Address>> {
    let mut out = Vec::new();
    for a in 0..t.len() {
        let mut map = vec![0; pattern.len()];
        if embed(t, a, pattern, 0, &mut map) {
            out.push(map);
        }
    }
    out
}

fn embed(t: &Tree, a: Address, p: &Tree, q: Address, map: &mut [Address]) -> bool {
    if t.label(a) != p.label(q) {
        return false;
    }
    map[q] = a;
    let pk = p.children(q);
    if pk.is_empty() {
        return true;
    }
    let tk = t.children(a);
    pk.len() == tk.len() && pk.iter().zip(tk).all(|(&qc, &ac)| embed(t, ac, p, qc, map))
}

/// Marks words, pre-terminals, roots and frontier nodes of every associated
/// subtree occurrence, and every node internal to no occurrence.
pub fn mark_for_dop<T>(tb: &TreeBank, lex: &LearnedLexicon<T>) -> Result<NodeMarking> {
    let mut internal: Vec<Vec<bool>> = tb.trees.iter().map(|t| vec![false; t.len()]).collect();
    let mut boundary: Vec<Vec<bool>> = internal.clone();
    for entry in &lex.entries {
        for (pattern, _) in &entry.subtrees {
            let mut found = false;
            for (ti, t) in tb.trees.iter().enumerate() {
                for map in occurrences(t, pattern) {
                    found = true;
                    for (q, &a) in map.iter().enumerate() {
                        if q == 0 || pattern.is_leaf(q) {
                            boundary[ti][a] = true;
                        } else {
                            internal[ti][a] = true;
                        }
                    }
                }
            }
            if !found {
                return Err(Error::Provenance(format!(
                    "associated subtree {pattern} of entry `{}` occurs in no tree",
                    crate::symbol::join(&entry.ssf)
                )));
            }
        }
    }
    let marks = tb
        .trees
        .iter()
        .enumerate()
        .map(|(ti, t)| {
            (0..t.len())
                .map(|a| {
                    t.is_leaf(a) || is_preterminal(t, a) || boundary[ti][a] || !internal[ti][a]
                })
                .collect()
        })
        .collect();
    Ok(NodeMarking { marks })
}

/// A projected fragment and the source addresses it covers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub tree: Tree,
    pub nodes: Vec<Address>,
}

impl Fragment {
    pub fn root(&self) -> Symbol {
        self.tree.label(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Word,
    Site,
}

#[derive(Clone)]
struct Partial {
    nodes: Vec<Address>,
    height: usize,
    frontier: Vec<Slot>,
}

fn sites(f: &[Slot]) -> usize {
    f.iter().filter(|s| **s == Slot::Site).count()
}

fn words(f: &[Slot]) -> usize {
    f.len() - sites(f)
}

fn longest_word_run(f: &[Slot]) -> usize {
    let (mut best, mut run) = (0, 0);
    for s in f {
        run = if *s == Slot::Word { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

/// Ways to expand internal node `x` with at most `budget` levels below it.
fn expansions(
    t: &Tree,
    marks: &[bool],
    x: Address,
    budget: usize,
    lim: &ProjectionLimits,
) -> Vec<Partial> {
    let mut acc = vec![Partial {
        nodes: vec![x],
        height: 1,
        frontier: Vec::new(),
    }];
    for &c in t.children(x) {
        let mut options: Vec<Partial> = Vec::new();
        if t.is_leaf(c) {
            options.push(Partial {
                nodes: vec![c],
                height: 0,
                frontier: vec![Slot::Word],
            });
        } else {
            if marks[c] {
                options.push(Partial {
                    nodes: vec![c],
                    height: 0,
                    frontier: vec![Slot::Site],
                });
            }
            if budget > 1 {
                options.extend(expansions(t, marks, c, budget - 1, lim));
            }
        }
        let mut next = Vec::new();
        for p in &acc {
            for o in &options {
                let mut frontier = p.frontier.clone();
                frontier.extend_from_slice(&o.frontier);
                if sites(&frontier) > lim.sites || words(&frontier) > lim.words {
                    continue;
                }
                let mut nodes = p.nodes.clone();
                nodes.extend_from_slice(&o.nodes);
                next.push(Partial {
                    nodes,
                    height: p.height.max(o.height + 1),
                    frontier,
                });
            }
        }
        acc = next;
        if acc.is_empty() {
            break;
        }
    }
    acc
}

fn build(t: &Tree, inside: &[bool], a: Address) -> Tree {
    let kids: Vec<Address> = t
        .children(a)
        .iter()
        .copied()
        .filter(|&c| inside[c])
        .collect();
    if kids.is_empty() {
        Tree::leaf(t.label(a))
    } else {
        Tree::branch(t.label(a), kids.into_iter().map(|c| build(t, inside, c)))
    }
}

/// Fragments of `t` whose root and frontier nodes are marked and which stay
/// within `lim`, ordered by root address, then by covered addresses.
pub fn project_subtrees(t: &Tree, marks: &[bool], lim: &ProjectionLimits) -> Vec<Fragment> {
    let mut out = Vec::new();
    for r in 0..t.len() {
        if t.is_leaf(r) || !marks[r] {
            continue;
        }
        let mut parts = expansions(t, marks, r, lim.depth, lim);
        parts.retain(|p| longest_word_run(&p.frontier) <= lim.consecutive);
        for p in &mut parts {
            p.nodes.sort_unstable();
        }
        parts.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        for p in parts {
            let mut inside = vec![false; t.len()];
            for &n in &p.nodes {
                inside[n] = true;
            }
            out.push(Fragment {
                tree: build(t, &inside, r),
                nodes: p.nodes,
            });
        }
    }
    out
}

/// Distinct fragments with their root label and corpus count, keyed by
/// bracketed form.
pub fn fragment_table(
    tb: &TreeBank,
    m: &NodeMarking,
    lim: &ProjectionLimits,
) -> BTreeMap<String, (Symbol, u64)> {
    let mut table: BTreeMap<String, (Symbol, u64)> = BTreeMap::new();
    for (t, marks) in tb.trees.iter().zip(&m.marks) {
        for f in project_subtrees(t, marks, lim) {
            table
                .entry(f.tree.to_bracketed())
                .or_insert((f.root(), 0))
                .1 += 1;
        }
    }
    table
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GrammarSize {
    /// Distinct fragments.
    pub fragments: usize,
    /// Nodes summed over distinct fragments.
    pub nodes: usize,
    /// Fragment occurrences, counting repeats.
    pub occurrences: u64,
}

pub fn grammar_size(tb: &TreeBank, m: &NodeMarking, lim: &ProjectionLimits) -> GrammarSize {
    let mut size = GrammarSize::default();
    let mut seen: rustc_hash::FxHashSet<Tree> = Default::default();
    for (t, marks) in tb.trees.iter().zip(&m.marks) {
        for f in project_subtrees(t, marks, lim) {
            size.occurrences += 1;
            if !seen.contains(&f.tree) {
                size.nodes += f.tree.len();
                size.fragments += 1;
                seen.insert(f.tree);
            }
        }
    }
    size
}

/// Writes a fragment table: `count<TAB>root<TAB>fragment` per line.
pub fn write_fragment_table(table: &BTreeMap<String, (Symbol, u64)>) -> String {
    let mut out = String::from("# count\troot\tfragment\n");
    for (frag, (root, count)) in table {
        out.push_str(&format!("{count}\t{root}\t{frag}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::ContextPattern;
    use crate::learner::{LearnedEntry, LearnerConfig};

    fn tree(s: &str) -> Tree {
        Tree::parse(s).unwrap()
    }

    fn lexicon(subtrees: &[&str]) -> LearnedLexicon<f64> {
        let mut lex = LearnedLexicon::empty(LearnerConfig::default());
        for s in subtrees {
            let t = tree(s);
            lex.entries.push(LearnedEntry {
                ssf: t.frontier(0).unwrap(),
                context: ContextPattern::WILDCARD,
                theta: 1.0,
                iteration: 0,
                fc: 1,
                f: 1,
                subtrees: vec![(t, 1)],
            });
        }
        lex
    }

    fn bank(trees: &[&str]) -> TreeBank {
        let trees: Vec<Tree> = trees.iter().map(|s| tree(s)).collect();
        let start = trees[0].label(0);
        TreeBank::new(trees, start).unwrap()
    }

    #[test]
    fn empty_lexicon_marks_everything() {
        let tb = bank(&["(S (np (n ik)) (vp (v wil)))"]);
        let m = mark_for_dop(&tb, &lexicon(&[])).unwrap();
        assert_eq!(m, NodeMarking::all(&tb));
    }

    #[test]
    fn worked_example_marking() {
        let tb = bank(&["(S (mp (p van) (np amsterdam) (p naar) (np utrecht)))"]);
        let m = mark_for_dop(&tb, &lexicon(&["(S (mp p np p np))"])).unwrap();
        let t = &tb.trees[0];
        let mp = t.children(0)[0];
        assert!(!m.marks[0][mp]);
        for a in 0..t.len() {
            if a != mp {
                assert!(m.marks[0][a], "{}", t.label(a));
            }
        }
    }

    #[test]
    fn phrasal_leaves_of_patterns_match_whole_nodes() {
        let t = tree("(S (per ik) (vp (v wil) (mp (p van) (np nijmegen)) (infp vertrekken)))");
        let p = tree("(S per (vp v mp infp))");
        let occ = occurrences(&t, &p);
        assert_eq!(occ.len(), 1);
        assert_eq!(occ[0][0], 0);
        let tb = bank(&[&t.to_bracketed()]);
        let m = mark_for_dop(&tb, &lexicon(&["(S per (vp v mp infp))"])).unwrap();
        let vp = t.children(0)[1];
        assert!(!m.marks[0][vp]);
        assert_eq!(m.marked_count(), t.len() - 1);
    }

    #[test]
    fn missing_subtree_is_a_provenance_error() {
        let tb = bank(&["(S (np (n ik)))"]);
        assert!(matches!(
            mark_for_dop(&tb, &lexicon(&["(S (vp v))"])),
            Err(Error::Provenance(_))
        ));
    }

    #[test]
    fn depth_one_fragments_are_rules() {
        let t = tree("(S (np (det de) (n man)) (vp (v liep)))");
        let marks = vec![true; t.len()];
        let lim = ProjectionLimits {
            depth: 1,
            ..ProjectionLimits::UNBOUNDED
        };
        let frags: Vec<String> = project_subtrees(&t, &marks, &lim)
            .iter()
            .map(|f| f.tree.to_bracketed())
            .collect();
        assert_eq!(
            frags,
            vec![
                "(S np vp)",
                "(np det n)",
                "(det de)",
                "(n man)",
                "(vp v)",
                "(v liep)"
            ]
        );
    }

    #[test]
    fn unmarked_nodes_are_never_cut() {
        let t = tree("(S (np (det de) (n man)) (vp (v liep)))");
        let mut marks = vec![true; t.len()];
        let np = t.children(0)[0];
        marks[np] = false;
        for f in project_subtrees(&t, &marks, &ProjectionLimits::UNBOUNDED) {
            assert_ne!(f.nodes[0], np);
            if f.nodes.contains(&np) {
                assert!(f.nodes.contains(&(np + 1)));
            }
        }
    }

    #[test]
    fn limits_apply() {
        let t = tree("(S (a x) (b y) (c z))");
        let marks = vec![true; t.len()];
        let lim = ProjectionLimits {
            consecutive: 2,
            ..ProjectionLimits::UNBOUNDED
        };
        let frags = project_subtrees(&t, &marks, &lim);
        assert!(frags
            .iter()
            .all(|f| f.tree.to_bracketed() != "(S (a x) (b y) (c z))"));
        assert!(frags
            .iter()
            .any(|f| f.tree.to_bracketed() == "(S (a x) (b y) c)"));
        let lim = ProjectionLimits {
            sites: 1,
            ..ProjectionLimits::UNBOUNDED
        };
        assert!(project_subtrees(&t, &marks, &lim)
            .iter()
            .all(|f| f.tree.to_bracketed() != "(S a b c)"));
    }

    #[test]
    fn grammar_size_counts() {
        let tb = bank(&["(S (a x) (b y))", "(S (a x) (b y))"]);
        let all = NodeMarking::all(&tb);
        let size = grammar_size(&tb, &all, &ProjectionLimits::default());
        // Per tree: 4 rooted at S, 1 at a, 1 at b.
        assert_eq!(size.occurrences, 12);
        assert_eq!(size.fragments, 6);
        let table = fragment_table(&tb, &all, &ProjectionLimits::default());
        assert_eq!(table["(S a b)"], (Symbol::new("S"), 2));
        let empty = TreeBank {
            trees: Vec::new(),
            start: Symbol::new("S"),
        };
        assert_eq!(
            grammar_size(
                &empty,
                &NodeMarking::all(&empty),
                &ProjectionLimits::default()
            ),
            GrammarSize::default()
        );
    }
}
