//! Learning "probably always" sub-sentential forms from a word-stripped
//! tree-bank.
//!
//! Each pass tabulates how often every frontier subsequence occurs and how
//! often it occurs as the exact frontier of a node, marks the nodes whose
//! frontier is a PA-SSF with a global reduction factor strictly higher than
//! every ancestor's and descendant's, reduces those nodes to leaves, and
//! repeats. When a pass marks nothing the threshold θ is lowered one step, down
//! to the configured floor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::scalar::Ratio;
use crate::symbol::{is_valid_name, join, Symbol};
use crate::treebank::{Address, Excision, Tree, TreeBank};

/// A sequence of pos-tags and phrasal symbols.
pub type Ssf = Vec<Symbol>;

/// Associated subtrees keyed by their bracketed form, with occurrence counts.
type Subtrees = BTreeMap<String, (Tree, u64)>;

const WILDCARD_TEXT: &str = "*";
const BOUNDARY_TEXT: &str = "<s>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextField {
    Any,
    Boundary,
    Sym(Symbol),
}

impl fmt::Display for ContextField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextField::Any => f.write_str(WILDCARD_TEXT),
            ContextField::Boundary => f.write_str(BOUNDARY_TEXT),
            ContextField::Sym(s) => write!(f, "{s}"),
        }
    }
}

impl ContextField {
    fn parse(s: &str) -> Option<ContextField> {
        match s {
            WILDCARD_TEXT => Some(ContextField::Any),
            BOUNDARY_TEXT => Some(ContextField::Boundary),
            s if is_valid_name(s) => Some(ContextField::Sym(Symbol::new(s))),
            _ => None,
        }
    }
}

/// Two symbols either side of an SSF occurrence, each possibly a wildcard.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextPattern {
    pub left2: ContextField,
    pub left1: ContextField,
    pub right1: ContextField,
    pub right2: ContextField,
}

impl ContextPattern {
    pub const WILDCARD: ContextPattern = ContextPattern {
        left2: ContextField::Any,
        left1: ContextField::Any,
        right1: ContextField::Any,
        right2: ContextField::Any,
    };

    pub fn fields(&self) -> [ContextField; 4] {
        [self.left2, self.left1, self.right1, self.right2]
    }

    fn from_fields(f: [ContextField; 4]) -> ContextPattern {
        ContextPattern {
            left2: f[0],
            left1: f[1],
            right1: f[2],
            right2: f[3],
        }
    }

    pub fn concrete_fields(&self) -> usize {
        self.fields()
            .iter()
            .filter(|f| **f != ContextField::Any)
            .count()
    }

    pub fn is_wildcard(&self) -> bool {
        *self == ContextPattern::WILDCARD
    }

    /// The all-wildcard pattern followed by the four patterns that keep exactly
    /// one of the actual neighbours.
    fn family(neighbours: [ContextField; 4]) -> [ContextPattern; 5] {
        let single = |k: usize| {
            let mut f = [ContextField::Any; 4];
            f[k] = neighbours[k];
            ContextPattern::from_fields(f)
        };
        [
            ContextPattern::WILDCARD,
            single(0),
            single(1),
            single(2),
            single(3),
        ]
    }

    pub fn parse(s: &str) -> Option<ContextPattern> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 4 {
            return None;
        }
        let mut f = [ContextField::Any; 4];
        for (k, p) in parts.iter().enumerate() {
            f[k] = ContextField::parse(p)?;
        }
        Some(ContextPattern::from_fields(f))
    }
}

impl fmt::Display for ContextPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.left2, self.left1, self.right1, self.right2
        )
    }
}

/// Neighbours of the frontier slice `[i, j)`; positions outside the frontier
/// read as the boundary marker.
pub fn neighbours(frontier: &[Symbol], i: usize, j: usize) -> [ContextField; 4] {
    let at = |p: Option<usize>| match p.and_then(|p| frontier.get(p)) {
        Some(s) => ContextField::Sym(*s),
        None => ContextField::Boundary,
    };
    [
        at(i.checked_sub(2)),
        at(i.checked_sub(1)),
        at(Some(j)),
        at(Some(j + 1)),
    ]
}

/// Occurrence counts for one (SSF, context) key.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    /// All occurrences.
    pub f: u64,
    /// Occurrences that are exactly the frontier of some node.
    pub fc: u64,
}

#[derive(Clone, Debug, Default)]
pub struct SsfStats {
    table: FxHashMap<Ssf, FxHashMap<ContextPattern, Counts>>,
}

impl SsfStats {
    pub fn get(&self, ssf: &[Symbol], ctx: &ContextPattern) -> Option<Counts> {
        self.table.get(ssf).and_then(|m| m.get(ctx)).copied()
    }

    pub fn len(&self) -> usize {
        self.table.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ssf, &ContextPattern, Counts)> {
        self.table
            .iter()
            .flat_map(|(s, m)| m.iter().map(move |(c, n)| (s, c, *n)))
    }

    fn add_tree(&mut self, t: &Tree) {
        let frontier = t.frontier(0).expect("root exists");
        let n = frontier.len();
        let mut constituent = vec![false; (n + 1) * (n + 1)];
        for (i, j) in t.spans() {
            constituent[i * (n + 1) + j] = true;
        }
        for i in 0..n {
            for j in i + 1..=n {
                let slice = &frontier[i..j];
                let inner = match self.table.get_mut(slice) {
                    Some(m) => m,
                    None => self.table.entry(slice.to_vec()).or_default(),
                };
                let is_c = constituent[i * (n + 1) + j] as u64;
                for ctx in ContextPattern::family(neighbours(&frontier, i, j)) {
                    let c = inner.entry(ctx).or_default();
                    c.f += 1;
                    c.fc += is_c;
                }
            }
        }
    }

    fn merge(&mut self, other: SsfStats) {
        for (ssf, m) in other.table {
            let inner = self.table.entry(ssf).or_default();
            for (ctx, c) in m {
                let e = inner.entry(ctx).or_default();
                e.f += c.f;
                e.fc += c.fc;
            }
        }
    }
}

/// Counts every contiguous frontier subsequence of every tree under the
/// all-wildcard pattern and the four one-field patterns.
pub fn tabulate(tb: &TreeBank) -> SsfStats {
    tabulate_trees(&tb.trees)
}

fn tabulate_trees(trees: &[Tree]) -> SsfStats {
    use rayon::prelude::*;
    trees
        .par_chunks(64)
        .map(|chunk| {
            let mut s = SsfStats::default();
            for t in chunk {
                s.add_tree(t);
            }
            s
        })
        .reduce(SsfStats::default, |mut a, b| {
            if a.table.len() < b.table.len() {
                let mut b = b;
                b.merge(a);
                b
            } else {
                a.merge(b);
                a
            }
        })
}

/// `f ≥ τ` and `fc / f ≥ θ`. Unknown keys are not PA-SSFs.
pub fn is_pa_ssf<T: Ratio>(
    stats: &SsfStats,
    ssf: &[Symbol],
    ctx: &ContextPattern,
    theta: T,
    tau: u64,
) -> bool {
    stats.get(ssf, ctx).is_some_and(|c| passes(c, theta, tau))
}

fn passes<T: Ratio>(c: Counts, theta: T, tau: u64) -> bool {
    c.f > 0 && c.f >= tau && T::from_counts(c.fc, c.f).at_least(theta)
}

/// Global reduction factor: `fc × (len − 1)`, or −∞ (`Grf(None)`) when the
/// sequence is not a PA-SSF. The derived ordering puts −∞ below every score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Grf(pub Option<u64>);

impl Grf {
    pub const NEG_INF: Grf = Grf(None);
}

impl fmt::Display for Grf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("-inf"),
        }
    }
}

pub fn grf(ssf: &[Symbol], fc: u64, pa: bool) -> Grf {
    if pa {
        Grf(Some(fc * (ssf.len() as u64).saturating_sub(1)))
    } else {
        Grf::NEG_INF
    }
}

/// Candidate context patterns for node `n`, most general first. Without
/// retreat only the all-wildcard pattern is admissible.
pub fn admissible_contexts(t: &Tree, n: Address, retreat: bool) -> Result<Vec<ContextPattern>> {
    t.get(n).ok_or(Error::UnknownAddress(n))?;
    if !retreat {
        return Ok(vec![ContextPattern::WILDCARD]);
    }
    let (i, j) = t.spans()[n];
    let frontier = t.frontier(0)?;
    Ok(ContextPattern::family(neighbours(&frontier, i, j)).to_vec())
}

/// Per-node outcome of the PA-SSF test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeScore {
    pub ssf: Ssf,
    /// First admissible context under which the test passed.
    pub context: Option<ContextPattern>,
    pub counts: Counts,
    pub grf: Grf,
}

/// Scores every node of `t`.
pub fn score_nodes<T: Ratio>(
    t: &Tree,
    stats: &SsfStats,
    theta: T,
    tau: u64,
    retreat: bool,
) -> Vec<NodeScore> {
    let frontier = t.frontier(0).expect("root exists");
    let spans = t.spans();
    let mut memo: FxHashMap<(usize, usize), NodeScore> = FxHashMap::default();
    spans
        .iter()
        .map(|&(i, j)| {
            memo.entry((i, j))
                .or_insert_with(|| {
                    let ssf = frontier[i..j].to_vec();
                    let family = ContextPattern::family(neighbours(&frontier, i, j));
                    let candidates = if retreat { &family[..] } else { &family[..1] };
                    let found = candidates.iter().find_map(|ctx| {
                        stats
                            .get(&ssf, ctx)
                            .filter(|c| passes(*c, theta, tau))
                            .map(|c| (*ctx, c))
                    });
                    match found {
                        Some((ctx, c)) => NodeScore {
                            grf: grf(&ssf, c.fc, true),
                            ssf,
                            context: Some(ctx),
                            counts: c,
                        },
                        None => NodeScore {
                            ssf,
                            context: None,
                            counts: Counts::default(),
                            grf: Grf::NEG_INF,
                        },
                    }
                })
                .clone()
        })
        .collect()
}

/// Nodes to reduce in `t` this pass.
///
/// A node qualifies when its frontier is a PA-SSF and its GRF is strictly
/// greater than that of every ancestor and descendant. Nodes of a unary chain
/// share one frontier occurrence, so they are treated as a single candidate
/// represented by the chain's topmost node. A one-symbol frontier always ties
/// with the leaf it ends in (both have GRF 0), so such nodes and leaves never
/// qualify. The result is sorted and pairwise non-nested.
pub fn mark_tree<T: Ratio>(
    t: &Tree,
    stats: &SsfStats,
    theta: T,
    tau: u64,
    retreat: bool,
) -> Vec<Address> {
    let scores = score_nodes(t, stats, theta, tau, retreat);
    marks_from_scores(t, &scores)
}

fn marks_from_scores(t: &Tree, scores: &[NodeScore]) -> Vec<Address> {
    let spans = t.spans();
    let mut marked = Vec::new();
    for a in 0..t.len() {
        if t.is_leaf(a) || scores[a].grf == Grf::NEG_INF || spans[a].1 - spans[a].0 == 1 {
            continue;
        }
        if t.parent(a).is_some_and(|p| spans[p] == spans[a]) {
            continue;
        }
        let mine = scores[a].grf;
        let beats = t
            .ancestors(a)
            .into_iter()
            .chain(t.descendants(a))
            .filter(|&x| spans[x] != spans[a])
            .all(|x| mine > scores[x].grf);
        if beats {
            marked.push(a);
        }
    }
    marked
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnerConfig<T> {
    pub theta_start: T,
    pub theta_floor: T,
    pub theta_step: T,
    pub tau_abs: u64,
    pub tau_frac: T,
    pub retreat: bool,
}

impl<T: Ratio> Default for LearnerConfig<T> {
    fn default() -> Self {
        LearnerConfig {
            theta_start: T::one(),
            theta_floor: T::one(),
            theta_step: T::from_counts(1, 20),
            tau_abs: 10,
            tau_frac: T::from_counts(3, 1000),
            retreat: true,
        }
    }
}

impl<T: Ratio> LearnerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        if !(self.theta_floor > zero
            && self.theta_floor <= self.theta_start
            && self.theta_start <= one)
        {
            return Err(Error::Input(format!(
                "need 0 < theta_floor ({}) <= theta_start ({}) <= 1",
                self.theta_floor, self.theta_start
            )));
        }
        if self.theta_step <= zero {
            return Err(Error::Input(format!(
                "theta_step must be positive, got {}",
                self.theta_step
            )));
        }
        if self.tau_frac < zero {
            return Err(Error::Input("tau_frac must not be negative".into()));
        }
        Ok(())
    }

    /// `max(tau_abs, ceil(tau_frac × trees))`, fixed from the original corpus.
    pub fn effective_tau(&self, trees: usize) -> u64 {
        self.tau_abs.max(self.tau_frac.ceil_mul(trees as u64))
    }

    /// Number of times θ can be lowered before reaching the floor.
    pub fn theta_steps(&self) -> u64 {
        (self.theta_start - self.theta_floor).whole_steps(self.theta_step)
    }

    pub fn theta_at(&self, level: u64) -> T {
        self.theta_start - self.theta_step * T::from_counts(level, 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedEntry<T> {
    pub ssf: Ssf,
    pub context: ContextPattern,
    pub theta: T,
    pub iteration: usize,
    pub fc: u64,
    pub f: u64,
    /// Distinct associated subtrees with their occurrence counts, sorted by
    /// bracketed form.
    pub subtrees: Vec<(Tree, u64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedLexicon<T> {
    pub entries: Vec<LearnedEntry<T>>,
    pub config: LearnerConfig<T>,
    pub tau: u64,
}

impl<T: Ratio> LearnedLexicon<T> {
    pub fn empty(config: LearnerConfig<T>) -> Self {
        LearnedLexicon {
            entries: Vec::new(),
            config,
            tau: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reductions performed in one productive pass.
#[derive(Clone, Debug)]
pub struct Pass<T> {
    pub iteration: usize,
    pub theta: T,
    /// `(tree index, excisions)` for every tree that changed.
    pub reductions: Vec<(usize, Vec<Excision>)>,
}

#[derive(Clone, Debug)]
pub struct LearnOutcome<T> {
    pub lexicon: LearnedLexicon<T>,
    pub residual: TreeBank,
    pub trace: Vec<Pass<T>>,
    /// Tabulate/mark rounds run, including the unproductive round that ends
    /// each θ level.
    pub passes: usize,
}

impl<T: Ratio> LearnOutcome<T> {
    /// Replays the trace backwards from the residual tree-bank.
    pub fn reconstruct(&self) -> Result<TreeBank> {
        reconstruct(&self.residual, &self.trace)
    }
}

pub fn reconstruct<T>(residual: &TreeBank, trace: &[Pass<T>]) -> Result<TreeBank> {
    let mut trees = residual.trees.clone();
    for pass in trace.iter().rev() {
        for (idx, excisions) in &pass.reductions {
            let at: Vec<(Address, &Tree)> =
                excisions.iter().map(|e| (e.leaf, &e.subtree)).collect();
            trees[*idx] = trees[*idx].substitute(&at)?;
        }
    }
    Ok(TreeBank {
        trees,
        start: residual.start,
    })
}

/// Runs the learner to completion on a word-stripped tree-bank.
pub fn learn<T: Ratio>(tb: &TreeBank, cfg: &LearnerConfig<T>) -> Result<LearnOutcome<T>> {
    cfg.validate()?;
    let tau = cfg.effective_tau(tb.len());
    let max_level = cfg.theta_steps();
    let mut trees = tb.trees.clone();
    let mut level = 0u64;
    let mut theta = cfg.theta_start;
    let mut passes = 0usize;
    let mut trace = Vec::new();
    let mut entries: Vec<LearnedEntry<T>> = Vec::new();
    let mut stats: Option<SsfStats> = None;

    while trees.iter().any(|t| t.len() > 1) {
        let current = stats.get_or_insert_with(|| tabulate_trees(&trees));
        let iteration = passes;
        passes += 1;

        let mut grouped: BTreeMap<(Ssf, ContextPattern), (Counts, Subtrees)> = BTreeMap::new();
        let mut reductions = Vec::new();
        for (idx, t) in trees.iter_mut().enumerate() {
            let scores = score_nodes(t, current, theta, tau, cfg.retreat);
            let marked = marks_from_scores(t, &scores);
            if marked.is_empty() {
                continue;
            }
            let (reduced, excisions) = t.reduce_at(&marked)?;
            for (&a, ex) in marked.iter().zip(&excisions) {
                let s = &scores[a];
                let ctx = s.context.expect("marked nodes passed the test");
                let slot = grouped
                    .entry((s.ssf.clone(), ctx))
                    .or_insert_with(|| (s.counts, BTreeMap::new()));
                let key = ex.subtree.to_bracketed();
                slot.1
                    .entry(key)
                    .or_insert_with(|| (ex.subtree.clone(), 0))
                    .1 += 1;
            }
            *t = reduced;
            reductions.push((idx, excisions));
        }

        if reductions.is_empty() {
            if level < max_level {
                level += 1;
                theta = cfg.theta_at(level);
                continue;
            }
            break;
        }
        for ((ssf, context), (counts, subtrees)) in grouped {
            entries.push(LearnedEntry {
                ssf,
                context,
                theta,
                iteration,
                fc: counts.fc,
                f: counts.f,
                subtrees: subtrees.into_values().collect(),
            });
        }
        trace.push(Pass {
            iteration,
            theta,
            reductions,
        });
        stats = None;
    }

    entries.sort_by(|a, b| (a.iteration, &a.ssf, a.context).cmp(&(b.iteration, &b.ssf, b.context)));
    Ok(LearnOutcome {
        lexicon: LearnedLexicon {
            entries,
            config: cfg.clone(),
            tau,
        },
        residual: TreeBank {
            trees,
            start: tb.start,
        },
        trace,
        passes,
    })
}

const LEXICON_HEADER: &str = "# iteration\ttheta\tcontext\tssf\tfc\tf\tsubtrees (count tree)...";

/// One line per entry, tab separated; subtrees are `count tree` fields.
pub fn write_lexicon<T: Ratio>(lex: &LearnedLexicon<T>) -> String {
    let c = &lex.config;
    let mut out = format!(
        "%config theta_start={} theta_floor={} theta_step={} tau_abs={} tau_frac={} retreat={} tau={}\n{}\n",
        c.theta_start, c.theta_floor, c.theta_step, c.tau_abs, c.tau_frac, c.retreat, lex.tau, LEXICON_HEADER
    );
    for e in &lex.entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            e.iteration,
            e.theta,
            e.context,
            join(&e.ssf),
            e.fc,
            e.f
        ));
        for (t, n) in &e.subtrees {
            out.push_str(&format!("\t{n} {t}"));
        }
        out.push('\n');
    }
    out
}

pub fn read_lexicon<T: Ratio>(text: &str) -> Result<LearnedLexicon<T>> {
    let mut config: Option<LearnerConfig<T>> = None;
    let mut tau = 0;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("%config") {
            let mut cfg = LearnerConfig::<T>::default();
            for kv in rest.split_whitespace() {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::format(line_no, format!("bad config item {kv:?}")))?;
                let ratio = || {
                    T::parse_ratio(v)
                        .ok_or_else(|| Error::format(line_no, format!("bad ratio {v:?}")))
                };
                let int = || {
                    v.parse::<u64>()
                        .map_err(|_| Error::format(line_no, format!("bad integer {v:?}")))
                };
                match k {
                    "theta_start" => cfg.theta_start = ratio()?,
                    "theta_floor" => cfg.theta_floor = ratio()?,
                    "theta_step" => cfg.theta_step = ratio()?,
                    "tau_abs" => cfg.tau_abs = int()?,
                    "tau_frac" => cfg.tau_frac = ratio()?,
                    "retreat" => {
                        cfg.retreat = v
                            .parse()
                            .map_err(|_| Error::format(line_no, format!("bad boolean {v:?}")))?
                    }
                    "tau" => tau = int()?,
                    _ => return Err(Error::format(line_no, format!("unknown config key {k:?}"))),
                }
            }
            config = Some(cfg);
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 6 {
            return Err(Error::format(
                line_no,
                "expected at least 6 tab-separated fields",
            ));
        }
        let iteration = fields[0]
            .parse()
            .map_err(|_| Error::format(line_no, "bad iteration"))?;
        let theta = T::parse_ratio(fields[1]).ok_or_else(|| Error::format(line_no, "bad theta"))?;
        let context = ContextPattern::parse(fields[2])
            .ok_or_else(|| Error::format(line_no, "bad context pattern"))?;
        let ssf: Ssf = fields[3].split_whitespace().map(Symbol::new).collect();
        if ssf.is_empty() || !fields[3].split_whitespace().all(is_valid_name) {
            return Err(Error::format(line_no, "bad ssf"));
        }
        let fc = fields[4]
            .parse()
            .map_err(|_| Error::format(line_no, "bad fc"))?;
        let f = fields[5]
            .parse()
            .map_err(|_| Error::format(line_no, "bad f"))?;
        let mut subtrees = Vec::new();
        for field in &fields[6..] {
            let (n, tree) = field
                .split_once(' ')
                .ok_or_else(|| Error::format(line_no, "subtree field must be `count tree`"))?;
            let n = n
                .parse()
                .map_err(|_| Error::format(line_no, "bad subtree count"))?;
            let tree = Tree::parse(tree).map_err(|e| Error::format(line_no, e.to_string()))?;
            if tree.frontier(0)? != ssf {
                return Err(Error::format(
                    line_no,
                    format!("subtree {tree} does not have frontier {}", join(&ssf)),
                ));
            }
            subtrees.push((tree, n));
        }
        entries.push(LearnedEntry {
            ssf,
            context,
            theta,
            iteration,
            fc,
            f,
            subtrees,
        });
    }
    let config = config.ok_or_else(|| Error::format(1, "missing %config line"))?;
    Ok(LearnedLexicon {
        entries,
        config,
        tau,
    })
}

/// Distinct (ssf, context) pairs learned, ignoring iteration.
pub fn learned_keys<T>(lex: &LearnedLexicon<T>) -> BTreeSet<(Ssf, ContextPattern)> {
    lex.entries
        .iter()
        .map(|e| (e.ssf.clone(), e.context))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{read_treebank, strip_words};
    use num_rational::Rational64;

    fn syms(s: &str) -> Vec<Symbol> {
        s.split_whitespace().map(Symbol::new).collect()
    }

    fn bank(text: &str) -> TreeBank {
        read_treebank(text).unwrap()
    }

    fn repeat(tree: &str, n: usize) -> String {
        (0..n).map(|_| format!("{tree}\n")).collect()
    }

    #[test]
    fn tabulate_single_tree() {
        let tb = bank("(S (A a) (B b))");
        let stripped = strip_words(&tb).unwrap().treebank;
        let stats = tabulate(&stripped);
        let w = ContextPattern::WILDCARD;
        assert_eq!(stats.get(&syms("A B"), &w), Some(Counts { f: 1, fc: 1 }));
        assert_eq!(stats.get(&syms("A"), &w), Some(Counts { f: 1, fc: 1 }));
    }

    #[test]
    fn pa_ssf_examples() {
        let mut stats = SsfStats::default();
        let w = ContextPattern::WILDCARD;
        let put = |stats: &mut SsfStats, s: &str, fc, f| {
            stats
                .table
                .entry(syms(s))
                .or_default()
                .insert(w, Counts { f, fc });
        };
        put(&mut stats, "x y", 10, 10);
        put(&mut stats, "y z", 8, 10);
        put(&mut stats, "z w", 3, 3);
        assert!(is_pa_ssf(&stats, &syms("x y"), &w, 1.0, 5));
        assert!(is_pa_ssf(&stats, &syms("y z"), &w, 0.75, 5));
        assert!(!is_pa_ssf(&stats, &syms("y z"), &w, 1.0, 5));
        assert!(!is_pa_ssf(&stats, &syms("z w"), &w, 1.0, 5));
        assert!(!is_pa_ssf(&stats, &syms("nope"), &w, 0.5, 0));
        assert!(is_pa_ssf(
            &stats,
            &syms("y z"),
            &w,
            Rational64::new(4, 5),
            10
        ));
    }

    #[test]
    fn grf_examples() {
        assert_eq!(grf(&syms("p np p np"), 20, true), Grf(Some(60)));
        assert_eq!(grf(&syms("p"), 20, true), Grf(Some(0)));
        assert_eq!(grf(&syms("p np"), 1000, false), Grf::NEG_INF);
        assert!(Grf::NEG_INF < Grf(Some(0)));
    }

    #[test]
    fn admissible_contexts_cases() {
        let t = Tree::parse("(S (A a b) c (B d e))").unwrap();
        let all = admissible_contexts(&t, 0, true).unwrap();
        assert_eq!(all.len(), 5);
        assert!(all[0].is_wildcard());
        for p in &all[1..] {
            assert_eq!(p.concrete_fields(), 1);
            assert!(p
                .fields()
                .iter()
                .all(|f| matches!(f, ContextField::Any | ContextField::Boundary)));
        }
        assert_eq!(
            admissible_contexts(&t, 0, false).unwrap(),
            vec![ContextPattern::WILDCARD]
        );
        // `c` sits at position 2 of `a b c d e`.
        let c = t.leaves()[2];
        let ctx = admissible_contexts(&t, c, true).unwrap();
        let concrete: Vec<ContextField> = ctx[1..]
            .iter()
            .map(|p| {
                *p.fields()
                    .iter()
                    .find(|f| **f != ContextField::Any)
                    .unwrap()
            })
            .collect();
        assert_eq!(
            concrete,
            syms("a b d e")
                .into_iter()
                .map(ContextField::Sym)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn context_pattern_text() {
        let p = ContextPattern {
            left1: ContextField::Sym(Symbol::new("v")),
            right2: ContextField::Boundary,
            ..ContextPattern::WILDCARD
        };
        assert_eq!(p.to_string(), "* v * <s>");
        assert_eq!(ContextPattern::parse(&p.to_string()), Some(p));
        assert_eq!(ContextPattern::parse("* *"), None);
    }

    #[test]
    fn no_marks_below_tau() {
        let tb = bank("(S (A a b) c)");
        let stats = tabulate(&tb);
        assert!(mark_tree(&tb.trees[0], &stats, 1.0, 5, true).is_empty());
    }

    /// Left/right trees of the worked example plus filler that makes `p np`
    /// frequent after a pronoun and verb.
    fn example_corpus() -> TreeBank {
        let left = "(S (mp (p van) (np amsterdam) (p naar) (np utrecht)))";
        let right = "(S (per ik) (vp (v wil) (mp (p van) (np nijmegen)) (infp vertrekken)))";
        let filler = "(S (per ik) (vp (v wil) (mp (p naar) (np utrecht))))";
        let text = repeat(left, 10) + &repeat(right, 10) + &repeat(filler, 40);
        strip_words(&bank(&text)).unwrap().treebank
    }

    fn example_config() -> LearnerConfig<f64> {
        LearnerConfig {
            tau_abs: 10,
            tau_frac: 0.0,
            ..LearnerConfig::default()
        }
    }

    #[test]
    fn worked_example_marks() {
        let tb = example_corpus();
        let stats = tabulate(&tb);
        let left = &tb.trees[0];
        let right = &tb.trees[10];

        let marked = mark_tree(left, &stats, 1.0, 10, true);
        assert_eq!(marked, vec![0]);
        assert_eq!(left.frontier(0).unwrap(), syms("p np p np"));

        let marked = mark_tree(right, &stats, 1.0, 10, true);
        assert_eq!(marked.len(), 1);
        assert_eq!(right.label(marked[0]).as_str(), "mp");
        assert_eq!(right.frontier(marked[0]).unwrap(), syms("p np"));

        let (right2, _) = right.reduce_at(&marked).unwrap();
        assert_eq!(right2.frontier(0).unwrap(), syms("per v mp infp"));
    }

    #[test]
    fn worked_example_transcript() {
        let out = learn(&example_corpus(), &example_config()).unwrap();
        let lines: Vec<String> = out
            .lexicon
            .entries
            .iter()
            .map(|e| format!("{} {} | {}", e.iteration, join(&e.ssf), e.context))
            .collect();
        assert_eq!(
            lines,
            vec![
                "0 p np | per * * *",
                "0 p np p np | * * * *",
                "0 per v p np | * * <s> *",
                "1 per v mp infp | * * * *",
            ]
        );
        assert!(out.residual.trees.iter().all(|t| t.len() == 1));
        let right_subtree = &out.lexicon.entries[3].subtrees[0].0;
        assert_eq!(right_subtree.to_bracketed(), "(S per (vp v mp infp))");
    }

    #[test]
    fn identical_trees_reduce_fully_in_one_pass() {
        let tb = strip_words(&bank(&repeat(
            "(S (A (a x) (b y)) (B (c z) (A (a x) (b y))))",
            12,
        )))
        .unwrap()
        .treebank;
        let out = learn(&tb, &example_config()).unwrap();
        assert!(out.residual.trees.iter().all(|t| t.len() == 1));
        assert_eq!(out.lexicon.len(), 1);
        assert_eq!(out.lexicon.entries[0].ssf, syms("a b c a b"));
        let keys = learned_keys(&out.lexicon);
        assert_eq!(keys.len(), out.lexicon.len());
    }

    #[test]
    fn threshold_schedule_unlocks_mixed_pairs() {
        // `a b` is a constituent in the first template and split in the second,
        // ten times each; ratio 0.5.
        // Varying the outer tags keeps every other sequence below τ.
        let text: String = (0..10)
            .map(|k| {
                format!("(S (X (a 1) (b 2)) (c{k} 3))\n(S (Y (d{k} 4) (a 1)) (Z (b 2) (e{k} 5)))\n")
            })
            .collect();
        let tb = strip_words(&bank(&text)).unwrap().treebank;
        let strict = LearnerConfig {
            retreat: false,
            ..example_config()
        };
        let relaxed = LearnerConfig {
            theta_floor: 0.5,
            ..strict.clone()
        };
        let has_ab = |lex: &LearnedLexicon<f64>| lex.entries.iter().any(|e| e.ssf == syms("a b"));
        let strict_out = learn(&tb, &strict).unwrap();
        assert!(!has_ab(&strict_out.lexicon));
        let relaxed_out = learn(&tb, &relaxed).unwrap();
        assert!(has_ab(&relaxed_out.lexicon));
        let e = relaxed_out
            .lexicon
            .entries
            .iter()
            .find(|e| e.ssf == syms("a b"))
            .unwrap();
        assert_eq!((e.fc, e.f), (10, 20));
        assert!((e.theta - 0.5).abs() < 1e-9);
    }

    #[test]
    fn exact_schedule_with_rationals() {
        let cfg = LearnerConfig::<Rational64> {
            theta_floor: Rational64::new(3, 4),
            ..LearnerConfig::default()
        };
        assert_eq!(cfg.theta_steps(), 5);
        assert_eq!(cfg.theta_at(5), Rational64::new(3, 4));
        let cfg = LearnerConfig::<Rational64> {
            theta_floor: Rational64::new(3, 4),
            theta_step: Rational64::new(3, 100),
            ..LearnerConfig::default()
        };
        assert_eq!(cfg.theta_steps(), 8);
        assert_eq!(cfg.effective_tau(4500), 14);
    }

    #[test]
    fn effective_tau_formula() {
        let cfg = LearnerConfig::<f64>::default();
        assert_eq!(cfg.effective_tau(100), 10);
        assert_eq!(cfg.effective_tau(4500), 14);
        assert!(LearnerConfig::<f64> {
            theta_floor: 0.0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(LearnerConfig::<f64> {
            theta_step: 0.0,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn lexicon_file_round_trip() {
        let out = learn(&example_corpus(), &example_config()).unwrap();
        let text = write_lexicon(&out.lexicon);
        let back: LearnedLexicon<f64> = read_lexicon(&text).unwrap();
        assert_eq!(back, out.lexicon);
        assert_eq!(write_lexicon(&back), text);
        let exact: LearnedLexicon<Rational64> = read_lexicon(&text).unwrap();
        assert_eq!(exact.config.theta_step, Rational64::new(1, 20));
        assert!(read_lexicon::<f64>("0\t1\t* * * *\ta b\t1\t1\n").is_err());
    }

    #[test]
    fn reconstruction_of_worked_example() {
        let tb = example_corpus();
        let out = learn(&tb, &example_config()).unwrap();
        assert_eq!(out.reconstruct().unwrap(), tb);
    }
}
