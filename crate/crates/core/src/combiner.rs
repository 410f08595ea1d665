//! Two-stage parsing: partial parse first, then let the CFG parser fill in
//! what the partial parse left open without crossing sure borders.

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashSet;

use crate::cfg_parser::{crosses, extract_forest, ItemKey, ParseForest, SpanConstraints, TParser};
use crate::symbol::Symbol;
use crate::tsg_parser::{partial_parse, PartialChart, Tsg};

/// Which partial items impose border constraints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Trust {
    /// Only items built entirely from θ = 1 entries.
    #[default]
    Sure,
    /// Every partial item.
    All,
}

impl FromStr for Trust {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sure" | "sure-only" => Ok(Trust::Sure),
            "all" => Ok(Trust::All),
            _ => Err(format!("unknown trust mode `{s}` (expected sure or all)")),
        }
    }
}

impl fmt::Display for Trust {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trust::Sure => "sure",
            Trust::All => "all",
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct CombinedParse {
    pub forest: ParseForest,
    /// Items of the CFG chart before forest extraction.
    pub chart_items: usize,
    /// Partial items that were seeded.
    pub partial_items_used: Vec<ItemKey>,
    /// Spans no bracket may cross.
    pub sure_spans: Vec<(usize, usize)>,
    /// Crossing pairs of sure items; both members were removed.
    pub removed_crossing_pairs: Vec<(ItemKey, ItemKey)>,
    /// Items dropped for crossing a sure span, including anything that
    /// depended on them.
    pub dropped: Vec<ItemKey>,
}

fn sure_spans(pc: &PartialChart) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = pc.sure_keys().map(|k| k.span()).collect();
    spans.sort();
    spans.dedup();
    spans
}

/// Spans of a sure item and of every internal node of its analyses.
fn brackets(pc: &PartialChart, g: &Tsg, key: &ItemKey) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = pc.items[key]
        .analyses
        .iter()
        .flat_map(|a| pc.unfold(g, key, a).into_iter().map(|(k, _)| k.span()))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Removes both members of every crossing pair of sure items, until no such
/// pair is left. Two sure items cross when a bracket of one (its span or the
/// span of a node inside one of its analyses) crosses a bracket of the other.
/// Returns the pairs found.
pub fn resolve_crossings(pc: &PartialChart, g: &Tsg) -> (PartialChart, Vec<(ItemKey, ItemKey)>) {
    let mut pc = pc.clone();
    let mut pairs = Vec::new();
    loop {
        let sure: Vec<(ItemKey, Vec<(usize, usize)>)> =
            pc.sure_keys().map(|k| (k, brackets(&pc, g, &k))).collect();
        let mut gone = FxHashSet::default();
        for (x, (a, ba)) in sure.iter().enumerate() {
            for (b, bb) in &sure[x + 1..] {
                if ba.iter().any(|s| bb.iter().any(|t| crosses(*s, *t))) {
                    pairs.push((*a, *b));
                    gone.insert(*a);
                    gone.insert(*b);
                }
            }
        }
        if gone.is_empty() {
            return (pc, pairs);
        }
        pc.remove(g, &gone);
    }
}

/// Second stage. `pc` must come from the same input with crossings already
/// resolved.
pub fn combine_parse(
    input: &[Vec<Symbol>],
    pc: &PartialChart,
    g: &Tsg,
    parser: &TParser,
) -> CombinedParse {
    let mut pc = pc.clone();
    let mut dropped = Vec::new();
    let spans = loop {
        let spans = sure_spans(&pc);
        let crossing: FxHashSet<ItemKey> = pc
            .items
            .values()
            .filter(|i| !i.sure && spans.iter().any(|s| crosses(i.key.span(), *s)))
            .map(|i| i.key)
            .collect();
        dropped.extend(pc.remove(g, &crossing));
        let snapshot = pc.clone();
        dropped.extend(pc.retain_analyses(g, |k, a| {
            snapshot
                .unfold(g, k, a)
                .iter()
                .all(|(n, _)| !spans.iter().any(|s| crosses(n.span(), *s)))
        }));
        if sure_spans(&pc) == spans {
            break spans;
        }
    };
    dropped.sort();
    dropped.dedup();

    let mut seeds = Vec::new();
    for item in pc.items.values() {
        for a in &item.analyses {
            seeds.extend(pc.unfold(g, &item.key, a));
        }
    }
    let constraints = SpanConstraints {
        borders: spans.clone(),
        sealed: spans.clone(),
        seeds,
    };
    let chart = parser.parse(input, Some(&constraints));
    CombinedParse {
        forest: extract_forest(&chart),
        chart_items: chart.len(),
        partial_items_used: pc.keys().collect(),
        sure_spans: spans,
        removed_crossing_pairs: Vec::new(),
        dropped,
    }
}

/// Both stages on one input. With [`Trust::All`] the grammar is copied with
/// every elementary tree marked sure; callers parsing many inputs can do that
/// once with [`Tsg::trust_all`] and pass [`Trust::Sure`].
pub fn parse_combined(
    input: &[Vec<Symbol>],
    g: &Tsg,
    parser: &TParser,
    trust: Trust,
) -> CombinedParse {
    let trusted;
    let g = match trust {
        Trust::Sure => g,
        Trust::All => {
            trusted = g.clone().trust_all();
            &trusted
        }
    };
    let (pc, pairs) = resolve_crossings(&partial_parse(input, g), g);
    let mut cp = combine_parse(input, &pc, g, parser);
    cp.removed_crossing_pairs = pairs;
    cp
}

/// Forest items whose span crosses a sure span. Every bracket of every parse
/// in the forest is a forest item, so an empty result clears all parses.
pub fn audit(cp: &CombinedParse) -> Vec<ItemKey> {
    cp.forest
        .items
        .keys()
        .filter(|k| cp.sure_spans.iter().any(|s| crosses(k.span(), *s)))
        .copied()
        .collect()
}
