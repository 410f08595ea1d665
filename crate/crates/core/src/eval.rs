//! Experiments: seeded splits, per-sentence scoring of the plain and the
//! combined parser, aggregate metrics, learning curves and a synthetic
//! corpus generator.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cfg_parser::{contains_parse, count_active_nodes, extract_forest, ParseForest, TParser};
use crate::combiner::{parse_combined, Trust};
use crate::error::{Error, Result};
use crate::learner::{learn, LearnedLexicon, LearnerConfig};
use crate::scalar::Ratio;
use crate::symbol::Symbol;
use crate::treebank::{extract_cfg, strip_words, CfGrammar, PosLexicon, Tree, TreeBank};
use crate::tsg_parser::{build_tsg, Tsg};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    /// Test sentences shorter than this are not scored.
    pub min_len: usize,
}

impl SplitSpec {
    /// Nine tenths train, one tenth test.
    pub fn proportional(corpus: usize, seed: u64) -> SplitSpec {
        let test_size = (corpus / 10).max(1);
        SplitSpec {
            seed,
            train_size: corpus.saturating_sub(test_size),
            test_size,
            min_len: 2,
        }
    }
}

/// Shuffles with a generator seeded from `s.seed` and takes the first
/// `train_size` trees for training and the next `test_size` for testing.
pub fn split(tb: &TreeBank, s: &SplitSpec) -> Result<(TreeBank, TreeBank)> {
    if s.test_size == 0 {
        return Err(Error::InfeasibleSplit("test set would be empty".into()));
    }
    if s.train_size + s.test_size > tb.len() {
        return Err(Error::InfeasibleSplit(format!(
            "{} + {} trees requested from a corpus of {}",
            s.train_size,
            s.test_size,
            tb.len()
        )));
    }
    let mut idx: Vec<usize> = (0..tb.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(s.seed));
    Ok((
        tb.subset(&idx[..s.train_size]),
        tb.subset(&idx[s.train_size..s.train_size + s.test_size]),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParserKind {
    Plain,
    Combined,
}

impl ParserKind {
    pub fn name(self) -> &'static str {
        match self {
            ParserKind::Plain => "t-parser",
            ParserKind::Combined => "combined",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceResult {
    pub len: usize,
    pub right: bool,
    pub any: bool,
    pub active: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub sentences: usize,
    pub right_pct: f64,
    pub any_pct: f64,
    /// Zero when no sentence got a parse; see `precision_defined`.
    pub precision_pct: f64,
    pub precision_defined: bool,
    pub mean_active: f64,
    pub std_active: f64,
    pub mean_seconds: f64,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation; zero for fewer than two values.
fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl Metrics {
    pub fn from_results(rs: &[SentenceResult]) -> Metrics {
        let n = rs.len();
        let right = rs.iter().filter(|r| r.right).count();
        let any = rs.iter().filter(|r| r.any).count();
        let pct = |k: usize| {
            if n == 0 {
                0.0
            } else {
                100.0 * k as f64 / n as f64
            }
        };
        let active: Vec<f64> = rs.iter().map(|r| r.active as f64).collect();
        let seconds: Vec<f64> = rs.iter().map(|r| r.seconds).collect();
        Metrics {
            sentences: n,
            right_pct: pct(right),
            any_pct: pct(any),
            precision_pct: if any == 0 {
                0.0
            } else {
                100.0 * right as f64 / any as f64
            },
            precision_defined: any > 0,
            mean_active: mean(&active),
            std_active: sample_std(&active),
            mean_seconds: mean(&seconds),
        }
    }
}

/// One test sentence: its words and the word-stripped gold tree.
#[derive(Clone, Debug)]
pub struct TestItem {
    pub words: Vec<Symbol>,
    pub gold: Tree,
}

pub fn test_items(test: &TreeBank) -> Result<Vec<TestItem>> {
    let s = strip_words(test)?;
    Ok(s.sentences
        .into_iter()
        .zip(s.treebank.trees)
        .map(|(words, gold)| TestItem { words, gold })
        .collect())
}

/// Everything learned from one training set.
pub struct Model<T> {
    pub lexicon: LearnedLexicon<T>,
    pub grammar: CfGrammar,
    pub parser: TParser,
    pub tsg: Tsg,
    pub passes: usize,
}

impl<T: Ratio> Model<T> {
    /// Learns from a word-bearing training set.
    pub fn train(train: &TreeBank, cfg: &LearnerConfig<T>) -> Result<Model<T>> {
        let stripped = strip_words(train)?.treebank;
        let outcome = learn(&stripped, cfg)?;
        Ok(Model::from_parts(
            outcome.lexicon,
            extract_cfg(&stripped),
            outcome.passes,
        ))
    }

    pub fn from_parts(lexicon: LearnedLexicon<T>, grammar: CfGrammar, passes: usize) -> Model<T> {
        let tsg = build_tsg(&lexicon).with_start(grammar.start);
        Model {
            parser: TParser::new(&grammar),
            lexicon,
            grammar,
            tsg,
            passes,
        }
    }

    pub fn forest(&self, kind: ParserKind, lattice: &[Vec<Symbol>], trust: Trust) -> ParseForest {
        match kind {
            ParserKind::Plain => extract_forest(&self.parser.parse(lattice, None)),
            ParserKind::Combined => parse_combined(lattice, &self.tsg, &self.parser, trust).forest,
        }
    }
}

/// Scores every test item of length at least `min_len` with `kind`. Results
/// come back in test order whatever `jobs` is.
pub fn evaluate<T: Ratio>(
    model: &Model<T>,
    kind: ParserKind,
    items: &[TestItem],
    lexicon: &PosLexicon,
    min_len: usize,
    trust: Trust,
    jobs: usize,
) -> Result<Vec<SentenceResult>> {
    let trusted;
    let (model_tsg, trust) = match trust {
        Trust::All => {
            trusted = model.tsg.clone().trust_all();
            (&trusted, Trust::Sure)
        }
        Trust::Sure => (&model.tsg, Trust::Sure),
    };
    let run = |item: &TestItem| -> Result<SentenceResult> {
        let lattice = lexicon.lattice(&item.words);
        let t0 = Instant::now();
        let forest = match kind {
            ParserKind::Plain => extract_forest(&model.parser.parse(&lattice, None)),
            ParserKind::Combined => {
                parse_combined(&lattice, model_tsg, &model.parser, trust).forest
            }
        };
        let seconds = t0.elapsed().as_secs_f64();
        Ok(SentenceResult {
            len: item.words.len(),
            right: contains_parse(&forest, &item.gold)?,
            any: !forest.is_empty(),
            active: count_active_nodes(&forest),
            seconds,
        })
    };
    let chosen: Vec<&TestItem> = items.iter().filter(|i| i.words.len() >= min_len).collect();
    if jobs <= 1 {
        chosen.into_iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Input(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| chosen.into_par_iter().map(run).collect())
    }
}

/// Per-sentence `combined / plain` active-node ratios, over sentences the
/// plain parser parses.
pub fn active_ratios(plain: &[SentenceResult], combined: &[SentenceResult]) -> Vec<f64> {
    plain
        .iter()
        .zip(combined)
        .filter(|(p, _)| p.active > 0)
        .map(|(p, c)| c.active as f64 / p.active as f64)
        .collect()
}

pub fn mean_ratio(ratios: &[f64]) -> f64 {
    if ratios.is_empty() {
        1.0
    } else {
        mean(ratios)
    }
}

/// One run of the protocol on one split.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub entries: usize,
    pub plain: Metrics,
    pub combined: Metrics,
    pub mean_active_ratio: f64,
}

/// Trains on a seeded split and scores both parsers. Test words get every tag
/// the whole corpus gives them.
pub fn run_split<T: Ratio>(
    corpus: &TreeBank,
    all_tags: &PosLexicon,
    s: &SplitSpec,
    cfg: &LearnerConfig<T>,
    trust: Trust,
    jobs: usize,
) -> Result<(RunResult, Vec<SentenceResult>, Vec<SentenceResult>)> {
    let (train, test) = split(corpus, s)?;
    let model = Model::train(&train, cfg)?;
    let items = test_items(&test)?;
    let plain = evaluate(
        &model,
        ParserKind::Plain,
        &items,
        all_tags,
        s.min_len,
        trust,
        jobs,
    )?;
    let combined = evaluate(
        &model,
        ParserKind::Combined,
        &items,
        all_tags,
        s.min_len,
        trust,
        jobs,
    )?;
    let result = RunResult {
        run: 0,
        seed: s.seed,
        entries: model.lexicon.len(),
        plain: Metrics::from_results(&plain),
        combined: Metrics::from_results(&combined),
        mean_active_ratio: mean_ratio(&active_ratios(&plain, &combined)),
    };
    Ok((result, plain, combined))
}

/// Seed of run `k` in a series started from `seed`.
pub fn run_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(k as u64)
}

pub const METRICS_HEADER: &str =
    "run,seed,parser,sentences,entries,right_pct,any_pct,precision_pct,precision_defined,mean_active,std_active,mean_active_ratio";

/// Metrics CSV, two rows per run. Timing is left out so the file is
/// reproducible; see [`timing_csv`].
pub fn metrics_csv(runs: &[RunResult]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for r in runs {
        for (kind, m) in [
            (ParserKind::Plain, &r.plain),
            (ParserKind::Combined, &r.combined),
        ] {
            let ratio = if kind == ParserKind::Plain {
                1.0
            } else {
                r.mean_active_ratio
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:.4},{:.4},{:.4},{},{:.4},{:.4},{:.4}",
                r.run,
                r.seed,
                kind.name(),
                m.sentences,
                r.entries,
                m.right_pct,
                m.any_pct,
                m.precision_pct,
                m.precision_defined,
                m.mean_active,
                m.std_active,
                ratio
            );
        }
    }
    out
}

pub fn timing_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("run,seed,parser,mean_seconds\n");
    for r in runs {
        for (kind, m) in [
            (ParserKind::Plain, &r.plain),
            (ParserKind::Combined, &r.combined),
        ] {
            let _ = writeln!(
                out,
                "{},{},{},{:.9}",
                r.run,
                r.seed,
                kind.name(),
                m.mean_seconds
            );
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub size: usize,
    pub entries: usize,
    pub plain_precision: f64,
    pub combined_precision: f64,
    pub combined_any: f64,
    pub mean_active_ratio: f64,
}

/// Learns on the first `size` trees of a seeded shuffle of the training pool
/// for every size and scores against one fixed test set.
pub fn learning_curve<T: Ratio>(
    corpus: &TreeBank,
    all_tags: &PosLexicon,
    sizes: &[usize],
    cfg: &LearnerConfig<T>,
    s: &SplitSpec,
    jobs: usize,
) -> Result<Vec<CurvePoint>> {
    let (pool, test) = split(corpus, s)?;
    let items = test_items(&test)?;
    let mut out = Vec::new();
    for &size in sizes {
        if size > pool.len() {
            return Err(Error::InfeasibleSplit(format!(
                "curve size {size} exceeds the training pool of {}",
                pool.len()
            )));
        }
        let idx: Vec<usize> = (0..size).collect();
        let train = pool.subset(&idx);
        let model = if size == 0 {
            let stripped = strip_words(&pool)?.treebank;
            Model::from_parts(
                LearnedLexicon::empty(cfg.clone()),
                extract_cfg(&stripped),
                0,
            )
        } else {
            let stripped = strip_words(&train)?.treebank;
            let outcome = learn(&stripped, cfg)?;
            let full = strip_words(&pool)?.treebank;
            Model::from_parts(outcome.lexicon, extract_cfg(&full), outcome.passes)
        };
        let plain = evaluate(
            &model,
            ParserKind::Plain,
            &items,
            all_tags,
            s.min_len,
            Trust::Sure,
            jobs,
        )?;
        let combined = evaluate(
            &model,
            ParserKind::Combined,
            &items,
            all_tags,
            s.min_len,
            Trust::Sure,
            jobs,
        )?;
        let (pm, cm) = (
            Metrics::from_results(&plain),
            Metrics::from_results(&combined),
        );
        out.push(CurvePoint {
            size,
            entries: model.lexicon.len(),
            plain_precision: pm.precision_pct,
            combined_precision: cm.precision_pct,
            combined_any: cm.any_pct,
            mean_active_ratio: mean_ratio(&active_ratios(&plain, &combined)),
        });
    }
    Ok(out)
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from(
        "size,entries,plain_precision,combined_precision,combined_any,mean_active_ratio\n",
    );
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4}",
            p.size,
            p.entries,
            p.plain_precision,
            p.combined_precision,
            p.combined_any,
            p.mean_active_ratio
        );
    }
    out
}

/// Knobs of the synthetic corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorpusSpec {
    pub trees: usize,
    pub seed: u64,
    /// Probability of the frequent travel-request templates; the rest of the
    /// corpus comes from a looser clause grammar.
    pub template_rate: f64,
    /// Probability of a time phrase `adv adj` that is bracketed as a
    /// constituent four times out of five.
    pub inject_rate: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            trees: 1000,
            seed: 1,
            template_rate: 0.9,
            inject_rate: 0.0,
        }
    }
}

/// Vocabulary per tag. Several words carry more than one tag, so test
/// sentences become tag lattices.
const WORDS: &[(&str, &[&str])] = &[
    ("per", &["ik", "wij", "jij", "die"]),
    ("v", &["wil", "moet", "ga", "reis", "kom"]),
    ("infv", &["vertrekken", "reizen", "aankomen", "gaan"]),
    ("p", &["van", "naar", "via", "om", "in", "tot"]),
    (
        "name",
        &[
            "amsterdam",
            "utrecht",
            "nijmegen",
            "delft",
            "leiden",
            "centrum",
        ],
    ),
    ("det", &["de", "een", "die"]),
    (
        "n",
        &[
            "trein", "reis", "morgen", "avond", "uur", "centrum", "reizen",
        ],
    ),
    ("adj", &["vroeg", "laat", "snelle", "directe"]),
    ("adv", &["morgen", "vandaag", "liefst", "graag", "laat"]),
    ("num", &["twee", "drie", "een", "tien"]),
    ("punct", &[".", "?"]),
];

struct Gen {
    rng: ChaCha8Rng,
    spec: CorpusSpec,
}

impl Gen {
    fn word(&mut self, tag: &str) -> Tree {
        let list = WORDS.iter().find(|(t, _)| *t == tag).expect("known tag").1;
        let w = list[self.rng.gen_range(0..list.len())];
        Tree::branch(tag, [Tree::leaf(w)])
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p.clamp(0.0, 1.0))
    }

    fn np(&mut self, depth: usize) -> Tree {
        let r: f64 = self.rng.gen();
        let base = if r < 0.35 {
            Tree::branch("np", [self.word("name")])
        } else if r < 0.6 {
            Tree::branch("np", [self.word("det"), self.word("n")])
        } else if r < 0.75 {
            Tree::branch("np", [self.word("det"), self.word("adj"), self.word("n")])
        } else if r < 0.83 {
            Tree::branch("np", [self.word("n")])
        } else if r < 0.9 {
            Tree::branch("np", [self.word("det")])
        } else {
            Tree::branch("np", [self.word("num"), self.word("n")])
        };
        if r >= 0.35 && depth > 0 && self.chance(0.2) {
            Tree::branch("np", [base, self.mp(depth - 1)])
        } else {
            base
        }
    }

    fn mp(&mut self, depth: usize) -> Tree {
        Tree::branch("mp", [self.word("p"), self.np(depth)])
    }

    fn time(&mut self) -> Tree {
        Tree::branch("tp", [self.word("adv"), self.word("adj")])
    }

    fn place(&mut self) -> Tree {
        Tree::branch(
            "mp",
            [self.word("p"), Tree::branch("np", [self.word("name")])],
        )
    }

    /// `per v` followed by four to six place phrases, sometimes an object
    /// before them and an infinitive after.
    fn template(&mut self) -> Tree {
        let mut vp: Vec<Tree> = vec![self.word("v")];
        if self.chance(0.4) {
            vp.push(Tree::branch("np", [self.word("det"), self.word("n")]));
        }
        let places = self.rng.gen_range(4..=6);
        for _ in 0..places {
            vp.push(self.place());
        }
        if self.chance(0.3) {
            vp.push(Tree::branch("infp", [self.word("infv")]));
        }
        Tree::branch("S", [self.word("per"), Tree::branch("vp", vp)])
    }

    fn clause(&mut self) -> Tree {
        let subject = if self.chance(0.7) {
            self.word("per")
        } else {
            self.np(1)
        };
        let v = self.word("v");
        let r: f64 = self.rng.gen();
        let vp = if r < 0.25 {
            Tree::branch("vp", [v, self.np(1)])
        } else if r < 0.45 {
            Tree::branch("vp", [v, self.np(1), self.mp(1)])
        } else if r < 0.6 {
            Tree::branch("vp", [v, self.mp(1)])
        } else if r < 0.7 {
            Tree::branch("vp", [v, self.np(0), self.np(0)])
        } else if r < 0.8 {
            Tree::branch(
                "vp",
                [v, self.mp(1), Tree::branch("infp", [self.word("infv")])],
            )
        } else if r < 0.9 {
            let inner = Tree::branch("vp", [v, self.np(0)]);
            Tree::branch("vp", [inner, self.mp(1)])
        } else {
            Tree::branch("vp", [v])
        };
        if self.chance(0.15) {
            Tree::branch("S", [subject, vp, self.mp(0)])
        } else {
            Tree::branch("S", [subject, vp])
        }
    }

    /// Adds a time phrase: bracketed `(tp adv adj)` four times in five,
    /// otherwise `adv` stands alone before an adjective-initial np.
    fn with_time(&mut self, t: Tree) -> Tree {
        let kids: Vec<Tree> = t
            .children(0)
            .iter()
            .map(|&c| t.subtree(c).expect("child"))
            .collect();
        let extra = if self.chance(0.8) {
            vec![self.time()]
        } else {
            vec![
                Tree::branch("advp", [self.word("adv")]),
                Tree::branch("np", [self.word("adj"), self.word("n")]),
            ]
        };
        let mut all = kids;
        all.extend(extra);
        Tree::branch(t.label(0), all)
    }

    fn tree(&mut self) -> Tree {
        let t = if self.chance(self.spec.template_rate) {
            self.template()
        } else {
            self.clause()
        };
        let t = if self.spec.inject_rate > 0.0 && self.chance(self.spec.inject_rate) {
            self.with_time(t)
        } else {
            t
        };
        let mut kids: Vec<Tree> = t
            .children(0)
            .iter()
            .map(|&c| t.subtree(c).expect("child"))
            .collect();
        kids.push(self.word("punct"));
        Tree::branch(t.label(0), kids)
    }
}

/// A seeded synthetic tree-bank with words.
pub fn gen_corpus(spec: &CorpusSpec) -> TreeBank {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        spec: *spec,
    };
    let trees: Vec<Tree> = (0..spec.trees).map(|_| g.tree()).collect();
    TreeBank {
        trees,
        start: Symbol::new("S"),
    }
}
