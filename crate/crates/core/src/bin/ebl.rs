//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 input format error, 3 internal
//! invariant violation.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_rational::Rational64;

use ebl_core::cfg_parser::{extract_forest, lattice_from_tags, TParser};
use ebl_core::combiner::parse_combined;
use ebl_core::config::{RatioText, RunConfig, Settings};
use ebl_core::dop::{
    fragment_table, grammar_size, mark_for_dop, write_fragment_table, NodeMarking,
};
use ebl_core::eval::{
    curve_csv, gen_corpus, learning_curve, metrics_csv, run_seed, run_split, timing_csv,
    CorpusSpec, SplitSpec,
};
use ebl_core::learner::{learn, read_lexicon, write_lexicon, LearnedLexicon};
use ebl_core::symbol::Symbol;
use ebl_core::treebank::{
    extract_cfg, read_treebank, strip_words, write_treebank, CfGrammar, PosLexicon, TreeBank,
};
use ebl_core::tsg_parser::{build_tsg, partial_parse};
use ebl_core::{Error, Ratio};

#[derive(Parser)]
#[command(
    name = "ebl",
    version,
    about = "Learn partial parsers from tree-banks and use them to prune parsing"
)]
struct Cli {
    /// TOML file with default settings (keys are the long flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for sentence-level evaluation [default: 1].
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Progress messages on standard error; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Use exact rational thresholds instead of f64.
    #[arg(long, global = true)]
    exact: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a lexicon of almost-always-constituent frontiers.
    ///
    /// Prints the number of entries and tabulate/mark rounds on standard
    /// output.
    Learn {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        learner: LearnerArgs,
        /// Lexicon output file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the reduced tree-bank here.
        #[arg(long)]
        residual_out: Option<PathBuf>,
    },
    /// Parse one pos-tag sequence and dump the packed forest.
    ///
    /// Forest lines are `start end label flag count`, where flag is `root`
    /// or `-` and count is the number of packed backpointers.
    Parse {
        /// Lexicon written by `learn`.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// `from-corpus` (needs --corpus) or a rule file with `%start S` and
        /// `lhs -> rhs` lines.
        #[arg(long, default_value = "from-corpus")]
        grammar: String,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Space-separated pos-tags.
        #[arg(long, conflicts_with = "words")]
        input: Option<String>,
        /// Space-separated words, tagged with every tag the corpus gives them.
        #[arg(long)]
        words: Option<String>,
        /// `combined` or `plain`.
        #[arg(long, default_value = "combined")]
        parser: String,
        /// Which partial items constrain the chart: `sure` or `all`.
        #[arg(long)]
        trust: Option<String>,
        /// Also dump the partial chart before the forest.
        #[arg(long)]
        show_partial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the plain and the combined parser over seeded splits.
    ///
    /// Metrics CSV columns: run, seed, parser (t-parser or combined),
    /// sentences, entries (lexicon size), right_pct (gold parse in forest),
    /// any_pct (forest non-empty), precision_pct (right/any, 0 when any is
    /// 0), precision_defined, mean_active and std_active (forest items per
    /// sentence, sample std), mean_active_ratio (combined/t-parser per
    /// sentence, averaged; 1 for the t-parser rows). Timing CSV columns:
    /// run, seed, parser, mean_seconds. Curve CSV columns: size, entries,
    /// plain_precision, combined_precision, combined_any, mean_active_ratio.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        learner: LearnerArgs,
        /// Number of independent splits [default: 1].
        #[arg(long)]
        splits: Option<usize>,
        /// Seed of the first split; split k uses seed + k [default: 1].
        #[arg(long)]
        seed: Option<u64>,
        /// Training trees per split [default: nine tenths].
        #[arg(long)]
        train_size: Option<usize>,
        /// Test trees per split [default: one tenth].
        #[arg(long)]
        test_size: Option<usize>,
        /// Shorter test sentences are not scored [default: 2].
        #[arg(long)]
        min_len: Option<usize>,
        /// `sure` or `all`.
        #[arg(long)]
        trust: Option<String>,
        /// Metrics CSV (standard output when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-parser mean parse time CSV.
        #[arg(long)]
        timing_out: Option<PathBuf>,
        /// Comma-separated training sizes for a learning curve on the first split.
        #[arg(long, value_delimiter = ',')]
        curve: Vec<usize>,
        #[arg(long)]
        curve_out: Option<PathBuf>,
    },
    /// Count DOP fragments with and without the learned cut-node marking.
    DopProject {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        learner: LearnerArgs,
        /// Lexicon learned from this corpus; learned on the fly when absent.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Maximum fragment depth [default: 4].
        #[arg(long)]
        depth: Option<usize>,
        /// Maximum substitution sites [default: 2].
        #[arg(long)]
        sites: Option<usize>,
        /// Maximum frontier words [default: 7].
        #[arg(long)]
        words: Option<usize>,
        /// Maximum run of adjacent frontier words [default: 2].
        #[arg(long)]
        consecutive: Option<usize>,
        /// Fragment table (`count root fragment`) of the marked projection.
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Write a synthetic travel-request corpus.
    GenCorpus {
        #[arg(long, default_value_t = 1000)]
        trees: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Share of sentences from the frequent templates.
        #[arg(long, default_value_t = CorpusSpec::default().template_rate)]
        template_rate: f64,
        /// Share of sentences with an injected, mostly-bracketed time phrase.
        #[arg(long, default_value_t = 0.0)]
        inject_rate: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CorpusArgs {
    /// Bracketed tree-bank, one tree per record.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus leaves are pos-tags, not words.
    #[arg(long)]
    tag_leaves: bool,
}

#[derive(Args)]
struct LearnerArgs {
    /// First θ [default: 1].
    #[arg(long)]
    theta_start: Option<String>,
    /// Lowest θ [default: 1].
    #[arg(long)]
    theta_floor: Option<String>,
    /// θ decrement [default: 1/20].
    #[arg(long)]
    theta_step: Option<String>,
    /// Absolute frequency floor [default: 10].
    #[arg(long)]
    tau_abs: Option<u64>,
    /// Frequency floor as a share of the corpus [default: 3/1000].
    #[arg(long)]
    tau_frac: Option<String>,
    /// Only try the all-wildcard context.
    #[arg(long)]
    no_retreat: bool,
}

impl LearnerArgs {
    fn settings(&self) -> Settings {
        let r = |s: &Option<String>| s.as_deref().map(RatioText::from);
        Settings {
            theta_start: r(&self.theta_start),
            theta_floor: r(&self.theta_floor),
            theta_step: r(&self.theta_step),
            tau_frac: r(&self.tau_frac),
            tau_abs: self.tau_abs,
            retreat: self.no_retreat.then_some(false),
            ..Settings::default()
        }
    }
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            kind: "usage",
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let (code, kind) = match &e {
            Error::InfeasibleSplit(_) => (1, "usage"),
            Error::Invariant(_) | Error::Provenance(_) | Error::UnknownAddress(_) => {
                (3, "invariant violated")
            }
            _ => (2, "input format"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ebl: error ({}): {}", f.kind, f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let global = Settings {
        jobs: cli.jobs,
        verbose: (cli.verbose > 0).then_some(cli.verbose),
        ..Settings::default()
    };
    let exact = cli.exact;
    match cli.command {
        Command::Learn {
            corpus,
            learner,
            out,
            residual_out,
        } => {
            let flags = Settings {
                corpus: corpus.corpus.clone(),
                out,
                ..learner.settings()
            }
            .over(global);
            let cfg = resolve(flags, file)?;
            if exact {
                cmd_learn::<Rational64>(&cfg, corpus.tag_leaves, residual_out.as_deref())
            } else {
                cmd_learn::<f64>(&cfg, corpus.tag_leaves, residual_out.as_deref())
            }
        }
        Command::Parse {
            lexicon,
            grammar,
            corpus,
            input,
            words,
            parser,
            trust,
            show_partial,
            out,
        } => {
            let flags = Settings {
                corpus: corpus.corpus.clone(),
                lexicon,
                out,
                trust,
                ..global
            };
            let cfg = resolve(flags, file)?;
            let req = ParseRequest {
                grammar,
                tag_leaves: corpus.tag_leaves,
                input,
                words,
                parser,
                show_partial,
            };
            if exact {
                cmd_parse::<Rational64>(&cfg, &req)
            } else {
                cmd_parse::<f64>(&cfg, &req)
            }
        }
        Command::Eval {
            corpus,
            learner,
            splits,
            seed,
            train_size,
            test_size,
            min_len,
            trust,
            out,
            timing_out,
            curve,
            curve_out,
        } => {
            let flags = Settings {
                corpus: corpus.corpus.clone(),
                splits,
                seed,
                train_size,
                test_size,
                min_len,
                trust,
                out,
                timing_out,
                ..learner.settings()
            }
            .over(global);
            let cfg = resolve(flags, file)?;
            if corpus.tag_leaves {
                return Err(Failure::usage("eval needs a word-bearing corpus"));
            }
            if exact {
                cmd_eval::<Rational64>(&cfg, &curve, curve_out.as_deref())
            } else {
                cmd_eval::<f64>(&cfg, &curve, curve_out.as_deref())
            }
        }
        Command::DopProject {
            corpus,
            learner,
            lexicon,
            depth,
            sites,
            words,
            consecutive,
            table_out,
        } => {
            let flags = Settings {
                corpus: corpus.corpus.clone(),
                lexicon,
                depth,
                sites,
                words,
                consecutive,
                table_out,
                ..learner.settings()
            }
            .over(global);
            let cfg = resolve(flags, file)?;
            if exact {
                cmd_dop::<Rational64>(&cfg, corpus.tag_leaves)
            } else {
                cmd_dop::<f64>(&cfg, corpus.tag_leaves)
            }
        }
        Command::GenCorpus {
            trees,
            seed,
            template_rate,
            inject_rate,
            out,
        } => {
            let cfg = resolve(
                Settings {
                    seed,
                    out,
                    ..global
                },
                file,
            )?;
            for (name, p) in [
                ("template-rate", template_rate),
                ("inject-rate", inject_rate),
            ] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Failure::usage(format!(
                        "{name} must lie in [0, 1], got {p}"
                    )));
                }
            }
            if trees == 0 {
                return Err(Failure::usage("trees must be at least 1"));
            }
            let tb = gen_corpus(&CorpusSpec {
                trees,
                seed: cfg.seed,
                template_rate,
                inject_rate,
            });
            emit(cfg.out.as_deref(), &write_treebank(&tb))
        }
    }
}

fn resolve(flags: Settings, file: Settings) -> std::result::Result<RunConfig, Failure> {
    RunConfig::resolve(flags, file).map_err(|e| match e {
        Error::Format { .. } => Failure::from(e),
        other => Failure::usage(other.to_string()),
    })
}

fn note(cfg: &RunConfig, msg: impl AsRef<str>) {
    if cfg.verbose > 0 {
        eprintln!("ebl: {}", msg.as_ref());
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> std::result::Result<&'a Path, Failure> {
    p.as_deref()
        .ok_or_else(|| Failure::usage(format!("--{flag} is required")))
}

fn read_text(p: &Path) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure {
        code: 2,
        kind: "input format",
        message: format!("cannot read {}: {e}", p.display()),
    })
}

/// Reads the corpus and returns it with words (when it has them) and
/// without.
fn load_corpus(
    cfg: &RunConfig,
    tag_leaves: bool,
) -> std::result::Result<(TreeBank, TreeBank), Failure> {
    let path = required(&cfg.corpus, "corpus")?;
    let tb = read_treebank(&read_text(path)?)?;
    note(
        cfg,
        format!("read {} trees from {}", tb.len(), path.display()),
    );
    if tag_leaves {
        Ok((tb.clone(), tb))
    } else {
        let stripped = strip_words(&tb)?.treebank;
        Ok((tb, stripped))
    }
}

/// Writes to a temporary file beside `path` and renames it into place, or
/// prints when there is no path.
fn emit(path: Option<&Path>, text: &str) -> Outcome {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out.write_all(text.as_bytes()).map_err(io_failure);
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_failure)?;
    tmp.write_all(text.as_bytes()).map_err(io_failure)?;
    tmp.as_file().sync_all().map_err(io_failure)?;
    tmp.persist(path).map_err(|e| io_failure(e.error))?;
    Ok(())
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        kind: "io",
        message: e.to_string(),
    }
}

fn cmd_learn<T: Ratio>(cfg: &RunConfig, tag_leaves: bool, residual_out: Option<&Path>) -> Outcome {
    let out = required(&cfg.out, "out")?;
    let (_, stripped) = load_corpus(cfg, tag_leaves)?;
    let outcome = learn(&stripped, &cfg.learner::<T>()?)?;
    emit(Some(out), &write_lexicon(&outcome.lexicon))?;
    if let Some(p) = residual_out {
        emit(Some(p), &write_treebank(&outcome.residual))?;
    }
    println!("entries {}", outcome.lexicon.len());
    println!("iterations {}", outcome.passes);
    println!("tau {}", outcome.lexicon.tau);
    Ok(())
}

struct ParseRequest {
    grammar: String,
    tag_leaves: bool,
    input: Option<String>,
    words: Option<String>,
    parser: String,
    show_partial: bool,
}

fn cmd_parse<T: Ratio>(cfg: &RunConfig, req: &ParseRequest) -> Outcome {
    let corpus = if cfg.corpus.is_some() {
        Some(load_corpus(cfg, req.tag_leaves)?)
    } else {
        None
    };
    let grammar = if req.grammar == "from-corpus" {
        match &corpus {
            Some((_, stripped)) => extract_cfg(stripped),
            None => return Err(Failure::usage("--grammar from-corpus needs --corpus")),
        }
    } else {
        CfGrammar::from_text(&read_text(Path::new(&req.grammar))?)?
    };
    let lattice = match (&req.input, &req.words) {
        (Some(tags), None) => {
            lattice_from_tags(&tags.split_whitespace().map(Symbol::new).collect::<Vec<_>>())
        }
        (None, Some(words)) => {
            let Some((tb, _)) = &corpus else {
                return Err(Failure::usage("--words needs --corpus to look up pos-tags"));
            };
            let words: Vec<Symbol> = words.split_whitespace().map(Symbol::new).collect();
            let lattice = PosLexicon::from_treebank(tb)?.lattice(&words);
            if let Some(i) = lattice.iter().position(|tags| tags.is_empty()) {
                return Err(Failure {
                    code: 2,
                    kind: "input format",
                    message: format!("word `{}` does not occur in the corpus", words[i]),
                });
            }
            lattice
        }
        _ => return Err(Failure::usage("give exactly one of --input and --words")),
    };
    if lattice.is_empty() {
        return Err(Failure::usage("empty input"));
    }
    let parser = TParser::new(&grammar);
    let text = match req.parser.as_str() {
        "plain" => extract_forest(&parser.parse(&lattice, None)).dump(),
        "combined" => {
            let lex: LearnedLexicon<T> = match &cfg.lexicon {
                Some(p) => read_lexicon(&read_text(p)?)?,
                None => return Err(Failure::usage("the combined parser needs --lexicon")),
            };
            let tsg = build_tsg(&lex).with_start(grammar.start);
            let cp = parse_combined(&lattice, &tsg, &parser, cfg.trust);
            let mut text = String::new();
            if req.show_partial {
                text.push_str("# partial\n");
                text.push_str(&partial_parse(&lattice, &tsg).dump());
                text.push_str("# forest\n");
            }
            text.push_str(&cp.forest.dump());
            text
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown parser `{other}` (expected plain or combined)"
            )))
        }
    };
    emit(cfg.out.as_deref(), &text)
}

fn cmd_eval<T: Ratio>(cfg: &RunConfig, curve: &[usize], curve_out: Option<&Path>) -> Outcome {
    let (tb, _) = load_corpus(cfg, false)?;
    let tags = PosLexicon::from_treebank(&tb)?;
    let learner = cfg.learner::<T>()?;
    let spec = |seed| {
        let base = SplitSpec::proportional(tb.len(), seed);
        SplitSpec {
            seed,
            train_size: cfg.train_size.unwrap_or(base.train_size),
            test_size: cfg.test_size.unwrap_or(base.test_size),
            min_len: cfg.min_len,
        }
    };
    let mut runs = Vec::with_capacity(cfg.splits);
    for k in 0..cfg.splits {
        let seed = run_seed(cfg.seed, k);
        let (mut r, _, _) = run_split(&tb, &tags, &spec(seed), &learner, cfg.trust, cfg.jobs)?;
        r.run = k;
        note(
            cfg,
            format!(
                "run {k} seed {seed}: {} entries, ratio {:.4}",
                r.entries, r.mean_active_ratio
            ),
        );
        runs.push(r);
    }
    emit(cfg.out.as_deref(), &metrics_csv(&runs))?;
    if let Some(p) = cfg.timing_out.as_deref() {
        emit(Some(p), &timing_csv(&runs))?;
    }
    if !curve.is_empty() {
        let points = learning_curve(&tb, &tags, curve, &learner, &spec(cfg.seed), cfg.jobs)?;
        let text = curve_csv(&points);
        match curve_out {
            Some(p) => emit(Some(p), &text)?,
            None => eprint!("{text}"),
        }
    }
    Ok(())
}

fn cmd_dop<T: Ratio>(cfg: &RunConfig, tag_leaves: bool) -> Outcome {
    let (tb, stripped) = load_corpus(cfg, tag_leaves)?;
    let lex: LearnedLexicon<T> = match &cfg.lexicon {
        Some(p) => read_lexicon(&read_text(p)?)?,
        None => learn(&stripped, &cfg.learner::<T>()?)?.lexicon,
    };
    let marking = mark_for_dop(&tb, &lex)?;
    let all = NodeMarking::all(&tb);
    let lim = cfg.limits;
    let marked = grammar_size(&tb, &marking, &lim);
    let full = grammar_size(&tb, &all, &lim);
    if marked.occurrences > full.occurrences {
        return Err(Error::Invariant(
            "marked projection larger than the all-marked projection".into(),
        )
        .into());
    }
    println!(
        "limits depth={} sites={} words={} consecutive={}",
        lim.depth, lim.sites, lim.words, lim.consecutive
    );
    println!("entries {}", lex.len());
    println!(
        "marked_nodes {} of {}",
        marking.marked_count(),
        all.marked_count()
    );
    println!(
        "fragments {} all_marked {}",
        marked.fragments, full.fragments
    );
    println!("fragment_nodes {} all_marked {}", marked.nodes, full.nodes);
    println!(
        "occurrences {} all_marked {}",
        marked.occurrences, full.occurrences
    );
    if let Some(p) = cfg.table_out.as_deref() {
        emit(
            Some(p),
            &write_fragment_table(&fragment_table(&tb, &marking, &lim)),
        )?;
    }
    Ok(())
}
