//! Learning partial parsers from tree-banks.
//!
//! The learner finds frontiers that are almost always constituents and
//! reduces them out of the tree-bank. The learned subtrees form a tree
//! substitution grammar whose partial parses constrain a CFG chart parser,
//! and whose boundaries prune the fragments a DOP model projects.

pub mod cfg_parser;
pub mod combiner;
pub mod config;
pub mod dop;
pub mod error;
pub mod eval;
pub mod learner;
pub mod scalar;
pub mod symbol;
pub mod treebank;
pub mod tsg_parser;

pub use error::{Error, Result};
pub use scalar::Ratio;
pub use symbol::Symbol;
pub use treebank::{Tree, TreeBank};

/// Lexicon with floating-point thresholds.
pub type Lexicon = learner::LearnedLexicon<f64>;
/// Lexicon with exact rational thresholds.
pub type ExactLexicon = learner::LearnedLexicon<num_rational::Rational64>;
pub type Config = learner::LearnerConfig<f64>;
pub type ExactConfig = learner::LearnerConfig<num_rational::Rational64>;
