//! Static-analysis and machine-learning toolkit for phishing kits.
//!
//! The pipeline has three phases: deterministic detection of evasion and
//! obfuscation techniques (with evidence), feature extraction and labeling,
//! and supervised classification with five classic binary classifiers.

pub mod authors;
pub mod evaluation;
pub mod evasion;
pub mod features;
pub mod ingest;
pub mod lexer;
pub mod ml;
pub mod obfuscation;
pub mod pipeline;
pub mod synth;

pub use evasion::{EvasionReport, EvasionTechnique, Evidence};
pub use features::{FeatureVector, LabeledSample, Labels, FEATURE_NAMES};
pub use ingest::{FileEntry, FileKind, IngestLimits, KitArchive};
pub use lexer::{CallSite, PhpAnalysisBundle, PhpToken, TokenKind};
pub use obfuscation::{ObfuscationReport, ObfuscationTechnique};

/// Schema version stamped into every JSON artifact this toolkit emits.
pub const SCHEMA_VERSION: u32 = 1;
