//! Benchmark generation and evaluation for code-migration agents.
//!
//! The pipeline takes a set of migrated services (their pre-migration
//! reference plus the commits that carried the migration) and a set of
//! Knowledge Base documents describing narrow migration sub-tasks. Every
//! diff hunk is mapped onto the KB documents whose matchers fire on it;
//! hunks that map nowhere are treated as idiosyncratic service changes and
//! dropped. What remains is a benchmark suite of
//! `(pre-migration ref, kb, hunks)` instances that agent patches are scored
//! against.
//!
//! Module map:
//!
//! - [`kb`]: KB document format, parsing, linting and set loading.
//! - [`diff`]: unified diffs, hunks, line edits, snapshot diffing, commit loading.
//! - [`synth`]: pattern synthesis from natural-language descriptions.
//! - [`matcher`]: hunk to KB mapping.
//! - [`benchgen`]: suite assembly, serialization, deltas and KB feedback.
//! - [`evaluator`]: line-edit and per-KB precision/recall for agent patches.

pub mod benchgen;
pub mod diff;
pub mod digest;
pub mod evaluator;
pub mod glob;
pub mod kb;
pub mod matcher;
pub mod synth;

pub use benchgen::{BenchmarkInstance, BenchmarkSuite, KbFeedback, SuiteDelta};
pub use diff::{CommitDiff, FileDiff, Hunk, HunkId, LineEdit, ServiceRecord};
pub use evaluator::{EvalReport, EditMatching};
pub use kb::{KbDoc, KbSet};
pub use matcher::MappingResult;
pub use synth::Synthesizer;
