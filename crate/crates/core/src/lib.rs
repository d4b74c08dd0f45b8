//! Corpus analysis for Go game records: extract per-move pattern summaries
//! and infer player strength and playing style from pattern vectors.
//!
//! The pipeline runs in stages: SGF parsing ([`sgf`]), board replay
//! ([`board`]), per-move pattern features ([`pattern`]), normalized pattern
//! vectors ([`vectors`]), then the analytic layer — PCA and correlations
//! ([`stats`]), output-vector approximators ([`classifiers`]) and the
//! sociomap layout ([`sociomap`]). The [`pipeline`] module wires whole
//! studies together behind the CLI, and [`synth`] generates the synthetic
//! corpora the test suite runs against.

pub mod board;
pub mod classifiers;
pub mod config;
pub mod pattern;
pub mod pipeline;
pub mod sgf;
pub mod sociomap;
pub mod stats;
pub mod synth;
pub mod vectors;
