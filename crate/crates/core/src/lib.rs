//! Benchmark harness for LLM-based sequential recommendation.
//!
//! The pipeline runs `dataset` → `prompt` → `adapters` → `extraction` →
//! `metrics` → `report`, orchestrated by `runner`.

pub mod adapters;
pub mod dataset;
pub mod extraction;
pub mod metrics;
pub mod prompt;
pub mod report;
pub mod runner;
